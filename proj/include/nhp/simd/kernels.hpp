#pragma once

// Data-parallel inner loops over grid cells.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant selected at runtime. Both variants perform the same IEEE operations
// in the same order per lane (no fused multiply-add, no reassociation), so
// their outputs are bitwise identical; the equivalence tests assert exact
// equality.

#include <cstddef>
#include <span>
#include <string_view>

namespace nhp::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa) noexcept;

/// True when the variant was compiled in and the running CPU supports it.
bool isa_available(Isa isa) noexcept;

/// Best available ISA, unless overridden by `NHP_SIMD=scalar` in the
/// environment or by force_isa().
Isa active_isa() noexcept;

/// Pins the dispatch target. Throws nhp::Error if the ISA is unavailable.
void force_isa(Isa isa);

/// Restores automatic selection.
void reset_isa() noexcept;

struct TriggerGeometry {
  std::span<const double> xs;  // cell centers, same units as px/py
  std::span<const double> ys;
  double px = 0.0;
  double py = 0.0;
};

/// Function table for one ISA. All spans of one call have equal length
/// (checked by the dispatching wrappers below, not by the table entries).
struct KernelTable {
  // out[l] += alpha * x[l]
  void (*axpy)(std::span<double> out, double alpha, std::span<const double> x);
  // out[l] += alpha * (x[l] - x0)
  void (*diff_axpy)(std::span<double> out, double alpha, std::span<const double> x, double x0);
  // out[l] += alpha * |x[l] - x0|
  void (*abs_diff_axpy)(std::span<double> out, double alpha, std::span<const double> x,
                        double x0);
  // out[r * cols.size() + c] += (scale * rows[r]) * cols[c]
  void (*outer_accumulate)(std::span<double> out, double scale, std::span<const double> rows,
                           std::span<const double> cols);
  // out[l] += numer[l] / (time_denom * (dist_l + offset) * (dist_l + offset)),
  // dist_l = sqrt((xs[l]-px)^2 + (ys[l]-py)^2); terms clamped at 0 when clamp.
  void (*trigger_accumulate)(std::span<double> out, std::span<const double> numer,
                             const TriggerGeometry& geom, double offset, double time_denom,
                             bool clamp);
  // out[l] += weight * sqrt((xs[l]-px)^2 + (ys[l]-py)^2)
  void (*distance_accumulate)(std::span<double> out, const TriggerGeometry& geom, double weight);
  // #{l : values[l] >= threshold}
  std::size_t (*count_at_least)(std::span<const double> values, double threshold);
};

const KernelTable& kernels(Isa isa);

void axpy(std::span<double> out, double alpha, std::span<const double> x);
void diff_axpy(std::span<double> out, double alpha, std::span<const double> x, double x0);
void abs_diff_axpy(std::span<double> out, double alpha, std::span<const double> x, double x0);
void outer_accumulate(std::span<double> out, double scale, std::span<const double> rows,
                      std::span<const double> cols);
void trigger_accumulate(std::span<double> out, std::span<const double> numer,
                        const TriggerGeometry& geom, double offset, double time_denom, bool clamp);
void distance_accumulate(std::span<double> out, const TriggerGeometry& geom, double weight);
std::size_t count_at_least(std::span<const double> values, double threshold);

namespace detail {
const KernelTable& scalar_table() noexcept;
#if defined(NHP_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
}  // namespace detail

}  // namespace nhp::simd
