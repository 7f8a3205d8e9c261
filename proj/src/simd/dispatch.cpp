#include <atomic>
#include <cstdlib>
#include <string>

#include "nhp/error.hpp"
#include "nhp/simd/kernels.hpp"

namespace nhp::simd {
namespace {

// -1 = automatic selection.
std::atomic<int> g_forced{-1};

bool cpu_has_avx2() noexcept {
#if defined(NHP_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() noexcept {
  if (const char* env = std::getenv("NHP_SIMD"); env != nullptr && std::string(env) == "scalar") {
    return Isa::kScalar;
  }
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

void check_same_size(std::size_t a, std::size_t b) {
  if (a != b) throw Error(ErrorKind::kDimensionMismatch, "simd kernel: span size mismatch");
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return cpu_has_avx2();
  }
  return false;
}

Isa active_isa() noexcept {
  const int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Isa>(forced);
  static const Isa detected = detect();
  return detected;
}

void force_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw Error(ErrorKind::kInvalidArgument,
                "SIMD variant '" + std::string(to_string(isa)) + "' is not available");
  }
  g_forced.store(static_cast<int>(isa), std::memory_order_relaxed);
}

void reset_isa() noexcept { g_forced.store(-1, std::memory_order_relaxed); }

const KernelTable& kernels(Isa isa) {
  if (!isa_available(isa)) {
    throw Error(ErrorKind::kInvalidArgument,
                "SIMD variant '" + std::string(to_string(isa)) + "' is not available");
  }
#if defined(NHP_HAVE_AVX2)
  if (isa == Isa::kAvx2) return detail::avx2_table();
#endif
  return detail::scalar_table();
}

void axpy(std::span<double> out, double alpha, std::span<const double> x) {
  check_same_size(out.size(), x.size());
  kernels(active_isa()).axpy(out, alpha, x);
}

void diff_axpy(std::span<double> out, double alpha, std::span<const double> x, double x0) {
  check_same_size(out.size(), x.size());
  kernels(active_isa()).diff_axpy(out, alpha, x, x0);
}

void abs_diff_axpy(std::span<double> out, double alpha, std::span<const double> x, double x0) {
  check_same_size(out.size(), x.size());
  kernels(active_isa()).abs_diff_axpy(out, alpha, x, x0);
}

void outer_accumulate(std::span<double> out, double scale, std::span<const double> rows,
                      std::span<const double> cols) {
  check_same_size(out.size(), rows.size() * cols.size());
  kernels(active_isa()).outer_accumulate(out, scale, rows, cols);
}

void trigger_accumulate(std::span<double> out, std::span<const double> numer,
                        const TriggerGeometry& geom, double offset, double time_denom,
                        bool clamp) {
  check_same_size(out.size(), numer.size());
  check_same_size(out.size(), geom.xs.size());
  check_same_size(out.size(), geom.ys.size());
  kernels(active_isa()).trigger_accumulate(out, numer, geom, offset, time_denom, clamp);
}

void distance_accumulate(std::span<double> out, const TriggerGeometry& geom, double weight) {
  check_same_size(out.size(), geom.xs.size());
  check_same_size(out.size(), geom.ys.size());
  kernels(active_isa()).distance_accumulate(out, geom, weight);
}

std::size_t count_at_least(std::span<const double> values, double threshold) {
  return kernels(active_isa()).count_at_least(values, threshold);
}

}  // namespace nhp::simd
