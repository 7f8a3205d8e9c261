#include <cmath>

#include "nhp/simd/kernels.hpp"

namespace nhp::simd::detail {
namespace {

void axpy(std::span<double> out, double alpha, std::span<const double> x) {
  for (std::size_t l = 0; l < out.size(); ++l) out[l] += alpha * x[l];
}

void diff_axpy(std::span<double> out, double alpha, std::span<const double> x, double x0) {
  for (std::size_t l = 0; l < out.size(); ++l) out[l] += alpha * (x[l] - x0);
}

void abs_diff_axpy(std::span<double> out, double alpha, std::span<const double> x, double x0) {
  for (std::size_t l = 0; l < out.size(); ++l) out[l] += alpha * std::fabs(x[l] - x0);
}

void outer_accumulate(std::span<double> out, double scale, std::span<const double> rows,
                      std::span<const double> cols) {
  const std::size_t ncols = cols.size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double w = scale * rows[r];
    double* dst = out.data() + r * ncols;
    for (std::size_t c = 0; c < ncols; ++c) dst[c] += w * cols[c];
  }
}

void trigger_accumulate(std::span<double> out, std::span<const double> numer,
                        const TriggerGeometry& geom, double offset, double time_denom,
                        bool clamp) {
  for (std::size_t l = 0; l < out.size(); ++l) {
    const double dx = geom.xs[l] - geom.px;
    const double dy = geom.ys[l] - geom.py;
    const double s = std::sqrt(dx * dx + dy * dy) + offset;
    double k = numer[l] / (time_denom * s * s);
    if (clamp && !(k > 0.0)) k = 0.0;
    out[l] += k;
  }
}

void distance_accumulate(std::span<double> out, const TriggerGeometry& geom, double weight) {
  for (std::size_t l = 0; l < out.size(); ++l) {
    const double dx = geom.xs[l] - geom.px;
    const double dy = geom.ys[l] - geom.py;
    out[l] += weight * std::sqrt(dx * dx + dy * dy);
  }
}

std::size_t count_at_least(std::span<const double> values, double threshold) {
  std::size_t n = 0;
  for (double v : values) n += (v >= threshold) ? 1 : 0;
  return n;
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{
      &axpy, &diff_axpy, &abs_diff_axpy, &outer_accumulate, &trigger_accumulate, &distance_accumulate,
      &count_at_least,
  };
  return table;
}

}  // namespace nhp::simd::detail
