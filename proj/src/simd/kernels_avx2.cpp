// Compiled with -mavx2 -mfma -ffp-contract=off; only reached through the
// dispatcher after a CPU feature check.

#include <immintrin.h>

#include <bit>
#include <cmath>

#include "nhp/simd/kernels.hpp"

namespace nhp::simd::detail {
namespace {

constexpr std::size_t kLanes = 4;

void axpy(std::span<double> out, double alpha, std::span<const double> x) {
  const std::size_t n = out.size();
  const std::size_t n4 = n - n % kLanes;
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t l = 0;
  for (; l < n4; l += kLanes) {
    const __m256d prod = _mm256_mul_pd(a, _mm256_loadu_pd(x.data() + l));
    _mm256_storeu_pd(out.data() + l, _mm256_add_pd(_mm256_loadu_pd(out.data() + l), prod));
  }
  for (; l < n; ++l) out[l] += alpha * x[l];
}

void diff_axpy(std::span<double> out, double alpha, std::span<const double> x, double x0) {
  const std::size_t n = out.size();
  const std::size_t n4 = n - n % kLanes;
  const __m256d a = _mm256_set1_pd(alpha);
  const __m256d ref = _mm256_set1_pd(x0);
  std::size_t l = 0;
  for (; l < n4; l += kLanes) {
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(x.data() + l), ref);
    const __m256d prod = _mm256_mul_pd(a, diff);
    _mm256_storeu_pd(out.data() + l, _mm256_add_pd(_mm256_loadu_pd(out.data() + l), prod));
  }
  for (; l < n; ++l) out[l] += alpha * (x[l] - x0);
}

void abs_diff_axpy(std::span<double> out, double alpha, std::span<const double> x, double x0) {
  const std::size_t n = out.size();
  const std::size_t n4 = n - n % kLanes;
  const __m256d a = _mm256_set1_pd(alpha);
  const __m256d ref = _mm256_set1_pd(x0);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  std::size_t l = 0;
  for (; l < n4; l += kLanes) {
    const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(x.data() + l), ref);
    const __m256d mag = _mm256_andnot_pd(sign_mask, diff);
    const __m256d prod = _mm256_mul_pd(a, mag);
    _mm256_storeu_pd(out.data() + l, _mm256_add_pd(_mm256_loadu_pd(out.data() + l), prod));
  }
  for (; l < n; ++l) out[l] += alpha * std::fabs(x[l] - x0);
}

void outer_accumulate(std::span<double> out, double scale, std::span<const double> rows,
                      std::span<const double> cols) {
  const std::size_t ncols = cols.size();
  const std::size_t n4 = ncols - ncols % kLanes;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double w = scale * rows[r];
    const __m256d wv = _mm256_set1_pd(w);
    double* dst = out.data() + r * ncols;
    std::size_t c = 0;
    for (; c < n4; c += kLanes) {
      const __m256d prod = _mm256_mul_pd(wv, _mm256_loadu_pd(cols.data() + c));
      _mm256_storeu_pd(dst + c, _mm256_add_pd(_mm256_loadu_pd(dst + c), prod));
    }
    for (; c < ncols; ++c) dst[c] += w * cols[c];
  }
}

inline __m256d lane_distance(const TriggerGeometry& geom, std::size_t l, __m256d px, __m256d py) {
  const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(geom.xs.data() + l), px);
  const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(geom.ys.data() + l), py);
  return _mm256_sqrt_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)));
}

void trigger_accumulate(std::span<double> out, std::span<const double> numer,
                        const TriggerGeometry& geom, double offset, double time_denom,
                        bool clamp) {
  const std::size_t n = out.size();
  const std::size_t n4 = n - n % kLanes;
  const __m256d px = _mm256_set1_pd(geom.px);
  const __m256d py = _mm256_set1_pd(geom.py);
  const __m256d off = _mm256_set1_pd(offset);
  const __m256d td = _mm256_set1_pd(time_denom);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t l = 0;
  for (; l < n4; l += kLanes) {
    const __m256d s = _mm256_add_pd(lane_distance(geom, l, px, py), off);
    const __m256d denom = _mm256_mul_pd(_mm256_mul_pd(td, s), s);
    __m256d k = _mm256_div_pd(_mm256_loadu_pd(numer.data() + l), denom);
    if (clamp) k = _mm256_max_pd(k, zero);
    _mm256_storeu_pd(out.data() + l, _mm256_add_pd(_mm256_loadu_pd(out.data() + l), k));
  }
  for (; l < n; ++l) {
    const double dx = geom.xs[l] - geom.px;
    const double dy = geom.ys[l] - geom.py;
    const double s = std::sqrt(dx * dx + dy * dy) + offset;
    double k = numer[l] / (time_denom * s * s);
    if (clamp && !(k > 0.0)) k = 0.0;
    out[l] += k;
  }
}

void distance_accumulate(std::span<double> out, const TriggerGeometry& geom, double weight) {
  const std::size_t n = out.size();
  const std::size_t n4 = n - n % kLanes;
  const __m256d px = _mm256_set1_pd(geom.px);
  const __m256d py = _mm256_set1_pd(geom.py);
  const __m256d w = _mm256_set1_pd(weight);
  std::size_t l = 0;
  for (; l < n4; l += kLanes) {
    const __m256d prod = _mm256_mul_pd(w, lane_distance(geom, l, px, py));
    _mm256_storeu_pd(out.data() + l, _mm256_add_pd(_mm256_loadu_pd(out.data() + l), prod));
  }
  for (; l < n; ++l) {
    const double dx = geom.xs[l] - geom.px;
    const double dy = geom.ys[l] - geom.py;
    out[l] += weight * std::sqrt(dx * dx + dy * dy);
  }
}

std::size_t count_at_least(std::span<const double> values, double threshold) {
  const std::size_t n = values.size();
  const std::size_t n4 = n - n % kLanes;
  const __m256d t = _mm256_set1_pd(threshold);
  std::size_t count = 0;
  std::size_t l = 0;
  for (; l < n4; l += kLanes) {
    const __m256d ge = _mm256_cmp_pd(_mm256_loadu_pd(values.data() + l), t, _CMP_GE_OQ);
    count += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(_mm256_movemask_pd(ge))));
  }
  for (; l < n; ++l) count += (values[l] >= threshold) ? 1 : 0;
  return count;
}

}  // namespace

const KernelTable& avx2_table() noexcept {
  static const KernelTable table{
      &axpy, &diff_axpy, &abs_diff_axpy, &outer_accumulate, &trigger_accumulate, &distance_accumulate,
      &count_at_least,
  };
  return table;
}

}  // namespace nhp::simd::detail
