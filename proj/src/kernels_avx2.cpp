// Compiled with -mavx2 (no FMA) so results match the scalar kernels exactly.
#include "lsm/kernels.hpp"

#include <immintrin.h>

namespace lsm::kernels {
namespace {

constexpr std::size_t kLanes = 4;

void decay(std::span<double> acc, double factor) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + kLanes <= acc.size(); i += kLanes)
    _mm256_storeu_pd(&acc[i], _mm256_mul_pd(_mm256_loadu_pd(&acc[i]), f));
  for (; i < acc.size(); ++i) acc[i] *= factor;
}

void add_difference(std::span<double> out, std::span<const double> a,
                    std::span<const double> b) {
  std::size_t i = 0;
  for (; i + kLanes <= out.size(); i += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]));
    _mm256_storeu_pd(&out[i], _mm256_add_pd(_mm256_loadu_pd(&out[i]), d));
  }
  for (; i < out.size(); ++i) out[i] += a[i] - b[i];
}

void axpy(std::span<double> y, double alpha, std::span<const double> x) {
  const __m256d s = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + kLanes <= y.size(); i += kLanes) {
    const __m256d prod = _mm256_mul_pd(s, _mm256_loadu_pd(&x[i]));
    _mm256_storeu_pd(&y[i], _mm256_add_pd(_mm256_loadu_pd(&y[i]), prod));
  }
  for (; i < y.size(); ++i) y[i] += alpha * x[i];
}

std::size_t lif_update(std::span<double> potential, std::span<double> refractory_until,
                       std::span<const double> current, double now,
                       const LifParams& p, std::span<std::uint8_t> spiked) {
  const double release = now + p.step_ms + p.refractory_ms;
  const __m256d leak = _mm256_set1_pd(p.leak_factor);
  const __m256d h = _mm256_set1_pd(p.step_ms);
  const __m256d vth = _mm256_set1_pd(p.threshold);
  const __m256d t_now = _mm256_set1_pd(now);
  const __m256d t_release = _mm256_set1_pd(release);
  const __m256d zero = _mm256_setzero_pd();

  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + kLanes <= potential.size(); i += kLanes) {
    const __m256d v0 = _mm256_loadu_pd(&potential[i]);
    const __m256d refr = _mm256_loadu_pd(&refractory_until[i]);
    const __m256d drive = _mm256_mul_pd(h, _mm256_loadu_pd(&current[i]));
    __m256d v = _mm256_add_pd(_mm256_mul_pd(v0, leak), drive);
    const __m256d clamped = _mm256_cmp_pd(t_now, refr, _CMP_LT_OQ);
    v = _mm256_blendv_pd(v, zero, _mm256_or_pd(clamped, _mm256_cmp_pd(v, zero, _CMP_LT_OQ)));
    const __m256d fire = _mm256_cmp_pd(v, vth, _CMP_GT_OQ);
    v = _mm256_blendv_pd(v, zero, fire);
    _mm256_storeu_pd(&potential[i], v);
    _mm256_storeu_pd(&refractory_until[i], _mm256_blendv_pd(refr, t_release, fire));
    const int bits = _mm256_movemask_pd(fire);
    for (std::size_t lane = 0; lane < kLanes; ++lane)
      spiked[i + lane] = static_cast<std::uint8_t>((bits >> lane) & 1);
    count += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(bits)));
  }
  for (; i < potential.size(); ++i) {
    double v = potential[i] * p.leak_factor + p.step_ms * current[i];
    if (now < refractory_until[i] || v < 0.0) v = 0.0;
    const bool fire = v > p.threshold;
    if (fire) {
      v = 0.0;
      refractory_until[i] = release;
      ++count;
    }
    potential[i] = v;
    spiked[i] = fire ? 1 : 0;
  }
  return count;
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{&decay, &add_difference, &axpy, &lif_update};
}

}  // namespace lsm::kernels
