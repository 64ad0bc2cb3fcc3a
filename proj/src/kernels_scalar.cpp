#include "lsm/kernels.hpp"

namespace lsm::kernels {
namespace {

void decay(std::span<double> acc, double factor) {
  for (auto& a : acc) a *= factor;
}

void add_difference(std::span<double> out, std::span<const double> a,
                    std::span<const double> b) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a[i] - b[i];
}

void axpy(std::span<double> y, double alpha, std::span<const double> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

std::size_t lif_update(std::span<double> potential, std::span<double> refractory_until,
                       std::span<const double> current, double now,
                       const LifParams& p, std::span<std::uint8_t> spiked) {
  const double release = now + p.step_ms + p.refractory_ms;
  std::size_t count = 0;
  for (std::size_t i = 0; i < potential.size(); ++i) {
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
const KernelTable kScalarTable{&decay, &add_difference, &axpy, &lif_update};
}

}  // namespace lsm::kernels
