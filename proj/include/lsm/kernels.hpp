#pragma once

// Data-parallel inner loops of the neuron simulation. Every kernel has a
// scalar reference implementation; an AVX2 variant is selected at runtime
// when the CPU supports it. Both variants perform the same floating-point
// operations in the same order and produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace lsm::kernels {

enum class Backend { kScalar, kAvx2 };

struct LifParams {
  double leak_factor = 1.0;    // 1 - h / tau_membrane
  double step_ms = 1.0;        // h
  double threshold = 20.0;     // V_th
  double refractory_ms = 3.0;  // T_rp
};

struct KernelTable {
  // acc[i] *= factor
  void (*decay)(std::span<double> acc, double factor);
  // out[i] += a[i] - b[i]
  void (*add_difference)(std::span<double> out, std::span<const double> a,
                         std::span<const double> b);
  // y[i] += alpha * x[i]
  void (*axpy)(std::span<double> y, double alpha, std::span<const double> x);
  // One forward-Euler membrane step at time `now` (ms) for every neuron.
  // Neurons with now < refractory_until are clamped to 0, as is any negative
  // result. A neuron whose potential exceeds the threshold spikes, resets to
  // 0 and is refractory until now + h + T_rp. Returns the spike count;
  // spiked[i] is set to 0 or 1.
  std::size_t (*lif_update)(std::span<double> potential,
                            std::span<double> refractory_until,
                            std::span<const double> current, double now,
                            const LifParams& params,
                            std::span<std::uint8_t> spiked);
};

bool supported(Backend backend);
const KernelTable& table(Backend backend);

/// Kernels used by the simulator. Defaults to the fastest supported backend;
/// the environment variable LSM_SIMD=scalar forces the reference path.
const KernelTable& active();
Backend active_backend();
void set_backend(Backend backend);
std::string_view name(Backend backend);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(LSM_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
}  // namespace detail

}  // namespace lsm::kernels
