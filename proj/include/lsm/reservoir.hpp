#pragma once

// Randomly connected 3D-grid reservoir of leaky integrate-and-fire neurons
// with second-order (difference of exponentials) synapses.

#include "lsm/spikes.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace lsm {

enum class SynapseKind : std::uint8_t { kExcitatory, kInhibitory };

struct KernelTimescales {
  double tau_1 = 8.0;  // ms, slow decay
  double tau_2 = 4.0;  // ms, fast decay
};

struct ReservoirConfig {
  std::array<std::size_t, 3> grid_dims{5, 5, 5};
  double f_plus = 0.85;
  double lambda = 2.0;
  // Connection probability prefactors, indexed pre-type then post-type.
  double k_ee = 0.45, k_ei = 0.3, k_ie = 0.6, k_ii = 0.15;
  double w_ee = 3.0, w_ei = 6.0, w_ie = -2.0, w_ii = -2.0;
  double alpha_w = 1.0;
  double w_in = 8.0;
  std::size_t f_in = 4;
  std::size_t input_channels = 10;
  TimeMs delay_ms = 1;
  double tau_1e = 8.0, tau_2e = 4.0;
  double tau_1i = 4.0, tau_2i = 2.0;
  double tau_neu = 64.0;
  double t_rp = 3.0;
  double v_th = 20.0;
  double step_ms = 1.0;
  std::uint64_t seed = 1;

  KernelTimescales excitatory() const { return {tau_1e, tau_2e}; }
  KernelTimescales inhibitory() const { return {tau_1i, tau_2i}; }
  std::size_t n_neurons() const { return grid_dims[0] * grid_dims[1] * grid_dims[2]; }

  /// Throws std::invalid_argument on the first violated invariant.
  void validate() const;
};

struct Synapse {
  std::size_t pre = 0;
  std::size_t post = 0;
  double weight = 0.0;
  TimeMs delay = 1;
  SynapseKind kind = SynapseKind::kExcitatory;
};

struct InputSynapse {
  std::size_t channel = 0;
  std::size_t target = 0;
  double weight = 0.0;
};

struct ReservoirTopology {
  std::size_t n_neurons = 0;
  std::size_t n_inputs = 0;
  std::vector<std::array<int, 3>> positions;
  std::vector<bool> is_excitatory;
  std::vector<Synapse> synapses;
  std::vector<InputSynapse> input_map;
};

/// Samples the connectivity: each ordered pair (i, j), i != j, is connected
/// with probability K * exp(-D^2 / lambda^2). Deterministic in config.seed.
ReservoirTopology build_reservoir(const ReservoirConfig& config);

/// Expected recurrent synapse count for the labelling in `topology`.
double expected_synapse_count(const ReservoirTopology& topology,
                              const ReservoirConfig& config);

/// Per-neuron pair of decaying accumulators realizing the kernel
///   v(t) = (exp(-(t-ts)/tau_1) - exp(-(t-ts)/tau_2)) / (tau_1 - tau_2)
/// for t >= ts. A delivery of weight w adds w / (tau_1 - tau_2) to both.
class SynapticAccumulators {
 public:
  SynapticAccumulators(std::size_t n, KernelTimescales tau, double step_ms);

  /// Moves every accumulator forward by one step.
  void advance();
  void deliver(std::size_t target, double weight);
  /// Adds pre-scaled amounts (weight / (tau_1 - tau_2)) to every target.
  void deliver_scaled(std::span<const double> amounts);
  /// out[i] += current of neuron i.
  void add_current(std::span<double> out) const;
  double current(std::size_t i) const { return slow_[i] - fast_[i]; }
  double scale() const { return scale_; }
  void reset();

 private:
  std::vector<double> slow_;
  std::vector<double> fast_;
  double slow_decay_;
  double fast_decay_;
  double scale_;
};

/// Fixed-delay delivery queue: amounts scheduled at step k become available
/// at step k + delay.
class DelayLine {
 public:
  DelayLine(std::size_t n, TimeMs delay);
  std::span<double> slot_for_arrival(TimeMs arrival_step);
  /// Returns the amounts arriving at `step`; the slot is cleared by clear().
  std::span<double> arriving(TimeMs step);
  void clear(TimeMs step);
  void reset();

 private:
  std::size_t n_;
  TimeMs depth_;
  std::vector<double> slots_;
};

/// Built reservoir ready for simulation. Holds a by-presynaptic-neuron view
/// of the synapse list.
class Reservoir {
 public:
  Reservoir(ReservoirTopology topology, ReservoirConfig config);

  /// Simulates one sample from rest (V = 0, empty synapses). The output
  /// raster has one channel per neuron and the input's duration.
  SpikeRaster simulate(const SpikeRaster& input) const;

  const ReservoirTopology& topology() const { return topology_; }
  const ReservoirConfig& config() const { return config_; }
  std::size_t n_neurons() const { return topology_.n_neurons; }

 private:
  struct Edge {
    std::uint32_t post;
    double amount;  // weight / (tau_1 - tau_2) of the edge's kernel
  };
  ReservoirTopology topology_;
  ReservoirConfig config_;
  std::vector<std::size_t> exc_offsets_, inh_offsets_, input_offsets_;
  std::vector<Edge> exc_edges_, inh_edges_, input_edges_;
};

SpikeRaster simulate(const ReservoirTopology& topology, const SpikeRaster& input,
                     const ReservoirConfig& config);

/// Mean firing rate in spikes/s over all channels and the whole duration.
double mean_rate_hz(const SpikeRaster& raster);

void to_json(nlohmann::json& j, const ReservoirConfig& c);
void from_json(const nlohmann::json& j, ReservoirConfig& c);
void to_json(nlohmann::json& j, const ReservoirTopology& t);

}  // namespace lsm
