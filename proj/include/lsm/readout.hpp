#pragma once

// Spiking readout layer trained with the calcium-gated probabilistic rule.
// One LIF neuron per class; the neuron that spikes most names the class.

#include "lsm/dataset.hpp"
#include "lsm/spikes.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace lsm {

struct ClassifierConfig {
  std::size_t n_classes = 10;
  double tau_c = 64.0;           // calcium time constant, ms
  double c_theta = 10.0;         // calcium threshold
  double delta_c = 2.0;          // half-width of the update bands
  double teacher_margin = 1.0;   // hysteresis of the teacher current (delta c)
  double i_inf = 10000.0;        // teacher current magnitude
  double p_plus = 0.1;
  double p_minus = 0.1;
  double delta_w = 0.01;
  double w_lim = 8.0;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  // Membrane and synapse parameters of the readout neurons.
  double tau_neu = 64.0;
  double t_rp = 3.0;
  double v_th = 20.0;
  double tau_1 = 8.0;
  double tau_2 = 4.0;
  TimeMs delay_ms = 1;
  double step_ms = 1.0;

  void validate() const;
};

struct ReadoutState {
  Eigen::MatrixXd weights;  // n_classes x n_presynaptic, column-major
  Eigen::VectorXd calcium;
  Eigen::VectorXd potential;

  static ReadoutState zeros(std::size_t n_classes, std::size_t n_pre);
  std::size_t n_classes() const { return static_cast<std::size_t>(weights.rows()); }
  std::size_t n_pre() const { return static_cast<std::size_t>(weights.cols()); }
};

/// Exact one-step solution of dc/dt = -c/tau_c + sum of deltas at spikes.
double calcium_update(double c, bool spiked, double step_ms, double tau_c);

/// +I_inf while a desired neuron's calcium is below c_theta + margin,
/// -I_inf while an undesired neuron's calcium is above c_theta - margin.
double teacher_current(double c, bool desired, const ClassifierConfig& config);

/// Probabilistic update for every (readout l, presynaptic j) pair where j
/// spiked this step, gated by the calcium of l; clips to [-W_lim, W_lim].
void learning_step(ReadoutState& state, std::span<const std::size_t> pre_spikes,
                   const ClassifierConfig& config, std::mt19937_64& rng);

struct Decision {
  std::size_t label = 0;
  bool all_silent = false;
};

/// Argmax of the spike counts, lowest index on ties.
Decision classify(std::span<const std::size_t> counts);

struct SampleResponse {
  std::vector<std::size_t> counts;  // spikes per readout neuron
  SpikeRaster spikes;               // readout raster, one channel per class
};

/// Runs the readout over one presynaptic raster from rest. With a label the
/// run is supervised (teacher current and weight updates, requires rng);
/// without one the weights are left untouched.
SampleResponse run_readout(ReadoutState& state, const SpikeRaster& presynaptic,
                           const ClassifierConfig& config,
                           std::optional<std::size_t> desired = std::nullopt,
                           std::mt19937_64* rng = nullptr);

/// Maps an input raster to the raster seen by the readout (the reservoir
/// response, or the input itself for the reservoir-less baseline).
using Encoder = std::function<SpikeRaster(const SpikeRaster&)>;

/// One supervised pass over `indices` in shuffled order.
void train_pass(const Encoder& encode, std::span<const LabeledSample> samples,
                std::span<const std::size_t> indices, ReadoutState& state,
                const ClassifierConfig& config, std::mt19937_64& rng);

/// Fraction of `indices` classified correctly with frozen weights.
double evaluate(const Encoder& encode, std::span<const LabeledSample> samples,
                std::span<const std::size_t> indices, const ReadoutState& state,
                const ClassifierConfig& config);

/// train_pass followed by evaluation on the same samples.
double train_epoch(const Encoder& encode, std::span<const LabeledSample> samples,
                   std::span<const std::size_t> indices, ReadoutState& state,
                   const ClassifierConfig& config, std::mt19937_64& rng);

struct KFoldResult {
  std::vector<double> accuracy_per_epoch;  // test accuracy, mean over folds
  double final_accuracy = 0.0;             // mean over the last `window` epochs
  std::vector<ReadoutState> trained;       // one per fold
};

/// Trains a fresh readout per fold for config.epochs epochs, evaluating the
/// test split after every epoch. With zero epochs the untrained readout is
/// scored once.
KFoldResult train_kfold(const Encoder& encode, const LabeledDataset& dataset,
                        std::span<const Fold> folds, std::size_t n_pre,
                        const ClassifierConfig& config, std::size_t accuracy_window,
                        std::uint64_t stream = 0);

/// Input channels wired straight to the readout with the same learning rule.
KFoldResult baseline_reservoirless(const LabeledDataset& dataset, std::span<const Fold> folds,
                                   const ClassifierConfig& config, std::size_t accuracy_window);

/// Mean of the trailing `window` entries (all of them if fewer).
double trailing_mean(std::span<const double> values, std::size_t window);

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

}  // namespace lsm
