#include "lsm/readout.hpp"

#include "lsm/kernels.hpp"
#include "lsm/reservoir.hpp"
#include "lsm/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lsm {

void ClassifierConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(n_classes > 0, "classifier needs at least one class");
  require(tau_c > 0.0, "tau_c must be positive");
  require(teacher_margin < delta_c, "teacher margin must be smaller than the band width");
  require(p_plus >= 0.0 && p_plus <= 1.0 && p_minus >= 0.0 && p_minus <= 1.0,
          "update probabilities must lie in [0, 1]");
  require(w_lim > 0.0, "W_lim must be positive");
  require(delta_w > 0.0, "delta_w must be positive");
  require(tau_1 > tau_2 && tau_2 > 0.0, "readout kernel needs tau_1 > tau_2 > 0");
  require(tau_neu > 0.0 && v_th > 0.0 && t_rp >= 0.0, "invalid readout neuron parameters");
  require(delay_ms >= 1, "readout delay must be at least one step");
  require(step_ms > 0.0, "step must be positive");
}

ReadoutState ReadoutState::zeros(std::size_t n_classes, std::size_t n_pre) {
  ReadoutState s;
  s.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes),
                                    static_cast<Eigen::Index>(n_pre));
  s.calcium = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes));
  s.potential = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes));
  return s;
}

double calcium_update(double c, bool spiked, double step_ms, double tau_c) {
  return c * std::exp(-step_ms / tau_c) + (spiked ? 1.0 : 0.0);
}

double teacher_current(double c, bool desired, const ClassifierConfig& config) {
  if (desired) return c < config.c_theta + config.teacher_margin ? config.i_inf : 0.0;
  return c > config.c_theta - config.teacher_margin ? -config.i_inf : 0.0;
}

void learning_step(ReadoutState& state, std::span<const std::size_t> pre_spikes,
                   const ClassifierConfig& config, std::mt19937_64& rng) {
  if (pre_spikes.empty()) return;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double theta = config.c_theta;
  for (Eigen::Index l = 0; l < state.weights.rows(); ++l) {
    const double c = state.calcium[l];
    double delta = 0.0;
    double p = 0.0;
    if (c > theta && c < theta + config.delta_c) {
      delta = config.delta_w;
      p = config.p_plus;
    } else if (c > theta - config.delta_c && c < theta) {
      delta = -config.delta_w;
      p = config.p_minus;
    } else {
      continue;
    }
    for (auto j : pre_spikes) {
      if (unit(rng) >= p) continue;
      double& w = state.weights(l, static_cast<Eigen::Index>(j));
      w = std::clamp(w + delta, -config.w_lim, config.w_lim);
    }
  }
}

Decision classify(std::span<const std::size_t> counts) {
  Decision d;
  if (counts.empty()) {
    d.all_silent = true;
    return d;
  }
  const auto best = std::max_element(counts.begin(), counts.end());  // first max
  d.label = static_cast<std::size_t>(best - counts.begin());
  d.all_silent = *best == 0;
  return d;
}

SampleResponse run_readout(ReadoutState& state, const SpikeRaster& presynaptic,
                           const ClassifierConfig& config, std::optional<std::size_t> desired,
                           std::mt19937_64* rng) {
  const std::size_t n_out = state.n_classes();
  if (presynaptic.n_channels() != state.n_pre())
    throw std::invalid_argument("presynaptic raster width does not match readout weights");
  if (desired) {
    if (*desired >= n_out) throw std::invalid_argument("label outside [0, n_classes)");
    if (rng == nullptr) throw std::invalid_argument("supervised run needs an rng");
  }

  const double h = config.step_ms;
  const TimeMs steps = presynaptic.duration();
  const auto& k = kernels::active();
  SynapticAccumulators synapses(n_out, {config.tau_1, config.tau_2}, h);
  DelayLine queue(n_out, config.delay_ms);
  std::vector<double> refractory_until(n_out, 0.0), current(n_out, 0.0);
  std::vector<std::uint8_t> spiked(n_out, 0);
  state.calcium.setZero();
  state.potential.setZero();
  std::span<double> potential(state.potential.data(), n_out);
  const kernels::LifParams lif{1.0 - h / config.tau_neu, h, config.v_th, config.t_rp};

  SampleResponse response;
  response.counts.assign(n_out, 0);
  std::vector<SpikeEvent> out_events;
  std::vector<std::size_t> pre_now;
  const auto events = presynaptic.events();
  std::size_t next = 0;

  for (TimeMs t = 0; t < steps; ++t) {
    if (t > 0) synapses.advance();
    synapses.deliver_scaled(queue.arriving(t));
    queue.clear(t);

    pre_now.clear();
    for (; next < events.size() && events[next].time == t; ++next) pre_now.push_back(events[next].channel);
    if (t + config.delay_ms < steps) {
      auto slot = queue.slot_for_arrival(t + config.delay_ms);
      for (auto j : pre_now) {
        const double* col = state.weights.col(static_cast<Eigen::Index>(j)).data();
        k.axpy(slot, synapses.scale(), std::span<const double>(col, n_out));
      }
    }

    std::fill(current.begin(), current.end(), 0.0);
    synapses.add_current(current);
    if (desired)
      for (std::size_t l = 0; l < n_out; ++l)
        current[l] += teacher_current(state.calcium[static_cast<Eigen::Index>(l)], l == *desired, config);

    k.lif_update(potential, refractory_until, current, static_cast<double>(t) * h, lif, spiked);
    for (std::size_t l = 0; l < n_out; ++l) {
      auto& c = state.calcium[static_cast<Eigen::Index>(l)];
      c = calcium_update(c, spiked[l] != 0, h, config.tau_c);
      if (spiked[l]) {
        ++response.counts[l];
        out_events.push_back({l, t});
      }
    }
    if (desired) learning_step(state, pre_now, config, *rng);
  }
  response.spikes = SpikeRaster(n_out, steps, std::move(out_events));
  return response;
}

void train_pass(const Encoder& encode, std::span<const LabeledSample> samples,
                std::span<const std::size_t> indices, ReadoutState& state,
                const ClassifierConfig& config, std::mt19937_64& rng) {
  std::vector<std::size_t> order(indices.begin(), indices.end());
  std::shuffle(order.begin(), order.end(), rng);
  for (auto i : order) {
    const auto& sample = samples[i];
    if (sample.label >= config.n_classes) throw std::invalid_argument("label outside [0, n_classes)");
    run_readout(state, encode(sample.raster), config, sample.label, &rng);
  }
}

double evaluate(const Encoder& encode, std::span<const LabeledSample> samples,
                std::span<const std::size_t> indices, const ReadoutState& state,
                const ClassifierConfig& config) {
  if (indices.empty()) return 0.0;
  ReadoutState scratch = state;
  std::size_t correct = 0;
  for (auto i : indices) {
    const auto response = run_readout(scratch, encode(samples[i].raster), config);
    if (classify(response.counts).label == samples[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

double train_epoch(const Encoder& encode, std::span<const LabeledSample> samples,
                   std::span<const std::size_t> indices, ReadoutState& state,
                   const ClassifierConfig& config, std::mt19937_64& rng) {
  if (indices.empty()) throw std::invalid_argument("training set is empty");
  train_pass(encode, samples, indices, state, config, rng);
  return evaluate(encode, samples, indices, state, config);
}

double trailing_mean(std::span<const double> values, std::size_t window) {
  if (values.empty()) return 0.0;
  const std::size_t n = std::min(std::max<std::size_t>(window, 1), values.size());
  return std::accumulate(values.end() - static_cast<std::ptrdiff_t>(n), values.end(), 0.0) /
         static_cast<double>(n);
}

KFoldResult train_kfold(const Encoder& encode, const LabeledDataset& dataset,
                        std::span<const Fold> folds, std::size_t n_pre,
                        const ClassifierConfig& config, std::size_t accuracy_window,
                        std::uint64_t stream) {
  config.validate();
  if (folds.empty()) throw std::invalid_argument("no folds to train");
  KFoldResult result;
  result.accuracy_per_epoch.assign(config.epochs, 0.0);
  double untrained = 0.0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::mt19937_64 rng(derive_seed({config.seed, stream, f}));
    auto state = ReadoutState::zeros(config.n_classes, n_pre);
    if (config.epochs == 0)
      untrained += evaluate(encode, dataset.samples, folds[f].test, state, config);
    for (std::size_t e = 0; e < config.epochs; ++e) {
      train_pass(encode, dataset.samples, folds[f].train, state, config, rng);
      result.accuracy_per_epoch[e] += evaluate(encode, dataset.samples, folds[f].test, state, config);
    }
    result.trained.push_back(std::move(state));
  }
  const auto n_folds = static_cast<double>(folds.size());
  for (auto& a : result.accuracy_per_epoch) a /= n_folds;
  result.final_accuracy = config.epochs == 0 ? untrained / n_folds
                                             : trailing_mean(result.accuracy_per_epoch, accuracy_window);
  return result;
}

KFoldResult baseline_reservoirless(const LabeledDataset& dataset, std::span<const Fold> folds,
                                   const ClassifierConfig& config, std::size_t accuracy_window) {
  const Encoder identity = [](const SpikeRaster& r) { return r; };
  return train_kfold(identity, dataset, folds, dataset.config.channels, config, accuracy_window);
}

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = nlohmann::json{{"n_classes", c.n_classes}, {"tau_c", c.tau_c},
                     {"c_theta", c.c_theta},     {"delta_c", c.delta_c},
                     {"teacher_margin", c.teacher_margin}, {"i_inf", c.i_inf},
                     {"p_plus", c.p_plus},       {"p_minus", c.p_minus},
                     {"delta_w", c.delta_w},     {"w_lim", c.w_lim},
                     {"epochs", c.epochs},       {"seed", c.seed},
                     {"tau_neu", c.tau_neu},     {"t_rp", c.t_rp},
                     {"v_th", c.v_th},           {"tau_1", c.tau_1},
                     {"tau_2", c.tau_2},         {"delay_ms", c.delay_ms},
                     {"step_ms", c.step_ms}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  const ClassifierConfig d = c;
  c.n_classes = j.value("n_classes", d.n_classes);
  c.tau_c = j.value("tau_c", d.tau_c);
  c.c_theta = j.value("c_theta", d.c_theta);
  c.delta_c = j.value("delta_c", d.delta_c);
  c.teacher_margin = j.value("teacher_margin", d.teacher_margin);
  c.i_inf = j.value("i_inf", d.i_inf);
  c.p_plus = j.value("p_plus", d.p_plus);
  c.p_minus = j.value("p_minus", d.p_minus);
  c.delta_w = j.value("delta_w", d.delta_w);
  c.w_lim = j.value("w_lim", d.w_lim);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.tau_neu = j.value("tau_neu", d.tau_neu);
  c.t_rp = j.value("t_rp", d.t_rp);
  c.v_th = j.value("v_th", d.v_th);
  c.tau_1 = j.value("tau_1", d.tau_1);
  c.tau_2 = j.value("tau_2", d.tau_2);
  c.delay_ms = j.value("delay_ms", d.delay_ms);
  c.step_ms = j.value("step_ms", d.step_ms);
}

}  // namespace lsm
