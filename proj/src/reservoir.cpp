#include "lsm/reservoir.hpp"

#include "lsm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>

namespace lsm {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

double squared_distance(const std::array<int, 3>& a, const std::array<int, 3>& b) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return d2;
}

double connection_prefactor(const ReservoirConfig& c, bool pre_exc, bool post_exc) {
  if (pre_exc) return post_exc ? c.k_ee : c.k_ei;
  return post_exc ? c.k_ie : c.k_ii;
}

double base_weight(const ReservoirConfig& c, bool pre_exc, bool post_exc) {
  if (pre_exc) return post_exc ? c.w_ee : c.w_ei;
  return post_exc ? c.w_ie : c.w_ii;
}

}  // namespace

void ReservoirConfig::validate() const {
  require(grid_dims[0] > 0 && grid_dims[1] > 0 && grid_dims[2] > 0,
          "grid dimensions must be nonzero");
  require(f_plus >= 0.0 && f_plus <= 1.0, "f_plus must lie in [0, 1]");
  for (double k : {k_ee, k_ei, k_ie, k_ii})
    require(k >= 0.0 && k <= 1.0, "connection prefactors must lie in [0, 1]");
  require(lambda > 0.0, "lambda must be positive");
  require(alpha_w >= 0.0, "alpha_w must be non-negative");
  require(tau_1e > tau_2e && tau_2e > 0.0, "excitatory kernel needs tau_1 > tau_2 > 0");
  require(tau_1i > tau_2i && tau_2i > 0.0, "inhibitory kernel needs tau_1 > tau_2 > 0");
  require(tau_neu > 0.0, "tau_neu must be positive");
  require(t_rp >= 0.0, "refractory period must be non-negative");
  require(v_th > 0.0, "threshold must be positive");
  require(step_ms > 0.0, "step must be positive");
  require(delay_ms >= 1, "synaptic delay must be at least one step");
  require(f_in <= n_neurons(), "F_in exceeds the number of neurons");
}

ReservoirTopology build_reservoir(const ReservoirConfig& config) {
  config.validate();
  const auto [nx, ny, nz] = config.grid_dims;
  const std::size_t n = config.n_neurons();

  ReservoirTopology topo;
  topo.n_neurons = n;
  topo.n_inputs = config.input_channels;
  topo.positions.reserve(n);
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x)
        topo.positions.push_back({static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)});

  std::mt19937_64 rng(config.seed);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_exc = static_cast<std::size_t>(std::lround(config.f_plus * static_cast<double>(n)));
  topo.is_excitatory.assign(n, false);
  for (std::size_t i = 0; i < n_exc; ++i) topo.is_excitatory[order[i]] = true;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double inv_lambda2 = 1.0 / (config.lambda * config.lambda);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pre_exc = topo.is_excitatory[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool post_exc = topo.is_excitatory[j];
      const double p = connection_prefactor(config, pre_exc, post_exc) *
                       std::exp(-squared_distance(topo.positions[i], topo.positions[j]) * inv_lambda2);
      if (unit(rng) < p) {
        topo.synapses.push_back({i, j, config.alpha_w * base_weight(config, pre_exc, post_exc),
                                 config.delay_ms,
                                 pre_exc ? SynapseKind::kExcitatory : SynapseKind::kInhibitory});
      }
    }
  }

  std::bernoulli_distribution coin(0.5);
  for (std::size_t ch = 0; ch < config.input_channels; ++ch) {
    // Partial Fisher-Yates: the first f_in entries become distinct targets.
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t k = 0; k < config.f_in; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, n - 1);
      std::swap(order[k], order[pick(rng)]);
      topo.input_map.push_back({ch, order[k], coin(rng) ? config.w_in : -config.w_in});
    }
  }
  return topo;
}

double expected_synapse_count(const ReservoirTopology& topology, const ReservoirConfig& config) {
  const double inv_lambda2 = 1.0 / (config.lambda * config.lambda);
  double total = 0.0;
  for (std::size_t i = 0; i < topology.n_neurons; ++i)
    for (std::size_t j = 0; j < topology.n_neurons; ++j) {
      if (i == j) continue;
      total += connection_prefactor(config, topology.is_excitatory[i], topology.is_excitatory[j]) *
               std::exp(-squared_distance(topology.positions[i], topology.positions[j]) * inv_lambda2);
    }
  return total;
}

SynapticAccumulators::SynapticAccumulators(std::size_t n, KernelTimescales tau, double step_ms)
    : slow_(n, 0.0),
      fast_(n, 0.0),
      slow_decay_(std::exp(-step_ms / tau.tau_1)),
      fast_decay_(std::exp(-step_ms / tau.tau_2)),
      scale_(1.0 / (tau.tau_1 - tau.tau_2)) {
  if (!(tau.tau_1 > tau.tau_2) || tau.tau_2 <= 0.0)
    throw std::invalid_argument("synapse kernel needs tau_1 > tau_2 > 0");
}

void SynapticAccumulators::advance() {
  const auto& k = kernels::active();
  k.decay(slow_, slow_decay_);
  k.decay(fast_, fast_decay_);
}

void SynapticAccumulators::deliver(std::size_t target, double weight) {
  const double amount = weight * scale_;
  slow_[target] += amount;
  fast_[target] += amount;
}

void SynapticAccumulators::deliver_scaled(std::span<const double> amounts) {
  const auto& k = kernels::active();
  k.axpy(slow_, 1.0, amounts);
  k.axpy(fast_, 1.0, amounts);
}

void SynapticAccumulators::add_current(std::span<double> out) const {
  kernels::active().add_difference(out, slow_, fast_);
}

void SynapticAccumulators::reset() {
  std::fill(slow_.begin(), slow_.end(), 0.0);
  std::fill(fast_.begin(), fast_.end(), 0.0);
}

DelayLine::DelayLine(std::size_t n, TimeMs delay)
    : n_(n), depth_(delay + 1), slots_(n * static_cast<std::size_t>(delay + 1), 0.0) {
  if (delay < 1) throw std::invalid_argument("delay must be at least one step");
}

std::span<double> DelayLine::slot_for_arrival(TimeMs arrival_step) {
  return std::span<double>(slots_).subspan(static_cast<std::size_t>(arrival_step % depth_) * n_, n_);
}

std::span<double> DelayLine::arriving(TimeMs step) { return slot_for_arrival(step); }

void DelayLine::clear(TimeMs step) {
  auto slot = slot_for_arrival(step);
  std::fill(slot.begin(), slot.end(), 0.0);
}

void DelayLine::reset() { std::fill(slots_.begin(), slots_.end(), 0.0); }

Reservoir::Reservoir(ReservoirTopology topology, ReservoirConfig config)
    : topology_(std::move(topology)), config_(std::move(config)) {
  config_.validate();
  const std::size_t n = topology_.n_neurons;
  const double exc_scale = 1.0 / (config_.tau_1e - config_.tau_2e);
  const double inh_scale = 1.0 / (config_.tau_1i - config_.tau_2i);

  auto build_csr = [n](auto&& sources, std::size_t rows, auto key, auto edge,
                       std::vector<std::size_t>& offsets, std::vector<Edge>& edges) {
    offsets.assign(rows + 1, 0);
    for (const auto& s : sources) {
      if (auto r = key(s); r) ++offsets[*r + 1];
    }
    std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
    edges.resize(offsets.back());
    auto cursor = offsets;
    for (const auto& s : sources) {
      if (auto r = key(s); r) {
        const Edge e = edge(s);
        if (e.post >= n) throw std::invalid_argument("synapse target out of range");
        edges[cursor[*r]++] = e;
      }
    }
  };

  for (const auto& s : topology_.synapses)
    if (s.pre >= n) throw std::invalid_argument("synapse source out of range");

  build_csr(
      topology_.synapses, n,
      [](const Synapse& s) {
        return s.kind == SynapseKind::kExcitatory ? std::optional<std::size_t>(s.pre) : std::nullopt;
      },
      [&](const Synapse& s) { return Edge{static_cast<std::uint32_t>(s.post), s.weight * exc_scale}; },
      exc_offsets_, exc_edges_);
  build_csr(
      topology_.synapses, n,
      [](const Synapse& s) {
        return s.kind == SynapseKind::kInhibitory ? std::optional<std::size_t>(s.pre) : std::nullopt;
      },
      [&](const Synapse& s) { return Edge{static_cast<std::uint32_t>(s.post), s.weight * inh_scale}; },
      inh_offsets_, inh_edges_);
  for (const auto& s : topology_.input_map)
    if (s.channel >= topology_.n_inputs) throw std::invalid_argument("input channel out of range");
  build_csr(
      topology_.input_map, topology_.n_inputs,
      [](const InputSynapse& s) { return std::optional<std::size_t>(s.channel); },
      [&](const InputSynapse& s) {
        return Edge{static_cast<std::uint32_t>(s.target), s.weight * exc_scale};
      },
      input_offsets_, input_edges_);
}

SpikeRaster Reservoir::simulate(const SpikeRaster& input) const {
  if (input.n_channels() != topology_.n_inputs)
    throw std::invalid_argument("input raster has " + std::to_string(input.n_channels()) +
                                " channels, reservoir expects " +
                                std::to_string(topology_.n_inputs));
  const std::size_t n = topology_.n_neurons;
  const TimeMs steps = input.duration();
  const TimeMs delay = config_.delay_ms;
  const double h = config_.step_ms;
  const auto& k = kernels::active();

  SynapticAccumulators exc(n, config_.excitatory(), h);
  SynapticAccumulators inh(n, config_.inhibitory(), h);
  DelayLine exc_queue(n, delay);
  DelayLine inh_queue(n, delay);
  std::vector<double> potential(n, 0.0), refractory_until(n, 0.0), current(n, 0.0);
  std::vector<std::uint8_t> spiked(n, 0);
  const kernels::LifParams lif{1.0 - h / config_.tau_neu, h, config_.v_th, config_.t_rp};

  std::vector<SpikeEvent> out;
  const auto events = input.events();
  std::size_t next_input = 0;

  auto schedule = [](std::span<double> slot, const std::vector<std::size_t>& offsets,
                     const std::vector<Edge>& edges, std::size_t source) {
    for (std::size_t e = offsets[source]; e < offsets[source + 1]; ++e)
      slot[edges[e].post] += edges[e].amount;
  };

  for (TimeMs t = 0; t < steps; ++t) {
    if (t > 0) {
      exc.advance();
      inh.advance();
    }
    exc.deliver_scaled(exc_queue.arriving(t));
    inh.deliver_scaled(inh_queue.arriving(t));
    exc_queue.clear(t);
    inh_queue.clear(t);

    for (; next_input < events.size() && events[next_input].time == t; ++next_input) {
      if (t + delay < steps)
        schedule(exc_queue.slot_for_arrival(t + delay), input_offsets_, input_edges_,
                 events[next_input].channel);
    }

    std::fill(current.begin(), current.end(), 0.0);
    exc.add_current(current);
    inh.add_current(current);
    const std::size_t fired =
        k.lif_update(potential, refractory_until, current, static_cast<double>(t) * h, lif, spiked);
    if (fired == 0) continue;

    const bool deliverable = t + delay < steps;
    for (std::size_t i = 0; i < n; ++i) {
      if (!spiked[i]) continue;
      out.push_back({i, t});
      if (!deliverable) continue;
      schedule(exc_queue.slot_for_arrival(t + delay), exc_offsets_, exc_edges_, i);
      schedule(inh_queue.slot_for_arrival(t + delay), inh_offsets_, inh_edges_, i);
    }
  }
  return SpikeRaster(n, steps, std::move(out));
}

SpikeRaster simulate(const ReservoirTopology& topology, const SpikeRaster& input,
                     const ReservoirConfig& config) {
  return Reservoir(topology, config).simulate(input);
}

double mean_rate_hz(const SpikeRaster& raster) {
  if (raster.n_channels() == 0 || raster.duration() == 0) return 0.0;
  return static_cast<double>(raster.size()) * 1000.0 /
         (static_cast<double>(raster.n_channels()) * static_cast<double>(raster.duration()));
}

void to_json(nlohmann::json& j, const ReservoirConfig& c) {
  j = nlohmann::json{{"grid_dims", c.grid_dims}, {"f_plus", c.f_plus},   {"lambda", c.lambda},
                     {"k_ee", c.k_ee},           {"k_ei", c.k_ei},       {"k_ie", c.k_ie},
                     {"k_ii", c.k_ii},           {"w_ee", c.w_ee},       {"w_ei", c.w_ei},
                     {"w_ie", c.w_ie},           {"w_ii", c.w_ii},       {"alpha_w", c.alpha_w},
                     {"w_in", c.w_in},           {"f_in", c.f_in},       {"input_channels", c.input_channels},
                     {"delay_ms", c.delay_ms},   {"tau_1e", c.tau_1e},   {"tau_2e", c.tau_2e},
                     {"tau_1i", c.tau_1i},       {"tau_2i", c.tau_2i},   {"tau_neu", c.tau_neu},
                     {"t_rp", c.t_rp},           {"v_th", c.v_th},       {"step_ms", c.step_ms},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ReservoirConfig& c) {
  const ReservoirConfig d = c;
  c.grid_dims = j.value("grid_dims", d.grid_dims);
  c.f_plus = j.value("f_plus", d.f_plus);
  c.lambda = j.value("lambda", d.lambda);
  c.k_ee = j.value("k_ee", d.k_ee);
  c.k_ei = j.value("k_ei", d.k_ei);
  c.k_ie = j.value("k_ie", d.k_ie);
  c.k_ii = j.value("k_ii", d.k_ii);
  c.w_ee = j.value("w_ee", d.w_ee);
  c.w_ei = j.value("w_ei", d.w_ei);
  c.w_ie = j.value("w_ie", d.w_ie);
  c.w_ii = j.value("w_ii", d.w_ii);
  c.alpha_w = j.value("alpha_w", d.alpha_w);
  c.w_in = j.value("w_in", d.w_in);
  c.f_in = j.value("f_in", d.f_in);
  c.input_channels = j.value("input_channels", d.input_channels);
  c.delay_ms = j.value("delay_ms", d.delay_ms);
  c.tau_1e = j.value("tau_1e", d.tau_1e);
  c.tau_2e = j.value("tau_2e", d.tau_2e);
  c.tau_1i = j.value("tau_1i", d.tau_1i);
  c.tau_2i = j.value("tau_2i", d.tau_2i);
  c.tau_neu = j.value("tau_neu", d.tau_neu);
  c.t_rp = j.value("t_rp", d.t_rp);
  c.v_th = j.value("v_th", d.v_th);
  c.step_ms = j.value("step_ms", d.step_ms);
  c.seed = j.value("seed", d.seed);
}

void to_json(nlohmann::json& j, const ReservoirTopology& t) {
  nlohmann::json neurons = nlohmann::json::array();
  for (std::size_t i = 0; i < t.n_neurons; ++i)
    neurons.push_back({{"index", i},
                       {"position", t.positions[i]},
                       {"excitatory", static_cast<bool>(t.is_excitatory[i])}});
  nlohmann::json synapses = nlohmann::json::array();
  for (const auto& s : t.synapses)
    synapses.push_back({{"pre", s.pre},
                        {"post", s.post},
                        {"weight", s.weight},
                        {"delay_ms", s.delay},
                        {"kernel", s.kind == SynapseKind::kExcitatory ? "excitatory" : "inhibitory"}});
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& s : t.input_map)
    inputs.push_back({{"channel", s.channel}, {"target", s.target}, {"weight", s.weight}});
  j = nlohmann::json{{"n_neurons", t.n_neurons},
                     {"n_inputs", t.n_inputs},
                     {"neurons", std::move(neurons)},
                     {"synapses", std::move(synapses)},
                     {"input_map", std::move(inputs)}};
}

}  // namespace lsm
