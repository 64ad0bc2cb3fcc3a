#include "lsm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace lsm {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? format_double(*v) : std::string();
}

Stat stat_of(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(v.size()));
  return s;
}

bool record_key_less(const ExperimentRecord& a, const ExperimentRecord& b) {
  if (a.alpha_w != b.alpha_w) return a.alpha_w < b.alpha_w;
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  return a.seed < b.seed;
}

}  // namespace

std::vector<std::uint64_t> SweepConfig::structure_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out(structures_per_point);
  std::iota(out.begin(), out.end(), std::uint64_t{1});
  return out;
}

void SweepConfig::validate() const {
  if (alpha_w_values.empty() || lambda_values.empty())
    throw std::invalid_argument("sweep grids must be nonempty");
  if (structure_seeds().empty()) throw std::invalid_argument("sweep needs at least one structure");
  if (epochs > 0 && accuracy_window > epochs)
    throw std::invalid_argument("accuracy window exceeds the number of epochs");
  if (folds < 2) throw std::invalid_argument("sweep needs at least two folds");
}

std::vector<std::size_t> one_per_class(const LabeledDataset& dataset, std::size_t which) {
  const auto& cfg = dataset.config;
  if (which >= cfg.samples_per_class)
    throw std::invalid_argument("dataset has too few samples per class");
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) out.push_back(dataset.index_of(c, which));
  return out;
}

MemoryExtraction extract_memory(const Reservoir& reservoir, const LabeledDataset& dataset,
                                std::span<const std::size_t> samples) {
  MemoryExtraction out;
  std::vector<RateMatrix> u_blocks, x_blocks;
  for (auto i : samples) {
    const auto& input = dataset.samples[i].raster;
    out.responses.push_back(reservoir.simulate(input));
    u_blocks.push_back(extract_rates(input));
    x_blocks.push_back(extract_rates(out.responses.back()));
  }
  auto [u, boundaries] = concat_rates(u_blocks);
  out.rates.u = std::move(u);
  out.rates.x = concat_rates(x_blocks).first;
  out.rates.boundaries = std::move(boundaries);
  out.fit = fit_ab(out.rates.x, out.rates.u, out.rates.boundaries);
  out.memory = memory_metric(out.fit.a, reservoir.config().step_ms);
  return out;
}

namespace {

RateMatrix readout_rates(const ReadoutState& trained, std::span<const SpikeRaster> responses,
                         const ClassifierConfig& classifier) {
  std::vector<RateMatrix> blocks;
  ReadoutState scratch = trained;
  for (const auto& r : responses)
    blocks.push_back(extract_rates(run_readout(scratch, r, classifier).spikes));
  return concat_rates(blocks).first;
}

}  // namespace

ExperimentRecord run_point(const ReservoirConfig& reservoir_config,
                           const ClassifierConfig& classifier, const LabeledDataset& dataset,
                           std::span<const Fold> folds, std::size_t accuracy_window) {
  ExperimentRecord rec;
  rec.alpha_w = reservoir_config.alpha_w;
  rec.lambda = reservoir_config.lambda;
  rec.seed = reservoir_config.seed;
  rec.folds = folds.size();

  const auto sim_start = Clock::now();
  const Reservoir reservoir(build_reservoir(reservoir_config), reservoir_config);
  const Encoder encode = [&reservoir](const SpikeRaster& r) { return reservoir.simulate(r); };
  auto trained = train_kfold(encode, dataset, folds, reservoir.n_neurons(), classifier,
                             accuracy_window, reservoir_config.seed);
  rec.wall_clock_sim = seconds_since(sim_start);
  rec.accuracy_per_epoch = trained.accuracy_per_epoch;
  rec.final_accuracy = trained.final_accuracy;

  const auto fit_samples = one_per_class(dataset, 0);
  const auto metric_start = Clock::now();
  auto fit = extract_memory(reservoir, dataset, fit_samples);
  rec.wall_clock_metric = seconds_since(metric_start);
  rec.tau_m_ms = fit.memory.tau_m_ms;
  rec.clamped_modes = fit.memory.clamped_modes;

  const auto held_samples =
      one_per_class(dataset, dataset.config.samples_per_class > 1 ? 1 : 0);
  std::vector<SpikeRaster> held_responses;
  std::vector<RateMatrix> u_blocks, x_blocks;
  std::vector<LyapunovPair> pairs;
  for (std::size_t c = 0; c < held_samples.size(); ++c) {
    const auto& input = dataset.samples[held_samples[c]].raster;
    held_responses.push_back(reservoir.simulate(input));
    u_blocks.push_back(extract_rates(input));
    x_blocks.push_back(extract_rates(held_responses.back()));
    const auto& first_input = dataset.samples[fit_samples[c]].raster;
    pairs.push_back({extract_rates(first_input).values, u_blocks.back().values,
                     extract_rates(fit.responses[c]).values, x_blocks.back().values});
  }
  rec.mu = lyapunov(pairs).mu;

  RateSet held;
  auto [u, boundaries] = concat_rates(u_blocks);
  held.u = std::move(u);
  held.x = concat_rates(x_blocks).first;
  held.boundaries = std::move(boundaries);
  fit.rates.ro = readout_rates(trained.trained.front(), fit.responses, classifier);
  held.ro = readout_rates(trained.trained.front(), held_responses, classifier);
  rec.pcc = transformation_suite(fit.rates, held);

  double rate_sum = 0.0;
  for (const auto& r : fit.responses) rate_sum += mean_rate_hz(r);
  rec.mean_rate_hz = rate_sum / static_cast<double>(fit.responses.size());
  const bool no_recurrence = std::all_of(reservoir.topology().synapses.begin(),
                                         reservoir.topology().synapses.end(),
                                         [](const Synapse& s) { return s.weight == 0.0; });
  rec.low_activity = no_recurrence || rec.mean_rate_hz < 1.0;
  return rec;
}

std::vector<ExperimentRecord> run_parallel(std::vector<std::function<ExperimentRecord()>> tasks,
                                           std::size_t threads) {
  std::vector<ExperimentRecord> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, tasks.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

namespace {

std::vector<ExperimentRecord> run_grid(const ExperimentConfig& config,
                                       std::span<const double> alphas,
                                       std::span<const double> lambdas,
                                       const LabeledDataset& dataset) {
  config.sweep.validate();
  const auto folds = kfold_split(dataset, config.sweep.folds, config.sweep.fold_seed);
  auto classifier = config.classifier;
  classifier.epochs = config.sweep.epochs;
  std::vector<std::function<ExperimentRecord()>> tasks;
  for (double alpha : alphas)
    for (double lambda : lambdas)
      for (auto seed : config.sweep.structure_seeds()) {
        auto reservoir = config.reservoir;
        reservoir.alpha_w = alpha;
        reservoir.lambda = lambda;
        reservoir.seed = seed;
        tasks.push_back([reservoir, classifier, &dataset, &folds, &config] {
          return run_point(reservoir, classifier, dataset, folds, config.sweep.accuracy_window);
        });
      }
  auto records = run_parallel(std::move(tasks), config.sweep.threads);
  std::stable_sort(records.begin(), records.end(), record_key_less);
  return records;
}

}  // namespace

std::vector<ExperimentRecord> design_space_grid(const ExperimentConfig& config,
                                                const LabeledDataset& dataset) {
  if (config.sweep.alpha_w_values.size() < 2 || config.sweep.lambda_values.size() < 2)
    throw std::invalid_argument("design-space grid needs at least 2 x 2 points");
  return run_grid(config, config.sweep.alpha_w_values, config.sweep.lambda_values, dataset);
}

std::vector<ExperimentRecord> activity_sweep(const ExperimentConfig& config,
                                             std::span<const double> alpha_w_values,
                                             const LabeledDataset& dataset) {
  if (alpha_w_values.empty()) throw std::invalid_argument("activity sweep needs alpha_w values");
  const double lambda = config.reservoir.lambda;
  return run_grid(config, alpha_w_values, std::span<const double>(&lambda, 1), dataset);
}

std::vector<PointSummary> summarize(std::span<const ExperimentRecord> records) {
  std::map<std::pair<double, double>, std::vector<const ExperimentRecord*>> groups;
  for (const auto& r : records) groups[{r.alpha_w, r.lambda}].push_back(&r);
  std::vector<PointSummary> out;
  for (const auto& [key, members] : groups) {
    PointSummary s;
    s.alpha_w = key.first;
    s.lambda = key.second;
    s.runs = members.size();
    std::vector<double> acc, tau, mu, rate;
    for (const auto* r : members) {
      acc.push_back(r->final_accuracy);
      tau.push_back(r->tau_m_ms);
      if (r->mu) mu.push_back(*r->mu);
      rate.push_back(r->mean_rate_hz);
    }
    s.accuracy = stat_of(acc);
    s.tau_m = stat_of(tau);
    s.mu = stat_of(mu);
    s.rate = stat_of(rate);
    out.push_back(s);
  }
  return out;
}

void write_grid_csvs(std::span<const PointSummary> summaries, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<double> alphas, lambdas;
  for (const auto& s : summaries) {
    alphas.push_back(s.alpha_w);
    lambdas.push_back(s.lambda);
  }
  auto unique_sorted = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  unique_sorted(alphas);
  unique_sorted(lambdas);

  auto emit = [&](const std::string& name, auto field) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << "lambda";
    for (double a : alphas) out << ",alpha_w=" << format_double(a);
    out << '\n';
    for (double l : lambdas) {
      out << format_double(l);
      for (double a : alphas) {
        out << ',';
        for (const auto& s : summaries)
          if (s.alpha_w == a && s.lambda == l) out << format_double(field(s));
      }
      out << '\n';
    }
  };
  emit("accuracy_grid.csv", [](const PointSummary& s) { return s.accuracy.mean; });
  emit("tau_m_grid.csv", [](const PointSummary& s) { return s.tau_m.mean; });
  emit("mu_grid.csv", [](const PointSummary& s) { return s.mu.mean; });
}

std::optional<std::size_t> first_epoch_reaching(std::span<const double> accuracy, double target) {
  for (std::size_t e = 0; e < accuracy.size(); ++e)
    if (accuracy[e] >= target) return e + 1;
  return std::nullopt;
}

std::vector<EpochsToTarget> epochs_to_accuracy(std::span<const ExperimentRecord> records,
                                               double target) {
  std::vector<EpochsToTarget> out;
  for (const auto& r : records)
    out.push_back({r.tau_m_ms, first_epoch_reaching(r.accuracy_per_epoch, target)});
  return out;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: size mismatch");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pcc(std::span<const double>(rx), std::span<const double>(ry));
}

CorrelationReport correlation_report(std::span<const ExperimentRecord> records,
                                     double accuracy_floor) {
  if (records.size() < 3) throw std::invalid_argument("correlation report needs >= 3 records");
  CorrelationReport rep;
  rep.records = records.size();
  rep.accuracy_floor = accuracy_floor;

  auto correlate = [&rep](const std::vector<const ExperimentRecord*>& subset, bool use_mu,
                          const std::string& label) -> std::optional<double> {
    std::vector<double> metric, acc;
    for (const auto* r : subset) {
      if (use_mu && !r->mu) continue;
      metric.push_back(use_mu ? *r->mu : r->tau_m_ms);
      acc.push_back(r->final_accuracy);
    }
    if (metric.size() < 3) {
      rep.notes.push_back(label + ": fewer than 3 usable records");
      return std::nullopt;
    }
    auto v = pcc(std::span<const double>(metric), std::span<const double>(acc));
    if (!v) rep.notes.push_back(label + ": zero variance in metric or accuracy");
    return v;
  };

  std::vector<const ExperimentRecord*> all, high;
  for (const auto& r : records) {
    all.push_back(&r);
    if (r.final_accuracy >= accuracy_floor) high.push_back(&r);
  }
  rep.high_performance_records = high.size();
  rep.tau_vs_accuracy = correlate(all, false, "tau_m overall");
  rep.mu_vs_accuracy = correlate(all, true, "mu overall");
  rep.tau_vs_accuracy_high = correlate(high, false, "tau_m high-performance");
  rep.mu_vs_accuracy_high = correlate(high, true, "mu high-performance");
  return rep;
}

namespace {
constexpr const char* kRecordHeader =
    "alpha_w,lambda,seed,folds,final_accuracy,tau_m_ms,mu,clamped_modes,mean_rate_hz,"
    "low_activity,pcc_u_to_x,pcc_x_to_ro,pcc_u_to_ro,pcc_ro_to_x,pcc_x_to_u,pcc_ro_to_u,"
    "accuracy_per_epoch";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> parse_optional(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}
}  // namespace

void write_records_csv(std::span<const ExperimentRecord> records, std::ostream& out) {
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    out << format_double(r.alpha_w) << ',' << format_double(r.lambda) << ',' << r.seed << ','
        << r.folds << ',' << format_double(r.final_accuracy) << ',' << format_double(r.tau_m_ms)
        << ',' << format_optional(r.mu) << ',' << r.clamped_modes << ','
        << format_double(r.mean_rate_hz) << ',' << (r.low_activity ? 1 : 0) << ','
        << format_optional(r.pcc.u_to_x) << ',' << format_optional(r.pcc.x_to_ro) << ','
        << format_optional(r.pcc.u_to_ro) << ',' << format_optional(r.pcc.ro_to_x) << ','
        << format_optional(r.pcc.x_to_u) << ',' << format_optional(r.pcc.ro_to_u) << ',';
    for (std::size_t e = 0; e < r.accuracy_per_epoch.size(); ++e)
      out << (e ? ";" : "") << format_double(r.accuracy_per_epoch[e]);
    out << '\n';
  }
}

std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("alpha_w,lambda", 0) != 0)
    throw std::runtime_error("records CSV: missing header");
  std::vector<ExperimentRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 17) throw std::runtime_error("records CSV: expected 17 fields: " + line);
    ExperimentRecord r;
    r.alpha_w = std::stod(f[0]);
    r.lambda = std::stod(f[1]);
    r.seed = std::stoull(f[2]);
    r.folds = std::stoul(f[3]);
    r.final_accuracy = std::stod(f[4]);
    r.tau_m_ms = std::stod(f[5]);
    r.mu = parse_optional(f[6]);
    r.clamped_modes = std::stoul(f[7]);
    r.mean_rate_hz = std::stod(f[8]);
    r.low_activity = f[9] == "1";
    r.pcc.u_to_x = parse_optional(f[10]);
    r.pcc.x_to_ro = parse_optional(f[11]);
    r.pcc.u_to_ro = parse_optional(f[12]);
    r.pcc.ro_to_x = parse_optional(f[13]);
    r.pcc.x_to_u = parse_optional(f[14]);
    r.pcc.ro_to_u = parse_optional(f[15]);
    if (!f[16].empty())
      for (const auto& a : split(f[16], ';')) r.accuracy_per_epoch.push_back(std::stod(a));
    out.push_back(std::move(r));
  }
  return out;
}

void write_timings_csv(std::span<const ExperimentRecord> records, std::ostream& out) {
  out << "alpha_w,lambda,seed,wall_clock_sim_s,wall_clock_metric_s\n";
  for (const auto& r : records)
    out << format_double(r.alpha_w) << ',' << format_double(r.lambda) << ',' << r.seed << ','
        << format_double(r.wall_clock_sim) << ',' << format_double(r.wall_clock_metric) << '\n';
}

void to_json(nlohmann::json& j, const SweepConfig& c) {
  j = nlohmann::json{{"alpha_w_values", c.alpha_w_values},
                     {"lambda_values", c.lambda_values},
                     {"structures_per_point", c.structures_per_point},
                     {"epochs", c.epochs},
                     {"folds", c.folds},
                     {"accuracy_window", c.accuracy_window},
                     {"seeds", c.seeds},
                     {"fold_seed", c.fold_seed},
                     {"threads", c.threads}};
}

void from_json(const nlohmann::json& j, SweepConfig& c) {
  const SweepConfig d = c;
  c.alpha_w_values = j.value("alpha_w_values", d.alpha_w_values);
  c.lambda_values = j.value("lambda_values", d.lambda_values);
  c.structures_per_point = j.value("structures_per_point", d.structures_per_point);
  c.epochs = j.value("epochs", d.epochs);
  c.folds = j.value("folds", d.folds);
  c.accuracy_window = j.value("accuracy_window", d.accuracy_window);
  c.seeds = j.value("seeds", d.seeds);
  c.fold_seed = j.value("fold_seed", d.fold_seed);
  c.threads = j.value("threads", d.threads);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"reservoir", c.reservoir},
                     {"classifier", c.classifier},
                     {"dataset", c.dataset},
                     {"sweep", c.sweep}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  if (j.contains("reservoir")) j.at("reservoir").get_to(c.reservoir);
  if (j.contains("classifier")) j.at("classifier").get_to(c.classifier);
  if (j.contains("dataset")) j.at("dataset").get_to(c.dataset);
  if (j.contains("sweep")) j.at("sweep").get_to(c.sweep);
}

void to_json(nlohmann::json& j, const CorrelationReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j = nlohmann::json{{"records", r.records},
                     {"high_performance_records", r.high_performance_records},
                     {"accuracy_floor", r.accuracy_floor},
                     {"pcc_tau_m_accuracy", opt(r.tau_vs_accuracy)},
                     {"pcc_mu_accuracy", opt(r.mu_vs_accuracy)},
                     {"pcc_tau_m_accuracy_high", opt(r.tau_vs_accuracy_high)},
                     {"pcc_mu_accuracy_high", opt(r.mu_vs_accuracy_high)},
                     {"notes", r.notes}};
}

}  // namespace lsm
