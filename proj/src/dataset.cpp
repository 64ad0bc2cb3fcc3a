#include "lsm/dataset.hpp"

#include "lsm/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace lsm {
namespace {
constexpr std::uint64_t kTemplateStream = 0;
constexpr std::uint64_t kJitterStream = 1;
}  // namespace

void DatasetConfig::validate() const {
  if (n_classes == 0) throw std::invalid_argument("dataset needs at least one class");
  if (channels == 0) throw std::invalid_argument("dataset needs at least one channel");
  if (rate_hz < 0.0) throw std::invalid_argument("rate must be non-negative");
  if (sample_len_ms <= 0) throw std::invalid_argument("sample length must be positive");
  if (jitter_sd_ms < 0.0) throw std::invalid_argument("jitter sd must be non-negative");
}

std::vector<SpikeRaster> generate_templates(const DatasetConfig& config) {
  config.validate();
  const double p = std::min(1.0, config.rate_hz * 1e-3);
  std::vector<SpikeRaster> templates;
  templates.reserve(config.n_classes);
  for (std::size_t c = 0; c < config.n_classes; ++c) {
    std::mt19937_64 rng(derive_seed({config.seed, kTemplateStream, c}));
    std::bernoulli_distribution spike(p);
    std::vector<SpikeEvent> events;
    for (std::size_t ch = 0; ch < config.channels; ++ch)
      for (TimeMs t = 0; t < config.sample_len_ms; ++t)
        if (spike(rng)) events.push_back({ch, t});
    templates.emplace_back(config.channels, config.sample_len_ms, std::move(events));
  }
  return templates;
}

SpikeRaster jitter_sample(const SpikeRaster& tmpl, double jitter_sd, std::uint64_t seed) {
  if (jitter_sd < 0.0) throw std::invalid_argument("jitter sd must be non-negative");
  if (jitter_sd == 0.0) return tmpl;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> shift(0.0, jitter_sd);
  std::vector<SpikeEvent> events;
  events.reserve(tmpl.size());
  for (const auto& e : tmpl.events()) {
    const auto t = static_cast<TimeMs>(std::llround(static_cast<double>(e.time) + shift(rng)));
    if (t >= 0 && t < tmpl.duration()) events.push_back({e.channel, t});
  }
  // The raster constructor sorts and drops grid collisions.
  return SpikeRaster(tmpl.n_channels(), tmpl.duration(), std::move(events));
}

LabeledDataset generate_dataset(const DatasetConfig& config) {
  LabeledDataset ds;
  ds.config = config;
  ds.templates = generate_templates(config);
  ds.samples.reserve(config.n_classes * config.samples_per_class);
  for (std::size_t c = 0; c < config.n_classes; ++c)
    for (std::size_t n = 0; n < config.samples_per_class; ++n)
      ds.samples.push_back(
          {jitter_sample(ds.templates[c], config.jitter_sd_ms,
                         derive_seed({config.seed, kJitterStream, c, n})),
           c});
  return ds;
}

std::vector<Fold> kfold_split(std::span<const std::size_t> labels, std::size_t k,
                              std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold split needs k >= 2");
  std::size_t n_classes = 0;
  for (auto l : labels) n_classes = std::max(n_classes, l + 1);
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  for (const auto& members : by_class)
    if (!members.empty() && k > members.size())
      throw std::invalid_argument("k exceeds the number of samples in a class");

  std::mt19937_64 rng(seed);
  std::vector<Fold> folds(k);
  std::size_t cursor = 0;  // continues across classes to balance fold sizes
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (auto idx : members) folds[cursor++ % k].test.push_back(idx);
  }
  for (std::size_t f = 0; f < k; ++f) {
    auto& fold = folds[f];
    std::sort(fold.test.begin(), fold.test.end());
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) fold.train.insert(fold.train.end(), folds[g].test.begin(), folds[g].test.end());
    std::sort(fold.train.begin(), fold.train.end());
  }
  return folds;
}

std::vector<Fold> kfold_split(const LabeledDataset& dataset, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> labels;
  labels.reserve(dataset.samples.size());
  for (const auto& s : dataset.samples) labels.push_back(s.label);
  return kfold_split(labels, k, seed);
}

namespace {
std::string sample_name(std::size_t c, std::size_t n) {
  return "class" + std::to_string(c) + "_sample" + std::to_string(n) + ".csv";
}
}  // namespace

void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "dataset.json");
    if (!out) throw std::runtime_error("cannot write " + (dir / "dataset.json").string());
    out << nlohmann::json(dataset.config).dump(2) << '\n';
  }
  const auto& cfg = dataset.config;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    save_raster(dataset.templates[c], dir / ("template" + std::to_string(c) + ".csv"));
    for (std::size_t n = 0; n < cfg.samples_per_class; ++n)
      save_raster(dataset.samples[dataset.index_of(c, n)].raster, dir / sample_name(c, n));
  }
}

LabeledDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "dataset.json");
  if (!in) throw std::runtime_error("cannot read " + (dir / "dataset.json").string());
  LabeledDataset ds;
  ds.config = nlohmann::json::parse(in).get<DatasetConfig>();
  const auto& cfg = ds.config;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    const auto tmpl = dir / ("template" + std::to_string(c) + ".csv");
    ds.templates.push_back(std::filesystem::exists(tmpl) ? load_raster(tmpl)
                                                         : SpikeRaster(cfg.channels, cfg.sample_len_ms));
    for (std::size_t n = 0; n < cfg.samples_per_class; ++n) {
      auto raster = load_raster(dir / sample_name(c, n));
      if (raster.n_channels() != cfg.channels || raster.duration() != cfg.sample_len_ms)
        throw std::runtime_error(sample_name(c, n) + " does not match dataset.json");
      ds.samples.push_back({std::move(raster), c});
    }
  }
  return ds;
}

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = nlohmann::json{{"n_classes", c.n_classes},       {"channels", c.channels},
                     {"rate_hz", c.rate_hz},           {"sample_len_ms", c.sample_len_ms},
                     {"jitter_sd_ms", c.jitter_sd_ms}, {"samples_per_class", c.samples_per_class},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DatasetConfig& c) {
  const DatasetConfig d = c;
  c.n_classes = j.value("n_classes", d.n_classes);
  c.channels = j.value("channels", d.channels);
  c.rate_hz = j.value("rate_hz", d.rate_hz);
  c.sample_len_ms = j.value("sample_len_ms", d.sample_len_ms);
  c.jitter_sd_ms = j.value("jitter_sd_ms", d.jitter_sd_ms);
  c.samples_per_class = j.value("samples_per_class", d.samples_per_class);
  c.seed = j.value("seed", d.seed);
}

}  // namespace lsm
