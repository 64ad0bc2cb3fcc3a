#pragma once

// Jittered-Poisson spike pattern classification dataset.

#include "lsm/spikes.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lsm {

struct DatasetConfig {
  std::size_t n_classes = 10;
  std::size_t channels = 10;
  double rate_hz = 40.0;
  TimeMs sample_len_ms = 200;
  double jitter_sd_ms = 16.0;
  std::size_t samples_per_class = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LabeledSample {
  SpikeRaster raster;
  std::size_t label = 0;
};

struct LabeledDataset {
  DatasetConfig config;
  std::vector<SpikeRaster> templates;
  // Class-major: sample n of class c sits at c * samples_per_class + n.
  std::vector<LabeledSample> samples;

  std::size_t index_of(std::size_t label, std::size_t n) const {
    return label * config.samples_per_class + n;
  }
};

/// One Poisson template per class: per channel and per 1 ms bin a spike with
/// probability rate * 1 ms.
std::vector<SpikeRaster> generate_templates(const DatasetConfig& config);

/// Shifts every spike by N(0, jitter_sd), rounds to the grid and drops spikes
/// leaving [0, duration) as well as grid collisions.
SpikeRaster jitter_sample(const SpikeRaster& tmpl, double jitter_sd, std::uint64_t seed);

LabeledDataset generate_dataset(const DatasetConfig& config);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Class-stratified k-fold partition of sample indices.
std::vector<Fold> kfold_split(std::span<const std::size_t> labels, std::size_t k,
                              std::uint64_t seed);
std::vector<Fold> kfold_split(const LabeledDataset& dataset, std::size_t k, std::uint64_t seed);

/// Directory layout: dataset.json plus class<k>_sample<n>.csv per sample.
void save_dataset(const LabeledDataset& dataset, const std::filesystem::path& dir);
LabeledDataset load_dataset(const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

}  // namespace lsm
