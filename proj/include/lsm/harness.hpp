#pragma once

// Experiment orchestration: single design points, activity sweeps over the
// synaptic scaling, (alpha_w, lambda) grids, and the reports that relate the
// surrogate metrics to classification accuracy.

#include "lsm/dataset.hpp"
#include "lsm/readout.hpp"
#include "lsm/reservoir.hpp"
#include "lsm/statespace.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lsm {

struct SweepConfig {
  std::vector<double> alpha_w_values{0.5, 0.8, 2.0, 5.0};
  std::vector<double> lambda_values{2.0};
  std::size_t structures_per_point = 4;
  std::size_t epochs = 20;
  std::size_t folds = 2;
  std::size_t accuracy_window = 5;
  std::vector<std::uint64_t> seeds;  // empty: 1..structures_per_point
  std::uint64_t fold_seed = 7;
  std::size_t threads = 0;  // 0: hardware concurrency

  std::vector<std::uint64_t> structure_seeds() const;
  void validate() const;
};

struct ExperimentConfig {
  ReservoirConfig reservoir;
  ClassifierConfig classifier;
  DatasetConfig dataset;
  SweepConfig sweep;
};

struct ExperimentRecord {
  double alpha_w = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t folds = 0;  // accuracies are averaged over this many folds
  std::vector<double> accuracy_per_epoch;
  double final_accuracy = 0.0;
  double tau_m_ms = 0.0;
  std::size_t clamped_modes = 0;
  std::optional<double> mu;
  TransformationPccs pcc;
  double mean_rate_hz = 0.0;  // reservoir rate over the fit samples
  bool low_activity = false;
  double wall_clock_sim = 0.0;     // s, reservoir simulation + readout training
  double wall_clock_metric = 0.0;  // s, simulate fit samples + fit + tau_M

  MetricReport metrics() const { return {tau_m_ms, mu, pcc, clamped_modes}; }
};

/// Samples used for the surrogate fit (index `which` of every class).
std::vector<std::size_t> one_per_class(const LabeledDataset& dataset, std::size_t which);

struct MemoryExtraction {
  MemoryMetric memory;
  ABFit fit;
  RateSet rates;  // u and x filled, ro left empty
  std::vector<SpikeRaster> responses;
};

/// Simulates the given samples, fits A and B on their rates and reads off
/// tau_M. This is the whole cost of the cheap design-space probe.
MemoryExtraction extract_memory(const Reservoir& reservoir, const LabeledDataset& dataset,
                                std::span<const std::size_t> samples);

/// Builds the reservoir, trains and tests the readout on every fold, then
/// fits the surrogate on one sample per class (held-out: a second sample per
/// class) and computes tau_M, mu and the correlation suite.
ExperimentRecord run_point(const ReservoirConfig& reservoir, const ClassifierConfig& classifier,
                           const LabeledDataset& dataset, std::span<const Fold> folds,
                           std::size_t accuracy_window);

/// Runs the tasks on a worker pool and returns results in task order.
std::vector<ExperimentRecord> run_parallel(std::vector<std::function<ExperimentRecord()>> tasks,
                                           std::size_t threads);

/// Every (alpha_w, lambda, seed) combination, sorted by that key.
std::vector<ExperimentRecord> design_space_grid(const ExperimentConfig& config,
                                                const LabeledDataset& dataset);

/// alpha_w sweep at the reservoir config's lambda.
std::vector<ExperimentRecord> activity_sweep(const ExperimentConfig& config,
                                             std::span<const double> alpha_w_values,
                                             const LabeledDataset& dataset);

struct Stat {
  double mean = 0.0;
  double sd = 0.0;  // population, one sigma
};

struct PointSummary {
  double alpha_w = 0.0;
  double lambda = 0.0;
  std::size_t runs = 0;
  Stat accuracy, tau_m, mu, rate;
};

/// Groups records by (alpha_w, lambda) and averages over structures.
std::vector<PointSummary> summarize(std::span<const ExperimentRecord> records);

/// accuracy_grid.csv, tau_m_grid.csv, mu_grid.csv: one row per lambda, one
/// column per alpha_w.
void write_grid_csvs(std::span<const PointSummary> summaries, const std::filesystem::path& dir);

struct EpochsToTarget {
  double tau_m_ms = 0.0;
  std::optional<std::size_t> epochs;  // 1-based; nullopt if never reached
};

std::optional<std::size_t> first_epoch_reaching(std::span<const double> accuracy, double target);
std::vector<EpochsToTarget> epochs_to_accuracy(std::span<const ExperimentRecord> records,
                                               double target);

/// Spearman rank correlation with average ranks for ties.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
  std::size_t records = 0;
  std::size_t high_performance_records = 0;
  double accuracy_floor = 0.0;
  std::optional<double> tau_vs_accuracy, mu_vs_accuracy;
  std::optional<double> tau_vs_accuracy_high, mu_vs_accuracy_high;
  std::vector<std::string> notes;  // why a value is missing
};

/// PCC of tau_M and mu against final accuracy, overall and on records with
/// accuracy >= accuracy_floor. Needs at least three records.
CorrelationReport correlation_report(std::span<const ExperimentRecord> records,
                                     double accuracy_floor);

void write_records_csv(std::span<const ExperimentRecord> records, std::ostream& out);
std::vector<ExperimentRecord> read_records_csv(std::istream& in);
void write_timings_csv(std::span<const ExperimentRecord> records, std::ostream& out);

void to_json(nlohmann::json& j, const SweepConfig& c);
void from_json(const nlohmann::json& j, SweepConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const CorrelationReport& r);

}  // namespace lsm
