// Command-line front end: dataset generation, single points, sweeps, the
// reservoir-less baseline and correlation reports.

#include "lsm/harness.hpp"
#include "lsm/kernels.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

lsm::ExperimentConfig load_config(const std::string& path) {
  lsm::ExperimentConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json::parse(in).get_to(cfg);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

lsm::LabeledDataset obtain_dataset(const std::string& dir, const lsm::DatasetConfig& config) {
  if (!dir.empty()) return lsm::load_dataset(dir);
  config.validate();
  return lsm::generate_dataset(config);
}

json record_json(const lsm::ExperimentRecord& r) {
  json j = r.metrics();
  j["alpha_w"] = r.alpha_w;
  j["lambda"] = r.lambda;
  j["seed"] = r.seed;
  j["folds"] = r.folds;
  j["final_accuracy"] = r.final_accuracy;
  j["accuracy_per_epoch"] = r.accuracy_per_epoch;
  j["mean_rate_hz"] = r.mean_rate_hz;
  j["low_activity"] = r.low_activity;
  j["wall_clock_sim_s"] = r.wall_clock_sim;
  j["wall_clock_metric_s"] = r.wall_clock_metric;
  return j;
}

void write_records(const fs::path& out, const std::vector<lsm::ExperimentRecord>& records) {
  std::ostringstream rec, tim;
  lsm::write_records_csv(records, rec);
  lsm::write_timings_csv(records, tim);
  write_text(out / "records.csv", rec.str());
  write_text(out / "timings.csv", tim.str());
}

std::string point_name(const lsm::ExperimentRecord& r) {
  std::ostringstream s;
  s << "alpha" << r.alpha_w << "_lambda" << r.lambda << "_seed" << r.seed;
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Liquid state machine simulator and state-space memory analyzer"};
  app.require_subcommand(1);

  std::string config_path, dataset_dir, out_dir = "out";
  std::string simd;
  app.add_option("--simd", simd, "Kernel backend: scalar or avx2");

  auto* gen = app.add_subcommand("gen-dataset", "Generate a jittered-Poisson dataset");
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_samples, gen_classes;
  gen->add_option("--config", config_path, "Experiment config JSON (dataset section)");
  gen->add_option("--seed", gen_seed, "Dataset seed");
  gen->add_option("--samples-per-class", gen_samples);
  gen->add_option("--classes", gen_classes);
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Train and analyse a single design point");
  std::optional<double> alpha_w, lambda;
  std::optional<std::size_t> epochs, folds;
  std::optional<std::uint64_t> seed;
  run->add_option("--alpha-w", alpha_w, "Synaptic scaling");
  run->add_option("--lambda", lambda, "Effective connectivity distance");
  run->add_option("--epochs", epochs);
  run->add_option("--folds", folds);
  run->add_option("--seed", seed, "Reservoir structure seed");
  run->add_option("--config", config_path);
  run->add_option("--dataset", dataset_dir, "Dataset directory (generated from config if absent)");
  run->add_option("--out", out_dir);

  auto* sweep = app.add_subcommand("sweep", "Run an alpha_w sweep or an (alpha_w, lambda) grid");
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--dataset", dataset_dir);
  sweep->add_option("--out", out_dir);

  auto* base = app.add_subcommand("baseline", "Reservoir-less readout on the input channels");
  base->add_option("--config", config_path);
  base->add_option("--dataset", dataset_dir);
  base->add_option("--epochs", epochs);
  base->add_option("--folds", folds);
  base->add_option("--out", out_dir);

  auto* report = app.add_subcommand("report", "Metric-vs-accuracy correlations from records CSVs");
  std::vector<std::string> record_files;
  double floor = 0.85, target = 0.8;
  std::string report_out;
  report->add_option("records", record_files, "records.csv files")->required();
  report->add_option("--floor", floor, "Accuracy floor of the high-performance subset");
  report->add_option("--target", target, "Target accuracy for epochs-to-accuracy");
  report->add_option("--out", report_out, "Write the JSON report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!simd.empty()) {
      const auto backend = simd == "scalar" ? lsm::kernels::Backend::kScalar
                           : simd == "avx2" ? lsm::kernels::Backend::kAvx2
                                            : throw std::invalid_argument("unknown backend " + simd);
      lsm::kernels::set_backend(backend);
    }

    if (*gen) {
      auto cfg = load_config(config_path).dataset;
      if (gen_seed) cfg.seed = *gen_seed;
      if (gen_samples) cfg.samples_per_class = *gen_samples;
      if (gen_classes) cfg.n_classes = *gen_classes;
      cfg.validate();
      lsm::save_dataset(lsm::generate_dataset(cfg), out_dir);
      std::cout << "wrote " << cfg.n_classes * cfg.samples_per_class << " samples to " << out_dir
                << '\n';
    } else if (*run) {
      auto cfg = load_config(config_path);
      if (alpha_w) cfg.reservoir.alpha_w = *alpha_w;
      if (lambda) cfg.reservoir.lambda = *lambda;
      if (seed) cfg.reservoir.seed = *seed;
      if (epochs) cfg.sweep.epochs = *epochs;
      if (folds) cfg.sweep.folds = *folds;
      cfg.reservoir.validate();
      cfg.sweep.validate();
      const auto dataset = obtain_dataset(dataset_dir, cfg.dataset);
      auto classifier = cfg.classifier;
      classifier.epochs = cfg.sweep.epochs;
      const auto split = lsm::kfold_split(dataset, cfg.sweep.folds, cfg.sweep.fold_seed);
      const auto rec =
          lsm::run_point(cfg.reservoir, classifier, dataset, split, cfg.sweep.accuracy_window);
      const fs::path out(out_dir);
      write_records(out, {rec});
      write_text(out / "metrics.json", record_json(rec).dump(2) + "\n");
      write_text(out / "config.json", json(cfg).dump(2) + "\n");
      std::cout << "accuracy " << rec.final_accuracy << "  tau_M " << rec.tau_m_ms << " ms  mu "
                << (rec.mu ? std::to_string(*rec.mu) : "n/a") << '\n';
    } else if (*sweep) {
      const auto cfg = load_config(config_path);
      const auto dataset = obtain_dataset(dataset_dir, cfg.dataset);
      const bool grid =
          cfg.sweep.alpha_w_values.size() >= 2 && cfg.sweep.lambda_values.size() >= 2;
      auto records = grid ? lsm::design_space_grid(cfg, dataset)
                          : lsm::activity_sweep(cfg, cfg.sweep.alpha_w_values, dataset);
      const fs::path out(out_dir);
      write_records(out, records);
      for (const auto& r : records)
        write_text(out / "points" / point_name(r) / "metrics.json", record_json(r).dump(2) + "\n");
      const auto summary = lsm::summarize(records);
      lsm::write_grid_csvs(summary, out);
      write_text(out / "config.json", json(cfg).dump(2) + "\n");
      std::cout << "wrote " << records.size() << " records to " << out / "records.csv" << '\n';
    } else if (*base) {
      auto cfg = load_config(config_path);
      if (epochs) cfg.sweep.epochs = *epochs;
      if (folds) cfg.sweep.folds = *folds;
      cfg.sweep.validate();
      const auto dataset = obtain_dataset(dataset_dir, cfg.dataset);
      auto classifier = cfg.classifier;
      classifier.epochs = cfg.sweep.epochs;
      const auto split = lsm::kfold_split(dataset, cfg.sweep.folds, cfg.sweep.fold_seed);
      const auto res =
          lsm::baseline_reservoirless(dataset, split, classifier, cfg.sweep.accuracy_window);
      json j{{"final_accuracy", res.final_accuracy},
             {"accuracy_per_epoch", res.accuracy_per_epoch},
             {"folds", split.size()}};
      write_text(fs::path(out_dir) / "baseline.json", j.dump(2) + "\n");
      std::cout << "baseline accuracy " << res.final_accuracy << '\n';
    } else if (*report) {
      std::vector<lsm::ExperimentRecord> records;
      for (const auto& f : record_files) {
        std::ifstream in(f);
        if (!in) throw std::runtime_error("cannot open " + f);
        auto part = lsm::read_records_csv(in);
        records.insert(records.end(), part.begin(), part.end());
      }
      json j = lsm::correlation_report(records, floor);
      std::vector<double> tau, needed;
      for (const auto& e : lsm::epochs_to_accuracy(records, target))
        if (e.epochs) {
          tau.push_back(e.tau_m_ms);
          needed.push_back(static_cast<double>(*e.epochs));
        }
      j["target_accuracy"] = target;
      j["records_reaching_target"] = tau.size();
      const auto rho = tau.size() >= 3 ? lsm::spearman(tau, needed) : std::nullopt;
      j["spearman_tau_m_epochs"] = rho ? json(*rho) : json(nullptr);
      if (report_out.empty())
        std::cout << j.dump(2) << '\n';
      else
        write_text(report_out, j.dump(2) + "\n");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
