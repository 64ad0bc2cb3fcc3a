// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Sweeps run at desk scale (10 classes x 20 samples, 20
// epochs, 2-fold, last-5-epoch accuracy, 3 structure seeds).

#include "lsm/harness.hpp"
#include "lsm/reservoir.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace lsm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const std::string& id, const std::string& title, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("[%s] %s: %s | %s\n", id.c_str(), title.c_str(), pass ? "PASS" : "FAIL",
              detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("none"); }

template <class Seq>
std::string join(const Seq& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + fmt(x);
  return "[" + s + "]";
}

Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
  return m;
}

void criterion_pinv() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<Eigen::Index> rows(1, 60), cols(1, 40);
  double worst = 0.0;
  int deficient = 0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index p = rows(rng), q = cols(rng);
    Eigen::MatrixXd m;
    if (i % 3 == 0 && std::min(p, q) > 1) {
      const Eigen::Index r = std::min(p, q) / 2;
      m = gaussian(p, r, rng) * gaussian(r, q, rng);
      ++deficient;
    } else {
      m = gaussian(p, q, rng);
    }
    const auto mp = pinv(m);
    const Eigen::MatrixXd a = m * mp, b = mp * m;
    worst = std::max({worst, (m * mp * m - m).norm(), (mp * m * mp - mp).norm(),
                      (a - a.transpose()).norm(), (b - b.transpose()).norm()});
  }
  const double secs = seconds_since(t0);
  report("1", "pseudoinverse Penrose conditions", worst < 1e-8 && secs < 1.0,
         "max residual " + fmt(worst) + " over 50 matrices (" + std::to_string(deficient) +
             " rank-deficient), " + fmt(secs) + " s");
}

void criterion_sysid() {
  const auto t0 = Clock::now();
  const Eigen::Index n = 20, m = 5, t = 2000;
  std::mt19937_64 rng(2);
  Eigen::MatrixXd a = gaussian(n, n, rng);
  a *= 0.9 / Eigen::EigenSolver<Eigen::MatrixXd>(a).eigenvalues().cwiseAbs().maxCoeff();
  const Eigen::MatrixXd b = gaussian(n, m, rng);
  RateMatrix u, x;
  u.values = gaussian(m, t, rng);
  x.values.resize(n, t);
  x.values.col(0) = gaussian(n, 1, rng);
  for (Eigen::Index k = 0; k + 1 < t; ++k)
    x.values.col(k + 1) = a * x.values.col(k) + b * u.values.col(k);
  const std::vector<TimeMs> starts{0};
  const auto fit = fit_ab(x, u, starts);
  const double ea = (fit.a - a).norm() / a.norm();
  const double eb = (fit.b - b).norm() / b.norm();
  const auto xh = predict(fit.a, fit.b, u, x.values.col(0));
  const double ex = (xh.values - x.values).norm() / x.values.norm();
  const double secs = seconds_since(t0);
  report("2", "system identification recovery", ea < 1e-6 && eb < 1e-6 && ex < 1e-6 && secs < 5.0,
         "rel err A " + fmt(ea) + ", B " + fmt(eb) + ", X " + fmt(ex) + ", " + fmt(secs) + " s");
}

void criterion_kernel() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed)
    for (auto [tau1, tau2] : {std::pair{8.0, 4.0}, std::pair{4.0, 2.0}}) {
      std::mt19937_64 rng(seed);
      std::bernoulli_distribution coin(0.05);
      std::normal_distribution<double> weight(0.0, 4.0);
      std::vector<std::pair<TimeMs, double>> spikes;
      for (TimeMs t = 0; t < 500; ++t)
        if (coin(rng)) spikes.push_back({t, weight(rng)});
      SynapticAccumulators acc(1, {tau1, tau2}, 1.0);
      std::size_t next = 0;
      for (TimeMs t = 0; t < 500; ++t) {
        if (t > 0) acc.advance();
        for (; next < spikes.size() && spikes[next].first == t; ++next)
          acc.deliver(0, spikes[next].second);
        double direct = 0.0;
        for (const auto& [ts, w] : spikes) {
          const double dt = static_cast<double>(t - ts);
          if (dt >= 0) direct += w * (std::exp(-dt / tau1) - std::exp(-dt / tau2)) / (tau1 - tau2);
        }
        worst = std::max(worst, std::abs(acc.current(0) - direct));
      }
    }
  report("3", "synapse kernel equivalence", worst < 1e-9,
         "max abs error " + fmt(worst) + " over 20 random 500 ms trains");
}

// Calcium just after the decay phase that follows `periods` spikes.
double calcium_after(int periods, TimeMs period, double tau_c) {
  double c = 0.0;
  for (int p = 0; p < periods; ++p) {
    c = calcium_update(c, true, 1.0, tau_c);
    for (TimeMs k = 1; k < period; ++k) c = calcium_update(c, false, 1.0, tau_c);
  }
  return c * std::exp(-1.0 / tau_c);
}

void criterion_calcium() {
  const double tau_c = ClassifierConfig{}.tau_c;
  const TimeMs period = 64;
  const double cs = 1.0 / (std::exp(static_cast<double>(period) / tau_c) - 1.0);
  const double e20 = std::abs(calcium_after(20, period, tau_c) - cs);
  const double e21 = std::abs(calcium_after(21, period, tau_c) - cs);
  // The transient after n periods is exactly c_s * exp(-n T_s / tau_c).
  const double bound = cs * std::exp(-20.0 * static_cast<double>(period) / tau_c);
  report("4", "calcium steady state", e20 < 1e-9,
         "T_s = tau_c = 64 ms, c_s = " + fmt(cs) + "; error after 20 periods " + fmt(e20) +
             " (closed-form transient " + fmt(bound) + "), after 21 periods " + fmt(e21));
}

struct Point {
  double alpha = 0.0, lambda = 0.0;
  double accuracy = 0.0, tau_m = 0.0, rate = 0.0;
  std::optional<double> mu;
  std::optional<double> forward, reverse, u_to_x, x_to_ro, ro_to_x;
};

std::optional<double> mean_of(const std::vector<std::optional<double>>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& x : v)
    if (x) {
      s += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

// Seed-averaged view of records that share (alpha_w, lambda), in key order.
std::vector<Point> points_of(const std::vector<ExperimentRecord>& records) {
  std::map<std::pair<double, double>, std::vector<const ExperimentRecord*>> groups;
  for (const auto& r : records) groups[{r.alpha_w, r.lambda}].push_back(&r);
  std::vector<Point> out;
  for (const auto& [key, rs] : groups) {
    Point p;
    p.alpha = key.first;
    p.lambda = key.second;
    std::vector<std::optional<double>> mu, fw, rv, ux, xr, rx;
    for (const auto* r : rs) {
      p.accuracy += r->final_accuracy / static_cast<double>(rs.size());
      p.tau_m += r->tau_m_ms / static_cast<double>(rs.size());
      p.rate += r->mean_rate_hz / static_cast<double>(rs.size());
      mu.push_back(r->mu);
      fw.push_back(r->pcc.forward_mean());
      rv.push_back(r->pcc.reverse_mean());
      ux.push_back(r->pcc.u_to_x);
      xr.push_back(r->pcc.x_to_ro);
      rx.push_back(r->pcc.ro_to_x);
    }
    p.mu = mean_of(mu);
    p.forward = mean_of(fw);
    p.reverse = mean_of(rv);
    p.u_to_x = mean_of(ux);
    p.x_to_ro = mean_of(xr);
    p.ro_to_x = mean_of(rx);
    out.push_back(p);
  }
  return out;
}

ExperimentConfig desk_config() {
  ExperimentConfig cfg;
  cfg.dataset.samples_per_class = 20;
  cfg.sweep.epochs = 20;
  cfg.sweep.folds = 2;
  cfg.sweep.accuracy_window = 5;
  cfg.sweep.seeds = {1, 2, 3};
  return cfg;
}

void criterion_activity(const ExperimentConfig& cfg, const LabeledDataset& ds,
                        std::vector<ExperimentRecord>& all) {
  const auto t0 = Clock::now();
  const std::vector<double> alphas{0.5, 0.8, 2.0, 5.0};
  const auto records = activity_sweep(cfg, alphas, ds);
  all.insert(all.end(), records.begin(), records.end());
  const auto pts = points_of(records);
  std::vector<double> rate, err, tau;
  for (const auto& p : pts) {
    rate.push_back(p.rate);
    err.push_back(1.0 - p.accuracy);
    tau.push_back(p.tau_m);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < rate.size(); ++i) monotone = monotone && rate[i] > rate[i - 1];
  const double err_inner = *std::min_element(err.begin() + 1, err.end() - 1);
  const bool err_interior = err_inner < std::min(err.front(), err.back());
  const double tau_inner = *std::max_element(tau.begin() + 1, tau.end() - 1);
  const bool tau_interior = tau_inner > std::max(tau.front(), tau.back());
  report("5", "activity study", monotone && err_interior && tau_interior,
         "alpha_w " + join(alphas) + ": rate Hz " + join(rate) + (monotone ? " monotone" : " NOT monotone") +
             "; error " + join(err) + (err_interior ? " interior min" : " no interior min") +
             "; tau_M ms " + join(tau) + (tau_interior ? " interior max" : " no interior max") +
             "; " + fmt(seconds_since(t0)) + " s");

  // Supplementary: the default point against the reservoir-less baseline on
  // the same folds.
  auto classifier = cfg.classifier;
  classifier.epochs = cfg.sweep.epochs;
  const auto folds = kfold_split(ds, cfg.sweep.folds, cfg.sweep.fold_seed);
  const double base =
      baseline_reservoirless(ds, folds, classifier, cfg.sweep.accuracy_window).final_accuracy;
  const double at08 = pts[1].accuracy;
  report("S1", "alpha_w = 0.8, lambda = 2 beats the reservoir-less baseline", at08 > base,
         "reservoir " + fmt(at08) + " vs baseline " + fmt(base));
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

void criterion_metric_sweep(const ExperimentConfig& cfg, const LabeledDataset& ds,
                            std::vector<ExperimentRecord>& all) {
  const auto t0 = Clock::now();
  const auto alphas = linspace(0.1, 4.0, 12);
  const auto records = activity_sweep(cfg, alphas, ds);
  all.insert(all.end(), records.begin(), records.end());
  const auto rep = correlation_report(records, 0.85);
  const bool pass = rep.tau_vs_accuracy && rep.mu_vs_accuracy && *rep.tau_vs_accuracy >= 0.6 &&
                    *rep.tau_vs_accuracy >= *rep.mu_vs_accuracy + 0.2;
  const auto pts = points_of(records);
  std::vector<double> acc, tau;
  std::vector<std::optional<double>> mu;
  for (const auto& p : pts) {
    acc.push_back(p.accuracy);
    tau.push_back(p.tau_m);
    mu.push_back(p.mu);
  }
  std::string mus;
  for (const auto& m : mu) mus += (mus.empty() ? "" : ", ") + fmt(m);
  report("6", "tau_M vs mu correlation with accuracy (alpha_w sweep)", pass,
         "PCC(tau_M, acc) " + fmt(rep.tau_vs_accuracy) + ", PCC(mu, acc) " + fmt(rep.mu_vs_accuracy) +
             " over " + std::to_string(records.size()) + " records; accuracy " + join(acc) +
             "; tau_M " + join(tau) + "; mu [" + mus + "]; " + fmt(seconds_since(t0)) + " s");

  // Supplementary: mu non-decreasing in alpha_w at fixed lambda.
  std::size_t drops = 0;
  for (std::size_t i = 1; i < mu.size(); ++i)
    if (mu[i] && mu[i - 1] && *mu[i] < *mu[i - 1]) ++drops;
  report("S2", "mu non-decreasing in alpha_w", drops == 0,
         std::to_string(drops) + " decreases along the 12-point sweep");

  const auto best = std::max_element(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.accuracy < b.accuracy;
  });
  const bool fw = best->forward && best->reverse && *best->forward > *best->reverse;
  const bool ux = best->u_to_x && *best->u_to_x >= 0.8;
  report("8", "forward vs reverse correlations at the best sweep point", fw && ux,
         "alpha_w " + fmt(best->alpha) + " (accuracy " + fmt(best->accuracy) + "): forward mean " +
             fmt(best->forward) + ", reverse mean " + fmt(best->reverse) + ", U->X " +
             fmt(best->u_to_x));
  const bool dim = best->x_to_ro && best->ro_to_x && *best->x_to_ro > *best->ro_to_x;
  report("S3", "X->Ro PCC exceeds Ro->X PCC at the best sweep point", dim,
         "X->Ro " + fmt(best->x_to_ro) + ", Ro->X " + fmt(best->ro_to_x));
}

void criterion_grid(const ExperimentConfig& base, const LabeledDataset& ds,
                    std::vector<ExperimentRecord>& all) {
  const auto t0 = Clock::now();
  auto cfg = base;
  cfg.sweep.alpha_w_values = {0.5, 1.0, 2.0, 3.0, 4.0};
  cfg.sweep.lambda_values = {1.0, 1.5, 2.0, 2.5, 3.0};
  const auto records = design_space_grid(cfg, ds);
  all.insert(all.end(), records.begin(), records.end());
  double floor = 0.85;
  std::size_t above = 0;
  for (const auto& r : records)
    if (r.final_accuracy > floor) ++above;
  std::string subset = "accuracy > 85%";
  if (above == 0) {
    std::vector<double> acc;
    for (const auto& r : records) acc.push_back(r.final_accuracy);
    std::sort(acc.begin(), acc.end());
    floor = acc[(acc.size() * 3) / 4];
    subset = "top quartile (accuracy >= " + fmt(floor) + ")";
  }
  std::vector<ExperimentRecord> high;
  for (const auto& r : records)
    if (above > 0 ? r.final_accuracy > 0.85 : r.final_accuracy >= floor) high.push_back(r);
  std::optional<double> tau, mu;
  std::string note;
  if (high.size() >= 3) {
    const auto rep = correlation_report(high, 0.0);
    tau = rep.tau_vs_accuracy;
    mu = rep.mu_vs_accuracy;
    for (const auto& n : rep.notes) note += "; " + n;
  } else {
    note = "; fewer than 3 records in the subset";
  }
  report("7", "design-space grid, high-performance subset", tau && mu && *tau > *mu,
         "5x5 grid x 3 seeds, subset " + subset + " with " + std::to_string(high.size()) +
             " records: PCC(tau_M, acc) " + fmt(tau) + ", PCC(mu, acc) " + fmt(mu) + note + "; " +
             fmt(seconds_since(t0)) + " s");
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

void criterion_speedup(const ExperimentConfig& cfg, const LabeledDataset& ds) {
  auto classifier = cfg.classifier;
  classifier.epochs = cfg.sweep.epochs;
  const auto folds = kfold_split(ds, cfg.sweep.folds, cfg.sweep.fold_seed);
  std::vector<double> train, metric;
  for (int i = 0; i < 3; ++i) {
    const auto r = run_point(cfg.reservoir, classifier, ds, folds, cfg.sweep.accuracy_window);
    train.push_back(r.wall_clock_sim);
    metric.push_back(r.wall_clock_metric);
  }
  const double t = median3(train), m = median3(metric);
  report("9", "tau_M extraction speedup", t >= 100.0 * m,
         "median training " + fmt(t) + " s, median extraction " + fmt(m * 1e3) + " ms, speedup " +
             fmt(t / m) + "x (default reservoir, alpha_w " + fmt(cfg.reservoir.alpha_w) + ")");
}

void criterion_epochs(const std::vector<ExperimentRecord>& records) {
  std::vector<double> tau, epochs;
  for (const auto& e : epochs_to_accuracy(records, 0.8))
    if (e.epochs) {
      tau.push_back(e.tau_m_ms);
      epochs.push_back(static_cast<double>(*e.epochs));
    }
  std::optional<double> rho;
  if (tau.size() >= 3) rho = spearman(tau, epochs);
  report("10", "tau_M vs epochs to 80% accuracy", rho && *rho < 0.0,
         std::to_string(tau.size()) + " of " + std::to_string(records.size()) +
             " records reach 80%; Spearman " + fmt(rho));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion_pinv();
  criterion_sysid();
  criterion_kernel();
  criterion_calcium();

  const auto cfg = desk_config();
  const auto ds = generate_dataset(cfg.dataset);
  std::vector<ExperimentRecord> all;
  criterion_activity(cfg, ds, all);
  criterion_metric_sweep(cfg, ds, all);
  criterion_grid(cfg, ds, all);
  criterion_speedup(cfg, ds);
  criterion_epochs(all);
  report("11", "TI-46 accuracy 99.09%", true,
         "reference value only, not reproducible here (proprietary dataset, preprocessing out of scope)");

  std::printf("%d failing line(s), total %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
