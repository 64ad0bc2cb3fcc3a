#pragma once

// Linear state-space surrogate of reservoir rate dynamics:
//
//   X[k+1] = A X[k] + B U[k],    Ro[k] = W X[k]
//
// fitted by least squares through the Moore-Penrose pseudoinverse, plus the
// metrics read off the fit (memory timescale, Lyapunov exponent, and the
// forward/reverse prediction correlations).

#include "lsm/spikes.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace lsm {

struct PseudoInverse {
  Eigen::MatrixXd value;
  Eigen::Index rank = 0;
};

/// SVD-based pseudoinverse; singular values below max(p, q) * eps * sigma_max
/// are treated as zero. Throws std::invalid_argument on non-finite input.
PseudoInverse pseudo_inverse(const Eigen::MatrixXd& m);
inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& m) { return pseudo_inverse(m).value; }

struct FitDiagnostics {
  double residual = 0.0;             // Frobenius norm of X+1 - [A|B][X;U]
  Eigen::Index rank = 0;             // effective rank of the regressor
  Eigen::Index regression_columns = 0;
  bool underdetermined = false;      // fewer columns than N + M
};

struct ABFit {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  FitDiagnostics diagnostics;
};

/// [A|B] = X+1 * pinv([X;U]). `boundaries` are sample start times (ms);
/// transitions that cross into a new sample are left out of the regression.
ABFit fit_ab(const RateMatrix& x, const RateMatrix& u, std::span<const TimeMs> boundaries);

/// Static map target ~ M * source, M = target * pinv(source).
Eigen::MatrixXd fit_static_map(const RateMatrix& target, const RateMatrix& source);
/// Readout map W with Ro = W X.
inline Eigen::MatrixXd fit_w(const RateMatrix& x, const RateMatrix& ro) {
  return fit_static_map(ro, x);
}

struct StateSpaceModel {
  Eigen::MatrixXd a;  // N x N
  Eigen::MatrixXd b;  // N x M
  Eigen::MatrixXd w;  // L x N
  TimeMs step = 1;
  double fit_residual = 0.0;
  Eigen::Index rank_used = 0;
};

/// Free-running rollout X[k+1] = A X[k] + B U[k] starting from x0.
RateMatrix predict(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const RateMatrix& u,
                   const Eigen::VectorXd& x0);

/// Rollout restarted at every sample boundary from the true state there.
RateMatrix predict_anchored(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const RateMatrix& u, const RateMatrix& x_true,
                            std::span<const TimeMs> boundaries);

RateMatrix apply_map(const Eigen::MatrixXd& map, const RateMatrix& source);

/// Pearson correlation over all entries; nullopt when either side has zero
/// variance. Throws on shape mismatch or fewer than two entries.
std::optional<double> pcc(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);
std::optional<double> pcc(std::span<const double> p, std::span<const double> q);

struct MemoryMetric {
  double tau_m_ms = 0.0;
  std::size_t clamped_modes = 0;
};

/// Mean of h / (1 - |a_i|) over the diagonal of A, with |a_i| clamped to
/// 1 - epsilon.
MemoryMetric memory_metric(const Eigen::MatrixXd& a, double step_ms, double epsilon = 1e-3);

struct LyapunovPair {
  Eigen::MatrixXd u1, u2;  // input rates of two samples of one class
  Eigen::MatrixXd x1, x2;  // reservoir rates of the same samples
};

struct LyapunovResult {
  std::optional<double> mu;          // mean over usable classes
  std::vector<double> per_class;     // NaN where skipped
  std::vector<std::size_t> skipped;  // classes with identical inputs or identical responses
};

/// mu_i = ln(||x1 - x2||_F / ||u1 - u2||_F), averaged over classes.
LyapunovResult lyapunov(std::span<const LyapunovPair> pairs);

/// Rates of one group of samples, concatenated along time.
struct RateSet {
  RateMatrix u;
  RateMatrix x;
  RateMatrix ro;
  std::vector<TimeMs> boundaries;
};

struct TransformationPccs {
  std::optional<double> u_to_x, x_to_ro, u_to_ro;  // forward
  std::optional<double> ro_to_x, x_to_u, ro_to_u;  // reverse

  std::optional<double> forward_mean() const;
  std::optional<double> reverse_mean() const;
};

/// Fits all maps on `fit` and scores their predictions on `eval`. Forward:
/// U->X (dynamic, anchored rollout), X->Ro (W), U->X->Ro. Reverse maps are
/// static pinv fits with the roles swapped: Ro->X, X->U, Ro->X->U.
TransformationPccs transformation_suite(const RateSet& fit, const RateSet& eval);

struct MetricReport {
  double tau_m_ms = 0.0;
  std::optional<double> mu;
  TransformationPccs pcc;
  std::size_t clamped_modes = 0;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out);

}  // namespace lsm
