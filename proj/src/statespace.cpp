#include "lsm/statespace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lsm {
namespace {

// Pseudoinverse of a tall matrix (rows >= cols): Householder QR first, then
// the SVD of the small triangular factor.
PseudoInverse tall_pinv(const Eigen::MatrixXd& m) {
  const Eigen::Index p = m.rows();
  const Eigen::Index q = m.cols();
  PseudoInverse out;
  if (q == 0) {
    out.value = Eigen::MatrixXd::Zero(q, p);
    return out;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sigma = svd.singularValues();
  const double tol = static_cast<double>(std::max(p, q)) *
                     std::numeric_limits<double>::epsilon() * (sigma.size() ? sigma[0] : 0.0);
  Eigen::VectorXd inv_sigma = Eigen::VectorXd::Zero(q);
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > tol) {
      inv_sigma[i] = 1.0 / sigma[i];
      ++out.rank;
    }
  // Left singular vectors of m: Q * U_r.
  Eigen::MatrixXd left = Eigen::MatrixXd::Zero(p, q);
  left.topRows(q) = svd.matrixU();
  left.applyOnTheLeft(qr.householderQ());
  out.value = svd.matrixV() * inv_sigma.asDiagonal() * left.transpose();
  return out;
}

std::vector<Eigen::Index> boundary_columns(std::span<const TimeMs> boundaries, TimeMs step,
                                           Eigen::Index n_cols) {
  std::vector<Eigen::Index> cols;
  for (auto b : boundaries) {
    if (b < 0 || b % step != 0) throw std::invalid_argument("boundary not on the step grid");
    const Eigen::Index c = b / step;
    if (c > n_cols) throw std::invalid_argument("boundary beyond the rate matrix");
    cols.push_back(c);
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

void check_pair(const RateMatrix& a, const RateMatrix& b) {
  if (a.n_steps() != b.n_steps()) throw std::invalid_argument("rate matrices differ in length");
  if (a.step != b.step) throw std::invalid_argument("rate matrices differ in step");
}

}  // namespace

PseudoInverse pseudo_inverse(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw std::invalid_argument("pinv: matrix has non-finite entries");
  if (m.rows() >= m.cols()) return tall_pinv(m);
  auto t = tall_pinv(m.transpose());
  t.value.transposeInPlace();
  return t;
}

ABFit fit_ab(const RateMatrix& x, const RateMatrix& u, std::span<const TimeMs> boundaries) {
  check_pair(x, u);
  const Eigen::Index n = x.values.rows();
  const Eigen::Index m = u.values.rows();
  const Eigen::Index t = x.values.cols();
  const auto starts = boundary_columns(boundaries, x.step, t);

  std::vector<Eigen::Index> usable;
  for (Eigen::Index k = 0; k + 1 < t; ++k)
    if (!std::binary_search(starts.begin(), starts.end(), k + 1)) usable.push_back(k);
  const auto c = static_cast<Eigen::Index>(usable.size());

  Eigen::MatrixXd regressor(n + m, c);
  Eigen::MatrixXd target(n, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    const Eigen::Index k = usable[static_cast<std::size_t>(i)];
    regressor.col(i).head(n) = x.values.col(k);
    regressor.col(i).tail(m) = u.values.col(k);
    target.col(i) = x.values.col(k + 1);
  }

  // X+1 * pinv(Z) evaluated as (X+1 Z^T) * pinv(Z Z^T); the Gram matrix is
  // (n + m) square, so the cost no longer scales with c twice.
  const Eigen::Index q = n + m;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q, q);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(regressor);
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const Eigen::MatrixXd cross = target * regressor.transpose();

  ABFit fit;
  Eigen::MatrixXd ab = Eigen::MatrixXd::Zero(n, q);
  if (c > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const auto& lambda = eig.eigenvalues();
    const double tol = static_cast<double>(q) * std::numeric_limits<double>::epsilon() *
                       std::max(lambda.maxCoeff(), 0.0);
    Eigen::VectorXd inv_lambda = Eigen::VectorXd::Zero(q);
    for (Eigen::Index i = 0; i < q; ++i)
      if (lambda[i] > tol) {
        inv_lambda[i] = 1.0 / lambda[i];
        ++fit.diagnostics.rank;
      }
    const Eigen::MatrixXd& v = eig.eigenvectors();
    ab.noalias() = ((cross * v) * inv_lambda.asDiagonal()) * v.transpose();
  }
  fit.a = ab.leftCols(n);
  fit.b = ab.rightCols(m);
  // ||X+1 - AB Z||^2 expanded through the Gram and cross products.
  const double sq = target.squaredNorm() - 2.0 * (ab.cwiseProduct(cross)).sum() +
                    ((ab * gram).cwiseProduct(ab)).sum();
  fit.diagnostics.residual = std::sqrt(std::max(sq, 0.0));
  fit.diagnostics.regression_columns = c;
  fit.diagnostics.underdetermined = c < n + m;
  return fit;
}

Eigen::MatrixXd fit_static_map(const RateMatrix& target, const RateMatrix& source) {
  check_pair(target, source);
  return target.values * pinv(source.values);
}

RateMatrix predict(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const RateMatrix& u,
                   const Eigen::VectorXd& x0) {
  if (a.rows() != a.cols() || b.rows() != a.rows() || x0.size() != a.rows() ||
      b.cols() != u.values.rows())
    throw std::invalid_argument("predict: inconsistent dimensions");
  RateMatrix out;
  out.step = u.step;
  out.window = u.window;
  out.values.resize(a.rows(), u.values.cols());
  if (u.values.cols() == 0) return out;
  out.values.col(0) = x0;
  for (Eigen::Index k = 0; k + 1 < u.values.cols(); ++k)
    out.values.col(k + 1).noalias() = a * out.values.col(k) + b * u.values.col(k);
  return out;
}

RateMatrix predict_anchored(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const RateMatrix& u, const RateMatrix& x_true,
                            std::span<const TimeMs> boundaries) {
  check_pair(u, x_true);
  if (x_true.values.rows() != a.rows()) throw std::invalid_argument("predict: state size mismatch");
  if (b.cols() != u.values.rows() || b.rows() != a.rows() || a.rows() != a.cols())
    throw std::invalid_argument("predict: inconsistent dimensions");
  const Eigen::Index t = u.values.cols();
  auto starts = boundary_columns(boundaries, u.step, t);
  if (starts.empty() || starts.front() != 0) starts.insert(starts.begin(), 0);

  RateMatrix out;
  out.step = u.step;
  out.window = u.window;
  out.values.resize(a.rows(), t);
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const Eigen::Index begin = starts[s];
    const Eigen::Index end = s + 1 < starts.size() ? starts[s + 1] : t;
    if (begin >= end) continue;
    out.values.col(begin) = x_true.values.col(begin);
    for (Eigen::Index k = begin; k + 1 < end; ++k)
      out.values.col(k + 1).noalias() = a * out.values.col(k) + b * u.values.col(k);
  }
  return out;
}

RateMatrix apply_map(const Eigen::MatrixXd& map, const RateMatrix& source) {
  if (map.cols() != source.values.rows()) throw std::invalid_argument("apply_map: size mismatch");
  RateMatrix out;
  out.step = source.step;
  out.window = source.window;
  out.values = map * source.values;
  return out;
}

std::optional<double> pcc(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("pcc: arguments differ in size");
  if (p.size() < 2) throw std::invalid_argument("pcc: needs at least two entries");
  const auto n = static_cast<double>(p.size());
  double mp = 0.0, mq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mq += q[i];
  }
  mp /= n;
  mq /= n;
  double spq = 0.0, spp = 0.0, sqq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dp = p[i] - mp;
    const double dq = q[i] - mq;
    spq += dp * dq;
    spp += dp * dp;
    sqq += dq * dq;
  }
  if (spp <= 0.0 || sqq <= 0.0) return std::nullopt;
  return std::clamp(spq / std::sqrt(spp * sqq), -1.0, 1.0);
}

std::optional<double> pcc(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  if (p.rows() != q.rows() || p.cols() != q.cols())
    throw std::invalid_argument("pcc: arguments differ in shape");
  return pcc(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
             std::span<const double>(q.data(), static_cast<std::size_t>(q.size())));
}

MemoryMetric memory_metric(const Eigen::MatrixXd& a, double step_ms, double epsilon) {
  if (a.rows() != a.cols()) throw std::invalid_argument("memory_metric: A must be square");
  MemoryMetric out;
  if (a.rows() == 0) return out;
  const double cap = 1.0 - epsilon;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double mag = std::abs(a(i, i));
    if (!(mag < cap)) {  // also catches NaN
      mag = cap;
      ++out.clamped_modes;
    }
    sum += step_ms / (1.0 - mag);
  }
  out.tau_m_ms = sum / static_cast<double>(a.rows());
  return out;
}

LyapunovResult lyapunov(std::span<const LyapunovPair> pairs) {
  LyapunovResult out;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pr = pairs[i];
    if (pr.u1.rows() != pr.u2.rows() || pr.u1.cols() != pr.u2.cols() ||
        pr.x1.rows() != pr.x2.rows() || pr.x1.cols() != pr.x2.cols())
      throw std::invalid_argument("lyapunov: paired trajectories differ in shape");
    const double du = (pr.u1 - pr.u2).norm();
    const double dx = (pr.x1 - pr.x2).norm();
    if (du == 0.0 || dx == 0.0) {
      out.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      out.skipped.push_back(i);
      continue;
    }
    const double mu = std::log(dx / du);
    out.per_class.push_back(mu);
    sum += mu;
    ++used;
  }
  if (used > 0) out.mu = sum / static_cast<double>(used);
  return out;
}

namespace {
std::optional<double> mean_of(std::initializer_list<std::optional<double>> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}
}  // namespace

std::optional<double> TransformationPccs::forward_mean() const {
  return mean_of({u_to_x, x_to_ro, u_to_ro});
}

std::optional<double> TransformationPccs::reverse_mean() const {
  return mean_of({ro_to_x, x_to_u, ro_to_u});
}

TransformationPccs transformation_suite(const RateSet& fit, const RateSet& eval) {
  const auto ab = fit_ab(fit.x, fit.u, fit.boundaries);
  const Eigen::MatrixXd w = fit_w(fit.x, fit.ro);
  const Eigen::MatrixXd ro_to_x = fit_static_map(fit.x, fit.ro);
  const Eigen::MatrixXd x_to_u = fit_static_map(fit.u, fit.x);

  const auto x_hat = predict_anchored(ab.a, ab.b, eval.u, eval.x, eval.boundaries);
  const auto x_back = apply_map(ro_to_x, eval.ro);

  TransformationPccs out;
  out.u_to_x = pcc(x_hat.values, eval.x.values);
  out.x_to_ro = pcc(apply_map(w, eval.x).values, eval.ro.values);
  out.u_to_ro = pcc(apply_map(w, x_hat).values, eval.ro.values);
  out.ro_to_x = pcc(x_back.values, eval.x.values);
  out.x_to_u = pcc(apply_map(x_to_u, eval.x).values, eval.u.values);
  out.ro_to_u = pcc(apply_map(x_to_u, x_back).values, eval.u.values);
  return out;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j = nlohmann::json{{"tau_m_ms", r.tau_m_ms},
                     {"mu", opt(r.mu)},
                     {"pcc_u_to_x", opt(r.pcc.u_to_x)},
                     {"pcc_x_to_ro", opt(r.pcc.x_to_ro)},
                     {"pcc_u_to_ro", opt(r.pcc.u_to_ro)},
                     {"pcc_ro_to_x", opt(r.pcc.ro_to_x)},
                     {"pcc_x_to_u", opt(r.pcc.x_to_u)},
                     {"pcc_ro_to_u", opt(r.pcc.ro_to_u)},
                     {"clamped_modes", r.clamped_modes}};
}

void write_matrix_csv(const Eigen::MatrixXd& m, std::ostream& out) {
  const auto old = out.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace lsm
