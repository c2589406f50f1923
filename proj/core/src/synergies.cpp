#include "hbmi/synergies.hpp"

#include "hbmi/errors.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace hbmi {

namespace {

constexpr double kDenominatorFloor = 1e-12;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "synergies", msg); }

void require_nonnegative(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) fail(ErrorKind::Domain, std::string(what) + " contains non-finite values");
  if (m.size() > 0 && m.minCoeff() < 0.0) fail(ErrorKind::Domain, std::string(what) + " has negative entries");
}

}  // namespace

NmfFit nmf_fit(const Eigen::Ref<const Eigen::MatrixXd>& data, const NmfOptions& options) {
  require_nonnegative(data, "NMF input");
  const int k = options.n_synergies;
  if (k < 1) fail(ErrorKind::InvalidArgument, "need at least one synergy");
  if (data.cols() < k) {
    fail(ErrorKind::InsufficientData, "NMF with " + std::to_string(k) + " synergies needs at least " + std::to_string(k) +
                                          " samples, got " + std::to_string(data.cols()));
  }
  if (options.max_iter < 1) fail(ErrorKind::InvalidArgument, "max_iter must be positive");

  const Eigen::MatrixXd& v = data;
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> init(0.1, 1.1);
  Eigen::MatrixXd w(v.rows(), k);
  Eigen::MatrixXd h(k, v.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = init(rng);
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index i = 0; i < h.rows(); ++i) h(i, j) = init(rng);

  // Scale the random start by its least-squares optimal factor so the first
  // objective never exceeds ||V||^2.
  {
    const Eigen::MatrixXd wh = w * h;
    const double denom = wh.squaredNorm();
    if (denom > 0.0) h *= std::max((v.array() * wh.array()).sum() / denom, kDenominatorFloor);
  }

  NmfFit fit;
  auto& stats = fit.model.fit_stats;
  double prev = (v - w * h).squaredNorm();
  stats.initial_objective = prev;
  stats.objective_history.reserve(static_cast<std::size_t>(options.max_iter));

  for (int it = 1; it <= options.max_iter; ++it) {
    h.array() *= (w.transpose() * v).array() / (w.transpose() * w * h).array().max(kDenominatorFloor);
    w.array() *= (v * h.transpose()).array() / (w * (h * h.transpose())).array().max(kDenominatorFloor);
    const double obj = (v - w * h).squaredNorm();
    stats.objective_history.push_back(obj);
    stats.iterations = it;
    const double rel = prev > 0.0 ? (prev - obj) / prev : 0.0;
    prev = obj;
    if (obj == 0.0 || rel < options.tol) break;
  }
  stats.objective = prev;

  for (Eigen::Index j = 0; j < k; ++j) {
    const double norm = w.col(j).norm();
    if (!(norm > 0.0)) fail(ErrorKind::Numerical, "synergy " + std::to_string(j) + " collapsed to zero");
    w.col(j) /= norm;
    h.row(j) *= norm;
  }
  fit.model.base = std::move(w);
  fit.activations = std::move(h);
  return fit;
}

Eigen::VectorXd nnls(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const Eigen::Index n = a.cols();
  if (a.rows() != b.size()) fail(ErrorKind::InvalidArgument, "NNLS dimension mismatch");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);

  const double tol = 1e-12 * std::max(1.0, (a.transpose() * b).cwiseAbs().maxCoeff() + 0.0);
  const int max_outer = 3 * static_cast<int>(n) + 10;

  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(idx[c]);
    const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(b);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < idx.size(); ++c) s[idx[c]] = sol[static_cast<Eigen::Index>(c)];
    return s;
  };

  for (int outer = 0; outer < max_outer; ++outer) {
    const Eigen::VectorXd grad = a.transpose() * (b - a * x);  // negative gradient
    Eigen::Index best = -1;
    double best_val = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && grad[j] > best_val) {
        best_val = grad[j];
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner <= n; ++inner) {
      Eigen::VectorXd s = solve_passive();
      bool feasible = true;
      double alpha = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) {
          feasible = false;
          alpha = std::min(alpha, x[j] / (x[j] - s[j]));
        }
      }
      if (feasible) {
        x = s;
        break;
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
      }
    }
  }
  return x.cwiseMax(0.0);
}

Eigen::VectorXd nmf_transform(const NmfModel& model, const Eigen::Ref<const Eigen::VectorXd>& rms) {
  if (rms.size() != model.channels()) {
    fail(ErrorKind::InvalidArgument, "RMS vector has " + std::to_string(rms.size()) + " channels, base expects " +
                                         std::to_string(model.channels()));
  }
  require_nonnegative(rms, "RMS vector");
  return nnls(model.base, rms);
}

}  // namespace hbmi
