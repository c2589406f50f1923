#include "hbmi/spatial_filters.hpp"

#include "hbmi/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace hbmi {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "spatial_filters", msg); }

void shrink(Eigen::MatrixXd& sigma, double gamma) {
  if (gamma <= 0.0) return;
  const double nu = sigma.trace() / static_cast<double>(sigma.rows());
  sigma *= (1.0 - gamma);
  sigma.diagonal().array() += gamma * nu;
}

// Largest-magnitude entry positive, so repeated fits give identical signs.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0.0) v = -v;
}

}  // namespace

Eigen::MatrixXd window_covariance(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  if (samples.cols() < 2) fail(ErrorKind::InsufficientData, "window covariance needs at least two samples");
  const Eigen::MatrixXd centered = samples.colwise() - samples.rowwise().mean();
  Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(samples.cols() - 1);
  return (cov + cov.transpose()) * 0.5;
}

ClassCovariance estimate_covariance_from(std::span<const Eigen::MatrixXd> window_covs, int class_id, double shrinkage) {
  if (window_covs.empty()) fail(ErrorKind::InsufficientData, "no windows for class " + std::to_string(class_id));
  if (shrinkage < 0.0 || shrinkage > 1.0) fail(ErrorKind::InvalidArgument, "shrinkage must lie in [0, 1]");
  const Eigen::Index c = window_covs.front().rows();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(c, c);
  for (const auto& cov : window_covs) {
    if (cov.rows() != c || cov.cols() != c) fail(ErrorKind::InvalidArgument, "windows differ in channel count");
    const double tr = cov.trace();
    if (tr > 0.0) acc += cov / tr;
  }
  acc /= static_cast<double>(window_covs.size());
  shrink(acc, shrinkage);
  return ClassCovariance{(acc + acc.transpose()) * 0.5, class_id, window_covs.size()};
}

ClassCovariance estimate_covariance(std::span<const Window> windows, int class_id, double shrinkage) {
  std::vector<Eigen::MatrixXd> covs;
  covs.reserve(windows.size());
  for (const auto& w : windows) {
    if (!covs.empty() && w.samples.rows() != covs.front().rows()) {
      fail(ErrorKind::InvalidArgument, "windows differ in channel count");
    }
    covs.push_back(window_covariance(w.samples));
  }
  return estimate_covariance_from(covs, class_id, shrinkage);
}

CspSolution solve_csp(const ClassCovariance& sigma1, const ClassCovariance& sigma2, int n_filters) {
  const Eigen::Index c = sigma1.sigma.rows();
  if (sigma1.sigma.cols() != c || sigma2.sigma.rows() != c || sigma2.sigma.cols() != c) {
    fail(ErrorKind::InvalidArgument, "class covariances must be square and of equal size");
  }
  if (n_filters < 1 || n_filters > c) {
    fail(ErrorKind::InvalidArgument, "cannot select " + std::to_string(n_filters) + " filters from " +
                                         std::to_string(c) + " channels");
  }
  const Eigen::MatrixXd composite = sigma1.sigma + sigma2.sigma;
  Eigen::LLT<Eigen::MatrixXd> llt(composite);
  if (llt.info() != Eigen::Success) fail(ErrorKind::Numerical, "composite covariance is not positive definite");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma1.sigma, composite,
                                                                   Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (solver.info() != Eigen::Success) fail(ErrorKind::Numerical, "generalized eigendecomposition failed");
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(c));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values[a] > values[b]; });

  const int top = (n_filters + 1) / 2;
  const int bottom = n_filters - top;
  std::vector<Eigen::Index> picked(order.begin(), order.begin() + top);
  picked.insert(picked.end(), order.end() - bottom, order.end());

  CspSolution out{Eigen::MatrixXd(c, n_filters), Eigen::VectorXd(n_filters)};
  for (int j = 0; j < n_filters; ++j) {
    const auto src = picked[static_cast<std::size_t>(j)];
    Eigen::VectorXd w = vectors.col(src);
    w /= std::sqrt(w.dot(composite * w));
    fix_sign(w);
    out.filters.col(j) = w;
    out.eigenvalues[j] = values[src];
  }
  return out;
}

CspModel fit_csp(std::span<const BandCovariances> class1, std::span<const BandCovariances> class2, std::string node_id,
                 int n_filters, double shrinkage) {
  CspModel model;
  model.node_id = std::move(node_id);
  for (std::size_t b = 0; b < 2; ++b) {
    std::vector<Eigen::MatrixXd> c1;
    std::vector<Eigen::MatrixXd> c2;
    c1.reserve(class1.size());
    c2.reserve(class2.size());
    for (const auto& w : class1) c1.push_back(w[b]);
    for (const auto& w : class2) c2.push_back(w[b]);
    const auto sol =
        solve_csp(estimate_covariance_from(c1, 1, shrinkage), estimate_covariance_from(c2, 2, shrinkage), n_filters);
    model.filters_per_band[b] = sol.filters;
    model.eigenvalues_per_band[b] = sol.eigenvalues;
  }
  return model;
}

Eigen::VectorXd log_normalized_variance(const Eigen::Ref<const Eigen::VectorXd>& variances) {
  const Eigen::VectorXd v = variances.cwiseMax(kVarianceFloor);
  return (v / v.sum()).array().log().matrix();
}

Eigen::VectorXd extract_fbcsp(const BandCovariances& band_covs, const CspModel& model) {
  Eigen::VectorXd out(model.n_features());
  Eigen::Index offset = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    const auto& w = model.filters_per_band[b];
    if (band_covs[b].rows() != w.rows()) {
      fail(ErrorKind::InvalidArgument, "window has " + std::to_string(band_covs[b].rows()) + " channels, model " +
                                           model.node_id + " expects " + std::to_string(w.rows()));
    }
    const Eigen::VectorXd var = (w.transpose() * band_covs[b] * w).diagonal();
    out.segment(offset, w.cols()) = log_normalized_variance(var);
    offset += w.cols();
  }
  return out;
}

Eigen::VectorXd extract_fbcsp(const std::array<Window, 2>& band_windows, const CspModel& model) {
  return extract_fbcsp(BandCovariances{window_covariance(band_windows[0].samples), window_covariance(band_windows[1].samples)},
                       model);
}

}  // namespace hbmi
