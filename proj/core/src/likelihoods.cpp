#include "hbmi/likelihoods.hpp"

#include "hbmi/errors.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace hbmi {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "likelihoods", msg); }

}  // namespace

KdeModel::KdeModel(Eigen::MatrixXd points, Eigen::VectorXd bandwidths, std::string state_id)
    : points_(std::move(points)), bandwidths_(std::move(bandwidths)), state_id_(std::move(state_id)) {
  if (points_.rows() < 1) fail(ErrorKind::InsufficientData, "KDE needs at least one point");
  if (bandwidths_.size() != points_.cols()) fail(ErrorKind::InvalidArgument, "one bandwidth per dimension required");
  if (!points_.allFinite()) fail(ErrorKind::Domain, "KDE points must be finite");
  if (!(bandwidths_.array() > 0.0).all() || !bandwidths_.allFinite()) {
    fail(ErrorKind::Domain, "KDE bandwidths must be positive");
  }
  inv_bandwidths_ = bandwidths_.cwiseInverse();
  scaled_points_ = points_ * inv_bandwidths_.asDiagonal();
  const auto d = static_cast<double>(points_.cols());
  log_norm_ = -std::log(static_cast<double>(points_.rows())) - bandwidths_.array().log().sum() -
              0.5 * d * std::log(2.0 * std::numbers::pi);
}

double KdeModel::logpdf(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) {
    fail(ErrorKind::InvalidArgument, "feature has dimension " + std::to_string(x.size()) + ", KDE " + state_id_ +
                                         " expects " + std::to_string(dim()));
  }
  if (!x.allFinite()) fail(ErrorKind::Domain, "feature vector must be finite");
  const Eigen::RowVectorXd xs = x.cwiseProduct(inv_bandwidths_).transpose();
  const Eigen::Index n = size();
  // exponent_i = -0.5 * ||(x - p_i) / h||^2, evaluated column by column for cache locality.
  Eigen::VectorXd expo = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < dim(); ++j) {
    expo.array() -= (scaled_points_.col(j).array() - xs[j]).square();
  }
  expo *= 0.5;
  const double peak = expo.maxCoeff();
  const double sum = (expo.array() - peak).exp().sum();
  return log_norm_ + peak + std::log(sum);
}

Eigen::VectorXd silverman_bandwidths(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const Eigen::Index n = points.rows();
  const Eigen::Index d = points.cols();
  if (n < 2) fail(ErrorKind::InsufficientData, "bandwidth selection needs at least two points, got " + std::to_string(n));
  const double factor =
      std::pow(4.0 / ((static_cast<double>(d) + 2.0) * static_cast<double>(n)), 1.0 / (static_cast<double>(d) + 4.0));
  const Eigen::RowVectorXd mean = points.colwise().mean();
  Eigen::VectorXd h(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = (points.col(j).array() - mean[j]).square().sum() / static_cast<double>(n - 1);
    h[j] = std::max(std::sqrt(var), kBandwidthFloor) * factor;
  }
  return h;
}

KdeModel kde_fit(const Eigen::Ref<const Eigen::MatrixXd>& points, std::string state_id) {
  if (points.rows() < 2) {
    fail(ErrorKind::InsufficientData, "KDE " + state_id + " needs at least two points, got " +
                                          std::to_string(points.rows()));
  }
  if (!points.allFinite()) fail(ErrorKind::Domain, "KDE points must be finite");
  return KdeModel(points, silverman_bandwidths(points), std::move(state_id));
}

double kde_logpdf(const KdeModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) { return model.logpdf(x); }

}  // namespace hbmi
