#pragma once

#include <Eigen/Core>

#include <string>

namespace hbmi {

inline constexpr double kBandwidthFloor = 1e-6;

// Product-kernel Gaussian KDE with one bandwidth per dimension.
class KdeModel {
public:
  KdeModel() = default;

  // Uses the given bandwidths as-is; a single point is allowed here so that
  // hand-built models can be evaluated. kde_fit enforces n >= 2.
  KdeModel(Eigen::MatrixXd points, Eigen::VectorXd bandwidths, std::string state_id = {});

  const Eigen::MatrixXd& points() const { return points_; }  // n x d
  const Eigen::VectorXd& bandwidths() const { return bandwidths_; }
  double log_norm() const { return log_norm_; }
  const std::string& state_id() const { return state_id_; }
  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

  double logpdf(const Eigen::Ref<const Eigen::VectorXd>& x) const;

private:
  Eigen::MatrixXd points_;
  Eigen::MatrixXd scaled_points_;  // points / bandwidths, column-major per dimension
  Eigen::VectorXd bandwidths_;
  Eigen::VectorXd inv_bandwidths_;
  double log_norm_ = 0.0;          // -log n - sum log h_j - d/2 log(2 pi)
  std::string state_id_;
};

// Silverman's rule per dimension: sigma_j (4 / ((d + 2) n))^(1 / (d + 4)),
// with zero spread floored at kBandwidthFloor.
Eigen::VectorXd silverman_bandwidths(const Eigen::Ref<const Eigen::MatrixXd>& points);

KdeModel kde_fit(const Eigen::Ref<const Eigen::MatrixXd>& points, std::string state_id = {});

double kde_logpdf(const KdeModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace hbmi
