#pragma once

#include "hbmi/signals.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

namespace hbmi {

inline constexpr double kDefaultShrinkage = 0.05;
inline constexpr int kCspFiltersPerBand = 6;
inline constexpr double kVarianceFloor = 1e-12;

struct FrequencyBand {
  double low = 0.0;
  double high = 0.0;
};

// Alpha (8-15 Hz) and beta (15-30 Hz) motor bands.
inline constexpr std::array<FrequencyBand, 2> kMotorBands{{{8.0, 15.0}, {15.0, 30.0}}};

struct ClassCovariance {
  Eigen::MatrixXd sigma;
  int class_id = 0;
  std::size_t n_windows = 0;
};

// Centered sample covariance of one window (channels x samples), divided by T-1.
Eigen::MatrixXd window_covariance(const Eigen::Ref<const Eigen::MatrixXd>& samples);

// Mean of trace-normalized window covariances followed by shrinkage towards
// (tr/C) I. `shrinkage` = 0 returns the plain trace-normalized mean.
ClassCovariance estimate_covariance(std::span<const Window> windows, int class_id,
                                    double shrinkage = kDefaultShrinkage);

// Same estimator starting from precomputed per-window covariances.
ClassCovariance estimate_covariance_from(std::span<const Eigen::MatrixXd> window_covs, int class_id,
                                         double shrinkage = kDefaultShrinkage);

struct CspSolution {
  Eigen::MatrixXd filters;      // channels x n_filters, columns by descending eigenvalue
  Eigen::VectorXd eigenvalues;  // matching generalized eigenvalues in [0, 1]
};

// Solves sigma1 w = lambda (sigma1 + sigma2) w and keeps the n/2 largest and
// n/2 smallest eigenpairs. Columns satisfy w' (sigma1 + sigma2) w = 1.
CspSolution solve_csp(const ClassCovariance& sigma1, const ClassCovariance& sigma2,
                      int n_filters = kCspFiltersPerBand);

struct CspModel {
  std::array<Eigen::MatrixXd, 2> filters_per_band;
  std::array<Eigen::VectorXd, 2> eigenvalues_per_band;
  std::array<FrequencyBand, 2> bands = kMotorBands;
  std::string node_id;

  Eigen::Index channels() const { return filters_per_band[0].rows(); }
  Eigen::Index n_features() const { return filters_per_band[0].cols() + filters_per_band[1].cols(); }
};

// Per-band window covariances for one 250 ms window.
using BandCovariances = std::array<Eigen::MatrixXd, 2>;

// Fits one CSP per band from class-conditional window covariances.
CspModel fit_csp(std::span<const BandCovariances> class1, std::span<const BandCovariances> class2,
                 std::string node_id, int n_filters = kCspFiltersPerBand, double shrinkage = kDefaultShrinkage);

// log(v_j / sum_k v_k), each variance floored at kVarianceFloor first.
Eigen::VectorXd log_normalized_variance(const Eigen::Ref<const Eigen::VectorXd>& variances);

// 12-dim FBCSP feature from the band-filtered versions of one window.
Eigen::VectorXd extract_fbcsp(const std::array<Window, 2>& band_windows, const CspModel& model);
Eigen::VectorXd extract_fbcsp(const BandCovariances& band_covs, const CspModel& model);

}  // namespace hbmi
