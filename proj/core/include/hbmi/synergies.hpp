#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace hbmi {

inline constexpr int kDefaultSynergies = 5;

struct NmfFitStats {
  double objective = 0.0;           // final ||V - WH||_F^2
  double initial_objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_history;  // one entry per iteration, starting after the first update
};

// Muscle-synergy base. Columns of `base` are non-negative with unit Euclidean norm.
struct NmfModel {
  Eigen::MatrixXd base;  // channels x synergies
  NmfFitStats fit_stats;

  int n_synergies() const { return static_cast<int>(base.cols()); }
  Eigen::Index channels() const { return base.rows(); }
};

struct NmfOptions {
  int n_synergies = kDefaultSynergies;
  int max_iter = 500;
  double tol = 1e-6;        // stop once the relative objective decrease drops below this
  std::uint64_t seed = 0;   // required for reproducibility; no implicit default seeding
};

struct NmfFit {
  NmfModel model;
  Eigen::MatrixXd activations;  // synergies x samples, rescaled to match the unit-norm base
};

// Lee-Seung multiplicative updates for min ||V - WH||_F^2 subject to W, H >= 0.
NmfFit nmf_fit(const Eigen::Ref<const Eigen::MatrixXd>& data, const NmfOptions& options);

// argmin_{x >= 0} ||A x - b||_2 (Lawson-Hanson active set).
Eigen::VectorXd nnls(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

// Activation levels of one RMS vector against a fitted base.
Eigen::VectorXd nmf_transform(const NmfModel& model, const Eigen::Ref<const Eigen::VectorXd>& rms);

}  // namespace hbmi
