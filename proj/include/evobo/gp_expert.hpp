#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evobo/semantic_space.hpp"

namespace evobo {

// RBF kernel hyperparameters, in standardized outcome units.
struct KernelParams {
  std::array<double, 2> lengthscales{1.0, 1.0};
  double signal_variance = 1.0;
  double noise_variance = 1e-2;

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

struct Prediction {
  double mean = 0.0;
  double variance = 1.0;
};

struct TrainingPoint {
  PairFeature x;
  double y = 0.0;
};

struct FitOptions {
  int grid_points = 7;              // per searched parameter
  double grid_low = 1e-2;           // relative to data scale
  double grid_high = 1e2;
  std::size_t full_grid_max_n = 20; // above this, warm-started refinement only
  std::optional<KernelParams> warm_start;
};

// Exact GP regression on 2-D pair features. Immutable once built.
class GpExpert {
 public:
  // Prior-only expert (no observations) with default hyperparameters.
  GpExpert() = default;

  // Hyperparameters by log-marginal-likelihood search: log-space grid over
  // both lengthscales and the noise ratio with the signal variance profiled
  // in closed form, then one coordinate-descent refinement pass.
  static GpExpert fit(std::span<const TrainingPoint> data, const FitOptions& options = {});

  // Fixed hyperparameters, no search.
  static GpExpert with_params(std::span<const TrainingPoint> data, const KernelParams& params);

  Prediction predict(const PairFeature& x) const;

  // Log marginal likelihood of the standardized outcomes.
  double log_marginal_likelihood() const;

  const KernelParams& params() const { return params_; }
  std::size_t size() const { return static_cast<std::size_t>(features_.rows()); }
  double outcome_mean() const { return y_mean_; }
  double outcome_scale() const { return y_scale_; }
  double jitter() const { return jitter_; }

  double standardize(double y) const { return (y - y_mean_) / y_scale_; }
  double destandardize(double z) const { return z * y_scale_ + y_mean_; }

 private:
  void factorize();

  KernelParams params_;
  Eigen::MatrixX2d features_{0, 2};
  Eigen::VectorXd y_std_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

// log N(y; mu, sigma^2 + obs_noise_variance) under the expert's predictive.
double log_likelihood_of(const GpExpert& expert, const PairFeature& x, double y,
                         double obs_noise_variance);

double normal_log_density(double y, double mean, double variance);

// Jitter escalation ladder applied when the kernel matrix is not numerically PD.
inline constexpr std::array<double, 5> kJitterLadder{0.0, 1e-10, 1e-8, 1e-6, 1e-4};

}  // namespace evobo
