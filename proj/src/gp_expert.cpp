#include "evobo/gp_expert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "evobo/errors.hpp"

namespace evobo {
namespace {

constexpr double kMinLengthscale = 1e-3;
constexpr double kMaxLengthscale = 1e3;
constexpr double kMinSignal = 1e-4;
constexpr double kMaxSignal = 1e4;
constexpr double kMinNoiseRatio = 1e-6;
constexpr double kMaxNoiseRatio = 1e4;
constexpr double kVarianceFloor = 1e-12;
constexpr double kLog2Pi = 1.8378770664093454836;

// Hyperparameters under search: two lengthscales and the noise-to-signal
// ratio. The signal variance is profiled out exactly for each candidate.
struct SearchPoint {
  double l0;
  double l1;
  double ratio;
};

struct Scored {
  SearchPoint point;
  double lml = -std::numeric_limits<double>::infinity();
  double signal = 1.0;
};

class ProfiledObjective {
 public:
  ProfiledObjective(const Eigen::MatrixX2d& x, const Eigen::VectorXd& y) : y_(y) {
    const Eigen::Index n = x.rows();
    sq0_.resize(n, n);
    sq1_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double a = x(i, 0) - x(j, 0);
        const double b = x(i, 1) - x(j, 1);
        sq0_(i, j) = a * a;
        sq1_(i, j) = b * b;
      }
    }
  }

  Scored evaluate(const SearchPoint& p) {
    const double n = static_cast<double>(y_.size());
    const Eigen::Index m = y_.size();
    const double c0 = -0.5 / (p.l0 * p.l0);
    const double c1 = -0.5 / (p.l1 * p.l1);
    // LLT only reads the lower triangle
    Eigen::MatrixXd a(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      a(j, j) = 1.0 + p.ratio;
      for (Eigen::Index i = j + 1; i < m; ++i) a(i, j) = std::exp(c0 * sq0_(i, j) + c1 * sq1_(i, j));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    Scored s{p};
    if (llt.info() != Eigen::Success) return s;
    const double quad = y_.dot(llt.solve(y_));
    double logdet = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
    const double signal = std::clamp(quad / n, kMinSignal, kMaxSignal);
    s.signal = signal;
    s.lml = -0.5 * quad / signal - 0.5 * logdet - 0.5 * n * std::log(signal) - 0.5 * n * kLog2Pi;
    if (!std::isfinite(s.lml)) s.lml = -std::numeric_limits<double>::infinity();
    return s;
  }

 private:
  Eigen::VectorXd y_;
  Eigen::MatrixXd sq0_;
  Eigen::MatrixXd sq1_;
};

// Both pair features span an interval of width 2 ([-1, 1] and [0, 2]);
// lengthscales are searched relative to that span.
constexpr double kFeatureSpan = 2.0;

// Search box: the grid's range, intersected with the hard parameter bounds.
struct SearchBox {
  SearchPoint lo;
  SearchPoint hi;
};

SearchBox search_box(const FitOptions& o) {
  return {{std::max(kMinLengthscale, kFeatureSpan * o.grid_low), std::max(kMinLengthscale, kFeatureSpan * o.grid_low),
           std::max(kMinNoiseRatio, o.grid_low)},
          {std::min(kMaxLengthscale, kFeatureSpan * o.grid_high), std::min(kMaxLengthscale, kFeatureSpan * o.grid_high),
           std::min(kMaxNoiseRatio, o.grid_high)}};
}

SearchPoint clamp_point(SearchPoint p, const SearchBox& box) {
  p.l0 = std::clamp(p.l0, box.lo.l0, box.hi.l0);
  p.l1 = std::clamp(p.l1, box.lo.l1, box.hi.l1);
  p.ratio = std::clamp(p.ratio, box.lo.ratio, box.hi.ratio);
  return p;
}

// One pass of multiplicative coordinate descent around the incumbent.
// Warm-started fits only take the short steps: the previous optimum moves little per observation.
Scored refine(ProfiledObjective& objective, Scored best, double grid_ratio, const SearchBox& box, bool short_only) {
  std::vector<double> steps{std::pow(grid_ratio, 0.25), std::pow(grid_ratio, -0.25)};
  if (!short_only) steps.insert(steps.begin(), {std::pow(grid_ratio, 0.5), std::pow(grid_ratio, -0.5)});
  for (int coord = 0; coord < 3; ++coord) {
    Scored round_best = best;
    for (double step : steps) {
      SearchPoint p = best.point;
      if (coord == 0) p.l0 *= step;
      if (coord == 1) p.l1 *= step;
      if (coord == 2) p.ratio *= step;
      p = clamp_point(p, box);
      Scored s = objective.evaluate(p);
      if (s.lml > round_best.lml) round_best = s;
    }
    best = round_best;
  }
  return best;
}

KernelParams to_params(const Scored& s) {
  KernelParams k;
  k.lengthscales = {s.point.l0, s.point.l1};
  k.signal_variance = s.signal;
  k.noise_variance = s.point.ratio * s.signal;
  return k;
}

void validate_params(const KernelParams& p) {
  const auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!ok(p.lengthscales[0]) || !ok(p.lengthscales[1]) || !ok(p.signal_variance) ||
      !ok(p.noise_variance)) {
    throw ValidationError("kernel parameters must be strictly positive and finite");
  }
}

}  // namespace

double normal_log_density(double y, double mean, double variance) {
  const double r = y - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + r * r / variance);
}

GpExpert GpExpert::with_params(std::span<const TrainingPoint> data, const KernelParams& params) {
  validate_params(params);
  GpExpert e;
  e.params_ = params;
  const auto n = static_cast<Eigen::Index>(data.size());
  e.features_.resize(n, 2);
  Eigen::VectorXd raw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = data[static_cast<std::size_t>(i)];
    if (!std::isfinite(p.x.dot) || !std::isfinite(p.x.distance) || !std::isfinite(p.y)) {
      throw ValidationError("training data must be finite");
    }
    e.features_(i, 0) = p.x.dot;
    e.features_(i, 1) = p.x.distance;
    raw(i) = p.y;
  }
  if (n > 0) {
    const double mean = raw.mean();
    const double sd = std::sqrt((raw.array() - mean).square().mean());
    if (sd >= 1e-9) {
      e.y_mean_ = mean;
      e.y_scale_ = sd;
    }
  }
  e.y_std_ = (raw.array() - e.y_mean_) / e.y_scale_;
  e.factorize();
  return e;
}

GpExpert GpExpert::fit(std::span<const TrainingPoint> data, const FitOptions& options) {
  // Standardization and feature matrix come from a default-parameter build.
  GpExpert base = with_params(data, options.warm_start.value_or(KernelParams{}));
  if (data.empty()) return base;

  ProfiledObjective objective(base.features_, base.y_std_);
  const int g = std::max(options.grid_points, 2);
  const double grid_ratio = std::pow(options.grid_high / options.grid_low, 1.0 / (g - 1));

  const SearchBox box = search_box(options);
  Scored best;
  const bool warm = options.warm_start && data.size() > options.full_grid_max_n;
  if (warm) {
    const KernelParams& w = *options.warm_start;
    best = objective.evaluate(
        clamp_point({w.lengthscales[0], w.lengthscales[1], w.noise_variance / w.signal_variance}, box));
  } else {
    std::vector<double> rel(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i) rel[static_cast<std::size_t>(i)] = options.grid_low * std::pow(grid_ratio, i);
    for (double a : rel) {
      for (double b : rel) {
        for (double r : rel) {
          Scored s = objective.evaluate(clamp_point({kFeatureSpan * a, kFeatureSpan * b, r}, box));
          if (s.lml > best.lml) best = s;
        }
      }
    }
  }
  if (!std::isfinite(best.lml)) {
    throw NumericalError("GP hyperparameter search found no factorizable kernel (n=" +
                         std::to_string(data.size()) + ")");
  }
  best = refine(objective, best, grid_ratio, box, warm);

  GpExpert out = std::move(base);
  out.params_ = to_params(best);
  out.factorize();
  return out;
}

void GpExpert::factorize() {
  const Eigen::Index n = features_.rows();
  if (n == 0) {
    alpha_.resize(0);
    jitter_ = 0.0;
    return;
  }
  Eigen::MatrixXd k(n, n);
  const double l0 = params_.lengthscales[0];
  const double l1 = params_.lengthscales[1];
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double a = (features_(i, 0) - features_(j, 0)) / l0;
      const double b = (features_(i, 1) - features_(j, 1)) / l1;
      const double v = params_.signal_variance * std::exp(-0.5 * (a * a + b * b));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  k.diagonal().array() += params_.noise_variance;
  for (double jitter : kJitterLadder) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    llt_.compute(kj);
    if (llt_.info() == Eigen::Success) {
      jitter_ = jitter;
      alpha_ = llt_.solve(y_std_);
      return;
    }
  }
  std::ostringstream msg;
  msg << "kernel matrix not positive definite after jitter " << kJitterLadder.back()
      << " (n=" << n << ", min diag=" << k.diagonal().minCoeff()
      << ", lengthscales=" << l0 << "," << l1 << ", signal=" << params_.signal_variance
      << ", noise=" << params_.noise_variance << ")";
  throw NumericalError(msg.str());
}

Prediction GpExpert::predict(const PairFeature& x) const {
  if (!std::isfinite(x.dot) || !std::isfinite(x.distance)) {
    throw ValidationError("predict: non-finite feature");
  }
  const Eigen::Index n = features_.rows();
  const double prior = params_.signal_variance;
  if (n == 0) {
    return {y_mean_, std::max(prior * y_scale_ * y_scale_, kVarianceFloor)};
  }
  Eigen::VectorXd kstar(n);
  const double l0 = params_.lengthscales[0];
  const double l1 = params_.lengthscales[1];
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = (features_(i, 0) - x.dot) / l0;
    const double b = (features_(i, 1) - x.distance) / l1;
    kstar(i) = prior * std::exp(-0.5 * (a * a + b * b));
  }
  const double mean_std = kstar.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(kstar);
  const double var_std = prior - v.squaredNorm();
  return {destandardize(mean_std), std::max(var_std * y_scale_ * y_scale_, kVarianceFloor)};
}

double GpExpert::log_marginal_likelihood() const {
  const Eigen::Index n = features_.rows();
  if (n == 0) throw ValidationError("log_marginal_likelihood: empty training set");
  double logdet = 0.0;
  const auto& l = llt_.matrixLLT();
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(l(i, i));
  return -0.5 * y_std_.dot(alpha_) - 0.5 * logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
}

double log_likelihood_of(const GpExpert& expert, const PairFeature& x, double y,
                         double obs_noise_variance) {
  if (!(obs_noise_variance > 0.0)) throw ValidationError("obs_noise_variance must be positive");
  const Prediction p = expert.predict(x);
  return normal_log_density(y, p.mean, p.variance + obs_noise_variance);
}

}  // namespace evobo
