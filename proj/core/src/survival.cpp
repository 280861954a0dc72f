#include "fedsurv/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedsurv/errors.hpp"
#include "fedsurv/numerics.hpp"

namespace fedsurv {

namespace {

// Suffix sums of w_j = e^{eta_j}, w_j x_j and w_j x_j x_j^T, kept rescaled by
// the running maximum score so that adding an individual never overflows:
// internally s0 = sum e^{eta_j - max_eta}, and the quantities objectives need
// (log s0, weighted means, weighted covariances) are scale-free.
class RiskSetAccumulator {
 public:
  RiskSetAccumulator(int p, bool with_x, bool with_xx) {
    if (with_x) {
      sx_ = Eigen::VectorXd::Zero(p);
    }
    if (with_xx) {
      sxx_ = Eigen::MatrixXd::Zero(p, p);
    }
  }

  template <typename Col>
  void add(double eta, const Col& x) {
    if (eta > max_eta_) {
      const double c = std::exp(max_eta_ - eta);  // 0 on the first add
      s0_ *= c;
      if (sx_.size() > 0) sx_ *= c;
      if (sxx_.size() > 0) sxx_ *= c;
      max_eta_ = eta;
    }
    const double w = std::exp(eta - max_eta_);
    s0_ += w;
    if (sx_.size() > 0) sx_ += w * x;
    if (sxx_.size() > 0) sxx_ += w * x * x.transpose();
  }

  double log_sum() const { return max_eta_ + std::log(s0_); }

  // Weighted mean of x over the current risk set.
  Eigen::VectorXd mean() const { return sx_ / s0_; }

  // Weighted covariance of x over the current risk set.
  Eigen::MatrixXd covariance() const {
    const Eigen::VectorXd m = mean();
    return sxx_ / s0_ - m * m.transpose();
  }

 private:
  double max_eta_ = -std::numeric_limits<double>::infinity();
  double s0_ = 0.0;
  Eigen::VectorXd sx_;
  Eigen::MatrixXd sxx_;
};

// Shared sweep: individuals are visited in descending time order so the
// accumulator always holds exactly the risk set {j : t_j >= t} when the
// events at time t are scored. Ties enter the risk set before any of them
// is scored (Breslow). Order within a tie is by ascending index, which makes
// the float accumulation order independent of the input permutation up to
// roundoff.
CoxDerivatives cox_sweep(const Dataset& data, const Eigen::VectorXd& beta, bool want_gradient, bool want_hessian) {
  const int n = data.size();
  const int p = data.num_covariates();
  if (beta.size() != p) {
    throw DataError("model has " + std::to_string(beta.size()) + " coefficients, data has " + std::to_string(p) +
                    " covariates");
  }

  const Eigen::VectorXd etas = data.covariate_matrix().transpose() * beta;
  if (!etas.allFinite()) {
    throw NumericError("non-finite risk scores in Cox objective");
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (data.time(a) != data.time(b)) return data.time(a) > data.time(b);
    return a < b;
  });

  CoxDerivatives out;
  if (want_gradient) {
    out.gradient = Eigen::VectorXd::Zero(p);
  }
  if (want_hessian) {
    out.hessian = Eigen::MatrixXd::Zero(p, p);
  }

  RiskSetAccumulator accum(p, want_gradient || want_hessian, want_hessian);
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = data.time(order[i]);
    std::size_t group_end = i;
    while (group_end < order.size() && data.time(order[group_end]) == t) {
      accum.add(etas[order[group_end]], data.covariates(order[group_end]));
      ++group_end;
    }
    for (std::size_t k = i; k < group_end; ++k) {
      const int idx = order[k];
      if (!data.event(idx)) {
        continue;
      }
      out.loss += accum.log_sum() - etas[idx];
      if (want_gradient) {
        out.gradient += accum.mean() - data.covariates(idx);
      }
      if (want_hessian) {
        out.hessian += accum.covariance();
      }
    }
    i = group_end;
  }

  if (!std::isfinite(out.loss)) {
    throw NumericError("Cox loss evaluated to a non-finite value");
  }
  return out;
}

void require_events(const Dataset& data) {
  if (data.num_events() == 0) {
    throw NoEventsError("Cox partial likelihood is undefined on data without events");
  }
}

}  // namespace

double cox_negative_log_likelihood(const Dataset& data, const LinearRiskModel& model) {
  require_events(data);
  return cox_sweep(data, model.beta, false, false).loss;
}

Eigen::VectorXd cox_gradient(const Dataset& data, const LinearRiskModel& model) {
  require_events(data);
  return std::move(cox_sweep(data, model.beta, true, false).gradient);
}

CoxDerivatives cox_derivatives(const Dataset& data, const LinearRiskModel& model, bool want_hessian) {
  require_events(data);
  return cox_sweep(data, model.beta, true, want_hessian);
}

double stratified_cox_negative_log_likelihood(const Dataset& data, const FederatedPartition& partition,
                                              const LinearRiskModel& model) {
  if (partition.size() != data.size()) {
    throw DataError("partition covers " + std::to_string(partition.size()) + " individuals, data holds " +
                    std::to_string(data.size()));
  }
  double loss = 0.0;
  for (int k = 0; k < partition.num_centers(); ++k) {
    const Dataset local = data.subset(partition.members(k));
    if (local.num_events() == 0) {
      continue;  // empty partial likelihood: contributes log 1 = 0
    }
    loss += cox_sweep(local, model.beta, false, false).loss;
  }
  return loss;
}

Eigen::VectorXd stratified_cox_gradient(const Dataset& data, const FederatedPartition& partition,
                                        const LinearRiskModel& model) {
  if (partition.size() != data.size()) {
    throw DataError("partition covers " + std::to_string(partition.size()) + " individuals, data holds " +
                    std::to_string(data.size()));
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(data.num_covariates());
  for (int k = 0; k < partition.num_centers(); ++k) {
    const Dataset local = data.subset(partition.members(k));
    if (local.num_events() == 0) {
      continue;
    }
    grad += cox_sweep(local, model.beta, true, false).gradient;
  }
  return grad;
}

namespace {

// Bin index of t (1-based): ceil(t / bin_width), nudged so that a ratio
// sitting one rounding error above an integer does not jump a bin, and with
// t = 0 landing in bin 1.
double quantize_bin(double t, double bin_width) {
  const double r = t / bin_width;
  const double m = std::ceil(r - 1e-9 * std::max(1.0, r));
  return std::max(m, 1.0);
}

}  // namespace

double quantize_time(double t, double bin_width) {
  if (!(bin_width > 0.0)) {
    throw DataError("bin width must be positive");
  }
  if (!std::isfinite(t) || t < 0.0) {
    throw DataError("cannot quantize time " + std::to_string(t));
  }
  return quantize_bin(t, bin_width) * bin_width;
}

Dataset quantize_times(const Dataset& data, double bin_width) {
  Eigen::VectorXd q(data.size());
  for (int i = 0; i < data.size(); ++i) {
    q[i] = quantize_time(data.time(i), bin_width);
  }
  return data.with_times(std::move(q));
}

TimeGrid build_time_grid(const std::vector<const Dataset*>& parts, std::optional<double> bin_width) {
  if (parts.empty()) {
    throw DataError("time grid needs at least one dataset");
  }
  for (const Dataset* part : parts) {
    if (part == nullptr) {
      throw DataError("time grid got a null dataset");
    }
  }
  if (bin_width) {
    // Only the maximum of the per-part maxima matters, so each holder of data
    // would only have to reveal one number to agree on this grid.
    double max_time = 0.0;
    for (const Dataset* part : parts) {
      max_time = std::max(max_time, part->times().maxCoeff());
    }
    const auto bins = static_cast<int>(quantize_bin(max_time, *bin_width));
    std::vector<double> times(static_cast<std::size_t>(bins));
    for (int m = 1; m <= bins; ++m) {
      times[static_cast<std::size_t>(m - 1)] = static_cast<double>(m) * *bin_width;
    }
    return TimeGrid(std::move(times), bin_width);
  }
  std::vector<double> times;
  for (const Dataset* part : parts) {
    for (int i = 0; i < part->size(); ++i) {
      if (part->time(i) <= 0.0) {
        throw DataError("a grid of observed times requires strictly positive times; pass a bin width instead");
      }
      times.push_back(part->time(i));
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return TimeGrid(std::move(times), std::nullopt);
}

TimeGrid build_time_grid(const Dataset& data, std::optional<double> bin_width) {
  return build_time_grid(std::vector<const Dataset*>{&data}, bin_width);
}

namespace {

// Solves alpha = g(alpha) with g(alpha) = -log sum_j exp(z_j - softplus(alpha + z_j + shift)).
// g is a strict contraction (its derivative is a weighted mean of logistic
// values, hence in (0, 1)), so damped iteration always converges; a Newton
// phase finishes the job quickly when the damped phase is slow.
double solve_optimal_intercept(const std::vector<double>& z, double shift) {
  const auto g_and_slope = [&](double alpha) {
    double max_term = -std::numeric_limits<double>::infinity();
    for (const double zj : z) {
      max_term = std::max(max_term, zj - softplus(alpha + zj + shift));
    }
    double sum = 0.0;
    double weighted_sigma = 0.0;
    for (const double zj : z) {
      const double term = std::exp(zj - softplus(alpha + zj + shift) - max_term);
      sum += term;
      weighted_sigma += term * sigmoid(alpha + zj + shift);
    }
    return std::pair<double, double>{-(max_term + std::log(sum)), weighted_sigma / sum};
  };

  double alpha = -log_sum_exp(std::span<const double>(z));
  constexpr double tol = 1e-14;
  constexpr int damped_limit = 100;
  constexpr int total_limit = 10000;
  for (int it = 0; it < total_limit; ++it) {
    const auto [g, slope] = g_and_slope(alpha);
    const double residual = g - alpha;
    if (std::abs(residual) < tol * std::max(1.0, std::abs(alpha))) {
      return alpha;
    }
    if (it < damped_limit) {
      alpha += 0.5 * residual;
    } else {
      // Newton on f(alpha) = alpha - g(alpha); f' = 1 - g' in (0, 1).
      alpha += residual / (1.0 - slope);
    }
  }
  throw NumericError("optimal discrete-time intercept did not converge");
}

}  // namespace

double event_contribution_gap(const Dataset& data, const Eigen::VectorXd& beta, double shift) {
  require_events(data);
  if (beta.size() != data.num_covariates()) {
    throw DataError("coefficient length does not match covariate count");
  }
  const Eigen::VectorXd etas = data.covariate_matrix().transpose() * beta;

  // Distinct event times only: tied events share a risk set, and the z_i of
  // the event cancels between the two contributions, so the gap per event
  // depends only on its risk set.
  std::vector<double> event_times;
  for (int i = 0; i < data.size(); ++i) {
    if (data.event(i)) {
      event_times.push_back(data.time(i));
    }
  }
  std::sort(event_times.begin(), event_times.end());
  event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

  double worst = 0.0;
  for (const double t : event_times) {
    std::vector<double> z;
    for (int j = 0; j < data.size(); ++j) {
      if (data.time(j) >= t) {
        z.push_back(etas[j]);
      }
    }
    const double alpha = solve_optimal_intercept(z, shift);
    double discrete = alpha;
    for (const double zj : z) {
      discrete -= softplus(alpha + zj + shift);
    }
    // Cox contribution of the same event, minus the shared z_i: -log sum exp(z).
    const double continuous = -log_sum_exp(std::span<const double>(z));
    worst = std::max(worst, std::abs(discrete - continuous));
  }
  return worst;
}

}  // namespace fedsurv
