#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fedsurv/types.hpp"

namespace fedsurv {

// Linear risk score eta_i = beta . x_i.
struct LinearRiskModel {
  Eigen::VectorXd beta;
};

struct CoxDerivatives {
  double loss = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // 0x0 unless requested
};

// Negative log partial likelihood of the Cox model with Breslow's convention
// for ties: the risk set of an event at t is everyone with observed time >= t.
// Evaluated in O(N log N) by a single sweep over times sorted descending,
// with the risk-set accumulator rescaled by its running maximum so large
// scores cannot overflow. Throws NoEventsError when no event is observed.
double cox_negative_log_likelihood(const Dataset& data, const LinearRiskModel& model);

// Gradient of the negative log partial likelihood with respect to beta:
// sum over events of (risk-set mean of x under e^eta weights) - x_i.
Eigen::VectorXd cox_gradient(const Dataset& data, const LinearRiskModel& model);

// Loss, gradient and (optionally) the Hessian in one sweep. The Hessian is
// the sum over events of the weighted risk-set covariance of x, which is
// positive semidefinite, so the loss is convex in beta.
CoxDerivatives cox_derivatives(const Dataset& data, const LinearRiskModel& model, bool want_hessian);

// Stratified variants: the sum of per-center Cox losses, with risk sets that
// never cross centers. A center without events contributes zero (the empty
// product reading of its partial likelihood), so these do not throw on
// event-free centers.
double stratified_cox_negative_log_likelihood(const Dataset& data, const FederatedPartition& partition,
                                              const LinearRiskModel& model);
Eigen::VectorXd stratified_cox_gradient(const Dataset& data, const FederatedPartition& partition,
                                        const LinearRiskModel& model);

// Maps t to the right edge of its bin: bin_width * ceil(t / bin_width), with
// t = 0 pushed into the first bin. Guarded against the ratio landing a hair
// above an integer, so quantizing an exact multiple of bin_width is a no-op.
double quantize_time(double t, double bin_width);

// Same covariates and events, every observed time quantized.
Dataset quantize_times(const Dataset& data, double bin_width);

// Event-time grid shared by every center. With a bin width Q the grid is
// {Q, 2Q, ..., Q * ceil(max_time / Q)} where max_time is the maximum observed
// time across all parts, so it only depends on the maximum of per-center
// maxima -- cheap to agree on federatedly. Without a bin width the grid is
// the sorted distinct observed times (which then must all be positive).
TimeGrid build_time_grid(const std::vector<const Dataset*>& parts, std::optional<double> bin_width);
TimeGrid build_time_grid(const Dataset& data, std::optional<double> bin_width);

// Worst-case absolute difference, over observed events, between the
// contribution of an event to the discrete-time likelihood at the optimal
// per-time intercept and its contribution to the continuous-time Cox loss,
// with every discrete logit offset by `shift`. The intercept solves
//   alpha = -log sum_j exp(z_j) / (1 + exp(alpha + z_j + shift))
// over the event's risk set (damped fixed-point iteration with a Newton
// fallback). As shift -> -infinity the gap vanishes: the discrete model
// recovers the Cox contribution in the rare-event limit.
double event_contribution_gap(const Dataset& data, const Eigen::VectorXd& beta, double shift);

}  // namespace fedsurv
