#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "fedsurv/risk_function.hpp"
#include "fedsurv/types.hpp"

namespace fedsurv {

// Discrete-time proportional-hazards model on a grid of T times: the
// conditional hazard at grid time m is sigmoid(alpha[m] + beta . phi(x)).
// The per-time intercepts alpha play the role of the baseline hazard
// (alpha[m] is the logit of the baseline conditional event probability).
// For optimizers the parameters live in one flat vector [alpha; beta; theta].
struct DiscreteTimeModel {
  Eigen::VectorXd alpha;  // one intercept per grid time
  RiskFunction phi;
  Eigen::VectorXd beta;   // head weights, length phi.output_dim()
  Eigen::VectorXd theta;  // phi parameters, length phi.num_params()

  // Zero intercepts and head, seeded Xavier weights for phi.
  static DiscreteTimeModel zero_initialized(int grid_size, RiskFunction phi, std::uint64_t seed);

  int num_params() const;
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& flat);

  double score(const Eigen::VectorXd& x) const { return beta.dot(phi.forward(theta, x)); }
  double logit(const Eigen::VectorXd& x, int m) const;
};

// sigmoid(alpha[m] + beta . phi(x)): the probability of the event at grid
// time m conditional on surviving past m-1.
double discrete_conditional_hazard(const DiscreteTimeModel& model, const Eigen::VectorXd& x, int m);

// One row of the stacked binary dataset: individual i paired with grid time
// m. The grid index is carried alongside the individual instead of being
// one-hot encoded into the covariates, so the (x, e^(m)) concatenation the
// model conceptually runs on is never materialized.
struct StackedSample {
  int individual = 0;
  int grid_index = 0;
  bool label = false;
};

struct StackedDataset {
  std::vector<StackedSample> samples;  // grouped by individual, grid index ascending
  std::int64_t num_positive = 0;
  std::int64_t num_negative = 0;
  // Weight applied to positive samples: #negative / #positive when class
  // weighting is requested, 1 otherwise.
  double pos_weight = 1.0;
};

// The survival-to-classification reduction: individual i contributes a
// negative sample at every grid time strictly before its observed time, plus
// a positive sample at the time itself iff the event was observed there.
// Every observed time must be a grid point (quantize first if necessary).
StackedDataset build_stacked_dataset(const Dataset& data, const TimeGrid& grid, bool weighted);

double stacked_logit(const DiscreteTimeModel& model, const Dataset& data, const StackedSample& sample);

struct StackedObjectiveValue {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // flat [alpha; beta; theta] layout
};

// Weighted binary cross-entropy over the given stacked samples, summed (not
// averaged), evaluated in logit form: per sample, w * (softplus(z) - y*z)
// with d/dz = w * (sigmoid(z) - y). Summation keeps per-center evaluations
// additive. Consecutive samples of the same individual share one phi(x)
// forward/backward pass, so keep samples grouped by individual where speed
// matters.
StackedObjectiveValue stacked_bce_loss_and_gradient(const DiscreteTimeModel& model, const Dataset& data,
                                                    std::span<const StackedSample> samples, double pos_weight);

}  // namespace fedsurv
