#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fedsurv/errors.hpp"
#include "fedsurv/numerics.hpp"
#include "fedsurv/rng.hpp"
#include "fedsurv/stacking.hpp"
#include "fedsurv/survival.hpp"
#include "test_util.hpp"

using fedsurv::Dataset;
using fedsurv::DiscreteTimeModel;
using fedsurv::RiskFunction;
using fedsurv::Rng;
using fedsurv::StackedDataset;
using fedsurv::StackedSample;
using fedsurv::TimeGrid;

namespace {

// Reference loss: iterate samples one at a time and evaluate the weighted
// BCE directly from probabilities, with no batching or logit tricks.
double naive_stacked_loss(const DiscreteTimeModel& model, const Dataset& data,
                          const std::vector<StackedSample>& samples, double pos_weight) {
  double loss = 0.0;
  for (const StackedSample& sample : samples) {
    const double p = fedsurv::discrete_conditional_hazard(model, data.covariates(sample.individual),
                                                          sample.grid_index);
    loss += sample.label ? -pos_weight * std::log(p) : -std::log(1.0 - p);
  }
  return loss;
}

DiscreteTimeModel random_model(Rng& rng, int grid_size, RiskFunction phi) {
  DiscreteTimeModel model = DiscreteTimeModel::zero_initialized(grid_size, std::move(phi), rng.next_u64());
  for (int m = 0; m < model.alpha.size(); ++m) {
    model.alpha[m] = rng.normal() - 1.0;
  }
  for (int j = 0; j < model.beta.size(); ++j) {
    model.beta[j] = 0.5 * rng.normal();
  }
  for (int j = 0; j < model.theta.size(); ++j) {
    model.theta[j] += 0.1 * rng.normal();  // jitter off the Xavier init
  }
  return model;
}

}  // namespace

TEST_CASE("stacking expands individuals into the expected binary samples") {
  // Grid {1, 2, 3}. An event at 2 yields negatives at bin 0 and a positive
  // at bin 1; a censoring at 2 yields only the negative at bin 0; a censoring
  // at 2.5 adds negatives at bins 0 and 1; an event at 1 is positive at bin 0
  // with no negatives.
  const Dataset data = testutil::dataset_of({{0.1}, {0.2}, {0.3}, {0.4}}, {2.0, 2.0, 2.5, 1.0}, {1, 0, 0, 1});
  const TimeGrid grid(std::vector<double>{1.0, 2.0, 3.0}, std::nullopt);
  const StackedDataset stacked = fedsurv::build_stacked_dataset(data, grid, false);

  const std::vector<StackedSample> expected = {
      {0, 0, false}, {0, 1, true}, {1, 0, false}, {2, 0, false}, {2, 1, false}, {3, 0, true},
  };
  REQUIRE(stacked.samples.size() == expected.size());
  for (std::size_t s = 0; s < expected.size(); ++s) {
    CHECK(stacked.samples[s].individual == expected[s].individual);
    CHECK(stacked.samples[s].grid_index == expected[s].grid_index);
    CHECK(stacked.samples[s].label == expected[s].label);
  }
  CHECK(stacked.num_positive == 2);
  CHECK(stacked.num_negative == 4);
  CHECK(stacked.pos_weight == 1.0);

  const StackedDataset weighted = fedsurv::build_stacked_dataset(data, grid, true);
  CHECK(weighted.pos_weight == doctest::Approx(2.0));
}

TEST_CASE("stacked sample counts follow the at-risk bins on random instances") {
  Rng rng(707);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset raw = testutil::random_dataset(rng, 30, 2, 0.0);
    const Dataset data = fedsurv::quantize_times(raw, 0.5);
    const TimeGrid grid = fedsurv::build_time_grid(data, 0.5);
    const StackedDataset stacked = fedsurv::build_stacked_dataset(data, grid, false);

    std::int64_t expected_negatives = 0;
    for (int i = 0; i < data.size(); ++i) {
      expected_negatives += grid.count_strictly_before(data.time(i));
    }
    CHECK(stacked.num_negative == expected_negatives);
    CHECK(stacked.num_positive == data.num_events());
    CHECK(stacked.samples.size() == static_cast<std::size_t>(expected_negatives + data.num_events()));
  }
}

TEST_CASE("events off the grid are rejected, censorings off the grid are not") {
  const TimeGrid grid(std::vector<double>{1.0, 2.0}, std::nullopt);
  const Dataset off_event = testutil::dataset_of({{0.0}}, {1.5}, {1});
  CHECK_THROWS_AS(fedsurv::build_stacked_dataset(off_event, grid, false), fedsurv::DataError);

  const Dataset off_censor = testutil::dataset_of({{0.0}, {1.0}}, {1.5, 1.0}, {0, 1});
  const StackedDataset stacked = fedsurv::build_stacked_dataset(off_censor, grid, false);
  CHECK(stacked.samples.size() == 2);  // censor contributes bin 0 negative; event is positive at bin 0
}

TEST_CASE("weighting requires at least one positive sample") {
  const TimeGrid grid(std::vector<double>{1.0, 2.0}, std::nullopt);
  const Dataset censored = testutil::dataset_of({{0.0}, {0.1}}, {2.0, 2.0}, {0, 0});
  CHECK_THROWS_AS(fedsurv::build_stacked_dataset(censored, grid, true), fedsurv::NoEventsError);
}

TEST_CASE("stacked loss matches the per-sample probability form") {
  Rng rng(808);
  const Dataset raw = testutil::random_dataset(rng, 25, 3, 0.0);
  const Dataset data = fedsurv::quantize_times(raw, 1.0);
  const TimeGrid grid = fedsurv::build_time_grid(data, 1.0);
  const StackedDataset stacked = fedsurv::build_stacked_dataset(data, grid, true);

  for (const bool use_mlp : {false, true}) {
    const RiskFunction phi =
        use_mlp ? RiskFunction::mlp(3, {4, 2}) : RiskFunction::identity(3);
    const DiscreteTimeModel model = random_model(rng, grid.size(), phi);
    const auto value = fedsurv::stacked_bce_loss_and_gradient(model, data, stacked.samples, stacked.pos_weight);
    const double naive = naive_stacked_loss(model, data, stacked.samples, stacked.pos_weight);
    CHECK(value.loss == doctest::Approx(naive).epsilon(1e-10));
  }
}

TEST_CASE("stacked gradient matches central finite differences for identity and MLP risk functions") {
  Rng rng(909);
  const Dataset raw = testutil::random_dataset(rng, 15, 3, 0.0);
  const Dataset data = fedsurv::quantize_times(raw, 1.0);
  const TimeGrid grid = fedsurv::build_time_grid(data, 1.0);
  const StackedDataset stacked = fedsurv::build_stacked_dataset(data, grid, true);

  for (const bool use_mlp : {false, true}) {
    const RiskFunction phi =
        use_mlp ? RiskFunction::mlp(3, {5, 2}) : RiskFunction::identity(3);
    DiscreteTimeModel model = random_model(rng, grid.size(), phi);
    const auto value = fedsurv::stacked_bce_loss_and_gradient(model, data, stacked.samples, stacked.pos_weight);

    DiscreteTimeModel probe = model;
    const Eigen::VectorXd fd = testutil::central_difference(
        [&](const Eigen::VectorXd& params) {
          probe.unpack(params);
          return fedsurv::stacked_bce_loss_and_gradient(probe, data, stacked.samples, stacked.pos_weight).loss;
        },
        model.pack(), 1e-6);

    REQUIRE(value.gradient.size() == fd.size());
    const double scale = std::max(1.0, fd.lpNorm<Eigen::Infinity>());
    CHECK((value.gradient - fd).lpNorm<Eigen::Infinity>() < 1e-5 * scale);
  }
}

TEST_CASE("risk function forward pass computes a leaky-ReLU network by hand") {
  const RiskFunction phi = RiskFunction::mlp(2, {2, 1});
  REQUIRE(phi.num_params() == 2 * 2 + 2 + 2 * 1 + 1);

  // Layer 1: W1 (2x2, column-major), b1. Layer 2: W2 (1x2), b2.
  Eigen::VectorXd theta(9);
  theta << 1.0, -2.0, 0.5, 1.5,  // W1 columns (1, -2) and (0.5, 1.5)
      0.25, -0.5,                // b1
      2.0, -1.0,                 // W2
      0.75;                      // b2
  Eigen::VectorXd x(2);
  x << 1.0, 1.0;

  // Pre-activations: (1*1 + 0.5*1 + 0.25, -2*1 + 1.5*1 - 0.5) = (1.75, -1.0);
  // leaky ReLU keeps 1.75 and scales -1.0 by 0.1.
  const double h1 = 1.75;
  const double h2 = -0.1;
  const double expected = 2.0 * h1 - 1.0 * h2 + 0.75;

  const Eigen::VectorXd out = phi.forward(theta, x);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("risk function backward pass matches finite differences across the kink-free neighborhood") {
  Rng rng(1010);
  const RiskFunction phi = RiskFunction::mlp(3, {4, 3, 2});
  Eigen::VectorXd theta = phi.init_params(42);
  for (int j = 0; j < theta.size(); ++j) {
    theta[j] += 0.05 * rng.normal();
  }
  Eigen::VectorXd x(3);
  x << 0.7, -1.2, 0.3;
  Eigen::VectorXd head(2);
  head << 1.3, -0.4;  // arbitrary downstream gradient

  RiskFunction::Trace trace;
  phi.forward(theta, x, trace);
  Eigen::VectorXd gradient = Eigen::VectorXd::Zero(theta.size());
  phi.backward(theta, trace, head, gradient);

  const Eigen::VectorXd fd = testutil::central_difference(
      [&](const Eigen::VectorXd& params) { return head.dot(phi.forward(params, x)); }, theta, 1e-6);
  CHECK((gradient - fd).lpNorm<Eigen::Infinity>() < 1e-6 * std::max(1.0, fd.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("backward accumulates instead of overwriting") {
  const RiskFunction phi = RiskFunction::mlp(2, {2});
  const Eigen::VectorXd theta = phi.init_params(7);
  Eigen::VectorXd x(2);
  x << 0.5, -0.5;
  Eigen::VectorXd head = Eigen::VectorXd::Ones(2);

  RiskFunction::Trace trace;
  phi.forward(theta, x, trace);
  Eigen::VectorXd once = Eigen::VectorXd::Zero(theta.size());
  phi.backward(theta, trace, head, once);
  Eigen::VectorXd twice = once;
  phi.backward(theta, trace, head, twice);
  CHECK((twice - 2.0 * once).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("zero-initialized models start with silent intercepts and heads") {
  const DiscreteTimeModel model = DiscreteTimeModel::zero_initialized(4, RiskFunction::mlp(3, {5, 2}), 11);
  CHECK(model.alpha.isZero(0.0));
  CHECK(model.beta.isZero(0.0));
  CHECK(model.theta.size() == model.phi.num_params());
  CHECK(model.theta.allFinite());

  // Same seed, same weights; different seed, different weights.
  const DiscreteTimeModel again = DiscreteTimeModel::zero_initialized(4, RiskFunction::mlp(3, {5, 2}), 11);
  CHECK(model.theta == again.theta);
  const DiscreteTimeModel other = DiscreteTimeModel::zero_initialized(4, RiskFunction::mlp(3, {5, 2}), 12);
  CHECK(model.theta != other.theta);
}

TEST_CASE("pack and unpack are inverse and bounds are checked") {
  Rng rng(1111);
  DiscreteTimeModel model = random_model(rng, 3, RiskFunction::mlp(2, {3, 1}));
  const Eigen::VectorXd flat = model.pack();
  REQUIRE(flat.size() == model.num_params());
  DiscreteTimeModel copy = model;
  copy.unpack(flat);
  CHECK(copy.alpha == model.alpha);
  CHECK(copy.beta == model.beta);
  CHECK(copy.theta == model.theta);

  Eigen::VectorXd x(2);
  x << 0.1, 0.2;
  CHECK_THROWS_AS(model.logit(x, 3), fedsurv::DataError);
  CHECK_THROWS_AS(model.logit(x, -1), fedsurv::DataError);
}
