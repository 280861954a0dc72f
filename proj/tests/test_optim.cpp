#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fedsurv/datagen.hpp"
#include "fedsurv/errors.hpp"
#include "fedsurv/optim.hpp"
#include "fedsurv/rng.hpp"
#include "fedsurv/survival.hpp"
#include "test_util.hpp"

using fedsurv::AdamConfig;
using fedsurv::AdamState;
using fedsurv::Dataset;
using fedsurv::LinearRiskModel;
using fedsurv::NewtonConfig;
using fedsurv::NewtonResult;
using fedsurv::Rng;

TEST_CASE("adam reproduces the textbook update sequence") {
  const AdamConfig config;
  const int dim = 4;
  AdamState state(dim, config);

  Eigen::VectorXd params = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd reference = params;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);

  Rng rng(1212);
  for (int t = 1; t <= 200; ++t) {
    Eigen::VectorXd gradient(dim);
    for (int j = 0; j < dim; ++j) {
      gradient[j] = 3.0 * rng.normal();
    }
    state.step(params, gradient);

    // Bias-corrected reference, computed exactly as written in the usual
    // pseudocode: m_hat = m/(1-b1^t), v_hat = v/(1-b2^t).
    m = config.beta1 * m + (1.0 - config.beta1) * gradient;
    v = config.beta2 * v.array().matrix() +
        (1.0 - config.beta2) * gradient.array().square().matrix();
    const Eigen::ArrayXd m_hat = m.array() / (1.0 - std::pow(config.beta1, t));
    const Eigen::ArrayXd v_hat = v.array() / (1.0 - std::pow(config.beta2, t));
    reference -= (config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon)).matrix();

    CHECK((params - reference).lpNorm<Eigen::Infinity>() < 1e-15);
  }
  CHECK(state.steps_taken() == 200);
}

TEST_CASE("adam per-step movement is bounded and scale-equivariant") {
  // Scaling every gradient by a large constant must leave the step sizes
  // (nearly) unchanged -- the property that lets one learning rate serve
  // parameters with wildly different gradient magnitudes.
  const AdamConfig config;
  AdamState small_state(3, config);
  AdamState big_state(3, config);
  Eigen::VectorXd small_params = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd big_params = Eigen::VectorXd::Zero(3);

  Rng rng(1313);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd gradient(3);
    for (int j = 0; j < 3; ++j) {
      gradient[j] = rng.normal();
    }
    const Eigen::VectorXd before = small_params;
    small_state.step(small_params, gradient);
    big_state.step(big_params, Eigen::VectorXd(1e6 * gradient));

    // Kingma & Ba's bound: |step| <= lr * (1-b1)/sqrt(1-b2) in the worst
    // case, about 3.17 * lr for the default coefficients.
    CHECK((small_params - before).lpNorm<Eigen::Infinity>() <=
          config.learning_rate * (1.0 - config.beta1) / std::sqrt(1.0 - config.beta2) + 1e-12);
    CHECK((small_params - big_params).lpNorm<Eigen::Infinity>() < 1e-5);
  }
}

TEST_CASE("adam rejects dimension mismatches and non-finite gradients") {
  AdamState state(3);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(state.step(params, Eigen::VectorXd::Zero(2)), fedsurv::DataError);
  Eigen::VectorXd poisoned = Eigen::VectorXd::Zero(3);
  poisoned[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(state.step(params, poisoned), fedsurv::NumericError);
}

TEST_CASE("newton drives the cox gradient to zero with non-increasing loss") {
  Rng rng(1414);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset data = testutil::random_dataset(rng, 40, 3, 0.3, 5);
    const NewtonResult result = fedsurv::newton_fit_cox(data);
    CHECK(result.converged);
    CHECK(result.gradient_max_norm <= NewtonConfig{}.gradient_tolerance);
    CHECK(fedsurv::cox_gradient(data, result.model).lpNorm<Eigen::Infinity>() <= 1e-7);
    for (std::size_t i = 1; i < result.loss_trace.size(); ++i) {
      CHECK(result.loss_trace[i] <= result.loss_trace[i - 1] + 1e-12);
    }
    // The fit can never be worse than the null model it starts from.
    CHECK(result.loss_trace.back() <=
          fedsurv::cox_negative_log_likelihood(data, LinearRiskModel{Eigen::VectorXd::Zero(3)}) + 1e-12);
  }
}

TEST_CASE("newton returns the null model when covariates carry no signal") {
  const Dataset flat = testutil::dataset_of({{0.0}, {0.0}}, {1.0, 2.0}, {1, 0});
  const NewtonResult result = fedsurv::newton_fit_cox(flat);
  CHECK(result.model.beta[0] == 0.0);
  CHECK(result.converged);
}

TEST_CASE("newton recovers generating coefficients at scale") {
  fedsurv::SyntheticConfig config;
  config.num_centers = 1;
  config.per_center = 2000;
  config.num_covariates = 5;
  config.seed = 90210;
  const fedsurv::SyntheticData generated = fedsurv::generate_synthetic(config);

  const NewtonResult result = fedsurv::newton_fit_cox(generated.data);
  CHECK(result.converged);
  CHECK((result.model.beta - generated.true_beta).lpNorm<Eigen::Infinity>() < 0.15);
}

TEST_CASE("an iteration budget too small for the tolerance is a numeric error") {
  // A single covariate that perfectly orders the two event times sends the
  // coefficient toward infinity; the gradient only creeps below tolerance
  // around beta ~ 16, far beyond a three-iteration budget.
  const Dataset separated = testutil::dataset_of({{1.0}, {0.0}}, {1.0, 2.0}, {1, 1});
  NewtonConfig config;
  config.max_iterations = 3;
  CHECK_THROWS_AS(fedsurv::newton_fit_cox(separated, config), fedsurv::NumericError);
}
