#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "fedsurv/datagen.hpp"
#include "fedsurv/types.hpp"

using fedsurv::CensoringBound;
using fedsurv::SplitKind;
using fedsurv::SyntheticConfig;
using fedsurv::SyntheticData;

namespace {

SyntheticConfig base_config() {
  SyntheticConfig config;
  config.num_centers = 4;
  config.per_center = 250;
  config.num_covariates = 8;
  config.seed = 31337;
  return config;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const SyntheticData a = fedsurv::generate_synthetic(base_config());
  const SyntheticData b = fedsurv::generate_synthetic(base_config());
  CHECK(a.data.times() == b.data.times());
  CHECK(a.data.covariate_matrix() == b.data.covariate_matrix());
  CHECK(a.data.events() == b.data.events());
  CHECK(a.true_beta == b.true_beta);
  for (int i = 0; i < a.data.size(); ++i) {
    CHECK(a.partition.center_of(i) == b.partition.center_of(i));
  }

  SyntheticConfig reseeded = base_config();
  reseeded.seed = 31338;
  const SyntheticData c = fedsurv::generate_synthetic(reseeded);
  CHECK(a.data.times() != c.data.times());
}

TEST_CASE("covariates have unit expected squared norm") {
  SyntheticConfig config = base_config();
  config.num_centers = 1;
  config.per_center = 10000;
  const SyntheticData generated = fedsurv::generate_synthetic(config);

  const Eigen::MatrixXd& x = generated.data.covariate_matrix();
  const double mean_norm2 = x.colwise().squaredNorm().mean();
  // Var(||x||^2) = 2/P per individual, so 3 standard errors at n = 10^4:
  const double tolerance = 3.0 * std::sqrt(2.0 / 8.0 / 10000.0);
  CHECK(std::abs(mean_norm2 - 1.0) < tolerance);
  CHECK(std::abs(x.mean()) < 3.0 / std::sqrt(8.0 * 10000.0 * 8.0));
}

TEST_CASE("true coefficients are drawn at the requested norm") {
  SyntheticConfig config = base_config();
  config.beta_norm = 3.5;
  const SyntheticData generated = fedsurv::generate_synthetic(config);
  CHECK(generated.true_beta.norm() == doctest::Approx(3.5).epsilon(1e-12));

  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(8);
  fixed[2] = 1.25;
  config.true_beta = fixed;
  const SyntheticData pinned = fedsurv::generate_synthetic(config);
  CHECK(pinned.true_beta == fixed);
}

TEST_CASE("null coefficients make latent times unit exponential") {
  SyntheticConfig config = base_config();
  config.num_centers = 1;
  config.per_center = 10000;
  config.true_beta = Eigen::VectorXd::Zero(8);
  const SyntheticData generated = fedsurv::generate_synthetic(config);

  const double mean_latent = generated.latent_event_times.mean();
  CHECK(std::abs(mean_latent - 1.0) < 3.0 / std::sqrt(10000.0));  // Exp(1) has unit variance
}

TEST_CASE("events are observed at their latent times") {
  const SyntheticData generated = fedsurv::generate_synthetic(base_config());
  for (int i = 0; i < generated.data.size(); ++i) {
    if (generated.data.event(i) == 1) {
      CHECK(generated.data.time(i) == generated.latent_event_times[i]);
    } else {
      CHECK(generated.data.time(i) < generated.latent_event_times[i]);
    }
  }
}

TEST_CASE("per-individual censoring hits the closed-form censoring probability at any signal strength") {
  // With the censoring bound scaled per individual, u = c * e^eta is U(0, log 2)
  // and tau * e^eta is Exp(1) independent of eta, so
  // P[censored] = 1 - integral_0^log2 (1 - e^-u) du / log 2 = 1/(2 log 2).
  const double expected = 1.0 / (2.0 * std::numbers::ln2);
  for (const double norm : {0.5, 2.0, 6.0}) {
    SyntheticConfig config = base_config();
    config.num_centers = 5;
    config.per_center = 10000;
    config.beta_norm = norm;
    config.seed = 777 + static_cast<std::uint64_t>(norm * 10);
    const SyntheticData generated = fedsurv::generate_synthetic(config);
    const double tolerance = 3.0 * std::sqrt(expected * (1.0 - expected) / 50000.0);
    CHECK(std::abs(generated.censored_fraction - expected) < tolerance);
  }
}

TEST_CASE("population-level censoring bound matches the closed form only at zero signal") {
  SyntheticConfig config = base_config();
  config.num_centers = 5;
  config.per_center = 10000;
  config.censoring = CensoringBound::BaselineMedian;
  config.true_beta = Eigen::VectorXd::Zero(8);
  const SyntheticData generated = fedsurv::generate_synthetic(config);
  const double expected = 1.0 / (2.0 * std::numbers::ln2);
  CHECK(std::abs(generated.censored_fraction - expected) < 3.0 * std::sqrt(expected * (1.0 - expected) / 50000.0));
}

TEST_CASE("uniform splits balance centers and sorted splits order them by time") {
  SyntheticConfig config = base_config();
  config.split = SplitKind::Uniform;
  const SyntheticData uniform = fedsurv::generate_synthetic(config);
  for (int k = 0; k < 4; ++k) {
    CHECK(static_cast<int>(uniform.partition.members(k).size()) == 250);
  }

  config.split = SplitKind::SortedByEndpoint;
  const SyntheticData sorted = fedsurv::generate_synthetic(config);
  for (int k = 0; k + 1 < 4; ++k) {
    double max_here = 0.0;
    for (const int i : sorted.partition.members(k)) {
      max_here = std::max(max_here, sorted.data.time(i));
    }
    double min_next = std::numeric_limits<double>::infinity();
    for (const int i : sorted.partition.members(k + 1)) {
      min_next = std::min(min_next, sorted.data.time(i));
    }
    CHECK(max_here <= min_next);
  }

  // Same individuals either way, only the center assignment differs.
  CHECK(uniform.data.times() == sorted.data.times());
}
