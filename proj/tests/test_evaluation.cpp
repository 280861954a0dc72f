#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "fedsurv/datagen.hpp"
#include "fedsurv/errors.hpp"
#include "fedsurv/evaluation.hpp"
#include "fedsurv/rng.hpp"
#include "fedsurv/schemes.hpp"
#include "test_util.hpp"

using fedsurv::CvMode;
using fedsurv::CvPlan;
using fedsurv::CvRow;
using fedsurv::Dataset;
using fedsurv::FederatedPartition;
using fedsurv::Rng;
using fedsurv::Scheme;
using fedsurv::SchemeConfig;

namespace {

FederatedPartition striped_partition(int n, int centers) {
  std::vector<int> center_of(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    center_of[static_cast<std::size_t>(i)] = i % centers;
  }
  return FederatedPartition(center_of, centers);
}

SchemeConfig pool_config() {
  SchemeConfig config;
  config.scheme = Scheme::Pool;
  return config;
}

}  // namespace

TEST_CASE("fast concordance equals the exhaustive pair count exactly") {
  Rng rng(2323);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_below(199));
    Eigen::VectorXd times(n);
    Eigen::VectorXd scores(n);
    std::vector<std::uint8_t> events(static_cast<std::size_t>(n));
    bool any_event = false;
    for (int i = 0; i < n; ++i) {
      // Lattice times and scores make ties of both kinds common.
      times[i] = 0.5 * static_cast<double>(1 + rng.uniform_below(12));
      scores[i] = trial % 3 == 0 ? 0.25 * static_cast<double>(rng.uniform_below(8)) : rng.normal();
      events[static_cast<std::size_t>(i)] = rng.uniform01() < 0.6 ? 1 : 0;
      any_event = any_event || events[static_cast<std::size_t>(i)] == 1;
    }
    if (!any_event) {
      events[0] = 1;
    }

    const testutil::BruteConcordance oracle = testutil::brute_concordance(scores, times, events);
    if (oracle.comparable == 0) {
      CHECK_THROWS_AS(fedsurv::concordance_index(scores, times, events), fedsurv::NoComparablePairsError);
      continue;
    }
    CHECK(fedsurv::concordance_index(scores, times, events) == oracle.value());
  }
}

TEST_CASE("concordance knows perfect, inverted, and uninformative rankings") {
  Eigen::VectorXd times(4);
  times << 1.0, 2.0, 3.0, 4.0;
  const std::vector<std::uint8_t> events = {1, 1, 1, 1};

  Eigen::VectorXd descending(4);
  descending << 4.0, 3.0, 2.0, 1.0;  // earliest event gets the highest score
  CHECK(fedsurv::concordance_index(descending, times, events) == 1.0);

  Eigen::VectorXd ascending(4);
  ascending << 1.0, 2.0, 3.0, 4.0;
  CHECK(fedsurv::concordance_index(ascending, times, events) == 0.0);

  CHECK(fedsurv::concordance_index(Eigen::VectorXd::Constant(4, 0.7), times, events) == 0.5);
}

TEST_CASE("tied observed times are not comparable") {
  Eigen::VectorXd times(3);
  times << 2.0, 2.0, 5.0;
  Eigen::VectorXd scores(3);
  scores << 3.0, 1.0, 2.0;
  // Pairs: (0,2) and (1,2) only; the two t = 2 individuals never face off.
  // (0,2): 3 > 2 concordant; (1,2): 1 < 2 discordant -> 1/2.
  CHECK(fedsurv::concordance_index(scores, times, {1, 1, 0}) == 0.5);

  // All-censored or single-individual data has nothing to rank.
  CHECK_THROWS_AS(fedsurv::concordance_index(scores, times, {0, 0, 0}), fedsurv::NoComparablePairsError);
}

TEST_CASE("non-finite scores are rejected") {
  Eigen::VectorXd times(2);
  times << 1.0, 2.0;
  Eigen::VectorXd scores(2);
  scores << 0.5, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fedsurv::concordance_index(scores, times, {1, 0}), fedsurv::NumericError);
}

TEST_CASE("per-center folds tile every center and rows arrive in plan order") {
  fedsurv::SyntheticConfig data_config;
  data_config.num_centers = 3;
  data_config.per_center = 40;
  data_config.num_covariates = 3;
  data_config.beta_norm = 4.0;
  data_config.seed = 5150;
  const fedsurv::SyntheticData generated = fedsurv::generate_synthetic(data_config);

  CvPlan plan;
  plan.folds = 4;
  plan.repeats = 2;
  plan.seed = 99;
  const std::vector<CvRow> rows =
      fedsurv::run_cv(generated.data, generated.partition, {pool_config()}, plan);

  REQUIRE(rows.size() == 8);  // 2 repeats x 4 folds x 1 scheme
  int index = 0;
  for (int repeat = 0; repeat < 2; ++repeat) {
    for (int fold = 0; fold < 4; ++fold) {
      CHECK(rows[static_cast<std::size_t>(index)].repeat == repeat);
      CHECK(rows[static_cast<std::size_t>(index)].fold_or_center == std::to_string(fold));
      CHECK(rows[static_cast<std::size_t>(index)].scheme == "POOL");
      CHECK(!rows[static_cast<std::size_t>(index)].failed);
      CHECK(std::isfinite(rows[static_cast<std::size_t>(index)].c_index));
      ++index;
    }
  }

  // Determinism: a second run reproduces every c-index bit for bit.
  const std::vector<CvRow> again =
      fedsurv::run_cv(generated.data, generated.partition, {pool_config()}, plan);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    CHECK(rows[r].c_index == again[r].c_index);
  }
}

TEST_CASE("out-of-center evaluation holds out whole centers under their labels") {
  fedsurv::SyntheticConfig data_config;
  data_config.num_centers = 3;
  data_config.per_center = 50;
  data_config.num_covariates = 2;
  data_config.beta_norm = 3.0;
  data_config.seed = 616;
  const fedsurv::SyntheticData generated = fedsurv::generate_synthetic(data_config);

  CvPlan plan;
  plan.mode = CvMode::OutOfCenter;
  const std::vector<CvRow> rows = fedsurv::run_cv(generated.data, generated.partition, {pool_config()}, plan,
                                                  {"boston", "paris", "lagos"});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].fold_or_center == "boston");
  CHECK(rows[1].fold_or_center == "paris");
  CHECK(rows[2].fold_or_center == "lagos");
  for (const CvRow& row : rows) {
    CHECK(!row.failed);
  }
}

TEST_CASE("local models are scored as the mean of their per-center c-indices") {
  fedsurv::SyntheticConfig data_config;
  data_config.num_centers = 2;
  data_config.per_center = 60;
  data_config.num_covariates = 2;
  data_config.beta_norm = 3.0;
  data_config.seed = 1999;
  const fedsurv::SyntheticData generated = fedsurv::generate_synthetic(data_config);

  SchemeConfig local;
  local.scheme = Scheme::Local;

  CvPlan plan;
  plan.mode = CvMode::OutOfCenter;
  plan.seed = 7;
  const std::vector<CvRow> rows = fedsurv::run_cv(generated.data, generated.partition, {local}, plan);
  REQUIRE(rows.size() == 2);

  // Reproduce row 0 by hand: train LOCAL on center 1, score center 0's rows
  // with its (single) per-center model.
  const Dataset test = generated.data.subset(generated.partition.members(0));
  const Dataset train = generated.data.subset(generated.partition.members(1));
  const fedsurv::TrainedModel model =
      fedsurv::train_scheme(local, train, FederatedPartition::single_center(train.size()));
  REQUIRE(model.num_models() == 1);
  const double expected = fedsurv::concordance_index(model.scores_of(0, test), test);
  CHECK(rows[0].c_index == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("folds that cannot train become failed rows instead of exceptions") {
  // No events anywhere: every training split throws inside train_scheme.
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 24);
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(24, 1.0, 24.0);
  const Dataset censored(std::move(x), std::move(t), std::vector<std::uint8_t>(24, 0));

  CvPlan plan;
  plan.folds = 3;
  const std::vector<CvRow> rows = fedsurv::run_cv(censored, striped_partition(24, 2), {pool_config()}, plan);
  REQUIRE(rows.size() == 3);
  for (const CvRow& row : rows) {
    CHECK(row.failed);
    CHECK(std::isnan(row.c_index));
    CHECK(!row.error.empty());
  }
}

TEST_CASE("invalid plans are configuration errors") {
  Rng rng(2424);
  const Dataset data = testutil::random_dataset(rng, 12, 2, 0.0, 4);
  const FederatedPartition partition = striped_partition(12, 2);

  CvPlan one_fold;
  one_fold.folds = 1;
  CHECK_THROWS_AS(fedsurv::run_cv(data, partition, {pool_config()}, one_fold), fedsurv::ConfigError);

  CvPlan too_many;
  too_many.folds = 7;  // smallest center has 6 rows
  CHECK_THROWS_AS(fedsurv::run_cv(data, partition, {pool_config()}, too_many), fedsurv::ConfigError);

  CvPlan out_of_center;
  out_of_center.mode = CvMode::OutOfCenter;
  CHECK_THROWS_AS(
      fedsurv::run_cv(data, FederatedPartition::single_center(12), {pool_config()}, out_of_center),
      fedsurv::ConfigError);
}
