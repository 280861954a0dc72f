#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "fedsurv/types.hpp"

namespace fedsurv {

// How generated individuals are assigned to centers.
enum class SplitKind {
  Uniform,          // shuffle, then deal round-robin: centers are exchangeable
  SortedByEndpoint  // sort by observed time, then cut into contiguous blocks:
                    // center 0 gets the earliest block, and so on
};

// Upper end of the uniform censoring draw.
enum class CensoringBound {
  PerIndividual,   // log(2) * e^{-beta.x}: each individual's own median event
                   // time, which censors every risk profile at the same rate
  BaselineMedian   // log(2): the median event time of the baseline individual
};

struct SyntheticConfig {
  int num_centers = 5;
  int per_center = 1000;
  int num_covariates = 200;
  // Coefficients used to generate the data. Unset: drawn standard normal and
  // rescaled to beta_norm, from a stream independent of the data draws.
  std::optional<Eigen::VectorXd> true_beta;
  double beta_norm = 2.0;
  SplitKind split = SplitKind::Uniform;
  CensoringBound censoring = CensoringBound::PerIndividual;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset data;
  FederatedPartition partition;
  Eigen::VectorXd true_beta;
  // The uncensored event time of every individual (t equals this exactly
  // whenever the event was observed). Diagnostic only; nothing downstream
  // may peek at it.
  Eigen::VectorXd latent_event_times;
  double censored_fraction = 0.0;
};

// Proportional-hazards data: covariates are N(0, I/P) so risk scores have
// unit-ish variance regardless of dimension, event times are exponential
// with rate e^{beta.x}, and censoring times are uniform on (0, bound). With
// the per-individual bound the censoring probability is (1/2)/log(2) ~ 0.72
// for every individual. Fully deterministic in the seed; supplying true_beta
// changes nothing about the covariate/time draws.
SyntheticData generate_synthetic(const SyntheticConfig& config);

}  // namespace fedsurv
