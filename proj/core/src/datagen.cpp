#include "fedsurv/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fedsurv/errors.hpp"
#include "fedsurv/rng.hpp"

namespace fedsurv {

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  if (config.num_centers < 1 || config.per_center < 1 || config.num_covariates < 1) {
    throw ConfigError("synthetic data needs positive center count, center size and covariate count");
  }
  if (!(config.beta_norm >= 0.0)) {
    throw ConfigError("beta_norm must be non-negative");
  }
  const int c = config.num_centers;
  const int n = config.num_centers * config.per_center;
  const int p = config.num_covariates;

  // Independent streams per concern, so e.g. passing true_beta explicitly
  // leaves the covariate and time draws untouched.
  Rng beta_rng(derive_seed(config.seed, 0xbe7aULL));
  Rng data_rng(derive_seed(config.seed, 0xda7aULL));
  Rng split_rng(derive_seed(config.seed, 0x5817ULL));

  Eigen::VectorXd beta;
  if (config.true_beta) {
    if (config.true_beta->size() != p) {
      throw ConfigError("true_beta has " + std::to_string(config.true_beta->size()) + " entries, expected " +
                        std::to_string(p));
    }
    beta = *config.true_beta;
  } else {
    beta.resize(p);
    for (int j = 0; j < p; ++j) {
      beta[j] = beta_rng.normal();
    }
    const double norm = beta.norm();
    beta = norm > 0.0 ? Eigen::VectorXd(beta * (config.beta_norm / norm)) : Eigen::VectorXd::Zero(p);
  }

  const double sd = 1.0 / std::sqrt(static_cast<double>(p));
  Eigen::MatrixXd x(p, n);
  Eigen::VectorXd times(n);
  Eigen::VectorXd latent(n);
  std::vector<std::uint8_t> events(static_cast<std::size_t>(n));
  int censored = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      x(j, i) = sd * data_rng.normal();
    }
    const double eta = beta.dot(x.col(i));
    // Exponential with rate e^eta by inverse transform; 1 - u avoids log(0).
    const double tau = -std::log(1.0 - data_rng.uniform01()) * std::exp(-eta);
    const double bound =
        config.censoring == CensoringBound::PerIndividual ? std::log(2.0) * std::exp(-eta) : std::log(2.0);
    const double cens = data_rng.uniform(0.0, bound);
    latent[i] = tau;
    if (tau <= cens) {
      times[i] = tau;
      events[static_cast<std::size_t>(i)] = 1;
    } else {
      times[i] = cens;
      events[static_cast<std::size_t>(i)] = 0;
      ++censored;
    }
  }

  std::vector<int> center_of(static_cast<std::size_t>(n));
  if (config.split == SplitKind::Uniform) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    split_rng.shuffle(order);
    for (int r = 0; r < n; ++r) {
      center_of[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r % c;
    }
  } else {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (times[a] != times[b]) return times[a] < times[b];
      return a < b;
    });
    for (int r = 0; r < n; ++r) {
      center_of[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r / config.per_center;
    }
  }

  return SyntheticData{Dataset(std::move(x), std::move(times), std::move(events)),
                       FederatedPartition(std::move(center_of), c), std::move(beta), std::move(latent),
                       static_cast<double>(censored) / static_cast<double>(n)};
}

}  // namespace fedsurv
