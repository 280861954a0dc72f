#include "fedsurv/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsurv/errors.hpp"

namespace fedsurv {

Dataset::Dataset(Eigen::MatrixXd covariates, Eigen::VectorXd times, std::vector<std::uint8_t> events)
    : covariates_(std::move(covariates)), times_(std::move(times)), events_(std::move(events)) {
  const auto n = times_.size();
  if (n < 1) {
    throw DataError("dataset must contain at least one individual");
  }
  if (covariates_.cols() != n || static_cast<Eigen::Index>(events_.size()) != n) {
    throw DataError("dataset shape mismatch: " + std::to_string(covariates_.cols()) + " covariate columns, " +
                    std::to_string(n) + " times, " + std::to_string(events_.size()) + " event flags");
  }
  if (covariates_.rows() < 1) {
    throw DataError("dataset must have at least one covariate");
  }
  if (!covariates_.allFinite()) {
    throw DataError("covariates contain non-finite values");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(times_[i]) || times_[i] < 0.0) {
      throw DataError("observed time of individual " + std::to_string(i) + " is " + std::to_string(times_[i]) +
                      "; times must be finite and non-negative");
    }
    if (events_[static_cast<std::size_t>(i)] > 1) {
      throw DataError("event flag of individual " + std::to_string(i) + " must be 0 or 1");
    }
    num_events_ += events_[static_cast<std::size_t>(i)];
  }
}

Dataset Dataset::from_individuals(const std::vector<Individual>& individuals) {
  if (individuals.empty()) {
    throw DataError("dataset must contain at least one individual");
  }
  const auto p = individuals.front().covariates.size();
  Eigen::MatrixXd x(p, static_cast<Eigen::Index>(individuals.size()));
  Eigen::VectorXd t(static_cast<Eigen::Index>(individuals.size()));
  std::vector<std::uint8_t> d(individuals.size());
  for (std::size_t i = 0; i < individuals.size(); ++i) {
    if (individuals[i].covariates.size() != p) {
      throw DataError("individual " + std::to_string(i) + " has " + std::to_string(individuals[i].covariates.size()) +
                      " covariates, expected " + std::to_string(p));
    }
    x.col(static_cast<Eigen::Index>(i)) = individuals[i].covariates;
    t[static_cast<Eigen::Index>(i)] = individuals[i].time;
    d[i] = individuals[i].event ? 1 : 0;
  }
  return Dataset(std::move(x), std::move(t), std::move(d));
}

Individual Dataset::individual(int i) const {
  return Individual{covariates_.col(i), times_[i], event(i)};
}

Dataset Dataset::subset(std::span<const int> indices) const {
  if (indices.empty()) {
    throw DataError("dataset subset must be nonempty");
  }
  Eigen::MatrixXd x(covariates_.rows(), static_cast<Eigen::Index>(indices.size()));
  Eigen::VectorXd t(static_cast<Eigen::Index>(indices.size()));
  std::vector<std::uint8_t> d(indices.size());
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const int i = indices[c];
    if (i < 0 || i >= size()) {
      throw DataError("subset index " + std::to_string(i) + " outside dataset of size " + std::to_string(size()));
    }
    x.col(static_cast<Eigen::Index>(c)) = covariates_.col(i);
    t[static_cast<Eigen::Index>(c)] = times_[i];
    d[c] = events_[static_cast<std::size_t>(i)];
  }
  return Dataset(std::move(x), std::move(t), std::move(d));
}

Dataset Dataset::with_times(Eigen::VectorXd new_times) const {
  return Dataset(covariates_, std::move(new_times), events_);
}

TimeGrid::TimeGrid(std::vector<double> times, std::optional<double> bin_width)
    : times_(std::move(times)), bin_width_(bin_width) {
  if (times_.empty()) {
    throw DataError("time grid must contain at least one time");
  }
  double prev = 0.0;
  for (const double t : times_) {
    if (!std::isfinite(t) || t <= prev) {
      throw DataError("time grid must be finite, positive and strictly increasing");
    }
    prev = t;
  }
  if (bin_width_ && *bin_width_ <= 0.0) {
    throw DataError("time grid bin width must be positive");
  }
}

std::optional<int> TimeGrid::try_index_of(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.end() || *it != t) {
    return std::nullopt;
  }
  return static_cast<int>(it - times_.begin());
}

int TimeGrid::index_of(double t) const {
  const auto m = try_index_of(t);
  if (!m) {
    throw DataError("time " + std::to_string(t) + " is not a grid point");
  }
  return *m;
}

int TimeGrid::count_strictly_before(double t) const {
  const auto it = std::lower_bound(times_.begin(), times_.end(), t);
  return static_cast<int>(it - times_.begin());
}

FederatedPartition::FederatedPartition(std::vector<int> center_of, int num_centers)
    : center_of_(std::move(center_of)) {
  if (num_centers < 1) {
    throw DataError("partition must have at least one center");
  }
  if (center_of_.empty()) {
    throw DataError("partition must cover at least one individual");
  }
  members_.resize(static_cast<std::size_t>(num_centers));
  for (std::size_t i = 0; i < center_of_.size(); ++i) {
    const int k = center_of_[i];
    if (k < 0 || k >= num_centers) {
      throw DataError("individual " + std::to_string(i) + " assigned to center " + std::to_string(k) +
                      ", valid centers are 0.." + std::to_string(num_centers - 1));
    }
    members_[static_cast<std::size_t>(k)].push_back(static_cast<int>(i));
  }
  for (int k = 0; k < num_centers; ++k) {
    if (members_[static_cast<std::size_t>(k)].empty()) {
      throw DataError("center " + std::to_string(k) + " holds no individuals");
    }
  }
}

FederatedPartition FederatedPartition::single_center(int n) {
  return FederatedPartition(std::vector<int>(static_cast<std::size_t>(n), 0), 1);
}

}  // namespace fedsurv
