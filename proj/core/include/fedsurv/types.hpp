#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fedsurv {

// One right-censored observation: covariates x, observed time t, and the
// event indicator (true = the event was observed at t, false = censored at t).
struct Individual {
  Eigen::VectorXd covariates;
  double time = 0.0;
  bool event = false;
};

// A survival dataset held column-major: covariates is P x N with one column
// per individual, so risk-score products are single GEMV calls. Construction
// validates finiteness, non-negative times, and consistent shapes; a Dataset
// that exists is safe to evaluate objectives on.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd covariates, Eigen::VectorXd times, std::vector<std::uint8_t> events);

  static Dataset from_individuals(const std::vector<Individual>& individuals);

  int size() const { return static_cast<int>(times_.size()); }
  int num_covariates() const { return static_cast<int>(covariates_.rows()); }
  int num_events() const { return num_events_; }

  double time(int i) const { return times_[i]; }
  bool event(int i) const { return events_[static_cast<std::size_t>(i)] != 0; }
  auto covariates(int i) const { return covariates_.col(i); }

  const Eigen::MatrixXd& covariate_matrix() const { return covariates_; }
  const Eigen::VectorXd& times() const { return times_; }
  const std::vector<std::uint8_t>& events() const { return events_; }

  Individual individual(int i) const;

  // New dataset made of the given rows, in the given order. Repeated indices
  // are allowed (sampling with replacement produces them).
  Dataset subset(std::span<const int> indices) const;

  // Same covariates and event flags, different observed times.
  Dataset with_times(Eigen::VectorXd new_times) const;

 private:
  Eigen::MatrixXd covariates_;  // P x N
  Eigen::VectorXd times_;       // N
  std::vector<std::uint8_t> events_;
  int num_events_ = 0;
};

// The ordered event-time grid 0 < s^(1) < ... < s^(T) for discrete-time
// models, plus the bin width it was built with (if any). Lookups are exact:
// a time that is not a grid point is a caller bug, not something to round.
class TimeGrid {
 public:
  TimeGrid(std::vector<double> times, std::optional<double> bin_width);

  int size() const { return static_cast<int>(times_.size()); }
  double time(int m) const { return times_[static_cast<std::size_t>(m)]; }
  const std::vector<double>& times() const { return times_; }
  std::optional<double> bin_width() const { return bin_width_; }

  // Index of an exact grid point; throws DataError when t is not on the grid.
  int index_of(double t) const;
  std::optional<int> try_index_of(double t) const;

  // Number of grid times strictly below t.
  int count_strictly_before(double t) const;

 private:
  std::vector<double> times_;
  std::optional<double> bin_width_;
};

// Assignment of N individuals to C centers. Every individual belongs to
// exactly one center and every center is nonempty; member lists are kept in
// ascending index order so iteration over a center is deterministic.
class FederatedPartition {
 public:
  FederatedPartition(std::vector<int> center_of, int num_centers);

  static FederatedPartition single_center(int n);

  int size() const { return static_cast<int>(center_of_.size()); }
  int num_centers() const { return static_cast<int>(members_.size()); }
  int center_of(int i) const { return center_of_[static_cast<std::size_t>(i)]; }
  const std::vector<int>& members(int k) const { return members_[static_cast<std::size_t>(k)]; }

 private:
  std::vector<int> center_of_;
  std::vector<std::vector<int>> members_;
};

}  // namespace fedsurv
