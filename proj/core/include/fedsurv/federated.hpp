#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "fedsurv/optim.hpp"
#include "fedsurv/risk_function.hpp"
#include "fedsurv/rng.hpp"
#include "fedsurv/types.hpp"

namespace fedsurv {

enum class BatchMode {
  WithReplacement,          // every draw uniform over the population
  WithoutReplacementEpochs  // shuffled epochs consumed in consecutive chunks
};

// Draws global minibatches over a population of N individuals. The stream of
// batches depends only on (N, batch size, mode, seed) -- NOT on how the
// population is partitioned into centers -- which is exactly what makes a
// federated run reproduce its pooled counterpart.
class BatchSampler {
 public:
  BatchSampler(int population, int batch_size, BatchMode mode, std::uint64_t seed);

  std::vector<int> next();

  int population() const { return population_; }
  int batch_size() const { return batch_size_; }

 private:
  int population_;
  int batch_size_;
  BatchMode mode_;
  Rng rng_;
  std::vector<int> epoch_;
  std::size_t cursor_ = 0;
};

// A global batch together with its restriction to each center: by_center[k]
// is the subsequence of `global` owned by center k, in draw order. The union
// of the restrictions is the global batch, with multiplicity.
struct PooledBatch {
  std::vector<int> global;
  std::vector<std::vector<int>> by_center;
};

PooledBatch sample_pooled_equivalent_batch(const FederatedPartition& partition, BatchSampler& sampler);

// One center of the simulation. It holds a private copy of its rows, so no
// code path can reach another center's covariates, and it only understands
// global ids that belong to it: anything else is a DataError, which is the
// data-locality constraint made executable.
class Center {
 public:
  Center(int id, Dataset data, std::vector<int> global_ids);

  int id() const { return id_; }
  const Dataset& data() const { return data_; }
  const std::vector<int>& global_ids() const { return global_ids_; }

  int local_index(int global_id) const;

  // Maps a batch of global ids to local row indices, preserving order and
  // multiplicity. Throws DataError on an id this center does not hold.
  std::vector<int> to_local(std::span<const int> global_batch) const;

 private:
  int id_;
  Dataset data_;
  std::vector<int> global_ids_;
  std::unordered_map<int, int> local_of_;
};

// Splits a pooled dataset into per-center copies along a partition.
std::vector<Center> make_centers(const Dataset& pooled, const FederatedPartition& partition);

// What a center computes on its own rows. Implementations depend only on the
// center's local data (captured at construction) and are pure in the
// parameters, so concurrent evaluation is safe. An objective must not
// outlive the center data it was built from.
class CenterObjective {
 public:
  virtual ~CenterObjective() = default;

  virtual int param_dim() const = 0;

  // Adds the gradient over the given local rows (in order, with
  // multiplicity) into `out`.
  virtual void add_gradient(const Eigen::VectorXd& params, std::span<const int> local_rows,
                            Eigen::VectorXd& out) const = 0;

  virtual double loss(const Eigen::VectorXd& params, std::span<const int> local_rows) const = 0;

  // Loss over every local row; used for post-hoc training-loss traces.
  virtual double full_loss(const Eigen::VectorXd& params) const = 0;
};

// Cox negative log partial likelihood restricted to the batch: the risk sets
// are built from the batch members only. A batch without events contributes
// zero loss and gradient.
std::unique_ptr<CenterObjective> make_batch_cox_objective(const Center& center);

// Summed weighted BCE over the stacked rows of the batch individuals (see
// stacking.hpp); parameters are the flat [alpha; beta; theta] layout. All
// observed event times of the center must lie on the grid.
std::unique_ptr<CenterObjective> make_stacked_bce_objective(const Center& center, const TimeGrid& grid,
                                                            RiskFunction phi, double pos_weight);

// One center's gradient for one round: maps the global batch slice to local
// rows (rejecting ids the center does not hold) and evaluates the objective.
// An empty slice yields a zero gradient -- the center still reports.
Eigen::VectorXd local_gradient(const Center& center, const CenterObjective& objective,
                               std::span<const int> global_batch, const Eigen::VectorXd& params);

// Scalar counts of everything that crossed the simulated network. `down` is
// server -> centers (one broadcast per round, counted once), `up` is
// centers -> server (every center reports every round).
struct CommMeter {
  std::int64_t rounds = 0;
  std::int64_t values_down = 0;
  std::int64_t values_up = 0;

  void add_round(std::int64_t down, std::int64_t up) {
    ++rounds;
    values_down += down;
    values_up += up;
  }
};

struct RoundState {
  int round = 0;
  Eigen::VectorXd params;
};

// Sums the per-center gradients in ascending center order (a fixed order
// keeps runs reproducible) and applies one optimizer step.
RoundState aggregate_and_step(const RoundState& state, const std::vector<Eigen::VectorXd>& center_gradients,
                              AdamState& optimizer);

struct FederatedConfig {
  int rounds = 0;
  int batch_size = 0;
  BatchMode batch_mode = BatchMode::WithReplacement;
  AdamConfig adam;
  // 1 trains on aggregated gradients. Larger values switch to federated
  // averaging: each center takes this many local Adam steps on its own
  // batches, and the server averages the resulting parameters (weighted by
  // center size). Pooled equivalence only holds at 1.
  int local_steps = 1;
  // Record the global training loss every this many rounds (0 = never).
  int loss_trace_stride = 0;
  std::uint64_t seed = 0;
};

struct FederatedResult {
  Eigen::VectorXd params;
  std::vector<double> loss_trace;
  CommMeter comm;
};

// The simulation loop: per round, draw one global batch, restrict it to each
// center, collect per-center gradients (a center whose slice is empty
// reports zeros), aggregate, step. Everything is driven by one seeded
// sampler, so identical (data, config, seed) give bit-identical parameters.
FederatedResult run_federated_training(const std::vector<Center>& centers,
                                       const std::vector<std::unique_ptr<CenterObjective>>& objectives,
                                       const Eigen::VectorXd& init_params, const FederatedConfig& config);

}  // namespace fedsurv
