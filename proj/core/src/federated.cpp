#include "fedsurv/federated.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "fedsurv/errors.hpp"
#include "fedsurv/numerics.hpp"
#include "fedsurv/stacking.hpp"
#include "fedsurv/survival.hpp"

namespace fedsurv {

BatchSampler::BatchSampler(int population, int batch_size, BatchMode mode, std::uint64_t seed)
    : population_(population), batch_size_(batch_size), mode_(mode), rng_(seed) {
  if (population_ < 1) {
    throw DataError("batch sampler needs a nonempty population");
  }
  if (batch_size_ < 1) {
    throw ConfigError("batch size must be positive");
  }
  if (mode_ == BatchMode::WithoutReplacementEpochs) {
    batch_size_ = std::min(batch_size_, population_);
    epoch_.resize(static_cast<std::size_t>(population_));
    std::iota(epoch_.begin(), epoch_.end(), 0);
    rng_.shuffle(epoch_);
  }
}

std::vector<int> BatchSampler::next() {
  std::vector<int> batch;
  if (mode_ == BatchMode::WithReplacement) {
    batch.reserve(static_cast<std::size_t>(batch_size_));
    for (int b = 0; b < batch_size_; ++b) {
      batch.push_back(static_cast<int>(rng_.uniform_below(static_cast<std::uint64_t>(population_))));
    }
    return batch;
  }
  // Epoch mode: consecutive chunks of a shuffled permutation. A batch never
  // spans epochs, so the last chunk of an epoch may be short.
  if (cursor_ >= epoch_.size()) {
    rng_.shuffle(epoch_);
    cursor_ = 0;
  }
  const std::size_t end = std::min(epoch_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
  batch.assign(epoch_.begin() + static_cast<std::ptrdiff_t>(cursor_), epoch_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return batch;
}

PooledBatch sample_pooled_equivalent_batch(const FederatedPartition& partition, BatchSampler& sampler) {
  if (sampler.population() != partition.size()) {
    throw DataError("sampler population " + std::to_string(sampler.population()) + " does not match partition over " +
                    std::to_string(partition.size()) + " individuals");
  }
  PooledBatch out;
  out.global = sampler.next();
  out.by_center.resize(static_cast<std::size_t>(partition.num_centers()));
  for (const int i : out.global) {
    out.by_center[static_cast<std::size_t>(partition.center_of(i))].push_back(i);
  }
  return out;
}

Center::Center(int id, Dataset data, std::vector<int> global_ids)
    : id_(id), data_(std::move(data)), global_ids_(std::move(global_ids)) {
  if (static_cast<int>(global_ids_.size()) != data_.size()) {
    throw DataError("center " + std::to_string(id_) + " got " + std::to_string(global_ids_.size()) +
                    " global ids for " + std::to_string(data_.size()) + " rows");
  }
  local_of_.reserve(global_ids_.size());
  for (std::size_t r = 0; r < global_ids_.size(); ++r) {
    if (!local_of_.emplace(global_ids_[r], static_cast<int>(r)).second) {
      throw DataError("center " + std::to_string(id_) + " holds global id " + std::to_string(global_ids_[r]) +
                      " twice");
    }
  }
}

int Center::local_index(int global_id) const {
  const auto it = local_of_.find(global_id);
  if (it == local_of_.end()) {
    throw DataError("center " + std::to_string(id_) + " does not hold individual " + std::to_string(global_id) +
                    "; cross-center reads are not a thing");
  }
  return it->second;
}

std::vector<int> Center::to_local(std::span<const int> global_batch) const {
  std::vector<int> local;
  local.reserve(global_batch.size());
  for (const int g : global_batch) {
    local.push_back(local_index(g));
  }
  return local;
}

std::vector<Center> make_centers(const Dataset& pooled, const FederatedPartition& partition) {
  if (partition.size() != pooled.size()) {
    throw DataError("partition covers " + std::to_string(partition.size()) + " individuals, data holds " +
                    std::to_string(pooled.size()));
  }
  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(partition.num_centers()));
  for (int k = 0; k < partition.num_centers(); ++k) {
    centers.emplace_back(k, pooled.subset(partition.members(k)), partition.members(k));
  }
  return centers;
}

namespace {

class BatchCoxObjective final : public CenterObjective {
 public:
  explicit BatchCoxObjective(const Dataset& data) : data_(&data), dim_(data.num_covariates()) {}

  int param_dim() const override { return dim_; }

  void add_gradient(const Eigen::VectorXd& params, std::span<const int> local_rows,
                    Eigen::VectorXd& out) const override {
    if (local_rows.empty()) {
      return;
    }
    const Dataset batch = data_->subset(local_rows);
    if (batch.num_events() == 0) {
      return;  // no partial-likelihood terms in this batch
    }
    out += cox_gradient(batch, LinearRiskModel{params});
  }

  double loss(const Eigen::VectorXd& params, std::span<const int> local_rows) const override {
    if (local_rows.empty()) {
      return 0.0;
    }
    const Dataset batch = data_->subset(local_rows);
    if (batch.num_events() == 0) {
      return 0.0;
    }
    return cox_negative_log_likelihood(batch, LinearRiskModel{params});
  }

  double full_loss(const Eigen::VectorXd& params) const override {
    if (data_->num_events() == 0) {
      return 0.0;
    }
    return cox_negative_log_likelihood(*data_, LinearRiskModel{params});
  }

 private:
  const Dataset* data_;
  int dim_;
};

class StackedBceObjective final : public CenterObjective {
 public:
  StackedBceObjective(const Dataset& data, const TimeGrid& grid, RiskFunction phi, double pos_weight)
      : data_(&data),
        phi_(std::move(phi)),
        pos_weight_(pos_weight),
        grid_size_(grid.size()),
        zero_bins_(static_cast<std::size_t>(data.size())),
        event_bin_(static_cast<std::size_t>(data.size()), -1) {
    if (phi_.input_dim() != data.num_covariates()) {
      throw DataError("risk function expects " + std::to_string(phi_.input_dim()) + " covariates, center data has " +
                      std::to_string(data.num_covariates()));
    }
    if (!(pos_weight_ > 0.0) || !std::isfinite(pos_weight_)) {
      throw DataError("positive-class weight must be positive and finite");
    }
    for (int i = 0; i < data.size(); ++i) {
      zero_bins_[static_cast<std::size_t>(i)] = grid.count_strictly_before(data.time(i));
      if (data.event(i)) {
        event_bin_[static_cast<std::size_t>(i)] = grid.index_of(data.time(i));
      }
    }
    all_rows_.resize(static_cast<std::size_t>(data.size()));
    std::iota(all_rows_.begin(), all_rows_.end(), 0);
  }

  int param_dim() const override { return grid_size_ + phi_.output_dim() + phi_.num_params(); }

  void add_gradient(const Eigen::VectorXd& params, std::span<const int> local_rows,
                    Eigen::VectorXd& out) const override {
    evaluate(params, local_rows, nullptr, &out);
  }

  double loss(const Eigen::VectorXd& params, std::span<const int> local_rows) const override {
    double value = 0.0;
    evaluate(params, local_rows, &value, nullptr);
    return value;
  }

  double full_loss(const Eigen::VectorXd& params) const override {
    double value = 0.0;
    evaluate(params, all_rows_, &value, nullptr);
    return value;
  }

 private:
  // Shared core. The stacked rows of one individual differ only in the
  // intercept, so each individual costs one phi pass plus vectorized work
  // over its bins; d(loss)/d(score) telescopes into a single scalar that
  // drives the beta and theta gradients.
  void evaluate(const Eigen::VectorXd& params, std::span<const int> local_rows, double* loss_out,
                Eigen::VectorXd* grad_out) const {
    if (params.size() != param_dim()) {
      throw DataError("stacked objective got " + std::to_string(params.size()) + " parameters, expected " +
                      std::to_string(param_dim()));
    }
    const int t = grid_size_;
    const int pp = phi_.output_dim();
    const auto alpha = params.head(t);
    const Eigen::VectorXd beta = params.segment(t, pp);
    const Eigen::VectorXd theta = params.tail(phi_.num_params());

    RiskFunction::Trace trace;
    Eigen::ArrayXd z;
    for (const int r : local_rows) {
      if (r < 0 || r >= data_->size()) {
        throw DataError("stacked objective got local row " + std::to_string(r) + " outside center of size " +
                        std::to_string(data_->size()));
      }
      const Eigen::VectorXd x = data_->covariates(r);
      const Eigen::VectorXd features = phi_.forward(theta, x, trace);
      const double score = beta.dot(features);
      const int zb = zero_bins_[static_cast<std::size_t>(r)];
      const int eb = event_bin_[static_cast<std::size_t>(r)];

      double dscore = 0.0;
      if (zb > 0) {
        z = alpha.head(zb).array() + score;
        if (loss_out != nullptr) {
          *loss_out += (z.max(0.0) + (1.0 + (-z.abs()).exp()).log()).sum();
        }
        if (grad_out != nullptr) {
          const Eigen::ArrayXd sig = 1.0 / (1.0 + (-z).exp());
          grad_out->head(zb).array() += sig;
          dscore += sig.sum();
        }
      }
      if (eb >= 0) {
        const double ze = alpha[eb] + score;
        if (loss_out != nullptr) {
          *loss_out += pos_weight_ * (softplus(ze) - ze);
        }
        if (grad_out != nullptr) {
          const double dz = pos_weight_ * (sigmoid(ze) - 1.0);
          (*grad_out)[eb] += dz;
          dscore += dz;
        }
      }
      if (grad_out != nullptr && dscore != 0.0) {
        grad_out->segment(t, pp) += dscore * features;
        if (phi_.num_params() > 0) {
          phi_.backward(theta, trace, dscore * beta, grad_out->tail(phi_.num_params()));
        }
      }
    }
  }

  const Dataset* data_;
  RiskFunction phi_;
  double pos_weight_;
  int grid_size_;
  std::vector<int> zero_bins_;
  std::vector<int> event_bin_;
  std::vector<int> all_rows_;
};

}  // namespace

std::unique_ptr<CenterObjective> make_batch_cox_objective(const Center& center) {
  return std::make_unique<BatchCoxObjective>(center.data());
}

std::unique_ptr<CenterObjective> make_stacked_bce_objective(const Center& center, const TimeGrid& grid,
                                                            RiskFunction phi, double pos_weight) {
  return std::make_unique<StackedBceObjective>(center.data(), grid, std::move(phi), pos_weight);
}

Eigen::VectorXd local_gradient(const Center& center, const CenterObjective& objective,
                               std::span<const int> global_batch, const Eigen::VectorXd& params) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(objective.param_dim());
  if (!global_batch.empty()) {
    const std::vector<int> local = center.to_local(global_batch);
    objective.add_gradient(params, local, grad);
  }
  return grad;
}

RoundState aggregate_and_step(const RoundState& state, const std::vector<Eigen::VectorXd>& center_gradients,
                              AdamState& optimizer) {
  if (center_gradients.empty()) {
    throw DataError("aggregation needs at least one center gradient");
  }
  Eigen::VectorXd total = Eigen::VectorXd::Zero(state.params.size());
  for (const Eigen::VectorXd& g : center_gradients) {
    if (g.size() != total.size()) {
      throw DataError("center gradient size " + std::to_string(g.size()) + " does not match parameter size " +
                      std::to_string(total.size()));
    }
    total += g;
  }
  RoundState next{state.round + 1, state.params};
  optimizer.step(next.params, total);
  return next;
}

namespace {

double global_training_loss(const std::vector<std::unique_ptr<CenterObjective>>& objectives,
                            const Eigen::VectorXd& params) {
  double loss = 0.0;
  for (const auto& objective : objectives) {
    loss += objective->full_loss(params);
  }
  return loss;
}

}  // namespace

FederatedResult run_federated_training(const std::vector<Center>& centers,
                                       const std::vector<std::unique_ptr<CenterObjective>>& objectives,
                                       const Eigen::VectorXd& init_params, const FederatedConfig& config) {
  if (centers.empty() || centers.size() != objectives.size()) {
    throw DataError("need one objective per center");
  }
  if (config.rounds < 0 || config.local_steps < 1 || config.loss_trace_stride < 0) {
    throw ConfigError("invalid federated training configuration");
  }
  const int dim = objectives.front()->param_dim();
  for (const auto& objective : objectives) {
    if (objective->param_dim() != dim) {
      throw DataError("centers disagree on the parameter dimension");
    }
  }
  if (init_params.size() != dim) {
    throw DataError("initial parameters have size " + std::to_string(init_params.size()) + ", objectives expect " +
                    std::to_string(dim));
  }

  // Check the centers tile a global id space 0..N-1 exactly once.
  int population = 0;
  for (const Center& center : centers) {
    population += center.data().size();
  }
  std::vector<int> owner(static_cast<std::size_t>(population), -1);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    for (const int g : centers[k].global_ids()) {
      if (g < 0 || g >= population || owner[static_cast<std::size_t>(g)] != -1) {
        throw DataError("centers do not form a partition of 0.." + std::to_string(population - 1));
      }
      owner[static_cast<std::size_t>(g)] = static_cast<int>(k);
    }
  }

  FederatedResult result;
  result.params = init_params;

  if (config.local_steps == 1) {
    BatchSampler sampler(population, config.batch_size, config.batch_mode, derive_seed(config.seed, 0xba7cULL));
    AdamState adam(dim, config.adam);
    RoundState state{0, init_params};
    std::vector<std::vector<int>> by_center(centers.size());
    std::vector<Eigen::VectorXd> gradients(centers.size());
    for (int q = 1; q <= config.rounds; ++q) {
      const std::vector<int> batch = sampler.next();
      for (auto& slice : by_center) {
        slice.clear();
      }
      for (const int g : batch) {
        by_center[static_cast<std::size_t>(owner[static_cast<std::size_t>(g)])].push_back(g);
      }
      for (std::size_t k = 0; k < centers.size(); ++k) {
        gradients[k] = local_gradient(centers[k], *objectives[k], by_center[k], state.params);
      }
      state = aggregate_and_step(state, gradients, adam);
      result.comm.add_round(dim, static_cast<std::int64_t>(centers.size()) * dim);
      if (config.loss_trace_stride > 0 && q % config.loss_trace_stride == 0) {
        result.loss_trace.push_back(global_training_loss(objectives, state.params));
      }
    }
    result.params = std::move(state.params);
    return result;
  }

  // Federated averaging: each center advances its own optimizer and batches
  // for local_steps steps from the broadcast parameters, then the server
  // takes the size-weighted mean of the center parameters.
  std::vector<BatchSampler> samplers;
  std::vector<AdamState> states;
  samplers.reserve(centers.size());
  states.reserve(centers.size());
  for (std::size_t k = 0; k < centers.size(); ++k) {
    samplers.emplace_back(centers[k].data().size(), std::min(config.batch_size, centers[k].data().size()),
                          config.batch_mode, derive_seed(config.seed, 0xba7cULL, k));
    states.emplace_back(dim, config.adam);
  }
  Eigen::VectorXd params = init_params;
  for (int q = 1; q <= config.rounds; ++q) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      Eigen::VectorXd local = params;
      for (int s = 0; s < config.local_steps; ++s) {
        const std::vector<int> rows = samplers[k].next();
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
        objectives[k]->add_gradient(local, rows, grad);
        states[k].step(local, grad);
      }
      mean += (static_cast<double>(centers[k].data().size()) / static_cast<double>(population)) * local;
    }
    params = std::move(mean);
    result.comm.add_round(dim, static_cast<std::int64_t>(centers.size()) * dim);
    if (config.loss_trace_stride > 0 && q % config.loss_trace_stride == 0) {
      result.loss_trace.push_back(global_training_loss(objectives, params));
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace fedsurv
