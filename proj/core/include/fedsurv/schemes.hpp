#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fedsurv/federated.hpp"
#include "fedsurv/optim.hpp"
#include "fedsurv/stacking.hpp"
#include "fedsurv/types.hpp"

namespace fedsurv {

// The training schemes under comparison.
enum class Scheme {
  Pool,        // POOL: Newton on the pooled Cox likelihood (the privacy-free upper bound)
  Local,       // LOCAL: one Cox model per center, judged by the average of their scores' c-indices
  Ensemble,    // ENS: per-center Cox models whose risk predictions are averaged
  MiniBatch,   // MINI: minibatch Cox on pooled data, risk sets built within the batch
  NaiveFed,    // N-FL: federated minibatch Cox with risk sets confined to each center's slice
  DiscreteFed  // DT-FL: federated weighted BCE on the stacked discrete-time reduction
};

std::string_view scheme_name(Scheme scheme);
std::optional<Scheme> parse_scheme(std::string_view name);

struct SchemeConfig {
  Scheme scheme = Scheme::Pool;
  NewtonConfig newton;  // POOL / LOCAL / ENS
  // Minibatch schemes (MINI / N-FL / DT-FL):
  AdamConfig adam;
  int rounds = 5000;
  int batch_size = 100;
  BatchMode batch_mode = BatchMode::WithReplacement;
  int local_steps = 1;
  int loss_trace_stride = 0;
  // DT-FL only: quantize observed times to this bin width and build the grid
  // from the bin edges; unset uses the distinct observed times as the grid.
  std::optional<double> bin_width;
  bool weighted_bce = false;
  // Hidden/output layer widths of the risk function; empty = identity.
  std::vector<int> phi_layers;
  std::uint64_t seed = 0;
};

// A fitted scheme, able to assign risk scores (higher = riskier) to unseen
// individuals. LOCAL deliberately does not produce a single score: it keeps
// one model per training center and is evaluated as the average of their
// individual performances, so scores() throws for it and callers iterate
// scores_of() instead.
class TrainedModel {
 public:
  TrainedModel(Scheme scheme, LinearRiskModel single);
  TrainedModel(Scheme scheme, std::vector<LinearRiskModel> per_center, bool average_predictions);
  TrainedModel(Scheme scheme, DiscreteTimeModel discrete);

  Scheme scheme() const { return scheme_; }
  bool is_per_center() const;
  int num_models() const;

  Eigen::VectorXd scores(const Dataset& test) const;
  Eigen::VectorXd scores_of(int model_index, const Dataset& test) const;

  CommMeter comm;                       // training-loop traffic (zero for the non-communicating schemes)
  std::vector<double> loss_trace;
  double pos_weight_used = 1.0;         // DT-FL bookkeeping
  int grid_size_used = 0;

  const LinearRiskModel* linear() const;
  const std::vector<LinearRiskModel>* per_center() const;
  const DiscreteTimeModel* discrete() const;

 private:
  Scheme scheme_;
  std::variant<LinearRiskModel, std::vector<LinearRiskModel>, DiscreteTimeModel> model_;
  bool average_predictions_ = false;
};

// Trains one scheme on one training split. Training data must contain at
// least one event (every scheme is fitting a survival model, after all);
// otherwise NoEventsError. LOCAL and ENS additionally need at least one
// event per center, since they fit a Cox model inside each center alone.
TrainedModel train_scheme(const SchemeConfig& config, const Dataset& train, const FederatedPartition& partition);

}  // namespace fedsurv
