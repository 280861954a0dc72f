#include "fedsurv/schemes.hpp"

#include <string>
#include <utility>

#include "fedsurv/errors.hpp"
#include "fedsurv/survival.hpp"

namespace fedsurv {

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::Pool:
      return "POOL";
    case Scheme::Local:
      return "LOCAL";
    case Scheme::Ensemble:
      return "ENS";
    case Scheme::MiniBatch:
      return "MINI";
    case Scheme::NaiveFed:
      return "N-FL";
    case Scheme::DiscreteFed:
      return "DT-FL";
  }
  return "?";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  for (const Scheme s : {Scheme::Pool, Scheme::Local, Scheme::Ensemble, Scheme::MiniBatch, Scheme::NaiveFed,
                         Scheme::DiscreteFed}) {
    if (name == scheme_name(s)) {
      return s;
    }
  }
  return std::nullopt;
}

TrainedModel::TrainedModel(Scheme scheme, LinearRiskModel single) : scheme_(scheme), model_(std::move(single)) {}

TrainedModel::TrainedModel(Scheme scheme, std::vector<LinearRiskModel> per_center, bool average_predictions)
    : scheme_(scheme), model_(std::move(per_center)), average_predictions_(average_predictions) {}

TrainedModel::TrainedModel(Scheme scheme, DiscreteTimeModel discrete) : scheme_(scheme), model_(std::move(discrete)) {}

bool TrainedModel::is_per_center() const {
  return std::holds_alternative<std::vector<LinearRiskModel>>(model_) && !average_predictions_;
}

int TrainedModel::num_models() const {
  if (const auto* models = std::get_if<std::vector<LinearRiskModel>>(&model_)) {
    return static_cast<int>(models->size());
  }
  return 1;
}

const LinearRiskModel* TrainedModel::linear() const {
  return std::get_if<LinearRiskModel>(&model_);
}

const std::vector<LinearRiskModel>* TrainedModel::per_center() const {
  return std::get_if<std::vector<LinearRiskModel>>(&model_);
}

const DiscreteTimeModel* TrainedModel::discrete() const {
  return std::get_if<DiscreteTimeModel>(&model_);
}

namespace {

Eigen::VectorXd linear_scores(const LinearRiskModel& model, const Dataset& test) {
  if (model.beta.size() != test.num_covariates()) {
    throw DataError("model has " + std::to_string(model.beta.size()) + " coefficients, test data has " +
                    std::to_string(test.num_covariates()) + " covariates");
  }
  return test.covariate_matrix().transpose() * model.beta;
}

}  // namespace

Eigen::VectorXd TrainedModel::scores(const Dataset& test) const {
  if (const auto* single = std::get_if<LinearRiskModel>(&model_)) {
    return linear_scores(*single, test);
  }
  if (const auto* discrete = std::get_if<DiscreteTimeModel>(&model_)) {
    Eigen::VectorXd s(test.size());
    for (int i = 0; i < test.size(); ++i) {
      s[i] = discrete->score(test.covariates(i));
    }
    return s;
  }
  const auto& models = std::get<std::vector<LinearRiskModel>>(model_);
  if (!average_predictions_) {
    throw ConfigError("LOCAL keeps one model per center and has no single score; use scores_of per model");
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(test.size());
  for (const LinearRiskModel& m : models) {
    mean += linear_scores(m, test);
  }
  return mean / static_cast<double>(models.size());
}

Eigen::VectorXd TrainedModel::scores_of(int model_index, const Dataset& test) const {
  if (const auto* models = std::get_if<std::vector<LinearRiskModel>>(&model_)) {
    if (model_index < 0 || model_index >= static_cast<int>(models->size())) {
      throw DataError("model index " + std::to_string(model_index) + " out of range");
    }
    return linear_scores((*models)[static_cast<std::size_t>(model_index)], test);
  }
  if (model_index != 0) {
    throw DataError("this scheme trains a single model");
  }
  return scores(test);
}

namespace {

std::vector<LinearRiskModel> fit_per_center(const Dataset& train, const FederatedPartition& partition,
                                            const NewtonConfig& newton) {
  std::vector<LinearRiskModel> models;
  models.reserve(static_cast<std::size_t>(partition.num_centers()));
  for (int k = 0; k < partition.num_centers(); ++k) {
    const Dataset local = train.subset(partition.members(k));
    models.push_back(newton_fit_cox(local, newton).model);
  }
  return models;
}

TrainedModel train_discrete_fed(const SchemeConfig& config, const Dataset& train,
                                const FederatedPartition& partition) {
  const Dataset prepared = config.bin_width ? quantize_times(train, *config.bin_width) : train;
  std::vector<Center> centers = make_centers(prepared, partition);

  std::vector<const Dataset*> parts;
  parts.reserve(centers.size());
  for (const Center& center : centers) {
    parts.push_back(&center.data());
  }
  const TimeGrid grid = build_time_grid(parts, config.bin_width);

  // Global positive weight from the pooled label counts; the per-center
  // counts are additive, so this is one more cheap federated aggregate.
  double pos_weight = 1.0;
  if (config.weighted_bce) {
    std::int64_t positives = 0;
    std::int64_t negatives = 0;
    for (const Center& center : centers) {
      const StackedDataset stacked = build_stacked_dataset(center.data(), grid, false);
      positives += stacked.num_positive;
      negatives += stacked.num_negative;
    }
    if (positives == 0) {
      throw NoEventsError("class weighting needs at least one positive stacked sample");
    }
    pos_weight = static_cast<double>(negatives) / static_cast<double>(positives);
  }

  RiskFunction phi = config.phi_layers.empty() ? RiskFunction::identity(train.num_covariates())
                                               : RiskFunction::mlp(train.num_covariates(), config.phi_layers);
  DiscreteTimeModel model = DiscreteTimeModel::zero_initialized(grid.size(), std::move(phi), config.seed);

  std::vector<std::unique_ptr<CenterObjective>> objectives;
  objectives.reserve(centers.size());
  for (const Center& center : centers) {
    objectives.push_back(make_stacked_bce_objective(center, grid, model.phi, pos_weight));
  }

  FederatedConfig fed;
  fed.rounds = config.rounds;
  fed.batch_size = config.batch_size;
  fed.batch_mode = config.batch_mode;
  fed.adam = config.adam;
  fed.local_steps = config.local_steps;
  fed.loss_trace_stride = config.loss_trace_stride;
  fed.seed = config.seed;
  FederatedResult result = run_federated_training(centers, objectives, model.pack(), fed);

  model.unpack(result.params);
  TrainedModel trained(Scheme::DiscreteFed, std::move(model));
  trained.comm = result.comm;
  trained.loss_trace = std::move(result.loss_trace);
  trained.pos_weight_used = pos_weight;
  trained.grid_size_used = grid.size();
  return trained;
}

TrainedModel train_minibatch_cox(const SchemeConfig& config, const Dataset& train,
                                 const FederatedPartition& partition) {
  std::vector<Center> centers = make_centers(train, partition);
  std::vector<std::unique_ptr<CenterObjective>> objectives;
  objectives.reserve(centers.size());
  for (const Center& center : centers) {
    objectives.push_back(make_batch_cox_objective(center));
  }
  FederatedConfig fed;
  fed.rounds = config.rounds;
  fed.batch_size = config.batch_size;
  fed.batch_mode = config.batch_mode;
  fed.adam = config.adam;
  fed.local_steps = config.local_steps;
  fed.loss_trace_stride = config.loss_trace_stride;
  fed.seed = config.seed;
  FederatedResult result = run_federated_training(centers, objectives, Eigen::VectorXd::Zero(train.num_covariates()),
                                                  fed);
  TrainedModel trained(config.scheme, LinearRiskModel{std::move(result.params)});
  trained.comm = result.comm;
  trained.loss_trace = std::move(result.loss_trace);
  return trained;
}

}  // namespace

TrainedModel train_scheme(const SchemeConfig& config, const Dataset& train, const FederatedPartition& partition) {
  if (partition.size() != train.size()) {
    throw DataError("partition covers " + std::to_string(partition.size()) + " individuals, training data holds " +
                    std::to_string(train.size()));
  }
  if (train.num_events() == 0) {
    throw NoEventsError("training data contains no events");
  }
  switch (config.scheme) {
    case Scheme::Pool:
      return TrainedModel(Scheme::Pool, newton_fit_cox(train, config.newton).model);
    case Scheme::Local:
      return TrainedModel(Scheme::Local, fit_per_center(train, partition, config.newton), false);
    case Scheme::Ensemble:
      return TrainedModel(Scheme::Ensemble, fit_per_center(train, partition, config.newton), true);
    case Scheme::MiniBatch:
      // Pooled minibatches: a single logical center holding everything.
      return train_minibatch_cox(config, train, FederatedPartition::single_center(train.size()));
    case Scheme::NaiveFed:
      return train_minibatch_cox(config, train, partition);
    case Scheme::DiscreteFed:
      return train_discrete_fed(config, train, partition);
  }
  throw ConfigError("unknown scheme");
}

}  // namespace fedsurv
