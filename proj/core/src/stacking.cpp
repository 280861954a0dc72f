#include "fedsurv/stacking.hpp"

#include <cmath>
#include <string>

#include "fedsurv/errors.hpp"
#include "fedsurv/numerics.hpp"

namespace fedsurv {

DiscreteTimeModel DiscreteTimeModel::zero_initialized(int grid_size, RiskFunction phi, std::uint64_t seed) {
  if (grid_size < 1) {
    throw DataError("discrete-time model needs a nonempty grid");
  }
  DiscreteTimeModel model{Eigen::VectorXd::Zero(grid_size), std::move(phi), Eigen::VectorXd(), Eigen::VectorXd()};
  model.beta = Eigen::VectorXd::Zero(model.phi.output_dim());
  model.theta = model.phi.init_params(seed);
  return model;
}

int DiscreteTimeModel::num_params() const {
  return static_cast<int>(alpha.size() + beta.size() + theta.size());
}

Eigen::VectorXd DiscreteTimeModel::pack() const {
  Eigen::VectorXd flat(num_params());
  flat << alpha, beta, theta;
  return flat;
}

void DiscreteTimeModel::unpack(const Eigen::VectorXd& flat) {
  if (flat.size() != num_params()) {
    throw DataError("flat parameter vector has size " + std::to_string(flat.size()) + ", model expects " +
                    std::to_string(num_params()));
  }
  alpha = flat.head(alpha.size());
  beta = flat.segment(alpha.size(), beta.size());
  theta = flat.tail(theta.size());
}

double DiscreteTimeModel::logit(const Eigen::VectorXd& x, int m) const {
  if (m < 0 || m >= alpha.size()) {
    throw DataError("grid index " + std::to_string(m) + " outside grid of size " + std::to_string(alpha.size()));
  }
  return alpha[m] + score(x);
}

double discrete_conditional_hazard(const DiscreteTimeModel& model, const Eigen::VectorXd& x, int m) {
  return sigmoid(model.logit(x, m));
}

StackedDataset build_stacked_dataset(const Dataset& data, const TimeGrid& grid, bool weighted) {
  StackedDataset stacked;
  for (int i = 0; i < data.size(); ++i) {
    const double t = data.time(i);
    const int before = grid.count_strictly_before(t);
    // The reduction needs event times on the grid; detect mismatches loudly
    // rather than silently binning. (An off-grid censoring time only shifts
    // which negatives exist, which the count below already handles.)
    if (data.event(i) && !grid.try_index_of(t)) {
      throw DataError("observed event time " + std::to_string(t) +
                      " is not a grid point; quantize the data with the grid's bin width first");
    }
    for (int m = 0; m < before; ++m) {
      stacked.samples.push_back(StackedSample{i, m, false});
      ++stacked.num_negative;
    }
    if (data.event(i)) {
      stacked.samples.push_back(StackedSample{i, grid.index_of(t), true});
      ++stacked.num_positive;
    }
  }
  if (weighted) {
    if (stacked.num_positive == 0) {
      throw NoEventsError("class weighting needs at least one positive stacked sample");
    }
    stacked.pos_weight = static_cast<double>(stacked.num_negative) / static_cast<double>(stacked.num_positive);
  }
  return stacked;
}

double stacked_logit(const DiscreteTimeModel& model, const Dataset& data, const StackedSample& sample) {
  if (sample.individual < 0 || sample.individual >= data.size()) {
    throw DataError("stacked sample refers to individual " + std::to_string(sample.individual) +
                    " outside dataset of size " + std::to_string(data.size()));
  }
  return model.logit(data.covariates(sample.individual), sample.grid_index);
}

StackedObjectiveValue stacked_bce_loss_and_gradient(const DiscreteTimeModel& model, const Dataset& data,
                                                    std::span<const StackedSample> samples, double pos_weight) {
  const int t = static_cast<int>(model.alpha.size());
  const int pp = static_cast<int>(model.beta.size());
  StackedObjectiveValue out;
  out.gradient = Eigen::VectorXd::Zero(model.num_params());
  auto alpha_grad = out.gradient.head(t);
  auto beta_grad = out.gradient.segment(t, pp);
  auto theta_grad = out.gradient.tail(model.theta.size());

  RiskFunction::Trace trace;
  std::size_t k = 0;
  while (k < samples.size()) {
    const int i = samples[k].individual;
    if (i < 0 || i >= data.size()) {
      throw DataError("stacked sample refers to individual " + std::to_string(i) + " outside dataset of size " +
                      std::to_string(data.size()));
    }
    const Eigen::VectorXd x = data.covariates(i);
    const Eigen::VectorXd features = model.phi.forward(model.theta, x, trace);
    const double score = model.beta.dot(features);

    double dscore = 0.0;  // sum over this run of d(loss)/d(logit)
    for (; k < samples.size() && samples[k].individual == i; ++k) {
      const StackedSample& s = samples[k];
      if (s.grid_index < 0 || s.grid_index >= t) {
        throw DataError("stacked sample grid index " + std::to_string(s.grid_index) + " outside grid of size " +
                        std::to_string(t));
      }
      const double z = model.alpha[s.grid_index] + score;
      const double w = s.label ? pos_weight : 1.0;
      const double y = s.label ? 1.0 : 0.0;
      out.loss += w * (softplus(z) - y * z);
      const double dz = w * (sigmoid(z) - y);
      alpha_grad[s.grid_index] += dz;
      dscore += dz;
    }

    if (dscore != 0.0) {
      beta_grad += dscore * features;
      if (model.theta.size() > 0) {
        model.phi.backward(model.theta, trace, dscore * model.beta, theta_grad);
      }
    }
  }
  return out;
}

}  // namespace fedsurv
