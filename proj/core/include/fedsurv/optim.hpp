#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fedsurv/survival.hpp"
#include "fedsurv/types.hpp"

namespace fedsurv {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. One instance owns the moment estimates for one
// parameter vector; steps mutate the parameters in place. Per-coordinate
// updates are bounded by roughly the learning rate, which is what makes the
// same rate usable across intercepts, head weights and network weights.
class AdamState {
 public:
  explicit AdamState(int dim, const AdamConfig& config = {});

  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& gradient);

  std::int64_t steps_taken() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  std::int64_t steps_ = 0;
};

struct NewtonConfig {
  int max_iterations = 100;
  double gradient_tolerance = 1e-7;  // max-norm of the gradient at the solution
  int max_step_halvings = 30;
};

struct NewtonResult {
  LinearRiskModel model;
  int iterations = 0;
  double gradient_max_norm = 0.0;
  std::vector<double> loss_trace;  // loss after every accepted iterate, starting at beta = 0
  bool converged = false;
};

// Newton-Raphson on the Cox negative log partial likelihood from beta = 0,
// with step halving so the loss never increases and an escalating ridge on
// the Hessian diagonal when the solve fails or fails to give a descent
// direction. Throws NumericError when the iteration budget runs out without
// meeting the gradient tolerance (e.g. separated data).
NewtonResult newton_fit_cox(const Dataset& data, const NewtonConfig& config = {});

}  // namespace fedsurv
