#include "fedsurv/optim.hpp"

#include <cmath>
#include <string>

#include "fedsurv/errors.hpp"

namespace fedsurv {

AdamState::AdamState(int dim, const AdamConfig& config) : config_(config) {
  if (dim < 1) {
    throw ConfigError("Adam needs a positive parameter dimension");
  }
  if (config_.learning_rate <= 0.0 || config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 ||
      config_.beta2 >= 1.0 || config_.epsilon <= 0.0) {
    throw ConfigError("invalid Adam configuration");
  }
  m_ = Eigen::VectorXd::Zero(dim);
  v_ = Eigen::VectorXd::Zero(dim);
}

void AdamState::step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& gradient) {
  if (params.size() != m_.size() || gradient.size() != m_.size()) {
    throw DataError("Adam step got " + std::to_string(params.size()) + " parameters and " +
                    std::to_string(gradient.size()) + " gradient entries, state holds " + std::to_string(m_.size()));
  }
  if (!gradient.allFinite()) {
    throw NumericError("non-finite gradient passed to Adam");
  }
  ++steps_;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * gradient;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * gradient.cwiseProduct(gradient);
  const double m_scale = 1.0 / (1.0 - std::pow(config_.beta1, static_cast<double>(steps_)));
  const double v_scale = 1.0 / (1.0 - std::pow(config_.beta2, static_cast<double>(steps_)));
  params -= config_.learning_rate *
            (m_scale * m_.array() / ((v_scale * v_.array()).sqrt() + config_.epsilon)).matrix();
}

NewtonResult newton_fit_cox(const Dataset& data, const NewtonConfig& config) {
  if (config.max_iterations < 1 || config.gradient_tolerance <= 0.0 || config.max_step_halvings < 1) {
    throw ConfigError("invalid Newton configuration");
  }
  const int p = data.num_covariates();
  NewtonResult result;
  result.model.beta = Eigen::VectorXd::Zero(p);

  CoxDerivatives current = cox_derivatives(data, result.model, true);
  result.loss_trace.push_back(current.loss);

  for (int it = 0; it < config.max_iterations; ++it) {
    result.gradient_max_norm = current.gradient.lpNorm<Eigen::Infinity>();
    if (result.gradient_max_norm < config.gradient_tolerance) {
      result.converged = true;
      result.iterations = it;
      return result;
    }

    // Solve H d = -g, escalating a ridge on the diagonal until the factor
    // succeeds and d is a descent direction.
    Eigen::VectorXd direction;
    bool have_direction = false;
    for (double ridge = 0.0; ridge <= 1e-3; ridge = (ridge == 0.0 ? 1e-9 : ridge * 10.0)) {
      Eigen::MatrixXd h = current.hessian;
      if (ridge > 0.0) {
        h.diagonal().array() += ridge;
      }
      const Eigen::LDLT<Eigen::MatrixXd> factor(h);
      if (factor.info() != Eigen::Success) {
        continue;
      }
      direction = factor.solve(-current.gradient);
      if (direction.allFinite() && current.gradient.dot(direction) < 0.0) {
        have_direction = true;
        break;
      }
    }
    if (!have_direction) {
      throw NumericError("Newton could not find a descent direction (Hessian numerically singular)");
    }

    // Step halving: accept the first step that does not increase the loss.
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < config.max_step_halvings; ++h, scale *= 0.5) {
      const LinearRiskModel candidate{result.model.beta + scale * direction};
      CoxDerivatives next = cox_derivatives(data, candidate, true);
      if (next.loss <= current.loss) {
        result.model = candidate;
        current = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No step length decreased the loss; we are as converged as the
      // floating point allows. Report honestly against the tolerance.
      result.gradient_max_norm = current.gradient.lpNorm<Eigen::Infinity>();
      result.iterations = it + 1;
      result.converged = result.gradient_max_norm < config.gradient_tolerance;
      if (!result.converged) {
        throw NumericError("Newton stalled with gradient max-norm " + std::to_string(result.gradient_max_norm));
      }
      return result;
    }
    result.loss_trace.push_back(current.loss);
  }

  result.gradient_max_norm = current.gradient.lpNorm<Eigen::Infinity>();
  if (result.gradient_max_norm < config.gradient_tolerance) {
    result.converged = true;
    result.iterations = config.max_iterations;
    return result;
  }
  throw NumericError("Newton did not converge in " + std::to_string(config.max_iterations) +
                     " iterations (gradient max-norm " + std::to_string(result.gradient_max_norm) + ")");
}

}  // namespace fedsurv
