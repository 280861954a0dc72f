#include "fedsurv/risk_function.hpp"

#include <cmath>
#include <string>

#include "fedsurv/errors.hpp"
#include "fedsurv/rng.hpp"

namespace fedsurv {

RiskFunction RiskFunction::identity(int input_dim) {
  return RiskFunction(input_dim, {});
}

RiskFunction RiskFunction::mlp(int input_dim, std::vector<int> layer_dims) {
  if (layer_dims.empty()) {
    throw ConfigError("an MLP risk function needs at least one layer width");
  }
  return RiskFunction(input_dim, std::move(layer_dims));
}

RiskFunction::RiskFunction(int input_dim, std::vector<int> layer_dims)
    : input_dim_(input_dim), dims_(std::move(layer_dims)) {
  if (input_dim_ < 1) {
    throw ConfigError("risk function input dimension must be positive");
  }
  int fan_in = input_dim_;
  for (const int width : dims_) {
    if (width < 1) {
      throw ConfigError("risk function layer widths must be positive");
    }
    weight_offsets_.push_back(num_params_);
    num_params_ += width * fan_in;
    bias_offsets_.push_back(num_params_);
    num_params_ += width;
    fan_in = width;
  }
}

Eigen::VectorXd RiskFunction::init_params(std::uint64_t seed) const {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(num_params_);
  Rng rng(derive_seed(seed, 0x7068695fULL));  // tag keeps this stream distinct from samplers
  int fan_in = input_dim_;
  for (std::size_t l = 0; l < dims_.size(); ++l) {
    const int fan_out = dims_[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    double* w = theta.data() + weight_offsets_[l];
    for (int k = 0; k < fan_out * fan_in; ++k) {
      w[k] = rng.uniform(-limit, limit);
    }
    fan_in = fan_out;  // biases stay zero
  }
  return theta;
}

Eigen::VectorXd RiskFunction::forward(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
  Trace trace;
  return forward(theta, x, trace);
}

Eigen::VectorXd RiskFunction::forward(const Eigen::VectorXd& theta, const Eigen::VectorXd& x, Trace& trace) const {
  if (x.size() != input_dim_) {
    throw DataError("risk function input has size " + std::to_string(x.size()) + ", expected " +
                    std::to_string(input_dim_));
  }
  if (theta.size() != num_params_) {
    throw DataError("risk function got " + std::to_string(theta.size()) + " parameters, expected " +
                    std::to_string(num_params_));
  }
  trace.activations.clear();
  trace.activations.push_back(x);
  if (dims_.empty()) {
    return x;
  }
  Eigen::VectorXd a = x;
  int fan_in = input_dim_;
  for (std::size_t l = 0; l < dims_.size(); ++l) {
    const int width = dims_[l];
    const Eigen::Map<const Eigen::MatrixXd> w(theta.data() + weight_offsets_[l], width, fan_in);
    const Eigen::Map<const Eigen::VectorXd> b(theta.data() + bias_offsets_[l], width);
    Eigen::VectorXd z = w * a + b;
    if (l + 1 < dims_.size()) {
      z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeak * v; });
    }
    trace.activations.push_back(z);
    a = std::move(z);
    fan_in = width;
  }
  return a;
}

void RiskFunction::backward(const Eigen::VectorXd& theta, const Trace& trace, const Eigen::VectorXd& output_grad,
                            Eigen::Ref<Eigen::VectorXd> theta_grad) const {
  if (dims_.empty()) {
    return;  // no parameters
  }
  if (trace.activations.size() != dims_.size() + 1) {
    throw DataError("risk function backward pass got a trace from a different architecture");
  }
  Eigen::VectorXd delta = output_grad;  // output layer is linear
  for (std::size_t l = dims_.size(); l-- > 0;) {
    const int width = dims_[l];
    const int fan_in = l == 0 ? input_dim_ : dims_[l - 1];
    const Eigen::VectorXd& below = trace.activations[l];
    Eigen::Map<Eigen::MatrixXd> wg(theta_grad.data() + weight_offsets_[l], width, fan_in);
    Eigen::Map<Eigen::VectorXd> bg(theta_grad.data() + bias_offsets_[l], width);
    wg.noalias() += delta * below.transpose();
    bg += delta;
    if (l == 0) {
      break;
    }
    const Eigen::Map<const Eigen::MatrixXd> w(theta.data() + weight_offsets_[l], width, fan_in);
    Eigen::VectorXd upstream = w.transpose() * delta;
    // The layer below is leaky-ReLU; its slope is recoverable from the sign
    // of its post-activation value.
    for (Eigen::Index i = 0; i < upstream.size(); ++i) {
      if (below[i] <= 0.0) {
        upstream[i] *= kLeak;
      }
    }
    delta = std::move(upstream);
  }
}

}  // namespace fedsurv
