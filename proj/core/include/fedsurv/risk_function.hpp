#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace fedsurv {

// The representation phi_theta(x) that feeds the linear head of a
// discrete-time model: either the identity (a plain linear model) or a small
// multilayer perceptron with leaky-ReLU hidden layers and a linear output.
// Parameters theta live in one flat vector laid out layer by layer
// ([W column-major, then b] per layer) so optimizers can treat them opaquely.
class RiskFunction {
 public:
  static RiskFunction identity(int input_dim);

  // layer_dims lists every layer width including the output width, e.g.
  // {16, 8} maps input -> 16 (leaky ReLU) -> 8 (linear).
  static RiskFunction mlp(int input_dim, std::vector<int> layer_dims);

  int input_dim() const { return input_dim_; }
  int output_dim() const { return dims_.empty() ? input_dim_ : dims_.back(); }
  int num_params() const { return num_params_; }
  bool is_identity() const { return dims_.empty(); }

  // Xavier-uniform weights, zero biases, reproducible from the seed.
  // Zero-length for the identity.
  Eigen::VectorXd init_params(std::uint64_t seed) const;

  // Post-activation values of every layer, kept so a backward pass does not
  // have to recompute the forward one. activations[0] is the input itself.
  struct Trace {
    std::vector<Eigen::VectorXd> activations;
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& theta, const Eigen::VectorXd& x, Trace& trace) const;

  // Accumulates d(loss)/d(theta) into theta_grad (which must be pre-sized and
  // is added to, not overwritten), given d(loss)/d(phi) from the head.
  void backward(const Eigen::VectorXd& theta, const Trace& trace, const Eigen::VectorXd& output_grad,
                Eigen::Ref<Eigen::VectorXd> theta_grad) const;

 private:
  RiskFunction(int input_dim, std::vector<int> layer_dims);

  int input_dim_ = 0;
  std::vector<int> dims_;        // layer widths, empty for identity
  std::vector<int> weight_offsets_;
  std::vector<int> bias_offsets_;
  int num_params_ = 0;

  static constexpr double kLeak = 0.1;
};

}  // namespace fedsurv
