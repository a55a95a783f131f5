#pragma once

// Dense layers, squared losses, Adam and a finite-difference gradient checker.
//
// Batches are stored column-major: each column of an activation matrix is one
// sample. Losses sum squared errors within a sample and average across the
// batch, so a batch gradient is the mean of per-sample gradients.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pgnn {

using Rng = std::mt19937_64;

enum class Activation { Tanh, Identity };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd w;     ///< out x in
  Eigen::VectorXd bias;  ///< out
  Activation activation = Activation::Identity;

  Eigen::Index in_dim() const { return w.cols(); }
  Eigen::Index out_dim() const { return w.rows(); }

  /// Glorot-uniform weights, zero bias.
  static DenseLayer glorot(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng);
  static DenseLayer zeros(Eigen::Index in, Eigen::Index out, Activation act);
};

struct DenseCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd output;  ///< post-activation, reused by the tanh derivative
};

struct DenseGrads {
  Eigen::MatrixXd w;
  Eigen::VectorXd bias;
};

struct DenseForward {
  Eigen::MatrixXd output;
  DenseCache cache;
};

struct DenseBackward {
  Eigen::MatrixXd input_grad;
  DenseGrads grads;
};

/// output = act(W * input + b). Throws DimensionMismatch.
DenseForward dense_forward(const DenseLayer& layer, const Eigen::MatrixXd& input);
DenseBackward dense_backward(const DenseLayer& layer, const DenseCache& cache,
                             const Eigen::MatrixXd& upstream);

/// A chain of dense layers.
class MlpStack {
 public:
  MlpStack() = default;
  explicit MlpStack(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  /// dims = {in, hidden..., out}; tanh on hidden layers, identity on the output layer.
  static MlpStack glorot(const std::vector<Eigen::Index>& dims, Rng& rng);

  struct Trace {
    std::vector<DenseCache> caches;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Trace* trace = nullptr) const;
  /// Returns dL/dinput; appends per-layer gradients (in layer order) to grads.
  Eigen::MatrixXd backward(const Trace& trace, const Eigen::MatrixXd& upstream,
                           std::vector<DenseGrads>& grads) const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  Eigen::Index in_dim() const { return layers_.front().in_dim(); }
  Eigen::Index out_dim() const { return layers_.back().out_dim(); }

 private:
  std::vector<DenseLayer> layers_;
};

struct LossValue {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

/// value = mean over columns of sum((pred - target)^2); grad = 2 (pred - target) / batch.
LossValue sq_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

struct LossWeights {
  double alpha_sup = 1.0;
  double alpha_unsup = 0.1;

  void validate() const;
};

struct MultitaskLoss {
  double value = 0.0;
  double sup = 0.0;    ///< unweighted supervised (voltage) term
  double unsup = 0.0;  ///< unweighted reconstruction (injection) term
  Eigen::MatrixXd grad_v;
  Eigen::MatrixXd grad_s;
};

/// alpha_sup * l(v_pred - v_tgt) + alpha_unsup * l(s_pred - s_tgt).
MultitaskLoss multitask_loss(const Eigen::MatrixXd& v_pred, const Eigen::MatrixXd& v_tgt,
                             const Eigen::MatrixXd& s_pred, const Eigen::MatrixXd& s_tgt,
                             const LossWeights& w);

/// A parameter array and the gradient to apply to it.
struct ParamView {
  std::span<double> value;
  std::span<const double> grad;
};

template <typename Derived>
std::span<double> as_span(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
template <typename Derived>
std::span<const double> as_span(const Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::ArrayXd> m;
  std::vector<Eigen::ArrayXd> v;
};

/// One Adam update of every view. Moments are allocated on the first call;
/// later calls must pass views of the same shapes in the same order.
void adam_step(OptimizerState& state, std::span<const ParamView> params);

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Central-difference check of analytic parameter gradients. `loss` must read
/// the current contents of `params`. Returns the worst relative error.
double grad_check(const std::function<double()>& loss, std::span<double> params,
                  std::span<const double> analytic, double eps = 1e-5, double floor = 1e-4);

}  // namespace pgnn
