#include "pgnn/nn.hpp"

#include "pgnn/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pgnn {

std::string to_string(Activation act) { return act == Activation::Tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

DenseLayer DenseLayer::glorot(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseLayer layer = zeros(in, out, act);
  // Fill row by row so the draw order does not depend on storage order.
  for (Eigen::Index r = 0; r < out; ++r) {
    for (Eigen::Index c = 0; c < in; ++c) layer.w(r, c) = dist(rng);
  }
  return layer;
}

DenseLayer DenseLayer::zeros(Eigen::Index in, Eigen::Index out, Activation act) {
  return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out), act};
}

DenseForward dense_forward(const DenseLayer& layer, const Eigen::MatrixXd& input) {
  if (input.rows() != layer.in_dim()) {
    throw DimensionMismatch("dense layer expects input dim " + std::to_string(layer.in_dim()) +
                            ", got " + std::to_string(input.rows()));
  }
  Eigen::MatrixXd out = layer.w * input;
  out.colwise() += layer.bias;
  if (layer.activation == Activation::Tanh) out = out.array().tanh().matrix();
  return {out, {input, out}};
}

DenseBackward dense_backward(const DenseLayer& layer, const DenseCache& cache,
                             const Eigen::MatrixXd& upstream) {
  Eigen::MatrixXd delta = upstream;
  if (layer.activation == Activation::Tanh) {
    delta.array() *= 1.0 - cache.output.array().square();
  }
  DenseBackward out;
  out.grads.w = delta * cache.input.transpose();
  out.grads.bias = delta.rowwise().sum();
  out.input_grad = layer.w.transpose() * delta;
  return out;
}

MlpStack MlpStack::glorot(const std::vector<Eigen::Index>& dims, Rng& rng) {
  if (dims.size() < 2) throw std::invalid_argument("an MLP needs at least input and output dims");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    layers.push_back(DenseLayer::glorot(dims[i], dims[i + 1],
                                        last ? Activation::Identity : Activation::Tanh, rng));
  }
  return MlpStack(std::move(layers));
}

Eigen::MatrixXd MlpStack::forward(const Eigen::MatrixXd& input, Trace* trace) const {
  if (trace) trace->caches.clear();
  Eigen::MatrixXd x = input;
  for (const auto& layer : layers_) {
    auto fwd = dense_forward(layer, x);
    x = std::move(fwd.output);
    if (trace) trace->caches.push_back(std::move(fwd.cache));
  }
  return x;
}

Eigen::MatrixXd MlpStack::backward(const Trace& trace, const Eigen::MatrixXd& upstream,
                                   std::vector<DenseGrads>& grads) const {
  std::vector<DenseGrads> local(layers_.size());
  Eigen::MatrixXd g = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    auto back = dense_backward(layers_[i], trace.caches[i], g);
    local[i] = std::move(back.grads);
    g = std::move(back.input_grad);
  }
  for (auto& lg : local) grads.push_back(std::move(lg));
  return g;
}

LossValue sq_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionMismatch("squared loss: prediction and target shapes differ");
  }
  const double batch = static_cast<double>(std::max<Eigen::Index>(pred.cols(), 1));
  Eigen::MatrixXd diff = pred - target;
  return {diff.squaredNorm() / batch, 2.0 * diff / batch};
}

void LossWeights::validate() const {
  if (!(alpha_sup >= 0.0) || !(alpha_unsup >= 0.0) || !(alpha_sup + alpha_unsup > 0.0)) {
    throw std::invalid_argument("loss weights must be nonnegative with a positive sum");
  }
}

MultitaskLoss multitask_loss(const Eigen::MatrixXd& v_pred, const Eigen::MatrixXd& v_tgt,
                             const Eigen::MatrixXd& s_pred, const Eigen::MatrixXd& s_tgt,
                             const LossWeights& w) {
  auto sup = sq_loss(v_pred, v_tgt);
  auto unsup = sq_loss(s_pred, s_tgt);
  MultitaskLoss out;
  out.sup = sup.value;
  out.unsup = unsup.value;
  out.value = w.alpha_sup * sup.value + w.alpha_unsup * unsup.value;
  out.grad_v = w.alpha_sup * sup.grad;
  out.grad_s = w.alpha_unsup * unsup.grad;
  return out;
}

void adam_step(OptimizerState& state, std::span<const ParamView> params) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p.value.size())));
      state.v.push_back(Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(p.value.size())));
    }
  }
  if (state.m.size() != params.size()) {
    throw DimensionMismatch("optimizer state does not match the parameter list");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    const auto n = static_cast<Eigen::Index>(p.value.size());
    if (n != state.m[k].size() || p.grad.size() != p.value.size()) {
      throw DimensionMismatch("optimizer parameter block changed shape");
    }
    Eigen::Map<Eigen::ArrayXd> value(p.value.data(), n);
    Eigen::Map<const Eigen::ArrayXd> grad(p.grad.data(), n);
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grad;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grad.square();
    value -= state.lr * (state.m[k] / c1) / ((state.v[k] / c2).sqrt() + state.eps);
  }
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double grad_check(const std::function<double()>& loss, std::span<double> params,
                  std::span<const double> analytic, double eps, double floor) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  if (params.size() != analytic.size()) {
    throw DimensionMismatch("gradient check: parameter and gradient lengths differ");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = loss();
    params[i] = saved - eps;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, relative_error(analytic[i], numeric, floor));
  }
  return worst;
}

}  // namespace pgnn
