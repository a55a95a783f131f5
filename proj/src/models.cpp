#include "pgnn/models.hpp"

#include "pgnn/errors.hpp"
#include "pgnn/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace pgnn {

namespace {

enum Stream : std::uint64_t { kEncoderInit = 1, kDecoderInit = 2, kShuffle = 3 };

Eigen::MatrixXd top(const Eigen::MatrixXd& m, Eigen::Index n) { return m.topRows(n); }
Eigen::MatrixXd bottom(const Eigen::MatrixXd& m, Eigen::Index n) { return m.bottomRows(n); }

Eigen::MatrixXd vstack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

void push_dense(std::vector<ParamView>& views, std::vector<DenseLayer>& layers,
                const std::vector<DenseGrads>& grads) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    views.push_back({as_span(layers[i].w), as_span(grads.at(i).w)});
    views.push_back({as_span(layers[i].bias), as_span(grads.at(i).bias)});
  }
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

// -- checkpoint text helpers -------------------------------------------------

void put_values(std::string& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) {
    out += i ? ' ' : '\n';
    out += format_exact(data[i]);
  }
  out += '\n';
}

void put_matrix(std::string& out, const std::string& tag, const Eigen::MatrixXd& m) {
  out += tag + ' ' + std::to_string(m.rows()) + ' ' + std::to_string(m.cols());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  put_values(out, rm.data(), rm.size());
}

void put_vector(std::string& out, const std::string& tag, const Eigen::VectorXd& v) {
  out += tag + ' ' + std::to_string(v.size());
  put_values(out, v.data(), v.size());
}

class TokenReader {
 public:
  explicit TokenReader(const std::string& text) : in_(text) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw ParseError(0, "checkpoint ended unexpectedly");
    return w;
  }
  void expect(const std::string& w) {
    const auto got = word();
    if (got != w) throw ParseError(0, "checkpoint: expected '" + w + "', got '" + got + "'");
  }
  long integer() { return std::stol(word()); }
  double number() { return parse_double(word()); }
  bool done() {
    in_ >> std::ws;
    return in_.eof();
  }

  Eigen::MatrixXd matrix(const std::string& tag) {
    expect(tag);
    const long r = integer();
    const long c = integer();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(r, c);
    for (long i = 0; i < r * c; ++i) m.data()[i] = number();
    return m;
  }
  Eigen::VectorXd vector(const std::string& tag) {
    expect(tag);
    const long n = integer();
    Eigen::VectorXd v(n);
    for (long i = 0; i < n; ++i) v(i) = number();
    return v;
  }

 private:
  std::istringstream in_;
};

void put_stack(std::string& out, const std::string& tag, const MlpStack& stack) {
  out += "stack " + tag + ' ' + std::to_string(stack.layers().size()) + '\n';
  for (const auto& layer : stack.layers()) {
    out += "layer " + to_string(layer.activation) + '\n';
    put_matrix(out, "w", layer.w);
    put_vector(out, "b", layer.bias);
  }
}

MlpStack read_stack(TokenReader& in, const std::string& tag) {
  in.expect("stack");
  in.expect(tag);
  const long count = in.integer();
  std::vector<DenseLayer> layers;
  for (long i = 0; i < count; ++i) {
    in.expect("layer");
    DenseLayer layer;
    layer.activation = activation_from_string(in.word());
    layer.w = in.matrix("w");
    layer.bias = in.vector("b");
    layers.push_back(std::move(layer));
  }
  return MlpStack(std::move(layers));
}

void put_affine(std::string& out, const std::string& tag, const AffineTransform& t) {
  put_vector(out, "affine_offset_" + tag, t.offset);
  put_vector(out, "affine_scale_" + tag, t.scale);
}

AffineTransform read_affine(TokenReader& in, const std::string& tag) {
  AffineTransform t;
  t.offset = in.vector("affine_offset_" + tag);
  t.scale = in.vector("affine_scale_" + tag);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Bilinear decoder

BnnParams BnnParams::zeros(Eigen::Index n) {
  return {Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n),
          Eigen::VectorXd::Zero(n)};
}

BnnForward bnn_forward(const BnnParams& params, const Eigen::MatrixXd& mu,
                       const Eigen::MatrixXd& omega) {
  const Eigen::Index n = params.size();
  if (mu.rows() != n || omega.rows() != n || mu.cols() != omega.cols()) {
    throw DimensionMismatch("bilinear decoder expects " + std::to_string(n) + "-bus voltages");
  }
  BnnForward out;
  auto& c = out.cache;
  c.mu = mu;
  c.omega = omega;
  c.gm = params.w_g * mu;
  c.gw = params.w_g * omega;
  c.bm = params.w_b * mu;
  c.bw = params.w_b * omega;
  const auto m = mu.array();
  const auto w = omega.array();
  // Row i of S1 summed over k: mu_i (W_G mu)_i + w_i (W_G w)_i + w_i (W_B mu)_i - mu_i (W_B w)_i.
  out.y_p = (m * c.gm.array() + w * c.gw.array() + w * c.bm.array() - m * c.bw.array()).matrix();
  out.y_q = (w * c.gm.array() - m * c.gw.array() - m * c.bm.array() - w * c.bw.array()).matrix();
  out.y_p.colwise() += params.b_p;
  out.y_q.colwise() += params.b_q;
  return out;
}

BnnGrads bnn_backward(const BnnParams& params, const BnnCache& cache, const Eigen::MatrixXd& grad_p,
                      const Eigen::MatrixXd& grad_q) {
  const auto m = cache.mu.array();
  const auto w = cache.omega.array();
  const Eigen::MatrixXd pm = (grad_p.array() * m).matrix();
  const Eigen::MatrixXd pw = (grad_p.array() * w).matrix();
  const Eigen::MatrixXd qm = (grad_q.array() * m).matrix();
  const Eigen::MatrixXd qw = (grad_q.array() * w).matrix();
  const Eigen::MatrixXd mu_t = cache.mu.transpose();
  const Eigen::MatrixXd om_t = cache.omega.transpose();

  BnnGrads g;
  // dy_p_i/dW_G[i,k] = mu_i mu_k + w_i w_k,   dy_q_i/dW_G[i,k] = w_i mu_k - mu_i w_k
  g.w_g = pm * mu_t + pw * om_t + qw * mu_t - qm * om_t;
  // dy_p_i/dW_B[i,k] = w_i mu_k - mu_i w_k,   dy_q_i/dW_B[i,k] = -(mu_i mu_k + w_i w_k)
  g.w_b = pw * mu_t - pm * om_t - qm * mu_t - qw * om_t;
  g.b_p = grad_p.rowwise().sum();
  g.b_q = grad_q.rowwise().sum();

  const Eigen::MatrixXd gt = params.w_g.transpose();
  const Eigen::MatrixXd bt = params.w_b.transpose();
  g.mu = (grad_p.array() * (cache.gm - cache.bw).array() -
          grad_q.array() * (cache.gw + cache.bm).array())
             .matrix() +
         gt * (pm + qw) + bt * (pw - qm);
  g.omega = (grad_p.array() * (cache.gw + cache.bm).array() +
             grad_q.array() * (cache.gm - cache.bw).array())
                .matrix() +
            gt * (pw - qm) - bt * (pm + qw);
  return g;
}

void check_mask(const BnnParams& params, const AdjacencyMatrix& mask) {
  if (mask.size() != params.size()) throw DimensionMismatch("topology mask size differs");
  const auto off = mask.a.array() == 0.0;
  if ((off && params.w_g.array() != 0.0).any() || (off && params.w_b.array() != 0.0).any()) {
    throw MaskViolation("bilinear weight is nonzero outside the topology mask");
  }
}

BnnForward tpbnn_forward(const BnnParams& params, const AdjacencyMatrix& mask,
                         const Eigen::MatrixXd& mu, const Eigen::MatrixXd& omega) {
  check_mask(params, mask);
  // Masking S before the row sum equals masking the weights: (X o W) o A = X o (W o A).
  BnnParams masked = params;
  masked.w_g = params.w_g.cwiseProduct(mask.a);
  masked.w_b = params.w_b.cwiseProduct(mask.a);
  return bnn_forward(masked, mu, omega);
}

BnnGrads tpbnn_backward(const BnnParams& params, const AdjacencyMatrix& mask,
                        const BnnCache& cache, const Eigen::MatrixXd& grad_p,
                        const Eigen::MatrixXd& grad_q) {
  BnnParams masked = params;
  masked.w_g = params.w_g.cwiseProduct(mask.a);
  masked.w_b = params.w_b.cwiseProduct(mask.a);
  BnnGrads g = bnn_backward(masked, cache, grad_p, grad_q);
  g.w_g = g.w_g.cwiseProduct(mask.a);
  g.w_b = g.w_b.cwiseProduct(mask.a);
  return g;
}

// ---------------------------------------------------------------------------
// Model

std::string to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::None: return "none";
    case DecoderKind::Mlp: return "mlp";
    case DecoderKind::Bnn: return "bnn";
    case DecoderKind::Tpbnn: return "tpbnn";
  }
  return "none";
}

DecoderKind decoder_from_string(const std::string& name) {
  if (name == "none") return DecoderKind::None;
  if (name == "mlp") return DecoderKind::Mlp;
  if (name == "bnn") return DecoderKind::Bnn;
  if (name == "tpbnn") return DecoderKind::Tpbnn;
  throw std::invalid_argument("unknown decoder '" + name + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PgnnModel PgnnModel::create(const ModelConfig& config, Eigen::Index input_dim, Eigen::Index n_bus,
                            const Normalization& norm, std::uint64_t seed,
                            const std::optional<AdjacencyMatrix>& mask) {
  config.weights.validate();
  if (config.encoder_hidden.empty()) throw std::invalid_argument("encoder needs a hidden layer");
  if (norm.x.dim() != input_dim || norm.v.dim() != 2 * n_bus || norm.s.dim() != 2 * n_bus) {
    throw DimensionMismatch("normalization does not match the model dimensions");
  }
  PgnnModel model;
  model.config_ = config;
  model.norm_ = norm;
  model.n_bus_ = n_bus;

  Rng enc_rng(derive_seed(seed, kEncoderInit));
  std::vector<Eigen::Index> dims{input_dim};
  dims.insert(dims.end(), config.encoder_hidden.begin(), config.encoder_hidden.end());
  dims.push_back(2 * n_bus);
  model.encoder_ = MlpStack::glorot(dims, enc_rng);

  Rng dec_rng(derive_seed(seed, kDecoderInit));
  switch (config.decoder) {
    case DecoderKind::None:
      break;
    case DecoderKind::Mlp: {
      std::vector<Eigen::Index> ddims{2 * n_bus};
      ddims.insert(ddims.end(), config.decoder_hidden.begin(), config.decoder_hidden.end());
      ddims.push_back(n_bus);
      MlpDecoderParams dec;
      dec.p_branch = MlpStack::glorot(ddims, dec_rng);
      dec.q_branch = MlpStack::glorot(ddims, dec_rng);
      model.decoder_ = std::move(dec);
      break;
    }
    case DecoderKind::Bnn:
      model.decoder_ = BnnDecoder{BnnParams::zeros(n_bus), std::nullopt};
      break;
    case DecoderKind::Tpbnn:
      if (!mask) throw std::invalid_argument("TPBNN decoder needs the adjacency matrix");
      if (mask->size() != n_bus) throw DimensionMismatch("adjacency size differs from bus count");
      model.decoder_ = BnnDecoder{BnnParams::zeros(n_bus), mask};
      break;
  }
  return model;
}

Eigen::MatrixXd PgnnModel::encoder_forward(const Eigen::MatrixXd& x_norm,
                                           MlpStack::Trace* trace) const {
  return encoder_.forward(x_norm, trace);
}

Eigen::MatrixXd PgnnModel::decoder_forward(const Eigen::MatrixXd& v_norm,
                                           DecoderTrace* trace) const {
  if (v_norm.rows() != 2 * n_bus_) throw DimensionMismatch("decoder expects 2N voltage rows");
  if (const auto* mlp = std::get_if<MlpDecoderParams>(&decoder_)) {
    return vstack(mlp->p_branch.forward(v_norm, trace ? &trace->p_trace : nullptr),
                  mlp->q_branch.forward(v_norm, trace ? &trace->q_trace : nullptr));
  }
  if (const auto* bnn = std::get_if<BnnDecoder>(&decoder_)) {
    const Eigen::MatrixXd v = norm_.v.invert(v_norm);
    auto fwd = bnn->mask ? tpbnn_forward(bnn->params, *bnn->mask, top(v, n_bus_), bottom(v, n_bus_))
                         : bnn_forward(bnn->params, top(v, n_bus_), bottom(v, n_bus_));
    if (trace) trace->bnn = std::move(fwd.cache);
    return norm_.s.apply(vstack(fwd.y_p, fwd.y_q));
  }
  throw std::logic_error("model has no decoder");
}

Eigen::MatrixXd PgnnModel::decoder_backward(const DecoderTrace& trace,
                                            const Eigen::MatrixXd& grad_s_norm,
                                            ModelGrads& grads) const {
  if (const auto* mlp = std::get_if<MlpDecoderParams>(&decoder_)) {
    grads.decoder_p.clear();
    grads.decoder_q.clear();
    Eigen::MatrixXd gv = mlp->p_branch.backward(trace.p_trace, top(grad_s_norm, n_bus_), grads.decoder_p);
    gv += mlp->q_branch.backward(trace.q_trace, bottom(grad_s_norm, n_bus_), grads.decoder_q);
    return gv;
  }
  if (const auto* bnn = std::get_if<BnnDecoder>(&decoder_)) {
    // s_norm = (S - offset) / scale  =>  dL/dS = dL/ds_norm / scale
    const Eigen::MatrixXd grad_s = (grad_s_norm.array().colwise() / norm_.s.scale.array()).matrix();
    BnnGrads g = bnn->mask ? tpbnn_backward(bnn->params, *bnn->mask, trace.bnn,
                                            top(grad_s, n_bus_), bottom(grad_s, n_bus_))
                           : bnn_backward(bnn->params, trace.bnn, top(grad_s, n_bus_),
                                          bottom(grad_s, n_bus_));
    // v = v_norm * scale + offset  =>  dL/dv_norm = dL/dv * scale
    Eigen::MatrixXd gv = vstack(g.mu, g.omega);
    gv.array().colwise() *= norm_.v.scale.array();
    grads.bnn = std::move(g);
    return gv;
  }
  throw std::logic_error("model has no decoder");
}

Eigen::MatrixXd PgnnModel::predict_voltages(const Eigen::MatrixXd& x) const {
  return norm_.v.invert(encoder_forward(norm_.x.apply(x)));
}

Eigen::MatrixXd PgnnModel::predict_injections(const Eigen::MatrixXd& v) const {
  return norm_.s.invert(decoder_forward(norm_.v.apply(v)));
}

std::vector<ParamView> PgnnModel::parameter_views(const ModelGrads& grads, bool include_encoder,
                                                  bool include_decoder) {
  std::vector<ParamView> views;
  if (include_encoder) push_dense(views, encoder_.layers(), grads.encoder);
  if (!include_decoder) return views;
  if (auto* mlp = std::get_if<MlpDecoderParams>(&decoder_)) {
    push_dense(views, mlp->p_branch.layers(), grads.decoder_p);
    push_dense(views, mlp->q_branch.layers(), grads.decoder_q);
  } else if (auto* bnn = std::get_if<BnnDecoder>(&decoder_)) {
    const auto& g = grads.bnn.value();
    views.push_back({as_span(bnn->params.w_g), as_span(g.w_g)});
    views.push_back({as_span(bnn->params.w_b), as_span(g.w_b)});
    views.push_back({as_span(bnn->params.b_p), as_span(g.b_p)});
    views.push_back({as_span(bnn->params.b_q), as_span(g.b_q)});
  }
  return views;
}

Eigen::VectorXd PgnnModel::flat_parameters() const {
  std::vector<double> flat;
  auto add = [&](const auto& m) { flat.insert(flat.end(), m.data(), m.data() + m.size()); };
  auto add_stack = [&](const MlpStack& s) {
    for (const auto& l : s.layers()) {
      add(l.w);
      add(l.bias);
    }
  };
  add_stack(encoder_);
  if (const auto* mlp = std::get_if<MlpDecoderParams>(&decoder_)) {
    add_stack(mlp->p_branch);
    add_stack(mlp->q_branch);
  } else if (const auto* bnn = std::get_if<BnnDecoder>(&decoder_)) {
    add(bnn->params.w_g);
    add(bnn->params.w_b);
    add(bnn->params.b_p);
    add(bnn->params.b_q);
  }
  return Eigen::Map<Eigen::VectorXd>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

std::string PgnnModel::serialize() const {
  std::string out = "pgnn-checkpoint 1\n";
  out += "decoder " + to_string(config_.decoder) + '\n';
  out += "n_bus " + std::to_string(n_bus_) + '\n';
  auto widths = [](const std::vector<Eigen::Index>& w) {
    std::string s = std::to_string(w.size());
    for (auto v : w) s += ' ' + std::to_string(v);
    return s;
  };
  out += "encoder_hidden " + widths(config_.encoder_hidden) + '\n';
  out += "decoder_hidden " + widths(config_.decoder_hidden) + '\n';
  out += "alpha " + format_exact(config_.weights.alpha_sup) + ' ' +
         format_exact(config_.weights.alpha_unsup) + '\n';
  out += "metadata " + std::to_string(metadata_.size()) + '\n';
  for (const auto& [k, v] : metadata_) {
    if (k.find_first_of(" \t\n") != std::string::npos || v.find_first_of(" \t\n") != std::string::npos ||
        k.empty() || v.empty()) {
      throw std::invalid_argument("checkpoint metadata must be non-empty single tokens");
    }
    out += k + ' ' + v + '\n';
  }
  put_affine(out, "x", norm_.x);
  put_affine(out, "v", norm_.v);
  put_affine(out, "s", norm_.s);
  put_stack(out, "encoder", encoder_);
  if (const auto* mlp = std::get_if<MlpDecoderParams>(&decoder_)) {
    put_stack(out, "decoder_p", mlp->p_branch);
    put_stack(out, "decoder_q", mlp->q_branch);
  } else if (const auto* bnn = std::get_if<BnnDecoder>(&decoder_)) {
    put_matrix(out, "w_g", bnn->params.w_g);
    put_matrix(out, "w_b", bnn->params.w_b);
    put_vector(out, "b_p", bnn->params.b_p);
    put_vector(out, "b_q", bnn->params.b_q);
    if (bnn->mask) put_matrix(out, "mask", bnn->mask->a);
  }
  out += "end\n";
  return out;
}

PgnnModel PgnnModel::deserialize(const std::string& text) {
  TokenReader in(text);
  in.expect("pgnn-checkpoint");
  in.expect("1");
  PgnnModel m;
  in.expect("decoder");
  m.config_.decoder = decoder_from_string(in.word());
  in.expect("n_bus");
  m.n_bus_ = in.integer();
  auto widths = [&](const std::string& tag) {
    in.expect(tag);
    std::vector<Eigen::Index> w(static_cast<std::size_t>(in.integer()));
    for (auto& v : w) v = in.integer();
    return w;
  };
  m.config_.encoder_hidden = widths("encoder_hidden");
  m.config_.decoder_hidden = widths("decoder_hidden");
  in.expect("alpha");
  m.config_.weights.alpha_sup = in.number();
  m.config_.weights.alpha_unsup = in.number();
  in.expect("metadata");
  const long meta = in.integer();
  for (long i = 0; i < meta; ++i) {
    auto k = in.word();
    m.metadata_[k] = in.word();
  }
  m.norm_.x = read_affine(in, "x");
  m.norm_.v = read_affine(in, "v");
  m.norm_.s = read_affine(in, "s");
  m.encoder_ = read_stack(in, "encoder");
  switch (m.config_.decoder) {
    case DecoderKind::None:
      break;
    case DecoderKind::Mlp: {
      MlpDecoderParams dec;
      dec.p_branch = read_stack(in, "decoder_p");
      dec.q_branch = read_stack(in, "decoder_q");
      m.decoder_ = std::move(dec);
      break;
    }
    case DecoderKind::Bnn:
    case DecoderKind::Tpbnn: {
      BnnDecoder dec;
      dec.params.w_g = in.matrix("w_g");
      dec.params.w_b = in.matrix("w_b");
      dec.params.b_p = in.vector("b_p");
      dec.params.b_q = in.vector("b_q");
      if (m.config_.decoder == DecoderKind::Tpbnn) {
        dec.mask = AdjacencyMatrix{in.matrix("mask")};
        check_mask(dec.params, *dec.mask);
      }
      m.decoder_ = std::move(dec);
      break;
    }
  }
  in.expect("end");
  return m;
}

// ---------------------------------------------------------------------------
// Passes

JointPass joint_pass(const PgnnModel& model, const Eigen::MatrixXd& x_norm,
                     const Eigen::MatrixXd& v_norm, const Eigen::MatrixXd& s_norm) {
  JointPass out;
  MlpStack::Trace enc_trace;
  const Eigen::MatrixXd v_pred = model.encoder_forward(x_norm, &enc_trace);
  const auto& w = model.config().weights;
  if (model.has_decoder()) {
    DecoderTrace dec_trace;
    const Eigen::MatrixXd s_pred = model.decoder_forward(v_pred, &dec_trace);
    out.loss = multitask_loss(v_pred, v_norm, s_pred, s_norm, w);
    out.grad_v_decoder = model.decoder_backward(dec_trace, out.loss.grad_s, out.grads);
  } else {
    auto sup = sq_loss(v_pred, v_norm);
    out.loss.sup = sup.value;
    out.loss.value = w.alpha_sup * sup.value;
    out.loss.grad_v = w.alpha_sup * sup.grad;
    out.grad_v_decoder = Eigen::MatrixXd::Zero(v_pred.rows(), v_pred.cols());
  }
  out.grad_v_sup = out.loss.grad_v;
  out.grad_v = out.grad_v_sup + out.grad_v_decoder;
  model.encoder().backward(enc_trace, out.grad_v, out.grads.encoder);
  return out;
}

JointPass decoder_pass(const PgnnModel& model, const Eigen::MatrixXd& v_norm,
                       const Eigen::MatrixXd& s_norm) {
  if (!model.has_decoder()) throw std::logic_error("decoder pass on a model without decoder");
  JointPass out;
  DecoderTrace trace;
  const Eigen::MatrixXd s_pred = model.decoder_forward(v_norm, &trace);
  auto l = sq_loss(s_pred, s_norm);
  out.loss.unsup = l.value;
  out.loss.value = l.value;
  out.loss.grad_s = l.grad;
  out.grad_v_decoder = model.decoder_backward(trace, l.grad, out.grads);
  out.grad_v = out.grad_v_decoder;
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::string History::csv() const {
  std::string out = "epoch,train_sup,train_unsup,val_sup,val_unsup\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + ',' + format_sig9(e.train_sup) + ',' +
           format_sig9(e.train_unsup) + ',' + format_sig9(e.val_sup) + ',' +
           format_sig9(e.val_unsup) + '\n';
  }
  return out;
}

namespace {

struct Losses {
  double sup = 0.0;
  double unsup = 0.0;
};

Losses evaluate(const PgnnModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& v,
                const Eigen::MatrixXd& s, bool decoder_only) {
  Losses out;
  if (decoder_only) {
    out.unsup = sq_loss(model.decoder_forward(v), s).value;
    return out;
  }
  const Eigen::MatrixXd v_pred = model.encoder_forward(x);
  out.sup = sq_loss(v_pred, v).value;
  if (model.has_decoder()) out.unsup = sq_loss(model.decoder_forward(v_pred), s).value;
  return out;
}

double total_of(const PgnnModel& model, const Losses& l, bool decoder_only) {
  if (decoder_only) return l.unsup;
  const auto& w = model.config().weights;
  return w.alpha_sup * l.sup + (model.has_decoder() ? w.alpha_unsup * l.unsup : 0.0);
}

}  // namespace

TrainResult train(PgnnModel model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config) {
  if (train_set.empty() || val_set.empty()) throw EmptySplit("training needs train and val samples");
  if (config.batch_size < 1 || config.max_epochs < 1 || config.patience < 1) {
    throw std::invalid_argument("batch size, epochs and patience must be positive");
  }
  if (config.decoder_only && !model.has_decoder()) {
    throw std::invalid_argument("decoder-only training needs a decoder");
  }
  const auto& norm = model.normalization();
  const Eigen::MatrixXd xt = norm.x.apply(train_set.inputs());
  const Eigen::MatrixXd vt = norm.v.apply(train_set.voltages());
  const Eigen::MatrixXd st = norm.s.apply(train_set.injections());
  const Eigen::MatrixXd xv = norm.x.apply(val_set.inputs());
  const Eigen::MatrixXd vv = norm.v.apply(val_set.voltages());
  const Eigen::MatrixXd sv = norm.s.apply(val_set.injections());

  const auto n = static_cast<Eigen::Index>(train_set.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffle_rng(derive_seed(config.seed, kShuffle));

  OptimizerState enc_opt;
  enc_opt.lr = config.lr;
  enc_opt.beta1 = config.beta1;
  enc_opt.beta2 = config.beta2;
  OptimizerState dec_opt = enc_opt;
  dec_opt.lr = config.decoder_lr.value_or(config.lr);

  TrainResult result;
  PgnnModel best = model;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum_sup = 0.0;
    double sum_unsup = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(config.batch_size, n - start);
      const std::vector<Eigen::Index> cols(order.begin() + start, order.begin() + start + len);
      const Eigen::MatrixXd vb = vt(Eigen::all, cols);
      const Eigen::MatrixXd sb = st(Eigen::all, cols);
      JointPass pass = config.decoder_only
                           ? decoder_pass(model, vb, sb)
                           : joint_pass(model, Eigen::MatrixXd(xt(Eigen::all, cols)), vb, sb);
      if (!std::isfinite(pass.loss.value) || !all_finite(pass.grad_v)) {
        throw DivergedLoss("non-finite training loss at epoch " + std::to_string(epoch) +
                           " (sup " + std::to_string(pass.loss.sup) + ", unsup " +
                           std::to_string(pass.loss.unsup) + ")");
      }
      if (!config.decoder_only) adam_step(enc_opt, model.parameter_views(pass.grads, true, false));
      if (model.has_decoder()) adam_step(dec_opt, model.parameter_views(pass.grads, false, true));
      sum_sup += pass.loss.sup * static_cast<double>(len);
      sum_unsup += pass.loss.unsup * static_cast<double>(len);
    }

    const Losses val = evaluate(model, xv, vv, sv, config.decoder_only);
    const double val_total = total_of(model, val, config.decoder_only);
    if (!std::isfinite(val_total)) {
      throw DivergedLoss("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    if (val_total < best_val) {
      best_val = val_total;
      best = model;
      result.history.best_epoch = epoch;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_sup = sum_sup / static_cast<double>(n);
    rec.train_unsup = sum_unsup / static_cast<double>(n);
    rec.val_sup = val.sup;
    rec.val_unsup = val.unsup;
    rec.val_total = val_total;
    rec.best_val_total = best_val;
    result.history.epochs.push_back(rec);
    if (epoch - result.history.best_epoch >= config.patience) break;
  }
  result.model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Linear regression baseline

Eigen::MatrixXd LinearModel::predict(const Eigen::MatrixXd& x) const {
  if (x.rows() != w.cols()) throw DimensionMismatch("linear model input dimension differs");
  Eigen::MatrixXd y = w * x;
  y.colwise() += b;
  return y;
}

LinearModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda) {
  if (x.cols() < 2 || x.cols() != y.cols()) {
    throw std::invalid_argument("ridge regression needs >= 2 paired samples");
  }
  const Eigen::VectorXd xm = x.rowwise().mean();
  const Eigen::VectorXd ym = y.rowwise().mean();
  const Eigen::MatrixXd xc = x.colwise() - xm;
  const Eigen::MatrixXd yc = y.colwise() - ym;
  const Eigen::MatrixXd gram = xc * xc.transpose();
  const Eigen::MatrixXd rhs = xc * yc.transpose();

  double lam = lambda;
  for (int attempt = 0; attempt < 20; ++attempt) {
    Eigen::MatrixXd a = gram;
    a.diagonal().array() += lam;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const auto d = ldlt.vectorD().cwiseAbs();
    const bool ok = ldlt.info() == Eigen::Success && d.size() > 0 &&
                    d.minCoeff() > 1e-14 * std::max(d.maxCoeff(), 1e-300);
    if (ok) {
      const Eigen::MatrixXd wt = ldlt.solve(rhs);
      if (wt.allFinite()) {
        LinearModel m;
        m.w = wt.transpose();
        m.b = ym - m.w * xm;
        m.lambda = lam;
        return m;
      }
    }
    lam = std::max(lam * 10.0, 1e-12);
  }
  throw std::runtime_error("ridge regression failed to find a nonsingular normal matrix");
}

LinearModel baseline_lr_fit(const Dataset& train_set) {
  return fit_ridge(train_set.inputs(), train_set.voltages());
}

LinearModel baseline_lr_fit_modeling(const Dataset& train_set) {
  return fit_ridge(train_set.voltages(), train_set.injections());
}

}  // namespace pgnn
