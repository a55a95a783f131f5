#pragma once

// Physics-guided power-flow networks: an MLP encoder from power-flow inputs to
// bus voltages, and a decoder (MLP, bilinear BNN or topology-pruned TPBNN)
// that rebuilds power injections from those voltages as an auxiliary task.

#include "pgnn/case_model.hpp"
#include "pgnn/data_pipeline.hpp"
#include "pgnn/nn.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pgnn {

// ---------------------------------------------------------------------------
// Bilinear decoder

struct BnnParams {
  Eigen::MatrixXd w_g;
  Eigen::MatrixXd w_b;
  Eigen::VectorXd b_p;
  Eigen::VectorXd b_q;

  static BnnParams zeros(Eigen::Index n);
  Eigen::Index size() const { return w_g.rows(); }
};

struct BnnCache {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd omega;
  Eigen::MatrixXd gm;  ///< W_G mu
  Eigen::MatrixXd gw;  ///< W_G omega
  Eigen::MatrixXd bm;  ///< W_B mu
  Eigen::MatrixXd bw;  ///< W_B omega
};

struct BnnForward {
  Eigen::MatrixXd y_p;
  Eigen::MatrixXd y_q;
  BnnCache cache;
};

struct BnnGrads {
  Eigen::MatrixXd w_g;
  Eigen::MatrixXd w_b;
  Eigen::VectorXd b_p;
  Eigen::VectorXd b_q;
  Eigen::MatrixXd mu;
  Eigen::MatrixXd omega;
};

/// Row sums of
///   S1 = (mu mu' + w w') o W_G + (w mu' - mu w') o W_B
///   S2 = (w mu' - mu w') o W_G - (mu mu' + w w') o W_B
/// plus biases. Columns of mu/omega are samples.
BnnForward bnn_forward(const BnnParams& params, const Eigen::MatrixXd& mu,
                       const Eigen::MatrixXd& omega);
BnnGrads bnn_backward(const BnnParams& params, const BnnCache& cache, const Eigen::MatrixXd& grad_p,
                      const Eigen::MatrixXd& grad_q);

/// Throws MaskViolation if a weight is nonzero where the mask is zero.
void check_mask(const BnnParams& params, const AdjacencyMatrix& mask);
/// (S1 o A) 1 + b_p and (S2 o A) 1 + b_q.
BnnForward tpbnn_forward(const BnnParams& params, const AdjacencyMatrix& mask,
                         const Eigen::MatrixXd& mu, const Eigen::MatrixXd& omega);
/// BNN gradients with the weight gradients multiplied elementwise by A.
BnnGrads tpbnn_backward(const BnnParams& params, const AdjacencyMatrix& mask,
                        const BnnCache& cache, const Eigen::MatrixXd& grad_p,
                        const Eigen::MatrixXd& grad_q);

// ---------------------------------------------------------------------------
// Model

enum class DecoderKind { None, Mlp, Bnn, Tpbnn };

std::string to_string(DecoderKind kind);
DecoderKind decoder_from_string(const std::string& name);

struct ModelConfig {
  std::vector<Eigen::Index> encoder_hidden{128, 128};
  std::vector<Eigen::Index> decoder_hidden{128};
  DecoderKind decoder = DecoderKind::Bnn;
  LossWeights weights{};
};

struct MlpDecoderParams {
  MlpStack p_branch;
  MlpStack q_branch;
};

/// Decoder state; the bilinear variants carry their (optional) topology mask.
struct BnnDecoder {
  BnnParams params;
  std::optional<AdjacencyMatrix> mask;
};

using Decoder = std::variant<std::monostate, MlpDecoderParams, BnnDecoder>;

struct DecoderTrace {
  MlpStack::Trace p_trace;
  MlpStack::Trace q_trace;
  BnnCache bnn;
};

/// Gradients of every trainable block, in parameter_views() order.
struct ModelGrads {
  std::vector<DenseGrads> encoder;
  std::vector<DenseGrads> decoder_p;
  std::vector<DenseGrads> decoder_q;
  std::optional<BnnGrads> bnn;
};

class PgnnModel {
 public:
  PgnnModel() = default;

  /// Glorot encoder/MLP-decoder init; bilinear weights start at zero.
  /// `mask` is required for DecoderKind::Tpbnn.
  static PgnnModel create(const ModelConfig& config, Eigen::Index input_dim, Eigen::Index n_bus,
                          const Normalization& norm, std::uint64_t seed,
                          const std::optional<AdjacencyMatrix>& mask = std::nullopt);

  const ModelConfig& config() const { return config_; }
  const Normalization& normalization() const { return norm_; }
  Eigen::Index n_bus() const { return n_bus_; }
  MlpStack& encoder() { return encoder_; }
  const MlpStack& encoder() const { return encoder_; }
  Decoder& decoder() { return decoder_; }
  const Decoder& decoder() const { return decoder_; }
  bool has_decoder() const { return config_.decoder != DecoderKind::None; }

  /// Normalized inputs -> normalized [mu; omega].
  Eigen::MatrixXd encoder_forward(const Eigen::MatrixXd& x_norm,
                                  MlpStack::Trace* trace = nullptr) const;
  /// Normalized [mu; omega] -> normalized [p; q].
  Eigen::MatrixXd decoder_forward(const Eigen::MatrixXd& v_norm,
                                  DecoderTrace* trace = nullptr) const;
  /// Returns dL/dv_norm and fills the decoder part of grads.
  Eigen::MatrixXd decoder_backward(const DecoderTrace& trace, const Eigen::MatrixXd& grad_s_norm,
                                   ModelGrads& grads) const;

  /// Physical-unit conveniences.
  Eigen::MatrixXd predict_voltages(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd predict_injections(const Eigen::MatrixXd& v) const;

  /// Views of every trainable array paired with the matching gradient.
  std::vector<ParamView> parameter_views(const ModelGrads& grads, bool include_encoder = true,
                                        bool include_decoder = true);
  /// Flattened copy of all parameters (encoder first).
  Eigen::VectorXd flat_parameters() const;

  /// Free-form key/value record stored alongside the parameters (e.g. the training config).
  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  /// Text checkpoint; round trip is exact.
  std::string serialize() const;
  static PgnnModel deserialize(const std::string& text);

 private:
  ModelConfig config_;
  Normalization norm_;
  Eigen::Index n_bus_ = 0;
  MlpStack encoder_;
  Decoder decoder_;
  std::map<std::string, std::string> metadata_;
};

/// Outcome of one joint forward/backward pass on a batch.
struct JointPass {
  MultitaskLoss loss;
  Eigen::MatrixXd grad_v_sup;      ///< supervised part of dL/dy_muomega
  Eigen::MatrixXd grad_v_decoder;  ///< decoder-propagated part of dL/dy_muomega
  Eigen::MatrixXd grad_v;          ///< their sum
  ModelGrads grads;
};

/// Encoder-and-decoder pass on normalized batch matrices (columns are samples).
JointPass joint_pass(const PgnnModel& model, const Eigen::MatrixXd& x_norm,
                     const Eigen::MatrixXd& v_norm, const Eigen::MatrixXd& s_norm);

/// Decoder-only pass for standalone modeling: loss = l(decoder(v) - s).
JointPass decoder_pass(const PgnnModel& model, const Eigen::MatrixXd& v_norm,
                       const Eigen::MatrixXd& s_norm);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 32;
  int max_epochs = 2000;
  int patience = 50;
  std::uint64_t seed = 0;
  /// Step size for the decoder parameters; unset means `lr`.
  std::optional<double> decoder_lr;
  /// Train only the decoder on (voltage -> injection) pairs.
  bool decoder_only = false;
};

struct EpochRecord {
  int epoch = 0;
  double train_sup = 0.0;
  double train_unsup = 0.0;
  double val_sup = 0.0;
  double val_unsup = 0.0;
  double val_total = 0.0;
  double best_val_total = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;

  /// epoch,train_sup,train_unsup,val_sup,val_unsup
  std::string csv() const;
};

struct TrainResult {
  PgnnModel model;
  History history;
};

/// Mini-batch Adam on the weighted multitask loss with early stopping on the
/// validation total; the best-validation parameters are restored. Datasets are
/// in physical units and normalized with model.normalization(). Throws DivergedLoss.
TrainResult train(PgnnModel model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config);

/// Deterministic seed derivation for independent random streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Linear regression baseline

struct LinearModel {
  Eigen::MatrixXd w;  ///< out x in
  Eigen::VectorXd b;
  double lambda = 0.0;  ///< ridge strength actually used

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// Ridge least squares on columns-as-samples data with an unpenalized
/// intercept. Retries with 10x larger lambda if the normal matrix is singular.
LinearModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda = 1e-6);

LinearModel baseline_lr_fit(const Dataset& train_set);            ///< inputs -> voltages
LinearModel baseline_lr_fit_modeling(const Dataset& train_set);   ///< voltages -> injections

}  // namespace pgnn
