#pragma once

// Synthetic operating-point generation, corruption and train/val/test splits.

#include "pgnn/acpf.hpp"
#include "pgnn/case_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pgnn {

/// Position of every power-flow input inside x = [P_L; P_G; Q_L; V_G; V_R; theta_R].
struct InputLayout {
  std::vector<int> pq;
  std::vector<int> pv;
  int slack = -1;

  static InputLayout of(const BusSystem& sys);
  Eigen::Index dim() const { return static_cast<Eigen::Index>(2 * pq.size() + 2 * pv.size() + 2); }
  /// x built from a spec's per-bus knowns.
  Eigen::VectorXd inputs(const PFSpec& spec) const;
  std::vector<std::string> feature_names(const BusSystem& sys) const;
};

struct PFSample {
  Eigen::VectorXd x;
  Eigen::VectorXd v_target;  ///< [mu; omega], length 2N
  Eigen::VectorXd s_target;  ///< [p; q], length 2N
  std::int64_t timestamp = 0;
  double driver = 0.0;       ///< total system real load (p.u.), used by range splits
};

/// Per-feature y = (u - offset) / scale.
struct AffineTransform {
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;

  /// Columns are samples.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& u) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& y) const;
  Eigen::Index dim() const { return offset.size(); }

  /// Zero mean, unit variance per row; rows with (near) zero spread keep scale 1.
  static AffineTransform zscore(const Eigen::MatrixXd& samples);
  /// Maps each row's observed min to -1 and max to +1.
  static AffineTransform minmax(const Eigen::MatrixXd& samples);
  static AffineTransform identity(Eigen::Index dim);
};

struct Normalization {
  AffineTransform x;
  AffineTransform v;
  AffineTransform s;
};

struct Dataset {
  std::vector<PFSample> samples;
  bool noise_applied = false;
  std::optional<Normalization> normalization;  ///< set when the stored values are normalized

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// Stacked matrices, one column per sample.
  Eigen::MatrixXd inputs() const;
  Eigen::MatrixXd voltages() const;
  Eigen::MatrixXd injections() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

/// Load multipliers: rows are time steps (hours), columns are loads.
Eigen::MatrixXd gen_load_profiles(std::int64_t n_steps, int n_loads, std::uint64_t seed);

/// Buses with nonzero real or reactive demand, in bus order.
std::vector<int> load_buses(const BusSystem& sys);

/// Per-step demand and dispatch, rows are steps and columns are buses (p.u.).
struct Schedule {
  Eigen::MatrixXd p_demand;
  Eigen::MatrixXd q_demand;
  Eigen::MatrixXd p_gen;
  double scale = 0.0;  ///< applied to base demand x multiplier

  std::int64_t steps() const { return p_demand.rows(); }
  PFSpec spec(const BusSystem& sys, std::int64_t step) const;
};

/// Scales demand so the peak step uses `target_fraction` of total generator
/// capacity and dispatches generators in proportion to capacity.
Schedule scale_to_capacity(const BusSystem& sys, const Eigen::MatrixXd& profiles,
                           double target_fraction = 0.9);

struct BuildReport {
  std::int64_t steps = 0;
  std::int64_t converged = 0;
  std::vector<std::int64_t> failed_steps;
  int max_iterations = 0;
};

/// One Newton solve per step. Throws TooManyFailures above 5% failed steps.
Dataset build_samples(const BusSystem& sys, const Schedule& schedule, double tol,
                      BuildReport* report = nullptr);

/// Multiplies every feature by (1 + eps), eps ~ N(0, rel_std^2).
Dataset add_noise(const Dataset& ds, double rel_std, std::uint64_t seed);

/// Rows that inject_outliers corrupts for a given size, fraction and seed.
std::vector<std::size_t> outlier_rows(std::size_t n, double fraction, std::uint64_t seed);

/// Adds N(0, (10 IQR_f)^2) to every feature f of floor(fraction * n) random rows.
Dataset inject_outliers(const Dataset& ds, double fraction, std::uint64_t seed);

struct Sequential {
  double train_frac = 0.6;
  double val_frac = 0.1;
};

struct RangePortion {
  int portion_count = 20;
  std::vector<int> train_portions;
  std::vector<int> val_portions;
};

struct SplitSpec {
  std::variant<Sequential, RangePortion> regime = Sequential{};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitResult {
  Dataset train;
  Dataset val;
  Dataset test;
  /// RangePortion only: portion index of every val/test sample.
  std::vector<int> val_portion;
  std::vector<int> test_portion;
  /// RangePortion only: driver scaling to [-1, 1].
  std::optional<AffineTransform> driver_transform;
};

/// Portion index of a normalized driver value in [-1, 1].
int portion_of(double normalized_driver, int portion_count);

/// Throws EmptySplit when any part is empty.
SplitResult split(const Dataset& ds, const SplitSpec& spec);

/// Z-score transforms for inputs and voltages fitted on a (training) dataset.
/// Injections stay in p.u. unless `zscore_injections` is set.
Normalization fit_normalization(const Dataset& train, bool zscore_injections = false);
Dataset normalize(const Dataset& ds, const Normalization& norm);
Dataset denormalize(const Dataset& ds);

/// CSV with header `timestamp,driver,<x names>,mu_bus*,omega_bus*,p_bus*,q_bus*`.
std::string dataset_csv(const Dataset& ds, const BusSystem& sys);
/// Header-only files yield an empty dataset.
Dataset parse_dataset_csv(const std::string& text);

}  // namespace pgnn
