#pragma once

// Experiment harness: solver and modeling comparisons, interpolation and
// extrapolation, outlier robustness and admittance recovery.

#include "pgnn/case_model.hpp"
#include "pgnn/data_pipeline.hpp"
#include "pgnn/models.hpp"
#include "pgnn/stats.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pgnn {

struct MetricSet {
  double rmse = 0.0;
  double mae = 0.0;
  /// (quantile, absolute percentage error in %) on a 1% grid.
  std::vector<std::pair<double, double>> mape_quantiles;
  /// Entries left out of the percentage errors because |target| < 1e-9.
  std::size_t mape_excluded = 0;
};

/// Throws DimensionMismatch on shape mismatch.
MetricSet compute_metrics(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target);

struct Provenance {
  std::string case_name;
  std::vector<std::uint64_t> seeds;
  std::uint64_t data_seed = 0;
  std::string split;
  double noise = 0.0;
  double outlier_fraction = 0.0;
};

/// One method on one target block ("mu", "omega", "v" for both, or "p", "q", "s").
struct MethodResult {
  std::string method;
  std::string target;
  double alpha_unsup = 0.0;  ///< weight used for the decoder term, 0 without decoder
  std::vector<MetricSet> per_seed;
  MeanStd rmse;
  MeanStd mae;
  /// Per-quantile mean over seeds.
  std::vector<std::pair<double, double>> mape_quantiles;
};

struct ExperimentReport {
  std::string name;
  Provenance provenance;
  std::vector<MethodResult> rows;

  const MethodResult& at(const std::string& method, const std::string& target) const;
  /// method,target,rmse_mean,rmse_std,mae_mean,mae_std,seeds plus provenance columns.
  std::string csv() const;
  /// method,target,quantile,ape_percent
  std::string mape_csv() const;
};

struct ExperimentConfig {
  std::string case_name = "ieee57";
  std::int64_t steps = 2000;
  std::uint64_t data_seed = 7;
  double capacity_fraction = 0.9;
  double newton_tol = 1e-8;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double noise = 0.01;
  Sequential sequential{};

  ModelConfig model{};
  TrainConfig train{};
  /// Adam step size for BNN/TPBNN weights.
  double bilinear_lr = 1e-2;
  /// Pick alpha_unsup on validation loss from `alpha_grid` before the seed runs.
  bool alpha_search = false;
  std::vector<double> alpha_grid{1.0, 0.3, 0.1, 0.03};

  std::vector<std::string> solver_methods{"lr", "mlp", "mlp+mlp", "mlp+bnn", "mlp+tpbnn"};
  std::vector<std::string> modeling_methods{"lr", "mlp", "bnn", "tpbnn"};

  RangePortion interpolation{20, {}, {4, 15}};
  std::vector<int> interpolation_test{8, 9, 10, 11};
  RangePortion extrapolation{20, {}, {5, 11}};
  std::vector<int> extrapolation_test{16, 17, 18, 19};

  std::vector<double> outlier_levels{0.0, 0.05, 0.10};
  /// Independent training legs run on up to this many threads (0 = hardware).
  unsigned threads = 0;

  /// Throws std::invalid_argument naming the valid methods on an unknown method.
  void validate() const;
};

const std::vector<std::string>& valid_solver_methods();
const std::vector<std::string>& valid_modeling_methods();

/// Case plus its generated time series.
struct Scenario {
  BusSystem sys;
  AdmittanceMatrix y;
  AdjacencyMatrix a;
  Dataset data;
  BuildReport build;
};

Scenario prepare_scenario(BusSystem sys, const ExperimentConfig& config);

/// Train split with measurement noise applied (the val/test parts stay clean).
SplitResult noisy_split(const Scenario& sc, const SplitSpec& spec, const ExperimentConfig& config);

/// Validation-selected alpha_unsup for a decoder kind (config.model's value without search).
double select_alpha(const Scenario& sc, const SplitResult& parts, DecoderKind kind,
                    const ExperimentConfig& config);

ExperimentReport run_solver_comparison(const Scenario& sc, const ExperimentConfig& config);
ExperimentReport run_modeling_comparison(const Scenario& sc, const ExperimentConfig& config);

struct PortionCurve {
  std::string method;
  int portion = 0;
  std::string role;  ///< "val" or "test"
  std::size_t samples = 0;
  MeanStd rmse;
};

struct GeneralizationReport {
  std::string regime;  ///< "interpolation" or "extrapolation"
  Provenance provenance;
  std::vector<PortionCurve> curves;
  /// mean(test RMSE) - mean(val RMSE) per method, averaged over seeds.
  std::map<std::string, MeanStd> gap;

  std::string curves_csv() const;
  std::string gap_csv() const;
};

GeneralizationReport run_generalization(const Scenario& sc, const ExperimentConfig& config,
                                        const RangePortion& regime, const std::vector<int>& test,
                                        const std::string& name);
std::pair<GeneralizationReport, GeneralizationReport> run_interp_extrap(
    const Scenario& sc, const ExperimentConfig& config);

struct OutlierReport {
  Provenance provenance;
  std::vector<double> levels;
  /// method -> per-level MAE (mean over seeds)
  std::map<std::string, std::vector<MeanStd>> mae;

  /// MAE at the last level over MAE at the first.
  double inflation(const std::string& method) const;
  std::string csv() const;
};

OutlierReport run_outlier_robustness(const Scenario& sc, const ExperimentConfig& config);

struct RecoveryReport {
  std::string method;
  double pattern_precision = 0.0;
  double pattern_recall = 0.0;
  double weight_rmse_on_pattern = 0.0;
  double g_rmse_on_pattern = 0.0;
  double b_rmse_on_pattern = 0.0;
  Eigen::MatrixXd w_g;
  Eigen::MatrixXd w_b;
  Eigen::MatrixXd g;
  Eigen::MatrixXd b;
};

/// Pattern and weight comparison of a bilinear decoder against the true
/// admittance. TPBNN patterns use exact zeros; BNN uses 1% of the largest
/// absolute weight of each matrix.
RecoveryReport analyze_recovery(const BnnDecoder& decoder, const AdmittanceMatrix& y,
                                const AdjacencyMatrix& a, const std::string& method);

/// Standalone BNN and TPBNN decoders trained on noise-free voltages.
std::vector<RecoveryReport> run_recovery(const Scenario& sc, const ExperimentConfig& config);
std::string recovery_csv(const std::vector<RecoveryReport>& reports);

/// Everything `report` produces.
struct FullReport {
  ExperimentReport solver;
  ExperimentReport modeling;
  GeneralizationReport interpolation;
  GeneralizationReport extrapolation;
  OutlierReport outliers;
  std::vector<RecoveryReport> recovery;
};

/// Writes CSV tables, MAPE CDFs, heatmaps and a gnuplot script under `dir`.
/// Returns the written file names, sorted.
std::vector<std::string> write_report(const std::filesystem::path& dir, const FullReport& report);

/// gnuplot commands plotting the CSVs written by write_report.
std::string gnuplot_script(const FullReport& report);

/// Runs fn(0..n-1) on up to `threads` workers; rethrows the first exception.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace pgnn
