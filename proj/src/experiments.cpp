#include "pgnn/experiments.hpp"

#include "pgnn/errors.hpp"
#include "pgnn/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace pgnn {

namespace {

constexpr double kMapeFloor = 1e-9;
constexpr std::uint64_t kNoiseStream = 101;
constexpr std::uint64_t kOutlierStream = 202;

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::string seeds_text(const std::vector<std::uint64_t>& seeds) {
  std::vector<std::string> parts;
  for (auto s : seeds) parts.push_back(std::to_string(s));
  return join(parts, ";");
}

std::string provenance_header() { return "case,seeds,data_seed,split,noise,outlier_fraction"; }

std::string provenance_fields(const Provenance& p) {
  return p.case_name + ',' + seeds_text(p.seeds) + ',' + std::to_string(p.data_seed) + ',' +
         p.split + ',' + format_sig9(p.noise) + ',' + format_sig9(p.outlier_fraction);
}

Provenance provenance_of(const ExperimentConfig& c, const std::string& split, double noise,
                         double outliers) {
  return {c.case_name, c.seeds, c.data_seed, split, noise, outliers};
}

bool is_bilinear(DecoderKind k) { return k == DecoderKind::Bnn || k == DecoderKind::Tpbnn; }

DecoderKind solver_decoder(const std::string& method) {
  if (method == "mlp") return DecoderKind::None;
  if (method == "mlp+mlp") return DecoderKind::Mlp;
  if (method == "mlp+bnn") return DecoderKind::Bnn;
  if (method == "mlp+tpbnn") return DecoderKind::Tpbnn;
  throw std::invalid_argument("not a neural solver method: " + method);
}

DecoderKind modeling_decoder(const std::string& method) {
  if (method == "mlp") return DecoderKind::Mlp;
  if (method == "bnn") return DecoderKind::Bnn;
  if (method == "tpbnn") return DecoderKind::Tpbnn;
  throw std::invalid_argument("not a neural modeling method: " + method);
}

struct TrainedModel {
  PgnnModel model;
  History history;
};

TrainedModel fit_model(const Scenario& sc, const SplitResult& parts, const Normalization& norm,
                       DecoderKind kind, double alpha_unsup, std::uint64_t seed,
                       const ExperimentConfig& config, bool decoder_only) {
  ModelConfig mc = config.model;
  mc.decoder = kind;
  mc.weights.alpha_unsup = alpha_unsup;
  TrainConfig tc = config.train;
  tc.seed = seed;
  tc.decoder_only = decoder_only;
  if (is_bilinear(kind)) tc.decoder_lr = config.bilinear_lr;
  const std::optional<AdjacencyMatrix> mask =
      kind == DecoderKind::Tpbnn ? std::optional<AdjacencyMatrix>(sc.a) : std::nullopt;
  auto model = PgnnModel::create(mc, norm.x.dim(), sc.sys.size(), norm, seed, mask);
  auto result = train(std::move(model), parts.train, parts.val, tc);
  return {std::move(result.model), std::move(result.history)};
}

unsigned worker_count(unsigned requested) {
  if (requested) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Row blocks of a 2N-row matrix.
Eigen::MatrixXd block_of(const Eigen::MatrixXd& m, const std::string& target) {
  const Eigen::Index n = m.rows() / 2;
  if (target == "mu" || target == "p") return m.topRows(n);
  if (target == "omega" || target == "q") return m.bottomRows(n);
  return m;
}

MethodResult summarize(const std::string& method, const std::string& target, double alpha,
                       const std::vector<Eigen::MatrixXd>& preds, const Eigen::MatrixXd& truth) {
  MethodResult r;
  r.method = method;
  r.target = target;
  r.alpha_unsup = alpha;
  std::vector<double> rmse;
  std::vector<double> mae;
  const Eigen::MatrixXd t = block_of(truth, target);
  for (const auto& p : preds) {
    r.per_seed.push_back(compute_metrics(block_of(p, target), t));
    rmse.push_back(r.per_seed.back().rmse);
    mae.push_back(r.per_seed.back().mae);
  }
  r.rmse = mean_std(rmse);
  r.mae = mean_std(mae);
  if (!r.per_seed.empty()) {
    r.mape_quantiles = r.per_seed.front().mape_quantiles;
    for (std::size_t q = 0; q < r.mape_quantiles.size(); ++q) {
      double sum = 0.0;
      for (const auto& m : r.per_seed) sum += m.mape_quantiles[q].second;
      r.mape_quantiles[q].second = sum / static_cast<double>(r.per_seed.size());
    }
  }
  return r;
}

double rmse_of(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  return std::sqrt((pred - truth).array().square().mean());
}

std::vector<int> complement(int count, const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    if (std::find(a.begin(), a.end(), i) == a.end() && std::find(b.begin(), b.end(), i) == b.end()) {
      out.push_back(i);
    }
  }
  return out;
}

/// Voltage predictions of a solver method on `inputs`, one matrix per seed.
using SolverFit = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

}  // namespace

// ---------------------------------------------------------------------------

MetricSet compute_metrics(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionMismatch("prediction is " + std::to_string(pred.rows()) + "x" +
                            std::to_string(pred.cols()) + ", target is " +
                            std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  }
  MetricSet m;
  if (pred.size() == 0) return m;
  const Eigen::ArrayXXd diff = (pred - target).array();
  m.rmse = std::sqrt(diff.square().mean());
  m.mae = diff.abs().mean();

  std::vector<double> ape;
  ape.reserve(static_cast<std::size_t>(pred.size()));
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double t = target.data()[i];
    if (std::abs(t) < kMapeFloor) {
      ++m.mape_excluded;
      continue;
    }
    ape.push_back(std::abs(pred.data()[i] - t) / std::abs(t) * 100.0);
  }
  std::sort(ape.begin(), ape.end());
  for (int k = 1; k <= 100; ++k) {
    const double q = k / 100.0;
    m.mape_quantiles.emplace_back(q, ape.empty() ? 0.0 : quantile_sorted(ape, q));
  }
  return m;
}

const MethodResult& ExperimentReport::at(const std::string& method, const std::string& target) const {
  for (const auto& r : rows) {
    if (r.method == method && r.target == target) return r;
  }
  throw std::out_of_range("report '" + name + "' has no row " + method + "/" + target);
}

std::string ExperimentReport::csv() const {
  std::string out = "method,target,alpha_unsup,rmse_mean,rmse_std,mae_mean,mae_std,n_seeds," +
                    provenance_header() + '\n';
  for (const auto& r : rows) {
    out += r.method + ',' + r.target + ',' + format_sig9(r.alpha_unsup) + ',' +
           format_sig9(r.rmse.mean) + ',' + format_sig9(r.rmse.std) + ',' + format_sig9(r.mae.mean) +
           ',' + format_sig9(r.mae.std) + ',' + std::to_string(r.per_seed.size()) + ',' +
           provenance_fields(provenance) + '\n';
  }
  return out;
}

std::string ExperimentReport::mape_csv() const {
  std::string out = "method,target,quantile,ape_percent\n";
  for (const auto& r : rows) {
    for (const auto& [q, v] : r.mape_quantiles) {
      out += r.method + ',' + r.target + ',' + format_sig9(q) + ',' + format_sig9(v) + '\n';
    }
  }
  return out;
}

const std::vector<std::string>& valid_solver_methods() {
  static const std::vector<std::string> names{"lr", "mlp", "mlp+mlp", "mlp+bnn", "mlp+tpbnn"};
  return names;
}

const std::vector<std::string>& valid_modeling_methods() {
  static const std::vector<std::string> names{"lr", "mlp", "bnn", "tpbnn"};
  return names;
}

void ExperimentConfig::validate() const {
  auto check = [](const std::vector<std::string>& methods, const std::vector<std::string>& valid,
                  const std::string& what) {
    if (methods.empty()) throw std::invalid_argument(what + " method list is empty");
    for (const auto& m : methods) {
      if (std::find(valid.begin(), valid.end(), m) == valid.end()) {
        throw std::invalid_argument("unknown " + what + " method '" + m +
                                    "'; valid methods: " + join(valid, ", "));
      }
    }
  };
  check(solver_methods, valid_solver_methods(), "solver");
  check(modeling_methods, valid_modeling_methods(), "modeling");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (steps < 0) throw std::invalid_argument("steps must be nonnegative");
  if (noise < 0.0) throw std::invalid_argument("noise must be nonnegative");
  if (!(capacity_fraction > 0.0 && capacity_fraction <= 1.0)) {
    throw std::invalid_argument("capacity fraction must lie in (0, 1]");
  }
  if (!(bilinear_lr > 0.0)) throw std::invalid_argument("bilinear lr must be positive");
  for (double a : alpha_grid) {
    if (!(a >= 0.0)) throw std::invalid_argument("alpha grid values must be nonnegative");
  }
  if (outlier_levels.empty()) throw std::invalid_argument("outlier levels are empty");
  for (double l : outlier_levels) {
    if (l < 0.0 || l > 0.10) throw std::invalid_argument("outlier levels must lie in [0, 0.1]");
  }
  model.weights.validate();
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Scenario prepare_scenario(BusSystem sys, const ExperimentConfig& config) {
  config.validate();
  validate(sys);
  Scenario sc;
  sc.y = build_admittance(sys);
  sc.a = adjacency(sys);
  const auto loads = load_buses(sys);
  const auto profiles =
      gen_load_profiles(config.steps, static_cast<int>(loads.size()), config.data_seed);
  const auto schedule = scale_to_capacity(sys, profiles, config.capacity_fraction);
  sc.data = build_samples(sys, schedule, config.newton_tol, &sc.build);
  sc.sys = std::move(sys);
  return sc;
}

SplitResult noisy_split(const Scenario& sc, const SplitSpec& spec, const ExperimentConfig& config) {
  SplitResult parts = split(sc.data, spec);
  parts.train = add_noise(parts.train, config.noise, derive_seed(config.data_seed, kNoiseStream));
  return parts;
}

double select_alpha(const Scenario& sc, const SplitResult& parts, DecoderKind kind,
                    const ExperimentConfig& config) {
  if (kind == DecoderKind::None) return 0.0;
  if (!config.alpha_search || config.alpha_grid.empty()) return config.model.weights.alpha_unsup;
  const auto norm = fit_normalization(parts.train);
  std::vector<double> scores(config.alpha_grid.size());
  parallel_for(scores.size(), config.threads, [&](std::size_t i) {
    auto fit = fit_model(sc, parts, norm, kind, config.alpha_grid[i], config.seeds.front(), config,
                         false);
    scores[i] = fit.history.epochs.at(static_cast<std::size_t>(fit.history.best_epoch - 1)).val_sup;
  });
  const auto best = std::min_element(scores.begin(), scores.end()) - scores.begin();
  return config.alpha_grid[static_cast<std::size_t>(best)];
}

namespace {

struct SolverLeg {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t slot = 0;
};

/// Trains every solver method for every seed on `parts` and calls `use` with
/// (method, seed index, predictor). Alpha per decoder kind is returned.
std::map<std::string, double> for_each_solver(
    const Scenario& sc, const SplitResult& parts, const ExperimentConfig& config,
    const std::function<void(const std::string&, std::size_t, const SolverFit&)>& use) {
  const auto norm = fit_normalization(parts.train);
  std::map<std::string, double> alphas;
  for (const auto& m : config.solver_methods) {
    alphas[m] = m == "lr" ? 0.0 : select_alpha(sc, parts, solver_decoder(m), config);
  }

  std::vector<SolverLeg> legs;
  for (const auto& m : config.solver_methods) {
    if (m == "lr") continue;
    for (std::size_t s = 0; s < config.seeds.size(); ++s) legs.push_back({m, config.seeds[s], s});
  }
  std::vector<std::optional<PgnnModel>> models(legs.size());
  parallel_for(legs.size(), config.threads, [&](std::size_t i) {
    const auto& leg = legs[i];
    models[i] = fit_model(sc, parts, norm, solver_decoder(leg.method), alphas[leg.method], leg.seed,
                          config, false)
                    .model;
  });

  for (const auto& m : config.solver_methods) {
    if (m != "lr") continue;
    const auto lr = baseline_lr_fit(parts.train);
    const SolverFit fit = [&lr](const Eigen::MatrixXd& x) { return lr.predict(x); };
    for (std::size_t s = 0; s < config.seeds.size(); ++s) use(m, s, fit);
  }
  for (std::size_t i = 0; i < legs.size(); ++i) {
    const PgnnModel& model = *models[i];
    const SolverFit fit = [&model](const Eigen::MatrixXd& x) { return model.predict_voltages(x); };
    use(legs[i].method, legs[i].slot, fit);
  }
  return alphas;
}

}  // namespace

ExperimentReport run_solver_comparison(const Scenario& sc, const ExperimentConfig& config) {
  config.validate();
  const auto parts = noisy_split(sc, SplitSpec{config.sequential, config.data_seed}, config);
  const Eigen::MatrixXd x_test = parts.test.inputs();
  const Eigen::MatrixXd v_test = parts.test.voltages();

  std::map<std::string, std::vector<Eigen::MatrixXd>> preds;
  for (const auto& m : config.solver_methods) preds[m].resize(config.seeds.size());
  const auto alphas = for_each_solver(sc, parts, config,
                                      [&](const std::string& m, std::size_t s, const SolverFit& f) {
                                        preds[m][s] = f(x_test);
                                      });

  ExperimentReport report;
  report.name = "solver_comparison";
  report.provenance = provenance_of(config, "sequential", config.noise, 0.0);
  for (const auto& m : config.solver_methods) {
    for (const char* target : {"mu", "omega", "v"}) {
      report.rows.push_back(summarize(m, target, alphas.at(m), preds[m], v_test));
    }
  }
  return report;
}

ExperimentReport run_modeling_comparison(const Scenario& sc, const ExperimentConfig& config) {
  config.validate();
  const auto parts = noisy_split(sc, SplitSpec{config.sequential, config.data_seed}, config);
  const auto norm = fit_normalization(parts.train);
  const Eigen::MatrixXd v_test = parts.test.voltages();
  const Eigen::MatrixXd s_test = parts.test.injections();

  std::map<std::string, std::vector<Eigen::MatrixXd>> preds;
  for (const auto& m : config.modeling_methods) preds[m].resize(config.seeds.size());

  std::vector<SolverLeg> legs;
  for (const auto& m : config.modeling_methods) {
    if (m == "lr") {
      const auto lr = baseline_lr_fit_modeling(parts.train);
      for (auto& p : preds[m]) p = lr.predict(v_test);
      continue;
    }
    for (std::size_t s = 0; s < config.seeds.size(); ++s) legs.push_back({m, config.seeds[s], s});
  }
  parallel_for(legs.size(), config.threads, [&](std::size_t i) {
    const auto& leg = legs[i];
    auto fit = fit_model(sc, parts, norm, modeling_decoder(leg.method), 1.0, leg.seed, config, true);
    preds[leg.method][leg.slot] = fit.model.predict_injections(v_test);
  });

  ExperimentReport report;
  report.name = "modeling_comparison";
  report.provenance = provenance_of(config, "sequential", config.noise, 0.0);
  for (const auto& m : config.modeling_methods) {
    for (const char* target : {"p", "q", "s"}) {
      report.rows.push_back(summarize(m, target, 0.0, preds[m], s_test));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string GeneralizationReport::curves_csv() const {
  std::string out = "regime,method,portion,role,samples,rmse_mean,rmse_std," + provenance_header() + '\n';
  for (const auto& c : curves) {
    out += regime + ',' + c.method + ',' + std::to_string(c.portion) + ',' + c.role + ',' +
           std::to_string(c.samples) + ',' + format_sig9(c.rmse.mean) + ',' +
           format_sig9(c.rmse.std) + ',' + provenance_fields(provenance) + '\n';
  }
  return out;
}

std::string GeneralizationReport::gap_csv() const {
  std::string out = "regime,method,gap_mean,gap_std\n";
  for (const auto& [m, g] : gap) {
    out += regime + ',' + m + ',' + format_sig9(g.mean) + ',' + format_sig9(g.std) + '\n';
  }
  return out;
}

GeneralizationReport run_generalization(const Scenario& sc, const ExperimentConfig& config,
                                        const RangePortion& regime, const std::vector<int>& test,
                                        const std::string& name) {
  config.validate();
  RangePortion spec = regime;
  spec.train_portions = complement(regime.portion_count, regime.val_portions, test);
  const auto parts = noisy_split(sc, SplitSpec{spec, config.data_seed}, config);

  const Eigen::MatrixXd x_val = parts.val.inputs();
  const Eigen::MatrixXd v_val = parts.val.voltages();
  const Eigen::MatrixXd x_test = parts.test.inputs();
  const Eigen::MatrixXd v_test = parts.test.voltages();

  // Portions present in each part, ascending.
  auto columns_by_portion = [](const std::vector<int>& portions) {
    std::map<int, std::vector<Eigen::Index>> cols;
    for (std::size_t i = 0; i < portions.size(); ++i) {
      cols[portions[i]].push_back(static_cast<Eigen::Index>(i));
    }
    return cols;
  };
  const auto val_cols = columns_by_portion(parts.val_portion);
  const auto test_cols = columns_by_portion(parts.test_portion);

  // method -> seed -> (role, portion) -> rmse
  using PortionErrors = std::map<std::pair<std::string, int>, double>;
  std::map<std::string, std::vector<PortionErrors>> errors;
  for (const auto& m : config.solver_methods) errors[m].resize(config.seeds.size());

  for_each_solver(sc, parts, config, [&](const std::string& m, std::size_t s, const SolverFit& f) {
    const Eigen::MatrixXd pv = f(x_val);
    const Eigen::MatrixXd pt = f(x_test);
    for (const auto& [portion, cols] : val_cols) {
      errors[m][s][{"val", portion}] = rmse_of(pv(Eigen::all, cols), v_val(Eigen::all, cols));
    }
    for (const auto& [portion, cols] : test_cols) {
      errors[m][s][{"test", portion}] = rmse_of(pt(Eigen::all, cols), v_test(Eigen::all, cols));
    }
  });

  GeneralizationReport report;
  report.regime = name;
  report.provenance = provenance_of(config, name, config.noise, 0.0);
  for (const auto& m : config.solver_methods) {
    for (const auto& [role, cols_map] :
         {std::pair{std::string("val"), &val_cols}, std::pair{std::string("test"), &test_cols}}) {
      for (const auto& [portion, cols] : *cols_map) {
        std::vector<double> per_seed;
        for (const auto& e : errors[m]) per_seed.push_back(e.at({role, portion}));
        report.curves.push_back({m, portion, role, cols.size(), mean_std(per_seed)});
      }
    }
    std::vector<double> gaps;
    for (const auto& e : errors[m]) {
      double val_sum = 0.0;
      double test_sum = 0.0;
      for (const auto& [portion, cols] : val_cols) val_sum += e.at({"val", portion});
      for (const auto& [portion, cols] : test_cols) test_sum += e.at({"test", portion});
      gaps.push_back(test_sum / static_cast<double>(test_cols.size()) -
                     val_sum / static_cast<double>(val_cols.size()));
    }
    report.gap[m] = mean_std(gaps);
  }
  std::sort(report.curves.begin(), report.curves.end(), [&](const auto& a, const auto& b) {
    const auto ia = std::find(config.solver_methods.begin(), config.solver_methods.end(), a.method);
    const auto ib = std::find(config.solver_methods.begin(), config.solver_methods.end(), b.method);
    return std::tie(ia, a.portion) < std::tie(ib, b.portion);
  });
  return report;
}

std::pair<GeneralizationReport, GeneralizationReport> run_interp_extrap(
    const Scenario& sc, const ExperimentConfig& config) {
  return {run_generalization(sc, config, config.interpolation, config.interpolation_test,
                             "interpolation"),
          run_generalization(sc, config, config.extrapolation, config.extrapolation_test,
                             "extrapolation")};
}

// ---------------------------------------------------------------------------

double OutlierReport::inflation(const std::string& method) const {
  const auto& curve = mae.at(method);
  return curve.back().mean / curve.front().mean;
}

std::string OutlierReport::csv() const {
  std::string out = "method,outlier_fraction,mae_mean,mae_std,inflation," + provenance_header() + '\n';
  for (const auto& [m, curve] : mae) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      Provenance p = provenance;
      p.outlier_fraction = levels[l];
      out += m + ',' + format_sig9(levels[l]) + ',' + format_sig9(curve[l].mean) + ',' +
             format_sig9(curve[l].std) + ',' + format_sig9(curve[l].mean / curve.front().mean) +
             ',' + provenance_fields(p) + '\n';
    }
  }
  return out;
}

OutlierReport run_outlier_robustness(const Scenario& sc, const ExperimentConfig& config) {
  config.validate();
  OutlierReport report;
  report.provenance = provenance_of(config, "sequential", config.noise, 0.0);
  report.levels = config.outlier_levels;
  for (const auto& m : config.solver_methods) report.mae[m].resize(report.levels.size());

  for (std::size_t l = 0; l < report.levels.size(); ++l) {
    auto parts = noisy_split(sc, SplitSpec{config.sequential, config.data_seed}, config);
    parts.train = inject_outliers(parts.train, report.levels[l],
                                  derive_seed(config.data_seed, kOutlierStream));
    const Eigen::MatrixXd x_test = parts.test.inputs();
    const Eigen::MatrixXd v_test = parts.test.voltages();
    std::map<std::string, std::vector<double>> per_seed;
    for (const auto& m : config.solver_methods) per_seed[m].resize(config.seeds.size());
    for_each_solver(sc, parts, config, [&](const std::string& m, std::size_t s, const SolverFit& f) {
      per_seed[m][s] = (f(x_test) - v_test).array().abs().mean();
    });
    for (const auto& m : config.solver_methods) report.mae[m][l] = mean_std(per_seed[m]);
  }
  return report;
}

// ---------------------------------------------------------------------------

RecoveryReport analyze_recovery(const BnnDecoder& decoder, const AdmittanceMatrix& y,
                                const AdjacencyMatrix& a, const std::string& method) {
  const auto& w = decoder.params;
  const Eigen::Index n = w.size();
  if (y.g.rows() != n || a.size() != n) throw DimensionMismatch("recovery inputs differ in size");

  Pattern predicted(n, n);
  if (decoder.mask) {
    predicted = (w.w_g.array() != 0.0) || (w.w_b.array() != 0.0);
  } else {
    const double tg = 0.01 * w.w_g.cwiseAbs().maxCoeff();
    const double tb = 0.01 * w.w_b.cwiseAbs().maxCoeff();
    predicted = (w.w_g.array().abs() > tg) || (w.w_b.array().abs() > tb);
  }
  const Pattern& truth = y.pattern;
  const auto hits = (predicted && truth).count();
  const auto n_pred = predicted.count();
  const auto n_true = truth.count();

  RecoveryReport r;
  r.method = method;
  r.pattern_precision = n_pred ? static_cast<double>(hits) / static_cast<double>(n_pred) : 0.0;
  r.pattern_recall = n_true ? static_cast<double>(hits) / static_cast<double>(n_true) : 0.0;
  const Eigen::ArrayXXd on = truth.cast<double>();
  const double count = std::max(on.sum(), 1.0);
  const double sg = ((w.w_g - y.g).array().square() * on).sum();
  const double sb = ((w.w_b - y.b).array().square() * on).sum();
  r.g_rmse_on_pattern = std::sqrt(sg / count);
  r.b_rmse_on_pattern = std::sqrt(sb / count);
  r.weight_rmse_on_pattern = std::sqrt((sg + sb) / (2.0 * count));
  r.w_g = w.w_g;
  r.w_b = w.w_b;
  r.g = y.g;
  r.b = y.b;
  return r;
}

std::vector<RecoveryReport> run_recovery(const Scenario& sc, const ExperimentConfig& config) {
  config.validate();
  const auto parts = split(sc.data, SplitSpec{config.sequential, config.data_seed});
  const auto norm = fit_normalization(parts.train);
  const std::vector<std::pair<std::string, DecoderKind>> kinds{{"bnn", DecoderKind::Bnn},
                                                               {"tpbnn", DecoderKind::Tpbnn}};
  std::vector<RecoveryReport> out(kinds.size());
  parallel_for(kinds.size(), config.threads, [&](std::size_t i) {
    auto fit = fit_model(sc, parts, norm, kinds[i].second, 1.0, config.seeds.front(), config, true);
    out[i] = analyze_recovery(std::get<BnnDecoder>(fit.model.decoder()), sc.y, sc.a, kinds[i].first);
  });
  return out;
}

std::string recovery_csv(const std::vector<RecoveryReport>& reports) {
  std::string out =
      "method,pattern_precision,pattern_recall,weight_rmse_on_pattern,g_rmse_on_pattern,"
      "b_rmse_on_pattern\n";
  for (const auto& r : reports) {
    out += r.method + ',' + format_sig9(r.pattern_precision) + ',' + format_sig9(r.pattern_recall) +
           ',' + format_sig9(r.weight_rmse_on_pattern) + ',' + format_sig9(r.g_rmse_on_pattern) +
           ',' + format_sig9(r.b_rmse_on_pattern) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string gnuplot_script(const FullReport& report) {
  std::string s =
      "# gnuplot -persist plots.gp\n"
      "set datafile separator ','\n"
      "set terminal pngcairo size 900,600\n"
      "set key left top\n";
  auto cdf = [&](const ExperimentReport& r, const std::string& file, const std::string& target) {
    s += "set output '" + r.name + "_" + target + "_cdf.png'\n";
    s += "set xlabel 'absolute percentage error (%)'\nset ylabel 'fraction of entries'\n";
    s += "set logscale x\n";
    std::vector<std::string> seen;
    std::string cmd;
    for (const auto& row : r.rows) {
      if (row.target != target) continue;
      cmd += std::string(cmd.empty() ? "plot " : ", ") + "'" + file +
             "' using (strcol(2) eq '" + target + "' && strcol(1) eq '" + row.method +
             "' ? $4 : 1/0):3 with lines title '" + row.method + "'";
    }
    s += cmd + "\nunset logscale x\n";
  };
  cdf(report.solver, "solver_mape_cdf.csv", "mu");
  cdf(report.solver, "solver_mape_cdf.csv", "omega");
  for (const auto* g : {&report.interpolation, &report.extrapolation}) {
    s += "set output '" + g->regime + ".png'\n";
    s += "set xlabel 'portion'\nset ylabel 'RMSE (p.u.)'\n";
    std::string cmd;
    for (const auto& [m, gap] : g->gap) {
      cmd += std::string(cmd.empty() ? "plot " : ", ") + "'" + g->regime +
             "_curves.csv' using (strcol(2) eq '" + m + "' ? $3 : 1/0):6 with linespoints title '" +
             m + "'";
    }
    s += cmd + "\n";
  }
  s += "set output 'outliers.png'\nset xlabel 'outlier fraction'\nset ylabel 'MAE (p.u.)'\n";
  std::string cmd;
  for (const auto& [m, curve] : report.outliers.mae) {
    cmd += std::string(cmd.empty() ? "plot " : ", ") +
           "'outlier_mae.csv' using (strcol(1) eq '" + m + "' ? $2 : 1/0):3 with linespoints title '" +
           m + "'";
  }
  s += cmd + "\n";
  s += "set view map\nunset key\n";
  for (const auto& r : report.recovery) {
    for (const char* which : {"w_g", "w_b"}) {
      const std::string file = "heatmap_" + r.method + "_" + which + ".csv";
      s += "set output 'heatmap_" + r.method + "_" + which + ".png'\n";
      s += "plot '" + file + "' matrix with image\n";
    }
  }
  s += "set output 'heatmap_g.png'\nplot 'heatmap_g.csv' matrix with image\n";
  s += "set output 'heatmap_b.png'\nplot 'heatmap_b.csv' matrix with image\n";
  return s;
}

std::vector<std::string> write_report(const std::filesystem::path& dir, const FullReport& report) {
  std::map<std::string, std::string> files;
  files["solver_comparison.csv"] = report.solver.csv();
  files["solver_mape_cdf.csv"] = report.solver.mape_csv();
  files["modeling_comparison.csv"] = report.modeling.csv();
  files["modeling_mape_cdf.csv"] = report.modeling.mape_csv();
  files["interpolation_curves.csv"] = report.interpolation.curves_csv();
  files["extrapolation_curves.csv"] = report.extrapolation.curves_csv();
  files["generalization_gaps.csv"] =
      report.interpolation.gap_csv() +
      report.extrapolation.gap_csv().substr(report.extrapolation.gap_csv().find('\n') + 1);
  files["outlier_mae.csv"] = report.outliers.csv();
  files["recovery.csv"] = recovery_csv(report.recovery);
  for (const auto& r : report.recovery) {
    files["heatmap_" + r.method + "_w_g.csv"] = matrix_csv(r.w_g);
    files["heatmap_" + r.method + "_w_b.csv"] = matrix_csv(r.w_b);
  }
  if (!report.recovery.empty()) {
    files["heatmap_g.csv"] = matrix_csv(report.recovery.front().g);
    files["heatmap_b.csv"] = matrix_csv(report.recovery.front().b);
  }
  files["plots.gp"] = gnuplot_script(report);

  std::vector<std::string> names;
  for (const auto& [name, text] : files) {
    write_file_atomic(dir / name, text);
    names.push_back(name);
  }
  return names;
}

}  // namespace pgnn
