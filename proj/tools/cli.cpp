#include "cli.hpp"

#include "pgnn/acpf.hpp"
#include "pgnn/errors.hpp"
#include "pgnn/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#ifndef PGNN_VERSION
#define PGNN_VERSION "unknown"
#endif

namespace pgnn::cli {

namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using json = nlohmann::json;

// -- value parsing ------------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw std::invalid_argument(key + ": expected an integer, got '" + text + "'");
  }
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    return parse_double(trim(text));
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected a number, got '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw std::invalid_argument(key + ": expected true/false, got '" + text + "'");
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& item : split(text, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

template <typename T, typename F>
std::vector<T> parse_list_of(const std::string& key, const std::string& text, F conv) {
  std::vector<T> out;
  for (const auto& item : parse_list(text)) out.push_back(conv(key, item));
  return out;
}

std::string list_text(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

template <typename T>
std::string list_text(const std::vector<T>& v) {
  std::vector<std::string> s;
  for (const auto& x : v) {
    if constexpr (std::is_floating_point_v<T>) {
      s.push_back(format_exact(x));
    } else {
      s.push_back(std::to_string(x));
    }
  }
  return list_text(s);
}

// -- config keys --------------------------------------------------------------

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

const std::map<std::string, Key>& keys() {
  static const std::map<std::string, Key> table = [] {
    std::map<std::string, Key> k;
    k["run.case"] = {[](RunConfig& c, auto&, auto& v) { c.case_path = trim(v); },
                     [](const RunConfig& c) { return c.case_path.string(); }};
    k["run.full_case"] = {[](RunConfig& c, auto&, auto& v) { c.full_case_path = trim(v); },
                          [](const RunConfig& c) { return c.full_case_path.string(); }};
    k["run.dataset"] = {[](RunConfig& c, auto&, auto& v) { c.dataset_path = trim(v); },
                        [](const RunConfig& c) { return c.dataset_path.string(); }};
    k["run.experiments"] = {[](RunConfig& c, auto&, auto& v) { c.experiments = parse_list(v); },
                            [](const RunConfig& c) { return list_text(c.experiments); }};
    k["run.load_scale"] = {
        [](RunConfig& c, auto& key, auto& v) { c.load_scale = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.load_scale); }};
    k["run.threads"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.threads = parse_int<unsigned>(key, v); },
        [](const RunConfig&) { return std::string("-"); }};

    k["data.name"] = {[](RunConfig& c, auto&, auto& v) { c.experiment.case_name = trim(v); },
                      [](const RunConfig& c) { return c.experiment.case_name; }};
    k["data.steps"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.steps = parse_int<std::int64_t>(key, v); },
        [](const RunConfig& c) { return std::to_string(c.experiment.steps); }};
    k["data.seed"] = {[](RunConfig& c, auto& key, auto& v) {
                        c.experiment.data_seed = parse_int<std::uint64_t>(key, v);
                      },
                      [](const RunConfig& c) { return std::to_string(c.experiment.data_seed); }};
    k["data.capacity_fraction"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.capacity_fraction = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.capacity_fraction); }};
    k["data.newton_tol"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.newton_tol = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.newton_tol); }};
    k["data.noise"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.noise = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.noise); }};
    k["data.train_frac"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.sequential.train_frac = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.sequential.train_frac); }};
    k["data.val_frac"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.sequential.val_frac = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.sequential.val_frac); }};

    auto widths = [](const std::string& key, const std::string& v) {
      return parse_list_of<Eigen::Index>(key, v, [](auto& k2, auto& s) {
        return static_cast<Eigen::Index>(parse_int<long>(k2, s));
      });
    };
    k["model.encoder_hidden"] = {
        [widths](RunConfig& c, auto& key, auto& v) { c.experiment.model.encoder_hidden = widths(key, v); },
        [](const RunConfig& c) { return list_text(c.experiment.model.encoder_hidden); }};
    k["model.decoder_hidden"] = {
        [widths](RunConfig& c, auto& key, auto& v) { c.experiment.model.decoder_hidden = widths(key, v); },
        [](const RunConfig& c) { return list_text(c.experiment.model.decoder_hidden); }};
    k["model.decoder"] = {
        [](RunConfig& c, auto&, auto& v) { c.experiment.model.decoder = decoder_from_string(trim(v)); },
        [](const RunConfig& c) { return to_string(c.experiment.model.decoder); }};
    k["model.alpha_sup"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.model.weights.alpha_sup = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.model.weights.alpha_sup); }};
    k["model.alpha_unsup"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.model.weights.alpha_unsup = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.model.weights.alpha_unsup); }};

    k["train.lr"] = {[](RunConfig& c, auto& key, auto& v) { c.experiment.train.lr = parse_real(key, v); },
                     [](const RunConfig& c) { return format_exact(c.experiment.train.lr); }};
    k["train.bilinear_lr"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.bilinear_lr = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.bilinear_lr); }};
    k["train.beta1"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.train.beta1 = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.train.beta1); }};
    k["train.beta2"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.train.beta2 = parse_real(key, v); },
        [](const RunConfig& c) { return format_exact(c.experiment.train.beta2); }};
    k["train.batch_size"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.train.batch_size = parse_int<int>(key, v); },
        [](const RunConfig& c) { return std::to_string(c.experiment.train.batch_size); }};
    k["train.max_epochs"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.train.max_epochs = parse_int<int>(key, v); },
        [](const RunConfig& c) { return std::to_string(c.experiment.train.max_epochs); }};
    k["train.patience"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.train.patience = parse_int<int>(key, v); },
        [](const RunConfig& c) { return std::to_string(c.experiment.train.patience); }};
    k["train.seeds"] = {[](RunConfig& c, auto& key, auto& v) {
                          c.experiment.seeds = parse_list_of<std::uint64_t>(
                              key, v, [](auto& k2, auto& s) { return parse_int<std::uint64_t>(k2, s); });
                        },
                        [](const RunConfig& c) { return list_text(c.experiment.seeds); }};
    k["train.alpha_search"] = {
        [](RunConfig& c, auto& key, auto& v) { c.experiment.alpha_search = parse_bool(key, v); },
        [](const RunConfig& c) { return std::string(c.experiment.alpha_search ? "true" : "false"); }};
    k["train.alpha_grid"] = {[](RunConfig& c, auto& key, auto& v) {
                               c.experiment.alpha_grid = parse_list_of<double>(key, v, parse_real);
                             },
                             [](const RunConfig& c) { return list_text(c.experiment.alpha_grid); }};

    k["experiment.solver_methods"] = {
        [](RunConfig& c, auto&, auto& v) { c.experiment.solver_methods = parse_list(v); },
        [](const RunConfig& c) { return list_text(c.experiment.solver_methods); }};
    k["experiment.modeling_methods"] = {
        [](RunConfig& c, auto&, auto& v) { c.experiment.modeling_methods = parse_list(v); },
        [](const RunConfig& c) { return list_text(c.experiment.modeling_methods); }};
    k["experiment.outlier_levels"] = {[](RunConfig& c, auto& key, auto& v) {
                                        c.experiment.outlier_levels = parse_list_of<double>(key, v, parse_real);
                                      },
                                      [](const RunConfig& c) { return list_text(c.experiment.outlier_levels); }};
    auto portions = [](const std::string& key, const std::string& v) {
      return parse_list_of<int>(key, v, [](auto& k2, auto& s) { return parse_int<int>(k2, s); });
    };
    k["experiment.portion_count"] = {
        [](RunConfig& c, auto& key, auto& v) {
          const int n = parse_int<int>(key, v);
          c.experiment.interpolation.portion_count = n;
          c.experiment.extrapolation.portion_count = n;
        },
        [](const RunConfig& c) { return std::to_string(c.experiment.interpolation.portion_count); }};
    k["experiment.interpolation_val"] = {
        [portions](RunConfig& c, auto& key, auto& v) { c.experiment.interpolation.val_portions = portions(key, v); },
        [](const RunConfig& c) { return list_text(c.experiment.interpolation.val_portions); }};
    k["experiment.interpolation_test"] = {
        [portions](RunConfig& c, auto& key, auto& v) { c.experiment.interpolation_test = portions(key, v); },
        [](const RunConfig& c) { return list_text(c.experiment.interpolation_test); }};
    k["experiment.extrapolation_val"] = {
        [portions](RunConfig& c, auto& key, auto& v) { c.experiment.extrapolation.val_portions = portions(key, v); },
        [](const RunConfig& c) { return list_text(c.experiment.extrapolation.val_portions); }};
    k["experiment.extrapolation_test"] = {
        [portions](RunConfig& c, auto& key, auto& v) { c.experiment.extrapolation_test = portions(key, v); },
        [](const RunConfig& c) { return list_text(c.experiment.extrapolation_test); }};
    return k;
  }();
  return table;
}

const std::set<std::string>& valid_experiments() {
  static const std::set<std::string> names{"solver", "modeling", "generalization", "outliers",
                                           "recovery"};
  return names;
}

// -- outputs ------------------------------------------------------------------

std::string run_id(const std::string& command, const RunConfig& config) {
  std::string material = command + '\n' + config.canonical();
  for (const auto& p : {config.case_path, config.full ? config.full_case_path : fs::path{},
                        command == "train" ? config.dataset_path : fs::path{}}) {
    if (!p.empty() && fs::exists(p)) material += read_file(p);
  }
  return command + "-" + sha256_hex(material).substr(0, 12);
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& config,
                    const std::vector<std::string>& files) {
  json m;
  m["command"] = command;
  m["version"] = PGNN_VERSION;
  m["config_sha256"] = sha256_hex(config.canonical());
  m["case"] = config.case_path.string();
  m["case_sha256"] = sha256_hex(read_file(config.case_path));
  m["data_seed"] = config.experiment.data_seed;
  m["seeds"] = config.experiment.seeds;
  m["files"] = files;
  if (config.full && !config.full_case_path.empty()) {
    m["full_case"] = config.full_case_path.string();
    m["full_case_sha256"] = sha256_hex(read_file(config.full_case_path));
  }
  if (!config.dataset_path.empty() && command == "train") {
    m["dataset"] = config.dataset_path.string();
    m["dataset_sha256"] = sha256_hex(read_file(config.dataset_path));
  }
  write_file_atomic(dir / "config.ini", config.canonical());
  write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw std::invalid_argument(what + " path is required");
  if (!fs::is_regular_file(p)) throw std::invalid_argument(what + " file not found: " + p.string());
}

json affine_json(const AffineTransform& t) {
  return {{"offset", std::vector<double>(t.offset.data(), t.offset.data() + t.offset.size())},
          {"scale", std::vector<double>(t.scale.data(), t.scale.data() + t.scale.size())}};
}

// -- commands -----------------------------------------------------------------

int cmd_gen(const RunConfig& config, std::ostream& out) {
  require_file(config.case_path, "case");
  const auto sys = load_case(config.case_path.string());
  validate(sys);
  const auto& e = config.experiment;
  const auto profiles =
      gen_load_profiles(e.steps, static_cast<int>(load_buses(sys).size()), e.data_seed);
  const auto schedule = scale_to_capacity(sys, profiles, e.capacity_fraction);
  BuildReport report;
  Dataset ds;
  try {
    ds = build_samples(sys, schedule, e.newton_tol, &report);
  } catch (const TooManyFailures&) {
    out << "steps " << report.steps << " converged " << report.converged << " failed "
        << report.failed_steps.size() << "\n";
    throw;
  }

  const fs::path dir = config.out_dir / run_id("gen", config);
  write_file_atomic(dir / "dataset.csv", dataset_csv(ds, sys));

  json meta;
  meta["case"] = config.case_path.string();
  meta["steps"] = report.steps;
  meta["converged"] = report.converged;
  meta["failed_steps"] = report.failed_steps;
  meta["max_iterations"] = report.max_iterations;
  meta["data_seed"] = e.data_seed;
  meta["demand_scale"] = schedule.scale;
  meta["capacity_fraction"] = e.capacity_fraction;
  meta["features"] = InputLayout::of(sys).feature_names(sys);
  const auto n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::floor(e.sequential.train_frac * static_cast<double>(n) + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(e.sequential.val_frac * static_cast<double>(n) + 1e-9));
  meta["split"] = {{"regime", "sequential"}, {"train_rows", {0, n_train}},
                   {"val_rows", {n_train, n_train + n_val}}, {"test_rows", {n_train + n_val, n}}};
  if (n_train > 0) {
    std::vector<std::size_t> rows(n_train);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto norm = fit_normalization(ds.subset(rows));
    meta["normalization"] = {{"x", affine_json(norm.x)}, {"v", affine_json(norm.v)},
                             {"s", affine_json(norm.s)}};
  }
  write_file_atomic(dir / "dataset.json", meta.dump(2) + "\n");
  write_manifest(dir, "gen", config, {"dataset.csv", "dataset.json"});

  out << "steps " << report.steps << " converged " << report.converged << " failed "
      << report.failed_steps.size() << " max_iterations " << report.max_iterations << "\n";
  out << "wrote " << (dir / "dataset.csv").string() << "\n";
  return kOk;
}

int cmd_solve(const RunConfig& config, std::ostream& out) {
  require_file(config.case_path, "case");
  auto sys = load_case(config.case_path.string());
  validate(sys);
  if (!(config.load_scale >= 0.0)) throw std::invalid_argument("load scale must be nonnegative");
  for (auto& b : sys.buses) {
    b.p_demand *= config.load_scale;
    b.q_demand *= config.load_scale;
  }
  for (auto& g : sys.generators) g.p_gen *= config.load_scale;

  const auto y = build_admittance(sys);
  NewtonOptions opts;
  opts.tol = config.experiment.newton_tol;
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = newton_solve(PFSpec::from_system(sys), y, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path dir = config.out_dir / run_id("solve", config);
  write_file_atomic(dir / "solution.csv", solution_csv(sol, sys));
  write_manifest(dir, "solve", config, {"solution.csv"});
  std::ostringstream line;
  line << "converged in " << sol.iterations << " iterations, mismatch inf-norm "
       << std::setprecision(3) << std::scientific << sol.final_mismatch_norm << " ("
       << std::fixed << std::setprecision(4) << secs << " s)\n";
  out << line.str() << "wrote " << (dir / "solution.csv").string() << "\n";
  return kOk;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  require_file(config.case_path, "case");
  require_file(config.dataset_path, "dataset");
  const auto sys = load_case(config.case_path.string());
  validate(sys);
  const auto& e = config.experiment;
  Scenario sc;
  sc.y = build_admittance(sys);
  sc.a = adjacency(sys);
  sc.data = parse_dataset_csv(read_file(config.dataset_path));
  sc.sys = sys;
  if (!sc.data.empty() && (sc.data.samples.front().x.size() != InputLayout::of(sys).dim() ||
                           sc.data.samples.front().v_target.size() != 2 * static_cast<Eigen::Index>(sys.size()))) {
    throw ValidationError("dataset does not match the case dimensions");
  }
  const auto parts = noisy_split(sc, SplitSpec{e.sequential, e.data_seed}, e);
  const auto norm = fit_normalization(parts.train);
  const auto kind = e.model.decoder;
  const double alpha = select_alpha(sc, parts, kind, e);

  const fs::path dir = config.out_dir / run_id("train", config);
  std::vector<std::string> files;
  for (auto seed : e.seeds) {
    ModelConfig mc = e.model;
    mc.weights.alpha_unsup = alpha;
    TrainConfig tc = e.train;
    tc.seed = seed;
    if (kind == DecoderKind::Bnn || kind == DecoderKind::Tpbnn) tc.decoder_lr = e.bilinear_lr;
    auto model = PgnnModel::create(mc, norm.x.dim(), sys.size(), norm, seed,
                                   kind == DecoderKind::Tpbnn ? std::optional(sc.a) : std::nullopt);
    model.metadata()["seed"] = std::to_string(seed);
    model.metadata()["config_sha256"] = sha256_hex(config.canonical());
    auto result = train(std::move(model), parts.train, parts.val, tc);
    const auto s = std::to_string(seed);
    write_file_atomic(dir / ("checkpoint_seed" + s + ".txt"), result.model.serialize());
    write_file_atomic(dir / ("history_seed" + s + ".csv"), result.history.csv());
    files.push_back("checkpoint_seed" + s + ".txt");
    files.push_back("history_seed" + s + ".csv");
    const auto m = compute_metrics(result.model.predict_voltages(parts.test.inputs()),
                                   parts.test.voltages());
    out << "seed " << s << " best_epoch " << result.history.best_epoch << " epochs "
        << result.history.epochs.size() << " test_rmse " << format_sig9(m.rmse) << "\n";
  }
  write_manifest(dir, "train", config, files);
  out << "wrote " << dir.string() << "\n";
  return kOk;
}

bool wants(const RunConfig& c, const std::string& name) {
  return std::find(c.experiments.begin(), c.experiments.end(), name) != c.experiments.end();
}

std::vector<std::string> report_case(const fs::path& case_path, const RunConfig& config,
                                     const fs::path& dir, std::ostream& out) {
  ExperimentConfig e = config.experiment;
  e.case_name = case_path.stem().string();
  auto sys = load_case(case_path.string());
  const auto sc = prepare_scenario(std::move(sys), e);
  out << e.case_name << ": " << sc.data.size() << " samples (" << sc.build.failed_steps.size()
      << " failed steps)\n";

  FullReport r;
  r.solver.name = "solver_comparison";
  r.modeling.name = "modeling_comparison";
  r.interpolation.regime = "interpolation";
  r.extrapolation.regime = "extrapolation";
  if (wants(config, "solver")) {
    r.solver = run_solver_comparison(sc, e);
    for (const auto& row : r.solver.rows) {
      if (row.target == "v") out << "  solver " << row.method << " rmse " << format_sig9(row.rmse.mean) << "\n";
    }
  }
  if (wants(config, "modeling")) {
    r.modeling = run_modeling_comparison(sc, e);
    for (const auto& row : r.modeling.rows) {
      if (row.target == "s") out << "  modeling " << row.method << " rmse " << format_sig9(row.rmse.mean) << "\n";
    }
  }
  if (wants(config, "generalization")) {
    std::tie(r.interpolation, r.extrapolation) = run_interp_extrap(sc, e);
    for (const auto* g : {&r.interpolation, &r.extrapolation}) {
      for (const auto& [m, gap] : g->gap) {
        out << "  " << g->regime << " " << m << " gap " << format_sig9(gap.mean) << "\n";
      }
    }
  }
  if (wants(config, "outliers")) {
    r.outliers = run_outlier_robustness(sc, e);
    for (const auto& [m, curve] : r.outliers.mae) {
      out << "  outliers " << m << " inflation " << format_sig9(r.outliers.inflation(m)) << "\n";
    }
  }
  if (wants(config, "recovery")) {
    r.recovery = run_recovery(sc, e);
    for (const auto& rec : r.recovery) {
      out << "  recovery " << rec.method << " weight_rmse " << format_sig9(rec.weight_rmse_on_pattern)
          << "\n";
    }
  }
  std::vector<std::string> files;
  for (const auto& f : write_report(dir / e.case_name, r)) files.push_back(e.case_name + "/" + f);
  return files;
}

int cmd_report(const RunConfig& config, std::ostream& out) {
  require_file(config.case_path, "case");
  std::vector<fs::path> cases{config.case_path};
  if (config.full) {
    require_file(config.full_case_path, "full case");
    cases.push_back(config.full_case_path);
  }
  const fs::path dir = config.out_dir / run_id("report", config);
  std::vector<std::string> files;
  for (const auto& c : cases) {
    auto f = report_case(c, config, dir, out);
    files.insert(files.end(), f.begin(), f.end());
  }
  write_manifest(dir, "report", config, files);
  out << "wrote " << dir.string() << "\n";
  return kOk;
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  experiment.validate();
  for (const auto& x : experiments) {
    if (!valid_experiments().count(x)) {
      throw std::invalid_argument(
          "unknown experiment '" + x + "'; valid experiments: " +
          list_text(std::vector<std::string>(valid_experiments().begin(), valid_experiments().end())));
    }
  }
}

std::string RunConfig::canonical() const {
  // Paths are left out so the run id depends on file contents, not locations.
  std::string out;
  std::string section;
  for (const auto& [name, key] : keys()) {
    if (name.rfind("run.", 0) == 0 && name != "run.experiments" && name != "run.load_scale") continue;
    const auto dot = name.find('.');
    const auto sec = name.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + ("[" + sec + "]\n");
      section = sec;
    }
    out += name.substr(dot + 1) + " = " + key.get(*this) + "\n";
  }
  return out;
}

void apply_ini_text(RunConfig& config, const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(static_cast<int>(e.line()), e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw std::invalid_argument("config key '" + section + "' must be inside a section");
    }
    for (const auto& [name, value] : body) {
      const std::string full = section + "." + name;
      const auto it = keys().find(full);
      if (it == keys().end()) throw std::invalid_argument("unknown config key '" + full + "'");
      it->second.set(config, full, value.data());
    }
  }
}

RunConfig load_config(const fs::path& path) {
  require_file(path, "config");
  RunConfig config;
  apply_ini_text(config, read_file(path));
  // Relative paths in a config resolve against the config's directory.
  const auto base = path.parent_path();
  for (auto* p : {&config.case_path, &config.full_case_path, &config.dataset_path}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return config;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Physics-guided neural power-flow solvers"};
  app.require_subcommand(1);

  std::string case_path;
  std::string config_path;
  std::string out_dir;
  std::string dataset_path;
  std::string seeds;
  std::string full_case;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<double> load_scale;
  std::optional<unsigned> threads;
  bool full = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--case", case_path, "case file");
    sub->add_option("--config", config_path, "INI config; flags override it");
    sub->add_option("--out", out_dir, "output root (default out)");
    sub->add_option("--seed", seed, "data seed");
    sub->add_option("--threads", threads, "worker threads for independent runs");
  };
  auto* gen = app.add_subcommand("gen", "generate a dataset");
  common(gen);
  gen->add_option("--steps", steps, "hourly steps");
  auto* solve = app.add_subcommand("solve", "Newton power flow of the case");
  common(solve);
  solve->add_option("--load-scale", load_scale, "demand and dispatch multiplier");
  auto* trn = app.add_subcommand("train", "train the configured model");
  common(trn);
  trn->add_option("--dataset", dataset_path, "dataset CSV from gen");
  trn->add_option("--seeds", seeds, "comma-separated model seeds");
  auto* rep = app.add_subcommand("report", "run the configured experiments");
  common(rep);
  rep->add_option("--seeds", seeds, "comma-separated model seeds");
  rep->add_option("--steps", steps, "hourly steps");
  rep->add_flag("--full", full, "also run the full-size case");
  rep->add_option("--full-case", full_case, "case used by --full");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!case_path.empty()) config.case_path = case_path;
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (!dataset_path.empty()) config.dataset_path = dataset_path;
    if (seed) config.experiment.data_seed = *seed;
    if (steps) config.experiment.steps = *steps;
    if (load_scale) config.load_scale = *load_scale;
    if (threads) config.experiment.threads = *threads;
    if (!seeds.empty()) apply_ini_text(config, "[train]\nseeds = " + seeds + "\n");
    config.full = full;
    if (!full_case.empty()) config.full_case_path = full_case;
    if (config.full && config.full_case_path.empty() && !config.case_path.empty()) {
      config.full_case_path = config.case_path.parent_path() / "ieee118.case";
    }
    config.validate();

    if (command == "gen") return cmd_gen(config, out);
    if (command == "solve") return cmd_solve(config, out);
    if (command == "train") return cmd_train(config, out);
    return cmd_report(config, out);
  } catch (const TooManyFailures& e) {
    err << "error: " << e.what() << "\n";
    return kTooManyFailures;
  } catch (const NonConvergence& e) {
    err << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const SingularJacobian& e) {
    err << "error: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const DivergedLoss& e) {
    err << "error: " << e.what() << "\n";
    return kDivergedLoss;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace pgnn::cli
