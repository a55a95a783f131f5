#include "pgnn/data_pipeline.hpp"

#include "pgnn/errors.hpp"
#include "pgnn/io.hpp"
#include "pgnn/nn.hpp"
#include "pgnn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace pgnn {

namespace {

constexpr double kMinScale = 1e-8;

Eigen::MatrixXd stack(const std::vector<PFSample>& samples, Eigen::VectorXd PFSample::*field) {
  if (samples.empty()) return {};
  Eigen::MatrixXd m((samples.front().*field).size(), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t c = 0; c < samples.size(); ++c) {
    m.col(static_cast<Eigen::Index>(c)) = samples[c].*field;
  }
  return m;
}

std::size_t count_of(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace

InputLayout InputLayout::of(const BusSystem& sys) {
  return {sys.indices_of(BusType::PQ), sys.indices_of(BusType::PV), sys.slack_index()};
}

Eigen::VectorXd InputLayout::inputs(const PFSpec& spec) const {
  Eigen::VectorXd x(dim());
  Eigen::Index r = 0;
  for (int i : pq) x(r++) = spec.p(i);
  for (int i : pv) x(r++) = spec.p(i);
  for (int i : pq) x(r++) = spec.q(i);
  for (int i : pv) x(r++) = spec.v(i);
  x(r++) = spec.v(slack);
  x(r++) = spec.theta(slack);
  return x;
}

std::vector<std::string> InputLayout::feature_names(const BusSystem& sys) const {
  std::vector<std::string> names;
  auto id = [&](int i) { return std::to_string(sys.buses[static_cast<std::size_t>(i)].id); };
  for (int i : pq) names.push_back("x_PL_bus" + id(i));
  for (int i : pv) names.push_back("x_PG_bus" + id(i));
  for (int i : pq) names.push_back("x_QL_bus" + id(i));
  for (int i : pv) names.push_back("x_VG_bus" + id(i));
  names.push_back("x_VR_bus" + id(slack));
  names.push_back("x_thetaR_bus" + id(slack));
  return names;
}

Eigen::MatrixXd AffineTransform::apply(const Eigen::MatrixXd& u) const {
  if (u.rows() != dim()) throw DimensionMismatch("affine transform: feature count differs");
  return ((u.colwise() - offset).array().colwise() / scale.array()).matrix();
}

Eigen::MatrixXd AffineTransform::invert(const Eigen::MatrixXd& y) const {
  if (y.rows() != dim()) throw DimensionMismatch("affine transform: feature count differs");
  return ((y.array().colwise() * scale.array()).matrix().colwise() + offset);
}

AffineTransform AffineTransform::zscore(const Eigen::MatrixXd& samples) {
  const Eigen::Index d = samples.rows();
  const double n = static_cast<double>(samples.cols());
  AffineTransform t{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
  if (samples.cols() == 0) return t;
  t.offset = samples.rowwise().mean();
  for (Eigen::Index r = 0; r < d; ++r) {
    const double var = (samples.row(r).array() - t.offset(r)).square().sum() / n;
    const double sd = std::sqrt(var);
    t.scale(r) = sd > kMinScale * std::max(1.0, std::abs(t.offset(r))) ? sd : 1.0;
  }
  return t;
}

AffineTransform AffineTransform::identity(Eigen::Index dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

AffineTransform AffineTransform::minmax(const Eigen::MatrixXd& samples) {
  const Eigen::Index d = samples.rows();
  AffineTransform t{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
  if (samples.cols() == 0) return t;
  for (Eigen::Index r = 0; r < d; ++r) {
    const double lo = samples.row(r).minCoeff();
    const double hi = samples.row(r).maxCoeff();
    // y = (u - lo) * 2 / (hi - lo) - 1 written as (u - offset) / scale.
    if (hi > lo) {
      t.scale(r) = (hi - lo) / 2.0;
      t.offset(r) = lo + t.scale(r);
    } else {
      t.offset(r) = lo;
    }
  }
  return t;
}

Eigen::MatrixXd Dataset::inputs() const { return stack(samples, &PFSample::x); }
Eigen::MatrixXd Dataset::voltages() const { return stack(samples, &PFSample::v_target); }
Eigen::MatrixXd Dataset::injections() const { return stack(samples, &PFSample::s_target); }

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.noise_applied = noise_applied;
  out.normalization = normalization;
  out.samples.reserve(rows.size());
  for (auto r : rows) out.samples.push_back(samples.at(r));
  return out;
}

Eigen::MatrixXd gen_load_profiles(std::int64_t n_steps, int n_loads, std::uint64_t seed) {
  if (n_steps < 0 || n_loads < 0) throw std::invalid_argument("profile dimensions must be >= 0");
  constexpr double kLevel = 0.75;
  constexpr double kWeeklyAmp = 0.05;
  constexpr double kJitter = 0.05;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  Rng rng(seed);
  std::uniform_real_distribution<double> amp_dist(0.10, 0.20);
  std::uniform_real_distribution<double> shift_dist(-2.0, 2.0);  // hours
  std::uniform_real_distribution<double> phase_dist(0.0, two_pi);
  std::normal_distribution<double> z(0.0, 1.0);

  std::vector<double> amp(static_cast<std::size_t>(n_loads));
  std::vector<double> shift(amp.size());
  std::vector<double> weekly_phase(amp.size());
  for (std::size_t l = 0; l < amp.size(); ++l) {
    amp[l] = amp_dist(rng);
    shift[l] = shift_dist(rng);
    weekly_phase[l] = phase_dist(rng);
  }

  Eigen::MatrixXd m(n_steps, n_loads);
  for (std::int64_t t = 0; t < n_steps; ++t) {
    const double hour = static_cast<double>(t);
    for (int l = 0; l < n_loads; ++l) {
      const auto li = static_cast<std::size_t>(l);
      // Daily trough around 04:00, peak around 16:00.
      const double daily = kLevel + amp[li] * std::sin(two_pi * (hour + shift[li] - 10.0) / 24.0);
      const double weekly = 1.0 + kWeeklyAmp * std::sin(two_pi * hour / 168.0 + weekly_phase[li]);
      const double jitter = std::exp(kJitter * std::clamp(z(rng), -3.0, 3.0));
      m(t, l) = daily * weekly * jitter;
    }
  }
  return m;
}

std::vector<int> load_buses(const BusSystem& sys) {
  std::vector<int> out;
  for (std::size_t i = 0; i < sys.size(); ++i) {
    if (sys.buses[i].p_demand != 0.0 || sys.buses[i].q_demand != 0.0) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

PFSpec Schedule::spec(const BusSystem& sys, std::int64_t step) const {
  PFSpec s = PFSpec::from_system(sys);
  s.p = (p_gen.row(step) - p_demand.row(step)).transpose();
  s.q = -q_demand.row(step).transpose();
  return s;
}

Schedule scale_to_capacity(const BusSystem& sys, const Eigen::MatrixXd& profiles,
                           double target_fraction) {
  if ((profiles.array() < 0.0).any()) throw std::invalid_argument("negative load multiplier");
  const auto loads = load_buses(sys);
  if (profiles.cols() != static_cast<Eigen::Index>(loads.size())) {
    throw DimensionMismatch("profiles have " + std::to_string(profiles.cols()) +
                            " columns for " + std::to_string(loads.size()) + " loads");
  }
  const auto n = static_cast<Eigen::Index>(sys.size());
  const Eigen::Index steps = profiles.rows();
  const Eigen::VectorXd cap = sys.gen_capacity();
  const double total_cap = cap.sum();

  Schedule s;
  s.p_demand = Eigen::MatrixXd::Zero(steps, n);
  s.q_demand = Eigen::MatrixXd::Zero(steps, n);
  s.p_gen = Eigen::MatrixXd::Zero(steps, n);
  for (std::size_t l = 0; l < loads.size(); ++l) {
    const int b = loads[l];
    const auto& bus = sys.buses[static_cast<std::size_t>(b)];
    s.p_demand.col(b) = bus.p_demand * profiles.col(static_cast<Eigen::Index>(l));
    s.q_demand.col(b) = bus.q_demand * profiles.col(static_cast<Eigen::Index>(l));
  }
  const double peak = steps > 0 ? s.p_demand.rowwise().sum().maxCoeff() : 0.0;
  s.scale = peak > 0.0 ? target_fraction * total_cap / peak : 0.0;
  s.p_demand *= s.scale;
  s.q_demand *= s.scale;

  const Eigen::VectorXd share = total_cap > 0.0 ? Eigen::VectorXd(cap / total_cap)
                                                : Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < steps; ++t) {
    const double demand = s.p_demand.row(t).sum();
    if (demand > total_cap * (1.0 + 1e-12)) {
      throw InfeasibleStep("step " + std::to_string(t) + " demand " + std::to_string(demand) +
                           " exceeds capacity " + std::to_string(total_cap));
    }
    s.p_gen.row(t) = demand * share.transpose();
  }
  return s;
}

Dataset build_samples(const BusSystem& sys, const Schedule& schedule, double tol,
                      BuildReport* report) {
  const auto y = build_admittance(sys);
  const auto layout = InputLayout::of(sys);
  const auto n = static_cast<Eigen::Index>(sys.size());
  NewtonOptions opts;
  opts.tol = tol;

  BuildReport local;
  local.steps = schedule.steps();
  Dataset ds;
  ds.samples.reserve(static_cast<std::size_t>(schedule.steps()));
  for (std::int64_t t = 0; t < schedule.steps(); ++t) {
    const PFSpec spec = schedule.spec(sys, t);
    PFSolution sol;
    try {
      sol = newton_solve(spec, y, opts);
    } catch (const NonConvergence&) {
      local.failed_steps.push_back(t);
      continue;
    } catch (const SingularJacobian&) {
      local.failed_steps.push_back(t);
      continue;
    }
    PFSample sample;
    sample.x = layout.inputs(spec);
    sample.v_target.resize(2 * n);
    sample.v_target << sol.rect.mu, sol.rect.omega;
    sample.s_target.resize(2 * n);
    sample.s_target << sol.inj.p, sol.inj.q;
    sample.timestamp = t;
    sample.driver = schedule.p_demand.row(t).sum();
    ds.samples.push_back(std::move(sample));
    local.max_iterations = std::max(local.max_iterations, sol.iterations);
  }
  local.converged = static_cast<std::int64_t>(ds.samples.size());
  if (report) *report = local;
  const auto failed = static_cast<double>(local.failed_steps.size());
  if (failed > 0.05 * static_cast<double>(local.steps)) {
    throw TooManyFailures(std::to_string(local.failed_steps.size()) + " of " +
                          std::to_string(local.steps) + " steps failed to converge");
  }
  return ds;
}

Dataset add_noise(const Dataset& ds, double rel_std, std::uint64_t seed) {
  if (!(rel_std >= 0.0)) throw std::invalid_argument("relative noise must be >= 0");
  Dataset out = ds;
  out.noise_applied = true;
  if (rel_std == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> eps(0.0, rel_std);
  for (auto& s : out.samples) {
    for (Eigen::VectorXd* block : {&s.x, &s.v_target, &s.s_target}) {
      for (Eigen::Index i = 0; i < block->size(); ++i) (*block)(i) *= 1.0 + eps(rng);
    }
  }
  return out;
}

std::vector<std::size_t> outlier_rows(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 0.10)) {
    throw std::invalid_argument("outlier fraction must lie in [0, 0.10]");
  }
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(count_of(fraction, n));
  std::sort(rows.begin(), rows.end());
  return rows;
}

Dataset inject_outliers(const Dataset& ds, double fraction, std::uint64_t seed) {
  const auto rows = outlier_rows(ds.size(), fraction, seed);
  Dataset out = ds;
  if (rows.empty()) return out;

  // Feature-wise IQR over the whole block, taken before corruption.
  auto iqr_of = [](const Eigen::MatrixXd& m) {
    Eigen::VectorXd iqr(m.rows());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> v;
      v.reserve(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
      iqr(r) = interquartile_range(std::move(v));
    }
    return iqr;
  };
  const Eigen::VectorXd iqr_x = iqr_of(ds.inputs());
  const Eigen::VectorXd iqr_v = iqr_of(ds.voltages());
  const Eigen::VectorXd iqr_s = iqr_of(ds.injections());

  // Rng draws follow shuffle draws from a distinct stream.
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> z(0.0, 1.0);
  for (auto r : rows) {
    auto& s = out.samples[r];
    for (auto [block, iqr] : {std::pair{&s.x, &iqr_x}, std::pair{&s.v_target, &iqr_v},
                              std::pair{&s.s_target, &iqr_s}}) {
      for (Eigen::Index i = 0; i < block->size(); ++i) {
        const double draw = z(rng);
        (*block)(i) += 10.0 * (*iqr)(i) * draw;
      }
    }
  }
  return out;
}

void SplitSpec::validate() const {
  if (const auto* seq = std::get_if<Sequential>(&regime)) {
    if (!(seq->train_frac >= 0.0 && seq->val_frac >= 0.0) ||
        seq->train_frac + seq->val_frac > 1.0 + 1e-12) {
      throw std::invalid_argument("split fractions must be >= 0 and sum to <= 1");
    }
    return;
  }
  const auto& rp = std::get<RangePortion>(regime);
  if (rp.portion_count < 1) throw std::invalid_argument("portion count must be >= 1");
  std::set<int> seen;
  for (const auto* list : {&rp.train_portions, &rp.val_portions}) {
    for (int p : *list) {
      if (p < 0 || p >= rp.portion_count) throw std::invalid_argument("portion index out of range");
      if (!seen.insert(p).second) throw std::invalid_argument("portion indices must be disjoint");
    }
  }
}

int portion_of(double normalized_driver, int portion_count) {
  const double u = (normalized_driver + 1.0) / 2.0;
  const int p = static_cast<int>(std::floor(u * portion_count));
  return std::clamp(p, 0, portion_count - 1);
}

SplitResult split(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  SplitResult out;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::vector<std::size_t> test_rows;
  const std::size_t n = ds.size();

  if (const auto* seq = std::get_if<Sequential>(&spec.regime)) {
    const std::size_t n_train = count_of(seq->train_frac, n);
    const std::size_t n_val = std::min(count_of(seq->val_frac, n), n - n_train);
    for (std::size_t i = 0; i < n; ++i) {
      (i < n_train ? train_rows : i < n_train + n_val ? val_rows : test_rows).push_back(i);
    }
  } else {
    const auto& rp = std::get<RangePortion>(spec.regime);
    Eigen::MatrixXd drivers(1, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) drivers(0, static_cast<Eigen::Index>(i)) = ds.samples[i].driver;
    out.driver_transform = AffineTransform::minmax(drivers);
    const Eigen::MatrixXd normalized = out.driver_transform->apply(drivers);
    const std::set<int> train_set(rp.train_portions.begin(), rp.train_portions.end());
    const std::set<int> val_set(rp.val_portions.begin(), rp.val_portions.end());
    for (std::size_t i = 0; i < n; ++i) {
      const int p = portion_of(normalized(0, static_cast<Eigen::Index>(i)), rp.portion_count);
      if (train_set.contains(p)) {
        train_rows.push_back(i);
      } else if (val_set.contains(p)) {
        val_rows.push_back(i);
        out.val_portion.push_back(p);
      } else {
        test_rows.push_back(i);
        out.test_portion.push_back(p);
      }
    }
  }

  if (train_rows.empty() || val_rows.empty() || test_rows.empty()) {
    throw EmptySplit("split produced " + std::to_string(train_rows.size()) + "/" +
                     std::to_string(val_rows.size()) + "/" + std::to_string(test_rows.size()) +
                     " train/val/test samples");
  }
  out.train = ds.subset(train_rows);
  out.val = ds.subset(val_rows);
  out.test = ds.subset(test_rows);
  return out;
}

Normalization fit_normalization(const Dataset& train, bool zscore_injections) {
  if (train.normalization) throw std::logic_error("dataset is already normalized");
  if (train.empty()) throw EmptySplit("cannot fit a normalization on an empty dataset");
  const Eigen::MatrixXd s = train.injections();
  return {AffineTransform::zscore(train.inputs()), AffineTransform::zscore(train.voltages()),
          zscore_injections ? AffineTransform::zscore(s) : AffineTransform::identity(s.rows())};
}

Dataset normalize(const Dataset& ds, const Normalization& norm) {
  if (ds.normalization) throw std::logic_error("dataset is already normalized");
  Dataset out = ds;
  for (auto& s : out.samples) {
    s.x = norm.x.apply(s.x);
    s.v_target = norm.v.apply(s.v_target);
    s.s_target = norm.s.apply(s.s_target);
  }
  out.normalization = norm;
  return out;
}

Dataset denormalize(const Dataset& ds) {
  if (!ds.normalization) return ds;
  Dataset out = ds;
  const auto& norm = *ds.normalization;
  for (auto& s : out.samples) {
    s.x = norm.x.invert(s.x);
    s.v_target = norm.v.invert(s.v_target);
    s.s_target = norm.s.invert(s.s_target);
  }
  out.normalization.reset();
  return out;
}

std::string dataset_csv(const Dataset& ds, const BusSystem& sys) {
  const auto layout = InputLayout::of(sys);
  std::vector<std::string> header = {"timestamp", "driver"};
  for (auto& name : layout.feature_names(sys)) header.push_back(std::move(name));
  for (const char* prefix : {"mu_bus", "omega_bus", "p_bus", "q_bus"}) {
    for (const auto& bus : sys.buses) header.push_back(prefix + std::to_string(bus.id));
  }
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (const auto& s : ds.samples) {
    out += std::to_string(s.timestamp) + ',' + format_exact(s.driver);
    for (const Eigen::VectorXd* block : {&s.x, &s.v_target, &s.s_target}) {
      for (Eigen::Index i = 0; i < block->size(); ++i) out += ',' + format_exact((*block)(i));
    }
    out += '\n';
  }
  return out;
}

Dataset parse_dataset_csv(const std::string& text) {
  const auto lines = split(text, '\n');
  if (lines.empty() || lines.front().empty()) throw ParseError(1, "dataset CSV has no header");
  const auto header = split(lines.front(), ',');
  if (header.size() < 2 || header[0] != "timestamp" || header[1] != "driver") {
    throw ParseError(1, "dataset CSV header must start with timestamp,driver");
  }
  Eigen::Index nx = 0;
  Eigen::Index nbus = 0;
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) ++nx;
    if (h.rfind("mu_bus", 0) == 0) ++nbus;
  }
  const auto expected = static_cast<std::size_t>(2 + nx + 4 * nbus);
  if (header.size() != expected) throw ParseError(1, "dataset CSV header has unexpected columns");

  Dataset ds;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto cells = split(lines[li], ',');
    if (cells.size() != expected) {
      throw ParseError(li + 1, "expected " + std::to_string(expected) + " cells");
    }
    PFSample s;
    try {
      s.timestamp = std::stoll(cells[0]);
      s.driver = parse_double(cells[1]);
      s.x.resize(nx);
      s.v_target.resize(2 * nbus);
      s.s_target.resize(2 * nbus);
      std::size_t c = 2;
      for (Eigen::Index i = 0; i < nx; ++i) s.x(i) = parse_double(cells[c++]);
      for (Eigen::Index i = 0; i < 2 * nbus; ++i) s.v_target(i) = parse_double(cells[c++]);
      for (Eigen::Index i = 0; i < 2 * nbus; ++i) s.s_target(i) = parse_double(cells[c++]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(li + 1, e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace pgnn
