#include "pgnn/acpf.hpp"

#include "pgnn/errors.hpp"

#include <cmath>
#include <cstdio>

namespace pgnn {

namespace {

void check_dims(Eigen::Index a, Eigen::Index n, const char* what) {
  if (a != n) {
    throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(n) +
                            ", got " + std::to_string(a));
  }
}

}  // namespace

RectState PolarState::to_rect() const {
  return {(v.array() * theta.array().cos()).matrix(), (v.array() * theta.array().sin()).matrix()};
}

PolarState RectState::to_polar() const {
  Eigen::VectorXd v = (mu.array().square() + omega.array().square()).sqrt();
  Eigen::VectorXd theta(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) theta(i) = std::atan2(omega(i), mu(i));
  return {std::move(v), std::move(theta)};
}

PFSpec PFSpec::from_system(const BusSystem& sys) {
  const auto n = static_cast<Eigen::Index>(sys.size());
  PFSpec spec;
  spec.types.reserve(sys.size());
  spec.p = sys.gen_dispatch();
  spec.q = Eigen::VectorXd::Zero(n);
  spec.v = Eigen::VectorXd::Ones(n);
  spec.theta = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& bus = sys.buses[static_cast<std::size_t>(i)];
    spec.types.push_back(bus.type);
    spec.p(i) -= bus.p_demand;
    spec.q(i) = -bus.q_demand;
    if (bus.type != BusType::PQ) spec.v(i) = bus.v_set;
    if (bus.type == BusType::Slack) spec.theta(i) = bus.theta_set;
  }
  return spec;
}

PFSpec PFSpec::from_state(const std::vector<BusType>& types, const PolarState& state,
                          const AdmittanceMatrix& y) {
  const auto inj = injections_polar(state, y);
  return {types, inj.p, inj.q, state.v, state.theta};
}

std::vector<int> PFSpec::pvpq() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i] != BusType::Slack) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> PFSpec::pq() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i] == BusType::PQ) out.push_back(static_cast<int>(i));
  }
  return out;
}

Eigen::Index PFSpec::unknown_count() const {
  return static_cast<Eigen::Index>(pvpq().size() + pq().size());
}

InjectionVector injections_polar(const PolarState& state, const AdmittanceMatrix& y) {
  const Eigen::Index n = y.size();
  check_dims(state.v.size(), n, "voltage magnitudes");
  check_dims(state.theta.size(), n, "voltage angles");
  InjectionVector out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 0.0;
    double q = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!y.pattern(i, k)) continue;
      const double dt = state.theta(i) - state.theta(k);
      const double c = std::cos(dt);
      const double s = std::sin(dt);
      const double vv = state.v(i) * state.v(k);
      p += vv * (y.g(i, k) * c + y.b(i, k) * s);
      q += vv * (y.g(i, k) * s - y.b(i, k) * c);
    }
    out.p(i) = p;
    out.q(i) = q;
  }
  return out;
}

InjectionVector injections_rect(const RectState& state, const AdmittanceMatrix& y) {
  check_dims(state.mu.size(), y.size(), "real voltage components");
  check_dims(state.omega.size(), y.size(), "imaginary voltage components");
  const Eigen::VectorXd gm = y.g * state.mu;
  const Eigen::VectorXd gw = y.g * state.omega;
  const Eigen::VectorXd bm = y.b * state.mu;
  const Eigen::VectorXd bw = y.b * state.omega;
  const auto mu = state.mu.array();
  const auto om = state.omega.array();
  InjectionVector out;
  out.p = (mu * gm.array() + om * gw.array() + om * bm.array() - mu * bw.array()).matrix();
  out.q = (om * gm.array() - mu * gw.array() - mu * bm.array() - om * bw.array()).matrix();
  return out;
}

Eigen::VectorXd mismatch(const PolarState& state, const PFSpec& spec, const AdmittanceMatrix& y) {
  check_dims(spec.size(), y.size(), "power-flow spec");
  const auto inj = injections_polar(state, y);
  const auto pvpq = spec.pvpq();
  const auto pq = spec.pq();
  Eigen::VectorXd g(static_cast<Eigen::Index>(pvpq.size() + pq.size()));
  Eigen::Index r = 0;
  for (int i : pvpq) g(r++) = inj.p(i) - spec.p(i);
  for (int i : pq) g(r++) = inj.q(i) - spec.q(i);
  return g;
}

Eigen::MatrixXd jacobian(const PolarState& state, const PFSpec& spec, const AdmittanceMatrix& y) {
  const Eigen::Index n = y.size();
  check_dims(spec.size(), n, "power-flow spec");
  const auto inj = injections_polar(state, y);
  const auto& v = state.v;
  const auto& th = state.theta;

  // Full N x N blocks of dP/dtheta, dP/dV, dQ/dtheta, dQ/dV.
  Eigen::MatrixXd dp_dth = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd dp_dv = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd dq_dth = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd dq_dv = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (i == k || !y.pattern(i, k)) continue;
      const double dt = th(i) - th(k);
      const double c = std::cos(dt);
      const double s = std::sin(dt);
      const double gik = y.g(i, k);
      const double bik = y.b(i, k);
      dp_dth(i, k) = v(i) * v(k) * (gik * s - bik * c);
      dq_dth(i, k) = -v(i) * v(k) * (gik * c + bik * s);
      dp_dv(i, k) = v(i) * (gik * c + bik * s);
      dq_dv(i, k) = v(i) * (gik * s - bik * c);
    }
    const double vi2 = v(i) * v(i);
    dp_dth(i, i) = -inj.q(i) - y.b(i, i) * vi2;
    dq_dth(i, i) = inj.p(i) - y.g(i, i) * vi2;
    dp_dv(i, i) = inj.p(i) / v(i) + y.g(i, i) * v(i);
    dq_dv(i, i) = inj.q(i) / v(i) - y.b(i, i) * v(i);
  }

  const auto pvpq = spec.pvpq();
  const auto pq = spec.pq();
  const auto npvpq = static_cast<Eigen::Index>(pvpq.size());
  const auto npq = static_cast<Eigen::Index>(pq.size());
  Eigen::MatrixXd jac(npvpq + npq, npvpq + npq);
  for (Eigen::Index r = 0; r < npvpq; ++r) {
    for (Eigen::Index c = 0; c < npvpq; ++c) jac(r, c) = dp_dth(pvpq[r], pvpq[c]);
    for (Eigen::Index c = 0; c < npq; ++c) jac(r, npvpq + c) = dp_dv(pvpq[r], pq[c]);
  }
  for (Eigen::Index r = 0; r < npq; ++r) {
    for (Eigen::Index c = 0; c < npvpq; ++c) jac(npvpq + r, c) = dq_dth(pq[r], pvpq[c]);
    for (Eigen::Index c = 0; c < npq; ++c) jac(npvpq + r, npvpq + c) = dq_dv(pq[r], pq[c]);
  }
  return jac;
}

PolarState flat_start(const PFSpec& spec) {
  const Eigen::Index n = spec.size();
  PolarState s{Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = spec.types[static_cast<std::size_t>(i)];
    if (t != BusType::PQ) s.v(i) = spec.v(i);
    if (t == BusType::Slack) s.theta(i) = spec.theta(i);
  }
  return s;
}

PFSolution newton_solve(const PFSpec& spec, const AdmittanceMatrix& y,
                        const NewtonOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("Newton tolerance must be positive");
  if (options.max_iter < 1) throw std::invalid_argument("Newton needs at least one iteration");
  check_dims(spec.size(), y.size(), "power-flow spec");

  const auto pvpq = spec.pvpq();
  const auto pq = spec.pq();
  const auto npvpq = static_cast<Eigen::Index>(pvpq.size());

  PolarState state = flat_start(spec);
  Eigen::VectorXd g = mismatch(state, spec, y);
  double norm = g.size() ? g.lpNorm<Eigen::Infinity>() : 0.0;
  int iter = 0;
  while (!(norm <= options.tol)) {
    if (iter >= options.max_iter || !std::isfinite(norm)) throw NonConvergence(iter, norm);
    const Eigen::MatrixXd jac = jacobian(state, spec, y);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(min_pivot > options.pivot_threshold)) {
      throw SingularJacobian("Jacobian pivot " + std::to_string(min_pivot) +
                             " below threshold at iteration " + std::to_string(iter));
    }
    const Eigen::VectorXd dx = lu.solve(-g);
    for (Eigen::Index k = 0; k < npvpq; ++k) state.theta(pvpq[k]) += dx(k);
    for (std::size_t k = 0; k < pq.size(); ++k) state.v(pq[k]) += dx(npvpq + static_cast<Eigen::Index>(k));
    ++iter;
    g = mismatch(state, spec, y);
    norm = g.lpNorm<Eigen::Infinity>();
  }

  PFSolution sol;
  sol.rect = state.to_rect();
  sol.inj = injections_polar(state, y);
  sol.state = std::move(state);
  sol.iterations = iter;
  sol.final_mismatch_norm = norm;
  if (!(sol.final_mismatch_norm <= options.tol)) throw NonConvergence(iter, norm);
  return sol;
}

std::string solution_csv(const PFSolution& sol, const BusSystem& sys) {
  std::string out = "bus,v,theta,mu,omega,p,q\n";
  char buf[256];
  for (std::size_t i = 0; i < sys.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", sys.buses[i].id,
                  sol.state.v(k), sol.state.theta(k), sol.rect.mu(k), sol.rect.omega(k),
                  sol.inj.p(k), sol.inj.q(k));
    out += buf;
  }
  return out;
}

}  // namespace pgnn
