#pragma once

// AC power-flow equations in polar and rectangular coordinates and a
// Newton-Raphson solver over the polar mismatch system.

#include "pgnn/case_model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace pgnn {

struct RectState;

struct PolarState {
  Eigen::VectorXd v;
  Eigen::VectorXd theta;

  RectState to_rect() const;
};

struct RectState {
  Eigen::VectorXd mu;
  Eigen::VectorXd omega;

  PolarState to_polar() const;
};

struct InjectionVector {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

/// Per-bus knowns. Entries that the bus type does not specify are ignored.
struct PFSpec {
  std::vector<BusType> types;
  Eigen::VectorXd p;
  Eigen::VectorXd q;
  Eigen::VectorXd v;
  Eigen::VectorXd theta;

  /// Base-case knowns of a system: Pg - Pd, -Qd and the voltage setpoints.
  static PFSpec from_system(const BusSystem& sys);
  /// Knowns read off a solved state (constructive feasible spec).
  static PFSpec from_state(const std::vector<BusType>& types, const PolarState& state,
                           const AdmittanceMatrix& y);

  Eigen::Index size() const { return static_cast<Eigen::Index>(types.size()); }
  /// PQ and PV buses in bus order: the angle unknowns and P equations.
  std::vector<int> pvpq() const;
  /// PQ buses in bus order: the magnitude unknowns and Q equations.
  std::vector<int> pq() const;
  Eigen::Index unknown_count() const;
};

struct PFSolution {
  PolarState state;
  RectState rect;
  InjectionVector inj;
  int iterations = 0;
  double final_mismatch_norm = 0.0;
};

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 20;
  double pivot_threshold = 1e-12;
};

InjectionVector injections_polar(const PolarState& state, const AdmittanceMatrix& y);
InjectionVector injections_rect(const RectState& state, const AdmittanceMatrix& y);

/// g = [P(pvpq) - p_spec; Q(pq) - q_spec].
Eigen::VectorXd mismatch(const PolarState& state, const PFSpec& spec, const AdmittanceMatrix& y);

/// dg / d[theta(pvpq); v(pq)].
Eigen::MatrixXd jacobian(const PolarState& state, const PFSpec& spec, const AdmittanceMatrix& y);

/// Flat-start state: v = 1 (setpoint at PV/slack), theta = 0 (setpoint at slack).
PolarState flat_start(const PFSpec& spec);

/// Throws NonConvergence or SingularJacobian.
PFSolution newton_solve(const PFSpec& spec, const AdmittanceMatrix& y,
                        const NewtonOptions& options = {});

/// CSV rows: bus, v, theta, mu, omega, p, q with 9 significant digits.
std::string solution_csv(const PFSolution& sol, const BusSystem& sys);

}  // namespace pgnn
