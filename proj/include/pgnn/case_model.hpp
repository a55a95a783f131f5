#pragma once

// Grid case description, nodal admittance and adjacency.

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace pgnn {

enum class BusType { PQ = 1, PV = 2, Slack = 3 };

/// All electrical quantities are per-unit on the system base; angles in radians.
struct Bus {
  int id = 0;  ///< external id as written in the case file
  BusType type = BusType::PQ;
  double p_demand = 0.0;
  double q_demand = 0.0;
  double shunt_g = 0.0;
  double shunt_b = 0.0;
  double v_set = 1.0;
  double theta_set = 0.0;

  bool operator==(const Bus&) const = default;
};

/// Branch endpoints are dense 0-based bus indices.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;
  double tap = 1.0;
  double shift = 0.0;  ///< radians

  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;          ///< dense 0-based bus index
  double p_max = 0.0;   ///< p.u.
  double p_gen = 0.0;   ///< base-case dispatch, p.u.

  bool operator==(const Generator&) const = default;
};

struct BusSystem {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  double base_mva = 100.0;

  std::size_t size() const { return buses.size(); }
  int slack_index() const;
  /// Dense index of an external bus id, or -1.
  int index_of(int external_id) const;
  /// Bus indices of a given type, in bus order.
  std::vector<int> indices_of(BusType type) const;
  /// Per-bus real-power generation limits (p.u.).
  Eigen::VectorXd gen_capacity() const;
  /// Per-bus base-case real-power dispatch (p.u.).
  Eigen::VectorXd gen_dispatch() const;

  bool operator==(const BusSystem&) const = default;
};

/// Structural nonzero pattern of an N x N matrix.
using Pattern = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct AdmittanceMatrix {
  Eigen::MatrixXd g;
  Eigen::MatrixXd b;
  Pattern pattern;

  Eigen::Index size() const { return g.rows(); }
};

/// 0/1 matrix with a unit diagonal, stored as doubles so it can be used as a Hadamard mask.
struct AdjacencyMatrix {
  Eigen::MatrixXd a;

  Eigen::Index size() const { return a.rows(); }
  Pattern pattern() const { return a.array() != 0.0; }
};

/// Parses the BUS/BRANCH/GEN text format. Throws ParseError or ValidationError.
BusSystem parse_case(std::string_view text);
BusSystem load_case(const std::string& path);

/// Writes the case format back out with 9 significant digits.
std::string serialize_case(const BusSystem& sys);

/// Throws ValidationError when an invariant of BusSystem does not hold.
void validate(const BusSystem& sys);

AdmittanceMatrix build_admittance(const BusSystem& sys);
AdjacencyMatrix adjacency(const BusSystem& sys);

}  // namespace pgnn
