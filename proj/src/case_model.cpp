#include "pgnn/case_model.hpp"

#include "pgnn/errors.hpp"

#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace pgnn {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

enum class Section { None, Bus, Branch, Gen };

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double to_double(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError(line_no, "expected a number, got '" + std::string(tok) + "'");
  }
  return v;
}

int to_int(std::string_view tok, std::size_t line_no) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(line_no, "expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

// Branch and generator rows reference external ids until every bus is known.
struct RawBranch {
  int from_id, to_id;
  Branch br;
  std::size_t line;
};
struct RawGen {
  int bus_id;
  Generator gen;
  std::size_t line;
};

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  // "-0" and "0" must serialize identically for bit-stable output.
  if (std::string_view(buf) == "-0") return "0";
  return buf;
}

}  // namespace

int BusSystem::slack_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].type == BusType::Slack) return static_cast<int>(i);
  }
  return -1;
}

int BusSystem::index_of(int external_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == external_id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> BusSystem::indices_of(BusType type) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].type == type) out.push_back(static_cast<int>(i));
  }
  return out;
}

Eigen::VectorXd BusSystem::gen_capacity() const {
  Eigen::VectorXd cap = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
  for (const auto& g : generators) cap(g.bus) += g.p_max;
  return cap;
}

Eigen::VectorXd BusSystem::gen_dispatch() const {
  Eigen::VectorXd pg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()));
  for (const auto& g : generators) pg(g.bus) += g.p_gen;
  return pg;
}

void validate(const BusSystem& sys) {
  const auto n = static_cast<int>(sys.size());
  if (n < 2) throw ValidationError("a system needs at least 2 buses, found " + std::to_string(n));
  if (!(sys.base_mva > 0.0)) throw ValidationError("base MVA must be positive");
  int slack_count = 0;
  std::unordered_map<int, int> seen;
  for (const auto& bus : sys.buses) {
    if (!seen.emplace(bus.id, 0).second) {
      throw ValidationError("duplicate bus id " + std::to_string(bus.id));
    }
    if (bus.type == BusType::Slack) ++slack_count;
    if (bus.type != BusType::PQ && !(bus.v_set > 0.0)) {
      throw ValidationError("bus " + std::to_string(bus.id) + " needs a positive voltage setpoint");
    }
  }
  if (slack_count != 1) {
    throw ValidationError("expected exactly one slack bus, found " + std::to_string(slack_count));
  }
  for (const auto& br : sys.branches) {
    if (br.from < 0 || br.from >= n || br.to < 0 || br.to >= n) {
      throw ValidationError("branch endpoint out of range");
    }
    if (br.from == br.to) {
      throw ValidationError("branch connects bus " + std::to_string(sys.buses[br.from].id) +
                            " to itself");
    }
    if (br.r == 0.0 && br.x == 0.0) throw ValidationError("branch with zero impedance");
    if (!(br.tap > 0.0)) throw ValidationError("branch tap ratio must be positive");
  }
  for (const auto& g : sys.generators) {
    if (g.bus < 0 || g.bus >= n) throw ValidationError("generator bus out of range");
  }
}

BusSystem parse_case(std::string_view text) {
  BusSystem sys;
  std::vector<RawBranch> raw_branches;
  std::vector<RawGen> raw_gens;
  Section section = Section::None;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) {
      if (end == text.size()) break;
      continue;
    }

    if (tok[0] == "BUS" || tok[0] == "BRANCH" || tok[0] == "GEN") {
      if (tok.size() != 1) throw ParseError(line_no, "section header takes no arguments");
      section = tok[0] == "BUS" ? Section::Bus : tok[0] == "BRANCH" ? Section::Branch : Section::Gen;
      continue;
    }
    if (tok[0] == "BASEMVA") {
      if (tok.size() != 2) throw ParseError(line_no, "BASEMVA takes exactly one value");
      sys.base_mva = to_double(tok[1], line_no);
      if (!(sys.base_mva > 0.0)) throw ParseError(line_no, "BASEMVA must be positive");
      continue;
    }

    switch (section) {
      case Section::None:
        throw ParseError(line_no, "data row before any BUS/BRANCH/GEN header");
      case Section::Bus: {
        if (tok.size() != 8) {
          throw ParseError(line_no, "BUS row needs 8 columns, found " + std::to_string(tok.size()));
        }
        Bus bus;
        bus.id = to_int(tok[0], line_no);
        const int type = to_int(tok[1], line_no);
        if (type < 1 || type > 3) throw ParseError(line_no, "bus type must be 1, 2 or 3");
        bus.type = static_cast<BusType>(type);
        bus.p_demand = to_double(tok[2], line_no);
        bus.q_demand = to_double(tok[3], line_no);
        bus.shunt_g = to_double(tok[4], line_no);
        bus.shunt_b = to_double(tok[5], line_no);
        bus.v_set = to_double(tok[6], line_no);
        bus.theta_set = to_double(tok[7], line_no) * kDegToRad;
        sys.buses.push_back(bus);
        break;
      }
      case Section::Branch: {
        if (tok.size() != 7) {
          throw ParseError(line_no,
                           "BRANCH row needs 7 columns, found " + std::to_string(tok.size()));
        }
        RawBranch rb{to_int(tok[0], line_no), to_int(tok[1], line_no), {}, line_no};
        rb.br.r = to_double(tok[2], line_no);
        rb.br.x = to_double(tok[3], line_no);
        rb.br.b_charging = to_double(tok[4], line_no);
        rb.br.tap = to_double(tok[5], line_no);
        if (rb.br.tap == 0.0) rb.br.tap = 1.0;
        rb.br.shift = to_double(tok[6], line_no) * kDegToRad;
        raw_branches.push_back(rb);
        break;
      }
      case Section::Gen: {
        if (tok.size() != 2 && tok.size() != 3) {
          throw ParseError(line_no,
                           "GEN row needs 2 or 3 columns, found " + std::to_string(tok.size()));
        }
        RawGen rg{to_int(tok[0], line_no), {}, line_no};
        rg.gen.p_max = to_double(tok[1], line_no);
        rg.gen.p_gen = tok.size() == 3 ? to_double(tok[2], line_no) : 0.0;
        raw_gens.push_back(rg);
        break;
      }
    }
    if (end == text.size()) break;
  }

  const double base = sys.base_mva;
  for (auto& bus : sys.buses) {
    bus.p_demand /= base;
    bus.q_demand /= base;
    bus.shunt_g /= base;
    bus.shunt_b /= base;
  }

  std::unordered_map<int, int> index;
  for (std::size_t i = 0; i < sys.buses.size(); ++i) {
    index.emplace(sys.buses[i].id, static_cast<int>(i));
  }
  auto lookup = [&](int id, std::size_t line) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw ValidationError("line " + std::to_string(line) + ": unknown bus id " +
                            std::to_string(id));
    }
    return it->second;
  };
  for (const auto& rb : raw_branches) {
    Branch br = rb.br;
    br.from = lookup(rb.from_id, rb.line);
    br.to = lookup(rb.to_id, rb.line);
    sys.branches.push_back(br);
  }
  for (const auto& rg : raw_gens) {
    Generator g = rg.gen;
    g.bus = lookup(rg.bus_id, rg.line);
    g.p_max /= base;
    g.p_gen /= base;
    sys.generators.push_back(g);
  }

  validate(sys);
  return sys;
}

BusSystem load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open case file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

std::string serialize_case(const BusSystem& sys) {
  const double base = sys.base_mva;
  std::string out;
  out += "BASEMVA " + fmt9(base) + "\n";
  out += "BUS\n# id type Pd Qd Gs Bs Vset ThetaSet\n";
  for (const auto& bus : sys.buses) {
    out += std::to_string(bus.id) + " " + std::to_string(static_cast<int>(bus.type)) + " " +
           fmt9(bus.p_demand * base) + " " + fmt9(bus.q_demand * base) + " " +
           fmt9(bus.shunt_g * base) + " " + fmt9(bus.shunt_b * base) + " " + fmt9(bus.v_set) +
           " " + fmt9(bus.theta_set / kDegToRad) + "\n";
  }
  out += "BRANCH\n# from to r x b tap shift\n";
  for (const auto& br : sys.branches) {
    out += std::to_string(sys.buses[br.from].id) + " " + std::to_string(sys.buses[br.to].id) +
           " " + fmt9(br.r) + " " + fmt9(br.x) + " " + fmt9(br.b_charging) + " " + fmt9(br.tap) +
           " " + fmt9(br.shift / kDegToRad) + "\n";
  }
  out += "GEN\n# bus Pmax Pg\n";
  for (const auto& g : sys.generators) {
    out += std::to_string(sys.buses[g.bus].id) + " " + fmt9(g.p_max * base) + " " +
           fmt9(g.p_gen * base) + "\n";
  }
  return out;
}

AdmittanceMatrix build_admittance(const BusSystem& sys) {
  using cd = std::complex<double>;
  const auto n = static_cast<Eigen::Index>(sys.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  Pattern pattern = Pattern::Constant(n, n, false);

  for (const auto& br : sys.branches) {
    const cd ys = 1.0 / cd(br.r, br.x);
    const cd charging(0.0, br.b_charging / 2.0);
    const cd ratio = std::polar(br.tap, br.shift);
    const int f = br.from;
    const int t = br.to;
    y(f, f) += (ys + charging) / (br.tap * br.tap);
    y(t, t) += ys + charging;
    y(f, t) -= ys / std::conj(ratio);
    y(t, f) -= ys / ratio;
    pattern(f, f) = pattern(t, t) = pattern(f, t) = pattern(t, f) = true;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& bus = sys.buses[static_cast<std::size_t>(i)];
    if (bus.shunt_g != 0.0 || bus.shunt_b != 0.0) {
      y(i, i) += cd(bus.shunt_g, bus.shunt_b);
      pattern(i, i) = true;
    }
  }
  return {y.real(), y.imag(), std::move(pattern)};
}

AdjacencyMatrix adjacency(const BusSystem& sys) {
  const auto n = static_cast<Eigen::Index>(sys.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (const auto& br : sys.branches) {
    a(br.from, br.to) = 1.0;
    a(br.to, br.from) = 1.0;
  }
  return {std::move(a)};
}

}  // namespace pgnn
