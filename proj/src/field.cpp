#include "freqlab/field.hpp"

#include <boost/algorithm/string.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace freqlab::field {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("field file: bad number for " + what + ": '" + s + "'");
  }
}

} // namespace

std::string to_string(Representation r) { return r == Representation::radial ? "radial" : "grid2d"; }

SolutionField SolutionField::radial(ode::OdeTrajectory profile, int dim) {
  if (profile.size() < 2) throw DomainError("radial field needs at least two samples");
  if (profile.t.front() != 0.0) throw DomainError("radial profile must start at r = 0");
  if (dim < 1) throw DomainError("radial field needs N >= 1");
  SolutionField f;
  f.rep_ = Representation::radial;
  f.dim_ = dim;
  f.q = profile.q;
  f.profile_ = std::move(profile);
  return f;
}

SolutionField SolutionField::grid2d(grid::PolarGrid g, grid::GridFn values) {
  g.validate();
  if (values.rows() != g.M + 1 || values.cols() != g.K) throw DomainError("grid values do not match the grid");
  // The pole is a single point.
  values.row(0).setConstant(values(0, 0));
  SolutionField f;
  f.rep_ = Representation::grid2d;
  f.dim_ = 2;
  f.grid_ = g;
  f.values_ = std::move(values);
  return f;
}

double SolutionField::outer_radius() const { return rep_ == Representation::radial ? profile_.t_end() : grid_.R; }

double SolutionField::radial_value(double r) const {
  if (rep_ != Representation::radial) throw DomainError("not a radial field");
  return profile_.u_at(r);
}

double SolutionField::radial_slope(double r) const {
  if (rep_ != Representation::radial) throw DomainError("not a radial field");
  return profile_.du_at(r);
}

double SolutionField::linf_ball(double r) const {
  double m = 0.0;
  if (rep_ == Representation::radial) {
    for (std::size_t i = 0; i < profile_.size() && profile_.t[i] <= r + 1e-12 * profile_.h; ++i)
      m = std::max(m, std::abs(profile_.u[i]));
    return m;
  }
  const int last = std::min(grid_.M, static_cast<int>(std::floor(r / grid_.dr() + 1e-9)));
  return values_.topRows(last + 1).cwiseAbs().maxCoeff();
}

double SolutionField::linf_sphere(double r) const {
  if (rep_ == Representation::radial) return std::abs(profile_.u_at(r));
  return values_.row(grid_.ring_of(r)).cwiseAbs().maxCoeff();
}

std::vector<double> SolutionField::radial_zeros() const {
  std::vector<double> z;
  if (rep_ != Representation::radial) return z;
  const auto& p = profile_;
  for (const auto& c : p.crossings) z.push_back(c.t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool zero = p.u[i] == 0.0;
    const bool prev_zero = i > 0 && p.u[i - 1] == 0.0;
    const bool next_zero = i + 1 < p.size() && p.u[i + 1] == 0.0;
    if (zero && !(prev_zero && next_zero)) z.push_back(p.t[i]);
    if (i + 1 < p.size() && p.u[i] * p.u[i + 1] < 0.0 && p.crossings_in(i).empty())
      z.push_back(0.5 * (p.t[i] + p.t[i + 1]));
  }
  std::sort(z.begin(), z.end());
  return z;
}

SolutionField sample_grid(const grid::PolarGrid& g, const std::function<double(const Vec&)>& u) {
  grid::GridFn v = grid::make_grid_fn(g);
  for (int i = 0; i <= g.M; ++i)
    for (int j = 0; j < g.K; ++j) v(i, j) = u(g.point(i, j));
  return SolutionField::grid2d(g, v);
}

void write_field(std::ostream& os, const SolutionField& f) {
  os << "# freq-lab field\n";
  os << "representation=" << to_string(f.representation()) << "\n";
  os << "N=" << f.dim() << "\n";
  os << "q=" << g17(f.q) << "\n";
  os << "nonlinearity=" << f.nonlinearity << "\n";
  if (!f.description.empty()) os << "description=" << f.description << "\n";
  if (f.truncation_estimate) os << "truncation_estimate=" << g17(*f.truncation_estimate) << "\n";
  if (f.representation() == Representation::radial) {
    const auto& p = f.profile();
    os << "dims=" << p.size() << "\n";
    os << "h=" << g17(p.h) << "\n";
    os << "sign=" << (p.sign == ode::OdeSign::good ? "good" : "wrong") << "\n";
    os << "crossings=";
    for (std::size_t i = 0; i < p.crossings.size(); ++i)
      os << (i ? ";" : "") << g17(p.crossings[i].t) << ":" << g17(p.crossings[i].du);
    os << "\n";
    os << "r,u,du\n";
    for (std::size_t i = 0; i < p.size(); ++i) os << g17(p.t[i]) << "," << g17(p.u[i]) << "," << g17(p.du[i]) << "\n";
    return;
  }
  const auto& g = f.polar();
  os << "dims=" << g.M << "," << g.K << "\n";
  os << "R=" << g17(g.R) << "\n";
  os << "i,j,r,theta,u\n";
  for (int i = 0; i <= g.M; ++i)
    for (int j = 0; j < g.K; ++j)
      os << i << "," << j << "," << g17(g.r(i)) << "," << g17(g.theta(j)) << "," << g17(f.values()(i, j)) << "\n";
}

SolutionField read_field(std::istream& is) {
  std::map<std::string, std::string> head;
  std::string line;
  std::string columns;
  while (std::getline(is, line)) {
    boost::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      columns = line;
      break;
    }
    head[boost::trim_copy(line.substr(0, eq))] = boost::trim_copy(line.substr(eq + 1));
  }
  auto need = [&](const std::string& k) {
    auto it = head.find(k);
    if (it == head.end()) throw ConfigError("field file: missing header '" + k + "'");
    return it->second;
  };
  auto rows = [&](std::size_t width) {
    std::vector<std::vector<double>> out;
    while (std::getline(is, line)) {
      boost::trim(line);
      if (line.empty()) continue;
      std::vector<std::string> parts;
      boost::split(parts, line, boost::is_any_of(","));
      if (parts.size() != width) throw ConfigError("field file: row has " + std::to_string(parts.size()) + " columns");
      std::vector<double> row;
      for (auto& p : parts) row.push_back(to_double(boost::trim_copy(p), "row"));
      out.push_back(std::move(row));
    }
    return out;
  };

  const std::string rep = need("representation");
  const int dim = static_cast<int>(to_double(need("N"), "N"));
  SolutionField f;
  if (rep == "radial") {
    if (columns != "r,u,du") throw ConfigError("field file: radial columns must be r,u,du");
    ode::OdeTrajectory p;
    p.h = to_double(need("h"), "h");
    p.q = to_double(need("q"), "q");
    p.dim = dim;
    p.sign = head.count("sign") && head["sign"] == "wrong" ? ode::OdeSign::wrong : ode::OdeSign::good;
    for (const auto& r : rows(3)) {
      p.t.push_back(r[0]);
      p.u.push_back(r[1]);
      p.du.push_back(r[2]);
    }
    if (p.size() != static_cast<std::size_t>(to_double(need("dims"), "dims")))
      throw ConfigError("field file: row count does not match dims");
    if (head.count("crossings") && !head["crossings"].empty()) {
      std::vector<std::string> items;
      boost::split(items, head["crossings"], boost::is_any_of(";"));
      for (const auto& it : items) {
        const auto colon = it.find(':');
        if (colon == std::string::npos) throw ConfigError("field file: bad crossing entry");
        p.crossings.push_back({to_double(it.substr(0, colon), "crossing"), to_double(it.substr(colon + 1), "crossing")});
      }
    }
    if (!p.t.empty()) {
      p.a = p.u.front();
      p.b = p.du.front();
    }
    f = SolutionField::radial(std::move(p), dim);
  } else if (rep == "grid2d") {
    if (columns != "i,j,r,theta,u") throw ConfigError("field file: grid columns must be i,j,r,theta,u");
    std::vector<std::string> d;
    boost::split(d, need("dims"), boost::is_any_of(","));
    if (d.size() != 2) throw ConfigError("field file: grid dims must read M,K");
    grid::PolarGrid g;
    g.M = static_cast<int>(to_double(boost::trim_copy(d[0]), "M"));
    g.K = static_cast<int>(to_double(boost::trim_copy(d[1]), "K"));
    g.R = to_double(need("R"), "R");
    g.validate();
    grid::GridFn v = grid::make_grid_fn(g, NAN);
    for (const auto& r : rows(5)) {
      const int i = static_cast<int>(r[0]), j = static_cast<int>(r[1]);
      if (i < 0 || i > g.M || j < 0 || j >= g.K) throw ConfigError("field file: grid index out of range");
      v(i, j) = r[4];
    }
    if (!v.allFinite()) throw ConfigError("field file: grid values missing");
    f = SolutionField::grid2d(g, v);
  } else {
    throw ConfigError("field file: unknown representation '" + rep + "'");
  }
  f.q = to_double(need("q"), "q");
  if (head.count("nonlinearity")) f.nonlinearity = head["nonlinearity"];
  if (head.count("description")) f.description = head["description"];
  if (head.count("truncation_estimate")) f.truncation_estimate = to_double(head["truncation_estimate"], "truncation_estimate");
  return f;
}

} // namespace freqlab::field
