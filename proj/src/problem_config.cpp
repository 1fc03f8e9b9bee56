#include "freqlab/problem_config.hpp"

#include <boost/algorithm/string.hpp>

#include <cmath>
#include <sstream>

namespace freqlab::core {

namespace pt = boost::property_tree;

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(boost::trim_copy(s), &used);
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + what + ": '" + s + "'");
  }
  if (used != boost::trim_copy(s).size()) throw ConfigError("bad number for " + what + ": '" + s + "'");
  return v;
}

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(","));
  std::vector<double> out;
  for (const auto& p : parts)
    if (!boost::trim_copy(p).empty()) out.push_back(parse_number(p, "list"));
  return out;
}

namespace {

std::string entry_key(int i, int j) { return "a" + std::to_string(i + 1) + std::to_string(j + 1); }

std::vector<PowerTerm> parse_terms(const std::string& s) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(","));
  std::vector<PowerTerm> out;
  for (const auto& raw : parts) {
    const std::string p = boost::trim_copy(raw);
    if (p.empty()) continue;
    const auto colon = p.find(':');
    if (colon == std::string::npos) throw ConfigError("power term '" + p + "' must read q_k:c_k");
    out.push_back({parse_number(p.substr(0, colon), "power exponent"), Expression::parse(p.substr(colon + 1))});
  }
  return out;
}

} // namespace

ProblemSpec ProblemConfig::build() const {
  ProblemSpec spec;
  spec.dim = dimension;
  spec.outer_radius = radius;
  if (dimension < 2 || dimension > kMaxDim) throw ConfigError("dimension must be 2 or 3");

  if (coefficient_kind == "identity") {
    spec.coefficients = CoefficientField::identity(dimension);
  } else if (coefficient_kind == "diagonal") {
    if (static_cast<int>(diagonal.size()) != dimension) throw ConfigError("diagonal needs N entries");
    spec.coefficients = CoefficientField::diagonal(diagonal);
  } else if (coefficient_kind == "rotation_perturbed") {
    spec.coefficients = CoefficientField::rotation_perturbed(dimension, rotation_eps);
  } else if (coefficient_kind == "expression") {
    std::vector<Expression> e;
    for (const auto& s : entries) e.push_back(Expression::parse(s));
    spec.coefficients = CoefficientField::from_expressions(dimension, e);
  } else {
    throw ConfigError("unknown coefficient kind '" + coefficient_kind + "'");
  }

  spec.potential = ScalarField(Expression::parse(potential));

  const NonlinearityKind kind = nonlinearity_kind_from_string(nonlinearity_kind);
  NonlinearitySpec nl;
  switch (kind) {
  case NonlinearityKind::none: nl = NonlinearitySpec::none(); break;
  case NonlinearityKind::homogeneous: nl = NonlinearitySpec::homogeneous(q, eps0, kappa1, kappa2); break;
  case NonlinearityKind::sum_of_powers:
    nl = NonlinearitySpec::sum_of_powers(parse_terms(terms), eps0, kappa1, kappa2.value_or(0.0));
    break;
  case NonlinearityKind::tabulated:
    nl = NonlinearitySpec::tabulated(Expression::parse(f), q, eps0, kappa1, kappa2.value_or(0.0));
    break;
  }
  if (!superlinear.empty()) nl = nl.with_superlinear(Expression::parse(superlinear));
  spec.nonlinearity = nl.with_fd_step(1e-5 * radius);
  spec.validate();
  return spec;
}

void ProblemConfig::write(pt::ptree& tree) const {
  tree.put("domain.dimension", dimension);
  tree.put("domain.radius", format_number(radius));
  tree.put("coefficients.kind", coefficient_kind);
  if (coefficient_kind == "diagonal") {
    std::string s;
    for (std::size_t i = 0; i < diagonal.size(); ++i) s += (i ? ", " : "") + format_number(diagonal[i]);
    tree.put("coefficients.diagonal", s);
  } else if (coefficient_kind == "rotation_perturbed") {
    tree.put("coefficients.eps", format_number(rotation_eps));
  } else if (coefficient_kind == "expression") {
    std::size_t k = 0;
    for (int i = 0; i < dimension; ++i)
      for (int j = i; j < dimension; ++j)
        if (k < entries.size()) tree.put("coefficients." + entry_key(i, j), entries[k++]);
  }
  tree.put("potential.V", potential);
  tree.put("nonlinearity.kind", nonlinearity_kind);
  tree.put("nonlinearity.q", format_number(q));
  tree.put("nonlinearity.eps0", format_number(eps0));
  tree.put("nonlinearity.kappa1", format_number(kappa1));
  if (kappa2) tree.put("nonlinearity.kappa2", format_number(*kappa2));
  if (!terms.empty()) tree.put("nonlinearity.terms", terms);
  if (!f.empty()) tree.put("nonlinearity.f", f);
  if (!superlinear.empty()) tree.put("nonlinearity.superlinear", superlinear);
}

ProblemConfig ProblemConfig::read(const pt::ptree& tree) {
  ProblemConfig c;
  auto num = [&](const std::string& path, double def) {
    const auto v = tree.get_optional<std::string>(path);
    return v ? parse_number(*v, path) : def;
  };
  c.dimension = static_cast<int>(num("domain.dimension", 2));
  c.radius = num("domain.radius", 1.0);
  c.coefficient_kind = boost::trim_copy(tree.get<std::string>("coefficients.kind", "identity"));
  if (c.coefficient_kind == "diagonal") c.diagonal = parse_number_list(tree.get<std::string>("coefficients.diagonal", ""));
  if (c.coefficient_kind == "rotation_perturbed") c.rotation_eps = num("coefficients.eps", 0.0);
  if (c.coefficient_kind == "expression") {
    for (int i = 0; i < c.dimension; ++i)
      for (int j = i; j < c.dimension; ++j)
        c.entries.push_back(boost::trim_copy(tree.get<std::string>("coefficients." + entry_key(i, j), i == j ? "1" : "0")));
  }
  c.potential = boost::trim_copy(tree.get<std::string>("potential.V", "0"));
  c.nonlinearity_kind = boost::trim_copy(tree.get<std::string>("nonlinearity.kind", "homogeneous"));
  c.q = num("nonlinearity.q", 1.5);
  c.eps0 = num("nonlinearity.eps0", 1.0);
  c.kappa1 = num("nonlinearity.kappa1", 1.0);
  if (tree.get_optional<std::string>("nonlinearity.kappa2")) c.kappa2 = num("nonlinearity.kappa2", 0.0);
  c.terms = boost::trim_copy(tree.get<std::string>("nonlinearity.terms", ""));
  c.f = boost::trim_copy(tree.get<std::string>("nonlinearity.f", ""));
  c.superlinear = boost::trim_copy(tree.get<std::string>("nonlinearity.superlinear", ""));
  return c;
}

} // namespace freqlab::core
