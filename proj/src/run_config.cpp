#include "freqlab/run.hpp"

#include "freqlab/hash.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace freqlab::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> k = {
      {"run", {"command", "output", "seed", "field", "problem", "jobs"}},
      {"grid", {"h", "M", "K", "stride", "damping", "tol", "max_iters"}},
      {"tolerances",
       {"h_prime", "pohozaev", "log_derivative", "defect_match", "rellich", "kinematic", "cs_gap", "z_nu", "tol_d",
        "residual_factor", "residual_floor", "residual_abs"}},
      {"options",
       {"mode", "a", "t0", "t_end", "points", "boundary", "exact", "glue_radius", "levels", "t_lo", "t_hi", "nx", "nt"}},
      {"domain", {"dimension", "radius"}},
      {"coefficients", {"kind", "diagonal", "eps", "a11", "a12", "a13", "a22", "a23", "a33"}},
      {"potential", {"V"}},
      {"nonlinearity", {"kind", "q", "eps0", "kappa1", "kappa2", "terms", "f", "superlinear"}},
  };
  return k;
}

double to_double(const std::string& raw, const std::string& key) {
  const std::string s = boost::trim_copy(raw);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("bad number for " + key + ": '" + raw + "'");
  return v;
}

long long to_int(const std::string& raw, const std::string& key) {
  const std::string s = boost::trim_copy(raw);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("bad integer for " + key + ": '" + raw + "'");
  return v;
}

struct Reader {
  const pt::ptree& tree;
  template <class T>
  void num(const std::string& path, T& out) const {
    if (auto v = tree.get_optional<std::string>(path)) {
      if constexpr (std::is_floating_point_v<T>)
        out = to_double(*v, path);
      else
        out = static_cast<T>(to_int(*v, path));
    }
  }
  void str(const std::string& path, std::string& out) const {
    if (auto v = tree.get_optional<std::string>(path)) out = boost::trim_copy(*v);
  }
};

std::string num(double v) { return core::format_number(v); }

} // namespace

freq::Tolerances ToleranceConfig::identities() const {
  freq::Tolerances t;
  t.h_prime = h_prime;
  t.pohozaev = pohozaev;
  t.log_derivative = log_derivative;
  t.defect_match = defect_match;
  t.rellich = rellich;
  t.kinematic = kinematic;
  t.cs_gap = cs_gap;
  t.z_nu = z_nu;
  return t;
}

audit::AuditControls ToleranceConfig::audit() const {
  audit::AuditControls c;
  c.tol_d = tol_d;
  c.residual_factor = residual_factor;
  c.residual_floor = residual_floor;
  c.residual_abs = residual_abs;
  return c;
}

void RunConfig::validate() const {
  static const std::set<std::string> commands = {"ode", "solve", "frequency", "audit", "check"};
  if (!commands.count(command)) throw ConfigError("unknown command '" + command + "'");
  if (output.empty()) throw ConfigError("empty output directory");
  if (jobs < 1) throw ConfigError("jobs must be positive");
  if (!(grid.h > 0) || grid.M <= 0 || grid.K <= 0 || grid.stride < 0 || !(grid.damping >= 0 && grid.damping < 1) ||
      !(grid.tol > 0) || grid.max_iters <= 0)
    throw ConfigError("grid controls must be positive (damping in [0,1))");
  const auto& t = tolerances;
  for (double v : {t.h_prime, t.pohozaev, t.log_derivative, t.kinematic})
    if (v < 0) throw ConfigError("tolerances must not be negative");
  for (double v : {t.defect_match, t.rellich, t.cs_gap, t.z_nu, t.tol_d, t.residual_factor, t.residual_floor, t.residual_abs})
    if (!(v > 0)) throw ConfigError("tolerances must be positive");
  const auto& o = options;
  if (!(o.t_end > 0) || o.points <= 0 || o.nx <= 0 || o.nt <= 0 || !(o.t_hi > o.t_lo) || !(o.glue_radius > 0))
    throw ConfigError("option values must be positive");
  if ((command == "frequency" || command == "audit") && field.empty()) throw ConfigError(command + " needs a field file");
}

std::string RunConfig::serialize() const {
  pt::ptree tree;
  tree.put("run.command", command);
  tree.put("run.output", output);
  tree.put("run.seed", seed);
  if (!field.empty()) tree.put("run.field", field);
  if (!problem_file.empty()) tree.put("run.problem", problem_file);
  tree.put("run.jobs", jobs);
  tree.put("grid.h", num(grid.h));
  tree.put("grid.M", grid.M);
  tree.put("grid.K", grid.K);
  tree.put("grid.stride", grid.stride);
  tree.put("grid.damping", num(grid.damping));
  tree.put("grid.tol", num(grid.tol));
  tree.put("grid.max_iters", grid.max_iters);
  const auto& t = tolerances;
  for (auto [k, v] : {std::pair{"h_prime", t.h_prime}, {"pohozaev", t.pohozaev}, {"log_derivative", t.log_derivative},
                      {"defect_match", t.defect_match}, {"rellich", t.rellich}, {"kinematic", t.kinematic},
                      {"cs_gap", t.cs_gap}, {"z_nu", t.z_nu}, {"tol_d", t.tol_d}, {"residual_factor", t.residual_factor},
                      {"residual_floor", t.residual_floor}, {"residual_abs", t.residual_abs}})
    tree.put(std::string("tolerances.") + k, num(v));
  const auto& o = options;
  if (!o.mode.empty()) tree.put("options.mode", o.mode);
  tree.put("options.a", num(o.a));
  tree.put("options.t0", num(o.t0));
  tree.put("options.t_end", num(o.t_end));
  tree.put("options.points", o.points);
  tree.put("options.boundary", o.boundary);
  if (!o.exact.empty()) tree.put("options.exact", o.exact);
  tree.put("options.glue_radius", num(o.glue_radius));
  tree.put("options.levels", o.levels);
  tree.put("options.t_lo", num(o.t_lo));
  tree.put("options.t_hi", num(o.t_hi));
  tree.put("options.nx", o.nx);
  tree.put("options.nt", o.nt);
  problem.write(tree);
  std::ostringstream os;
  pt::write_ini(os, tree);
  return os.str();
}

RunConfig RunConfig::parse(const std::string& ini, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream is(ini);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& kv : body)
      if (!it->second.count(kv.first)) throw ConfigError("unknown key '" + kv.first + "' in [" + section + "]");
  }
  RunConfig c;
  const Reader r{tree};
  r.str("run.command", c.command);
  r.str("run.output", c.output);
  r.num("run.seed", c.seed);
  r.str("run.field", c.field);
  r.str("run.problem", c.problem_file);
  r.num("run.jobs", c.jobs);
  r.num("grid.h", c.grid.h);
  r.num("grid.M", c.grid.M);
  r.num("grid.K", c.grid.K);
  r.num("grid.stride", c.grid.stride);
  r.num("grid.damping", c.grid.damping);
  r.num("grid.tol", c.grid.tol);
  r.num("grid.max_iters", c.grid.max_iters);
  auto& t = c.tolerances;
  r.num("tolerances.h_prime", t.h_prime);
  r.num("tolerances.pohozaev", t.pohozaev);
  r.num("tolerances.log_derivative", t.log_derivative);
  r.num("tolerances.defect_match", t.defect_match);
  r.num("tolerances.rellich", t.rellich);
  r.num("tolerances.kinematic", t.kinematic);
  r.num("tolerances.cs_gap", t.cs_gap);
  r.num("tolerances.z_nu", t.z_nu);
  r.num("tolerances.tol_d", t.tol_d);
  r.num("tolerances.residual_factor", t.residual_factor);
  r.num("tolerances.residual_floor", t.residual_floor);
  r.num("tolerances.residual_abs", t.residual_abs);
  auto& o = c.options;
  r.str("options.mode", o.mode);
  r.num("options.a", o.a);
  r.num("options.t0", o.t0);
  r.num("options.t_end", o.t_end);
  r.num("options.points", o.points);
  r.str("options.boundary", o.boundary);
  r.str("options.exact", o.exact);
  r.num("options.glue_radius", o.glue_radius);
  r.str("options.levels", o.levels);
  r.num("options.t_lo", o.t_lo);
  r.num("options.t_hi", o.t_hi);
  r.num("options.nx", o.nx);
  r.num("options.nt", o.nt);
  if (!c.problem_file.empty()) {
    std::filesystem::path p = c.problem_file;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot read problem file " + p.string());
    pt::ptree pt_tree;
    try {
      pt::read_ini(in, pt_tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(std::string("problem file: ") + e.message());
    }
    c.problem = core::ProblemConfig::read(pt_tree);
  } else {
    c.problem = core::ProblemConfig::read(tree);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), file.parent_path());
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j;
  j["schema"] = "freq-lab/run-record/1";
  j["schema_version"] = kSchemaVersion;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["config"] = config_snapshot;
  j["started"] = started;
  j["finished"] = finished;
  j["exit_code"] = exit_code;
  j["summary"] = summary;
  j["content_hash"] = content_hash;
  j["manifest"] = nlohmann::json::array();
  for (const auto& m : manifest) j["manifest"].push_back({{"file", m.file}, {"bytes", m.bytes}, {"fnv1a", m.fnv1a}});
  return j;
}

OutputDir::OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec || !std::filesystem::is_directory(dir_)) throw ConfigError("cannot create output directory " + dir_.string());
}

void OutputDir::write(const std::string& name, const std::string& content) {
  const auto p = dir_ / name;
  std::ofstream os(p, std::ios::binary);
  os << content;
  os.close();
  if (!os) throw ConfigError("cannot write " + p.string());
  for (auto& m : manifest_)
    if (m.file == name) {
      m = {name, content.size(), hex64(fnv1a64(content))};
      return;
    }
  manifest_.push_back({name, content.size(), hex64(fnv1a64(content))});
}

void OutputDir::write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

std::filesystem::path output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("FREQ_LAB_OUT"); env && *env) return env;
  return cfg.output;
}

nlohmann::json sorted(const nlohmann::ordered_json& j) { return nlohmann::json::parse(j.dump()); }

} // namespace freqlab::cli
