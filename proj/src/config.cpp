#include "ccpde/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace ccpde {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad seed value for " + key + ": '" + v + "'");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n < 2) throw ConfigError("config: mesh.n must be >= 2");
  if (mean_mesh_n < 2) throw ConfigError("config: field.mean_mesh_n must be >= 2");
  if (!(eta_c > 0.0) || !(delta > 0.0))
    throw ConfigError("config: field.eta_c and field.delta must be > 0");
  if (wells_per_side < 1)
    throw ConfigError("config: wells.per_side must be >= 1");
  if (!(wells_lo > 0.0) || !(wells_hi < 1.0) || !(wells_lo <= wells_hi))
    throw ConfigError("config: well grid must satisfy 0 < lo <= hi < 1");
  if (!(epsilon > 0.0)) throw ConfigError("config: wells.epsilon must be > 0");
  if (!(z_min < z_max)) throw ConfigError("config: design.z_min must be < z_max");
  if (eta_p < 0.0) throw ConfigError("config: design.eta_p must be >= 0");
  if (!(mu > 0.0)) throw ConfigError("config: design.mu must be > 0");
  if (!(f_c > 0.0)) throw ConfigError("config: constraint.f_c must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("config: constraint.alpha must lie in (0,1)");
  if (!(box_lo >= 0.0 && box_lo < box_hi && box_hi <= 1.0))
    throw ConfigError("config: constraint box must satisfy 0 <= lo < hi <= 1");
  for (double edge : {box_lo, box_hi}) {
    const double cells = edge * n;
    if (std::abs(cells - std::round(cells)) > 1e-9)
      throw ConfigError(
          "config: constraint box must align with mesh lines "
          "(n divisible by 4 for the reference box)");
  }
  if (num_samples < 2)
    throw ConfigError("config: sampling.num_samples must be >= 2");
  if (num_eigenpairs < 1)
    throw ConfigError("config: taylor.num_eigenpairs must be >= 1");
  if (oversampling < 0 || oversampling > 10)
    throw ConfigError("config: taylor.oversampling must be in [0,10]");
  try {
    schedule.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (engine != "saa" && engine != "taylor2")
    throw ConfigError("config: run.engine must be 'saa' or 'taylor2'");
  if (!(solver_rtol > 0.0))
    throw ConfigError("config: run.solver_rtol must be > 0");
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["mesh.n"] = std::to_string(n);
  kv["field.eta_c"] = fmt_double(eta_c);
  kv["field.delta"] = fmt_double(delta);
  kv["field.mean_seed"] = std::to_string(mean_seed);
  kv["field.mean_mesh_n"] = std::to_string(mean_mesh_n);
  kv["wells.per_side"] = std::to_string(wells_per_side);
  kv["wells.lo"] = fmt_double(wells_lo);
  kv["wells.hi"] = fmt_double(wells_hi);
  kv["wells.epsilon"] = fmt_double(epsilon);
  kv["design.target"] = fmt_double(target);
  kv["design.z_min"] = fmt_double(z_min);
  kv["design.z_max"] = fmt_double(z_max);
  kv["design.eta_p"] = fmt_double(eta_p);
  kv["design.mu"] = fmt_double(mu);
  kv["constraint.f_c"] = fmt_double(f_c);
  kv["constraint.alpha"] = fmt_double(alpha);
  kv["constraint.box_lo"] = fmt_double(box_lo);
  kv["constraint.box_hi"] = fmt_double(box_hi);
  kv["sampling.num_samples"] = std::to_string(num_samples);
  kv["taylor.num_eigenpairs"] = std::to_string(num_eigenpairs);
  kv["taylor.oversampling"] = std::to_string(oversampling);
  kv["schedule.beta0"] = fmt_double(schedule.beta0);
  kv["schedule.gamma0"] = fmt_double(schedule.gamma0);
  kv["schedule.sigma_beta"] = fmt_double(schedule.sigma_beta);
  kv["schedule.sigma_gamma"] = fmt_double(schedule.sigma_gamma);
  kv["schedule.l_max"] = std::to_string(schedule.l_max);
  kv["schedule.eps_out"] = fmt_double(schedule.eps_out);
  kv["schedule.k_max"] = std::to_string(schedule.k_max);
  kv["schedule.eps_in"] = fmt_double(schedule.eps_in);
  kv["run.engine"] = engine;
  kv["run.seed"] = std::to_string(seed);
  kv["run.solver_rtol"] = fmt_double(solver_rtol);

  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
  return out.str();
}

std::string ExperimentConfig::hash() const {
  const std::string text = canonical();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Point> ExperimentConfig::well_centers() const {
  std::vector<Point> centers;
  centers.reserve(static_cast<std::size_t>(wells_per_side) * wells_per_side);
  for (int j = 0; j < wells_per_side; ++j) {
    for (int i = 0; i < wells_per_side; ++i) {
      const double fx =
          wells_per_side == 1
              ? 0.5 * (wells_lo + wells_hi)
              : wells_lo + (wells_hi - wells_lo) * i / (wells_per_side - 1);
      const double fy =
          wells_per_side == 1
              ? 0.5 * (wells_lo + wells_hi)
              : wells_lo + (wells_hi - wells_lo) * j / (wells_per_side - 1);
      centers.push_back({fx, fy});
    }
  }
  return centers;
}

std::vector<double> ExperimentConfig::target_vector() const {
  return std::vector<double>(
      static_cast<std::size_t>(wells_per_side) * wells_per_side, target);
}

DarcyParams ExperimentConfig::darcy_params() const {
  DarcyParams p;
  p.wells = well_centers();
  p.epsilon = epsilon;
  p.mu = mu;
  p.target = target_vector();
  p.z_min = z_min;
  p.z_max = z_max;
  p.eta_p = eta_p;
  p.observation = {box_lo, box_lo, box_hi, box_hi};
  p.f_c = f_c;
  p.alpha = alpha;
  p.solver_rtol = solver_rtol;
  return p;
}

void apply_override(ExperimentConfig& cfg, const std::string& dotted_key,
                    const std::string& value) {
  const std::string key = trim(dotted_key);
  const std::string v = trim(value);
  if (key == "mesh.n")
    cfg.n = static_cast<int>(parse_int(key, v));
  else if (key == "field.eta_c")
    cfg.eta_c = parse_double(key, v);
  else if (key == "field.delta")
    cfg.delta = parse_double(key, v);
  else if (key == "field.mean_seed")
    cfg.mean_seed = parse_u64(key, v);
  else if (key == "field.mean_mesh_n")
    cfg.mean_mesh_n = static_cast<int>(parse_int(key, v));
  else if (key == "wells.per_side")
    cfg.wells_per_side = static_cast<int>(parse_int(key, v));
  else if (key == "wells.lo")
    cfg.wells_lo = parse_double(key, v);
  else if (key == "wells.hi")
    cfg.wells_hi = parse_double(key, v);
  else if (key == "wells.epsilon")
    cfg.epsilon = parse_double(key, v);
  else if (key == "design.target")
    cfg.target = parse_double(key, v);
  else if (key == "design.z_min")
    cfg.z_min = parse_double(key, v);
  else if (key == "design.z_max")
    cfg.z_max = parse_double(key, v);
  else if (key == "design.eta_p")
    cfg.eta_p = parse_double(key, v);
  else if (key == "design.mu")
    cfg.mu = parse_double(key, v);
  else if (key == "constraint.f_c")
    cfg.f_c = parse_double(key, v);
  else if (key == "constraint.alpha")
    cfg.alpha = parse_double(key, v);
  else if (key == "constraint.box_lo")
    cfg.box_lo = parse_double(key, v);
  else if (key == "constraint.box_hi")
    cfg.box_hi = parse_double(key, v);
  else if (key == "sampling.num_samples")
    cfg.num_samples = static_cast<std::size_t>(parse_int(key, v));
  else if (key == "taylor.num_eigenpairs")
    cfg.num_eigenpairs = static_cast<int>(parse_int(key, v));
  else if (key == "taylor.oversampling")
    cfg.oversampling = static_cast<int>(parse_int(key, v));
  else if (key == "schedule.beta0")
    cfg.schedule.beta0 = parse_double(key, v);
  else if (key == "schedule.gamma0")
    cfg.schedule.gamma0 = parse_double(key, v);
  else if (key == "schedule.sigma_beta")
    cfg.schedule.sigma_beta = parse_double(key, v);
  else if (key == "schedule.sigma_gamma")
    cfg.schedule.sigma_gamma = parse_double(key, v);
  else if (key == "schedule.l_max")
    cfg.schedule.l_max = static_cast<int>(parse_int(key, v));
  else if (key == "schedule.eps_out")
    cfg.schedule.eps_out = parse_double(key, v);
  else if (key == "schedule.k_max")
    cfg.schedule.k_max = static_cast<int>(parse_int(key, v));
  else if (key == "schedule.eps_in")
    cfg.schedule.eps_in = parse_double(key, v);
  else if (key == "run.engine")
    cfg.engine = v;
  else if (key == "run.seed")
    cfg.seed = parse_u64(key, v);
  else if (key == "run.solver_rtol")
    cfg.solver_rtol = parse_double(key, v);
  else
    throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section at line " +
                          std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value at line " +
                        std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config: key '" + key + "' outside any section");
    apply_override(cfg, section + "." + key, value);
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace ccpde
