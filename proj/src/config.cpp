#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "smhd/error.hpp"
#include "smhd/montecarlo.hpp"

namespace smhd {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
  if (l == "0" || l == "false" || l == "no" || l == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F conv) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError(key + ": empty list entry");
    out.push_back(static_cast<T>(conv(key, item)));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

int to_small_int(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < -1000000000LL || x > 1000000000LL) throw ConfigError(key + ": value out of range");
  return static_cast<int>(x);
}

struct Setting {
  std::string help;
  std::function<void(RunConfig&, const std::string&, const std::string&)> apply;
};

const std::map<std::string, Setting>& settings() {
  using C = RunConfig;
  using S = std::string;
  static const std::map<std::string, Setting> table = {
      {"mu", {"shear viscosity", [](C& c, const S& k, const S& v) { c.params.mu = to_double(k, v); }}},
      {"lambda", {"bulk viscosity", [](C& c, const S& k, const S& v) { c.params.lambda = to_double(k, v); }}},
      {"nu", {"magnetic diffusivity", [](C& c, const S& k, const S& v) { c.params.nu = to_double(k, v); }}},
      {"a", {"pressure constant", [](C& c, const S& k, const S& v) { c.params.a = to_double(k, v); }}},
      {"gamma", {"adiabatic exponent (> 3/2)", [](C& c, const S& k, const S& v) { c.params.gamma = to_double(k, v); }}},
      {"beta", {"artificial pressure exponent (> max{4, gamma})", [](C& c, const S& k, const S& v) { c.params.beta = to_double(k, v); }}},
      {"delta", {"artificial pressure coefficient", [](C& c, const S& k, const S& v) { c.params.delta = to_double(k, v); }}},
      {"eps", {"artificial viscosity in the continuity equation", [](C& c, const S& k, const S& v) { c.params.eps = to_double(k, v); }}},
      {"N_cutoff", {"cut-off level of theta_N (W^{1,inf} norms)", [](C& c, const S& k, const S& v) { c.params.N_cutoff = to_double(k, v); }}},
      {"N_stop", {"stopping level (L2 norms)", [](C& c, const S& k, const S& v) { c.params.N_stop = to_double(k, v); }}},
      {"allow_low_gamma", {"permit gamma <= 3/2", [](C& c, const S& k, const S& v) { c.params.allow_low_gamma = to_bool(k, v); }}},
      {"dim", {"spatial dimension (2 or 3)", [](C& c, const S& k, const S& v) { c.domain.dim = to_small_int(k, v); }}},
      {"length", {"box edge length on every axis", [](C& c, const S& k, const S& v) { c.domain.lengths.fill(to_double(k, v)); }}},
      {"Lx", {"box length along x", [](C& c, const S& k, const S& v) { c.domain.lengths[0] = to_double(k, v); }}},
      {"Ly", {"box length along y", [](C& c, const S& k, const S& v) { c.domain.lengths[1] = to_double(k, v); }}},
      {"Lz", {"box length along z", [](C& c, const S& k, const S& v) { c.domain.lengths[2] = to_double(k, v); }}},
      {"grid", {"quadrature cells per axis", [](C& c, const S& k, const S& v) { c.domain.grid_pts.fill(to_small_int(k, v)); }}},
      {"n_per_axis", {"Galerkin modes per axis", [](C& c, const S& k, const S& v) { c.n_per_axis = to_small_int(k, v); }}},
      {"dt", {"time step", [](C& c, const S& k, const S& v) { c.dt = to_double(k, v); }}},
      {"T", {"final time", [](C& c, const S& k, const S& v) { c.T = to_double(k, v); }}},
      {"paths", {"ensemble size", [](C& c, const S& k, const S& v) { c.ensemble_size = to_small_int(k, v); }}},
      {"seed", {"master seed", [](C& c, const S& k, const S& v) { c.master_seed = to_u64(k, v); }}},
      {"threads", {"worker threads (0 = hardware)", [](C& c, const S& k, const S& v) { c.threads = to_small_int(k, v); }}},
      {"K", {"noise modes per channel", [](C& c, const S& k, const S& v) { c.noise.K = to_small_int(k, v); }}},
      {"noise_amplitude", {"noise amplitude prefactor", [](C& c, const S& k, const S& v) { c.noise.amplitude = to_double(k, v); }}},
      {"noise_decay", {"decay exponent p of a_k = amplitude k^-p", [](C& c, const S& k, const S& v) { c.noise.decay = to_double(k, v); }}},
      {"f2_scale", {"multiplier of the momentum-linear noise part", [](C& c, const S& k, const S& v) { c.noise.f2_scale = to_double(k, v); }}},
      {"g_scale", {"multiplier of the magnetic noise", [](C& c, const S& k, const S& v) { c.noise.g_scale = to_double(k, v); }}},
      {"rho_mean", {"initial density mean", [](C& c, const S& k, const S& v) { c.init.rho_mean = to_double(k, v); }}},
      {"rho_amp", {"initial density modulation", [](C& c, const S& k, const S& v) { c.init.rho_amp = to_double(k, v); }}},
      {"u_amp", {"initial velocity amplitude", [](C& c, const S& k, const S& v) { c.init.u_amp = to_double(k, v); }}},
      {"B_amp", {"initial magnetic amplitude", [](C& c, const S& k, const S& v) { c.init.B_amp = to_double(k, v); }}},
      {"solenoidal_B0", {"project the initial field onto ker D", [](C& c, const S& k, const S& v) { c.init.solenoidal_B = to_bool(k, v); }}},
      {"solenoidal", {"project B onto ker D after every step", [](C& c, const S& k, const S& v) { c.stepper.solenoidal = to_bool(k, v); }}},
      {"cutoff", {"apply the cut-off theta_N", [](C& c, const S& k, const S& v) { c.stepper.use_cutoff = to_bool(k, v); }}},
      {"c_cfl", {"transport CFL number", [](C& c, const S& k, const S& v) { c.stepper.transport.c_cfl = to_double(k, v); }}},
      {"moment_theta", {"exponent of the recorded density moment", [](C& c, const S& k, const S& v) { c.moment_theta = to_double(k, v); }}},
      {"n_levels", {"n-study schedule (comma list)", [](C& c, const S& k, const S& v) { c.n_levels = to_list<int>(k, v, to_small_int); }}},
      {"eps_levels", {"eps-study schedule (comma list)", [](C& c, const S& k, const S& v) { c.eps_levels = to_list<double>(k, v, to_double); }}},
      {"delta_levels", {"delta-study schedule (comma list)", [](C& c, const S& k, const S& v) { c.delta_levels = to_list<double>(k, v, to_double); }}},
      {"out", {"output directory", [](C& c, const S&, const S& v) { c.out_dir = v; }}},
  };
  return table;
}

template <class T>
void check_monotone(const std::vector<T>& v, const char* name) {
  if (v.size() < 3) throw ConfigError(std::string(name) + " needs at least 3 levels");
  const bool up = v[1] > v[0];
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] == v[i - 1] || (v[i] > v[i - 1]) != up)
      throw ConfigError(std::string(name) + " must be strictly monotone");
}

}  // namespace

void RunConfig::validate() const {
  params.validate();
  domain.validate();
  if (n_per_axis < 1) throw ConfigError("n_per_axis must be at least 1");
  for (int a = 0; a < domain.dim; ++a)
    if (n_per_axis * kOversampling > domain.grid_pts[a])
      throw ConfigError("grid must have at least 2*n_per_axis cells per axis");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(T >= dt)) throw ConfigError("T must be at least dt");
  if (ensemble_size < 1) throw ConfigError("ensemble size must be at least 1");
  if (noise.K < 1) throw ConfigError("K must be at least 1");
  if (!(noise.amplitude >= 0.0)) throw ConfigError("noise amplitude must be nonnegative");
  if (!(noise.decay > 0.5)) throw ConfigError("noise decay must exceed 1/2 (summable amplitudes)");
  if (!(stepper.transport.c_cfl > 0.0 && stepper.transport.c_cfl <= 1.0))
    throw ConfigError("c_cfl must lie in (0, 1]");
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  validate_integrability_theta(moment_theta, params.gamma);
  check_monotone(n_levels, "n_levels");
  for (int n : n_levels) {
    if (n < 1) throw ConfigError("n_levels entries must be positive");
    for (int a = 0; a < domain.dim; ++a)
      if (n * kOversampling > domain.grid_pts[a])
        throw ConfigError("n_levels exceed the grid resolution");
  }
  check_monotone(eps_levels, "eps_levels");
  check_monotone(delta_levels, "delta_levels");
  for (double e : eps_levels)
    if (!(e >= 0.0)) throw ConfigError("eps_levels must be nonnegative");
  for (double e : delta_levels)
    if (!(e >= 0.0)) throw ConfigError("delta_levels must be nonnegative");
}

PathConfig RunConfig::path_config() const {
  PathConfig p;
  p.params = params;
  p.noise = noise;
  p.domain = domain;
  p.n_per_axis = n_per_axis;
  p.dt = dt;
  p.T = T;
  p.init = init;
  p.stepper = stepper;
  p.moment_theta = moment_theta;
  return p;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& tab = settings();
  const auto it = tab.find(key);
  if (it == tab.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second.apply(cfg, key, trim(value));
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in, std::move(base));
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, s] : settings()) out.emplace_back(k, s.help);
  return out;
}

std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t index) {
  return master_seed ^ index;
}

}  // namespace smhd
