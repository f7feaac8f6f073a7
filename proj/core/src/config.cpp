#include "kfsi/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace kfsi {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  cfg.text_ = text;
  cfg.hash_ = fnv1a(text);
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": key outside any [section]");
    auto [it, fresh] = cfg.sections_[section].emplace(key, Entry{value, lineno, false});
    (void)it;
    if (!fresh)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key [" + section +
                        "] " + key);
  }
  return cfg;
}

const ConfigFile::Entry* ConfigFile::find(const std::string& section,
                                          const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  if (k == s->second.end()) return nullptr;
  k->second.consumed = true;
  return &k->second;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  const Entry* e = find(section, key);
  if (e == nullptr) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ":" + std::to_string(e->line) + ": [" + section + "] " + key +
                      ": expected a number, got '" + e->value + "'");
  }
}

int ConfigFile::get_int(const std::string& section, const std::string& key, int fallback) const {
  const Entry* e = find(section, key);
  if (e == nullptr) return fallback;
  try {
    std::size_t pos = 0;
    const long v = std::stol(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("trailing characters");
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ":" + std::to_string(e->line) + ": [" + section + "] " + key +
                      ": expected an integer, got '" + e->value + "'");
  }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  const Entry* e = find(section, key);
  if (e == nullptr) return fallback;
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  throw ConfigError(origin_ + ":" + std::to_string(e->line) + ": [" + section + "] " + key +
                    ": expected a boolean, got '" + e->value + "'");
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e == nullptr ? fallback : e->value;
}

void ConfigFile::check_all_consumed() const {
  for (const auto& [section, keys] : sections_)
    for (const auto& [key, entry] : keys)
      if (!entry.consumed)
        throw ConfigError(origin_ + ":" + std::to_string(entry.line) + ": unknown key [" +
                          section + "] " + key);
}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_config(ConfigFile::parse_file(path));
}

RunConfig RunConfig::from_config(const ConfigFile& c) {
  RunConfig r;
  r.constants.rho = c.get_double("material", "rho", r.constants.rho);
  r.constants.sigma = c.get_double("material", "sigma", r.constants.sigma);
  r.constants.shell.lame_lambda = c.get_double("material", "lambda", 1.0);
  r.constants.shell.lame_mu = c.get_double("material", "mu", 1.0);
  r.constants.shell.thickness_half = c.get_double("material", "eps_s", 1.0);
  r.constants.shell.shell_density = c.get_double("material", "rho_s", 1.0);

  r.length = c.get_double("geometry", "length", r.length);
  r.height = c.get_double("geometry", "height", r.height);
  r.kappa = c.get_double("geometry", "kappa", r.kappa);
  r.alpha = c.get_double("geometry", "alpha", r.alpha);

  r.nx = c.get_int("mesh", "nx", r.nx);
  r.ny = c.get_int("mesh", "ny", r.ny);
  r.quad_order = c.get_int("mesh", "quad_order", r.quad_order);

  r.shell_modes = c.get_int("shell", "n_modes", r.shell_modes);
  r.shell_basis = c.get_string("shell", "basis", r.shell_basis);
  r.shell_subintervals = c.get_int("shell", "subintervals", r.shell_subintervals);
  r.shell_points = c.get_int("shell", "points", r.shell_points);

  r.fluid_modes = c.get_int("fluid", "n_modes", r.fluid_modes);
  r.noslip_bottom = c.get_bool("fluid", "noslip_bottom", r.noslip_bottom);

  r.grid.dt = c.get_double("time", "dt", r.grid.dt);
  r.grid.steps = c.get_int("time", "steps", r.grid.steps);

  r.picard.tol = c.get_double("picard", "tol", r.picard.tol);
  r.picard.max_iters = c.get_int("picard", "max_iters", r.picard.max_iters);
  r.picard.omega = c.get_double("picard", "omega", r.picard.omega);

  r.eps0 = c.get_string("epsilon", "eps0", r.eps0);
  if (r.eps0 != "auto") {
    try {
      r.eps0_value = std::stod(r.eps0);
    } catch (const std::exception&) {
      throw ConfigError("[epsilon] eps0: expected 'auto' or a number, got '" + r.eps0 + "'");
    }
  }
  r.eps0_cap = c.get_double("epsilon", "cap", r.eps0_cap);
  r.eps_levels = c.get_int("epsilon", "levels", r.eps_levels);
  r.run_eps = c.get_double("epsilon", "run_eps", r.run_eps);

  r.f_profile = c.get_string("forcing", "f_profile", r.f_profile);
  r.f_amplitude = c.get_double("forcing", "f_amplitude", r.f_amplitude);
  r.g_profile = c.get_string("forcing", "g_profile", r.g_profile);
  r.g_amplitude = c.get_double("forcing", "g_amplitude", r.g_amplitude);

  r.eta0_mode = c.get_int("initial", "eta0_mode", r.eta0_mode);
  r.eta0_amplitude = c.get_double("initial", "eta0_amplitude", r.eta0_amplitude);
  r.eta1_mode = c.get_int("initial", "eta1_mode", r.eta1_mode);
  r.eta1_amplitude = c.get_double("initial", "eta1_amplitude", r.eta1_amplitude);
  r.u0_interior_mode = c.get_int("initial", "u0_interior_mode", r.u0_interior_mode);
  r.u0_interior_amplitude = c.get_double("initial", "u0_interior_amplitude", 0.0);

  r.delta_profile = c.get_string("run", "delta", r.delta_profile);
  r.delta_amplitude = c.get_double("run", "delta_amplitude", r.delta_amplitude);
  r.output_every = c.get_int("run", "output_every", r.output_every);
  r.snapshot_every = c.get_int("run", "snapshot_every", r.snapshot_every);

  c.check_all_consumed();
  r.config_hash = c.hash();
  r.config_text = c.text();
  r.validate();
  return r;
}

void RunConfig::validate() const {
  constants.shell.validate();
  if (constants.rho <= 0.0 || constants.sigma <= 0.0)
    throw ConfigError("[material] rho and sigma must be positive");
  if (!(0.0 < alpha && alpha < kappa && kappa < height))
    throw ConfigError("[geometry] need 0 < alpha < kappa < height");
  if (nx < 2 || ny < 2) throw ConfigError("[mesh] nx, ny must be at least 2");
  const double rows = (height - alpha) / (height / ny);
  if (std::abs(rows - std::lround(rows)) > 1e-12)
    throw ConfigError("[geometry] alpha must align the lift interface with a mesh line");
  if (shell_modes < 1) throw ConfigError("[shell] n_modes must be at least 1");
  parse_shell_basis_kind(shell_basis);
  if (grid.dt <= 0.0 || grid.steps < 1) throw ConfigError("[time] dt > 0 and steps >= 1 required");
  if (!(picard.omega > 0.0 && picard.omega <= 1.0))
    throw ConfigError("[picard] omega must lie in (0, 1]");
  if (eps_levels < 1) throw ConfigError("[epsilon] levels must be at least 1");
  if (eta0_mode < 0 || eta0_mode >= shell_modes || eta1_mode < 0 || eta1_mode >= shell_modes)
    throw ConfigError("[initial] mode indices must address a shell mode");
  if (fluid_modes > 0 && u0_interior_mode >= fluid_modes)
    throw ConfigError("[initial] u0_interior_mode must address a fluid mode");
  if (delta_profile != "constant" && delta_profile != "wobble")
    throw ConfigError("[run] delta must be 'constant' or 'wobble'");
}

ForcingSpec make_forcing(const std::string& f_profile, double f_amp, const std::string& g_profile,
                         double g_amp, double length) {
  ForcingSpec s;
  const bool f_zero = (f_profile == "none" || f_amp == 0.0);
  const bool g_zero = (g_profile == "none" || g_amp == 0.0);
  if (f_profile == "none") {
    s.f = [](double, const Vec2&) { return Vec2::Zero().eval(); };
  } else if (f_profile == "pulse_x") {
    s.f = [f_amp, length](double t, const Vec2& y) {
      return Vec2(f_amp * std::sin(M_PI * y[0] / length) * std::sin(2.0 * M_PI * t), 0.0);
    };
  } else if (f_profile == "vortex") {
    s.f = [f_amp, length](double t, const Vec2& y) {
      const double c = std::cos(2.0 * M_PI * t);
      return Vec2(f_amp * c * std::sin(M_PI * y[1]), -f_amp * c * std::sin(M_PI * y[0] / length));
    };
  } else {
    throw ConfigError("[forcing] unknown f_profile '" + f_profile + "'");
  }
  if (g_profile == "none") {
    s.g = [](double, double) { return 0.0; };
  } else if (g_profile == "sine_pulse") {
    s.g = [g_amp, length](double t, double q) {
      return g_amp * std::sin(M_PI * q / length) * std::sin(2.0 * M_PI * t);
    };
  } else if (g_profile == "traveling") {
    s.g = [g_amp, length](double t, double q) {
      return g_amp * std::sin(2.0 * M_PI * (q / length - t));
    };
  } else {
    throw ConfigError("[forcing] unknown g_profile '" + g_profile + "'");
  }
  s.is_zero = f_zero && g_zero;
  return s;
}

ForcingSpec RunConfig::forcing() const {
  return make_forcing(f_profile, f_amplitude, g_profile, g_amplitude, length);
}

InitialData RunConfig::initial_data(const CoupledWorkspace& ws) const {
  InitialData d;
  d.eta0 = VectorX::Zero(ws.n_shell_modes());
  d.eta1 = VectorX::Zero(ws.n_shell_modes());
  d.u0_interior = VectorX::Zero(ws.n_fluid_modes());
  if (eta0_amplitude != 0.0) d.eta0[eta0_mode] = eta0_amplitude;
  if (eta1_amplitude != 0.0) d.eta1[eta1_mode] = eta1_amplitude;
  if (u0_interior_amplitude != 0.0 && ws.n_fluid_modes() > 0)
    d.u0_interior[u0_interior_mode] = u0_interior_amplitude;
  return d;
}

std::shared_ptr<ShellTrajectory> RunConfig::delta_trajectory(const CoupledWorkspace& ws) const {
  InitialData d = initial_data(ws);
  std::vector<VectorX> samples;
  for (int i = 0; i <= grid.steps; ++i) {
    VectorX c = d.eta0;
    if (delta_profile == "wobble" && delta_amplitude != 0.0)
      c[0] += delta_amplitude * std::sin(M_PI * (i * grid.dt) / grid.T());
    samples.push_back(c);
  }
  return std::make_shared<ShellTrajectory>(ws.shell(), grid.dt, std::move(samples));
}

}  // namespace kfsi
