#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "kfsi/coupled.hpp"

namespace kfsi {

/// Flat-section INI-style configuration with typed keys; unknown keys and
/// malformed values raise ConfigError with line/key diagnostics.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_text(const std::string& text, const std::string& origin = "<inline>");

  bool has(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;

  /// FNV-1a hash of the raw text (provenance).
  std::uint64_t hash() const { return hash_; }
  const std::string& text() const { return text_; }

  /// Every key must be consumed by one of the getters above; leftovers are
  /// reported as configuration errors (typo guard).
  void check_all_consumed() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool consumed = false;
  };
  std::string origin_;
  std::string text_;
  std::uint64_t hash_ = 0;
  std::map<std::string, std::map<std::string, Entry>> sections_;

  const Entry* find(const std::string& section, const std::string& key) const;
};

/// Fully typed run configuration; all physical constants explicit with the
/// unit profile (everything 1) as the default.
struct RunConfig {
  PhysicalConstants constants;

  double length = 2.0, height = 1.0;
  double kappa = 0.8, alpha = 0.125;

  int nx = 8, ny = 8, quad_order = 4;

  int shell_modes = 4;
  std::string shell_basis = "clamped-beam-eigenfunctions";
  int shell_subintervals = 16, shell_points = 8;

  int fluid_modes = 6;
  bool noslip_bottom = false;

  TimeGrid grid{0.02, 12};
  PicardParams picard;

  std::string eps0 = "auto";
  double eps0_value = 0.0;
  double eps0_cap = 0.1;
  int eps_levels = 3;
  double run_eps = 0.004;

  std::string f_profile = "none";
  double f_amplitude = 0.0;
  std::string g_profile = "none";
  double g_amplitude = 0.0;

  // initial data: single-mode amplitudes plus the compatible velocity lift
  int eta0_mode = 0;
  double eta0_amplitude = 0.0;
  int eta1_mode = 0;
  double eta1_amplitude = 0.0;
  int u0_interior_mode = 0;
  double u0_interior_amplitude = 0.0;

  std::string delta_profile = "constant";  // prescribed displacement of decoupled runs
  double delta_amplitude = 0.0;

  int output_every = 1;
  int snapshot_every = 0;  // 0: no field snapshots

  std::uint64_t config_hash = 0;
  std::string config_text;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_config(const ConfigFile& file);
  void validate() const;

  ForcingSpec forcing() const;
  InitialData initial_data(const CoupledWorkspace& ws) const;
  std::shared_ptr<ShellTrajectory> delta_trajectory(const CoupledWorkspace& ws) const;
};

/// Named closed-form forcing profiles.
ForcingSpec make_forcing(const std::string& f_profile, double f_amp, const std::string& g_profile,
                         double g_amp, double length);

std::uint64_t fnv1a(const std::string& text);

}  // namespace kfsi
