#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "iontweez/equilibrium.hpp"
#include "iontweez/errors.hpp"
#include "iontweez/noise.hpp"
#include "iontweez/optimize.hpp"
#include "iontweez/units.hpp"

namespace iontweez {

/// Parsed run configuration. SI units (Hz, meters, amu) as written in the
/// file; conversion to dimensionless values happens in the pipeline.
struct Config {
  struct Trap {
    Vec3 a = Vec3::Zero();
    Vec3 q = Vec3::Zero();
    double omega_rf_hz = 0.0;  // Omega_rf / 2 pi
    int n_ions = 1;
    double ion_mass_amu = 0.0;
    int charge = 1;
  } trap;

  struct Ions {
    std::uint64_t seed = 7;
    double jitter = 0.1;  // in units of d
    bool full_rf = false;
    std::string cooling_profile = "linear";
    double cooling_periods = 400.0;
    int steps_per_period = 256;
    int integrator_order = 4;
  } ions;

  struct Tweezers {
    std::vector<double> nu_hz;       // one per ion after resolution
    std::vector<double> offsets_um;  // 2 per ion (y, z) after resolution
    double waist_um = 1.0;
    double max_nu_hz = 1.0e6;
    double max_offset_um = 0.25;
  } tweezers;

  struct Drive {
    Vec3 k = Vec3::UnitY();
    double wavelength_nm = 411.0;
    double mu_hz = 0.0;  // 0 means unset
    bool doppler = false;
  } drive;

  struct Target {
    std::string kind = "spin_ladder";
    double j1 = 1.0;
    double j2 = -0.5;
    double xi = 1.0;
    std::string path;
  } target;

  struct Optimize {
    std::string backend = "pseudo";
    int budget = 30000;
    int restarts = 4;
    double t_initial = 0.3;
    double t_final = 1e-4;
    double step_fraction = 0.05;
    double mu_min_hz = 0.3e6;
    double mu_max_hz = 1.0e6;
    double gap_hz = 10e3;
    double penalty = 1e3;
    bool symmetry = false;
    bool rescale = true;
    bool offsets = false;
    std::string offset_mode = "exact";
    double threshold = 1.2;
    int floquet_steps = 1024;
    std::uint64_t seed = 1;
  } optimize;

  struct Noise {
    std::vector<double> delta_p = {0.0, 0.0025, 0.005, 0.01, 0.02};
    int repeat = 10000;
    std::string mode = "power";
    std::uint64_t seed = 3;
  } noise;

  /// Every key with its resolved value, for manifests.
  std::map<std::string, std::string> resolved;
};

namespace detail {

inline std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(" \t");
    const std::string token = item.substr(first, last - first + 1);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw ConfigError("config: " + key + ": not a number: '" + token + "'");
    }
  }
  return out;
}

inline Vec3 parse_vec3(const std::string& text, const std::string& key) {
  const std::vector<double> v = parse_list(text, key);
  if (v.size() != 3) throw ConfigError("config: " + key + ": expected three values");
  return {v[0], v[1], v[2]};
}

inline bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config: " + key + ": expected a boolean");
}

class SectionReader {
 public:
  SectionReader(const boost::property_tree::ptree* tree, std::string section,
                std::map<std::string, std::string>& resolved)
      : tree_(tree), section_(std::move(section)), resolved_(resolved) {}

  bool has(const std::string& key) const { return tree_ && tree_->count(key) > 0; }

  std::string raw(const std::string& key) const { return tree_->get<std::string>(key); }

  double number(const std::string& key, double fallback, bool required = false) {
    double v = fallback;
    if (has(key)) {
      const std::vector<double> list = parse_list(raw(key), name(key));
      if (list.size() != 1) throw ConfigError("config: " + name(key) + ": expected one value");
      v = list.front();
    } else if (required) {
      throw ConfigError("config: missing required key " + name(key));
    }
    record(key, v);
    return v;
  }

  int integer(const std::string& key, int fallback, bool required = false) {
    const double v = number(key, fallback, required);
    if (v != static_cast<double>(static_cast<long long>(v))) {
      throw ConfigError("config: " + name(key) + ": expected an integer");
    }
    return static_cast<int>(v);
  }

  std::string text(const std::string& key, const std::string& fallback,
                    const std::set<std::string>& allowed = {}) {
    const std::string v = has(key) ? raw(key) : fallback;
    if (!allowed.empty() && !allowed.count(v)) {
      throw ConfigError("config: " + name(key) + ": unsupported value '" + v + "'");
    }
    resolved_[name(key)] = v;
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    const bool v = has(key) ? parse_bool(raw(key), name(key)) : fallback;
    resolved_[name(key)] = v ? "true" : "false";
    return v;
  }

  std::vector<double> list(const std::string& key, const std::vector<double>& fallback) {
    const std::vector<double> v = has(key) ? parse_list(raw(key), name(key)) : fallback;
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    resolved_[name(key)] = os.str();
    return v;
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback, bool required = false) {
    Vec3 v = fallback;
    if (has(key)) {
      v = parse_vec3(raw(key), name(key));
    } else if (required) {
      throw ConfigError("config: missing required key " + name(key));
    }
    std::ostringstream os;
    os.precision(17);
    os << v(0) << "," << v(1) << "," << v(2);
    resolved_[name(key)] = os.str();
    return v;
  }

 private:
  std::string name(const std::string& key) const { return section_ + "." + key; }

  void record(const std::string& key, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    resolved_[name(key)] = os.str();
  }

  const boost::property_tree::ptree* tree_;
  std::string section_;
  std::map<std::string, std::string>& resolved_;
};

inline void require_positive(double v, const std::string& key) {
  if (!(v > 0.0)) throw ConfigError("config: " + key + " must be positive");
}

}  // namespace detail

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"trap", {"a", "q", "omega_rf_hz", "n_ions", "ion_mass_amu", "charge"}},
      {"ions",
       {"seed", "jitter", "full_rf", "cooling_profile", "cooling_periods", "steps_per_period",
        "integrator_order"}},
      {"tweezers", {"nu_hz", "offsets_um", "waist_um", "max_nu_hz", "max_offset_um"}},
      {"drive", {"k", "wavelength_nm", "mu_hz", "doppler"}},
      {"target", {"kind", "j1", "j2", "xi", "path"}},
      {"optimize",
       {"backend", "budget", "restarts", "t_initial", "t_final", "step_fraction", "mu_min_hz",
        "mu_max_hz", "gap_hz", "penalty", "symmetry", "rescale", "offsets", "offset_mode",
        "threshold", "floquet_steps", "seed"}},
      {"noise", {"delta_p", "repeat", "mode", "seed"}},
  };
  return schema;
}

/// Parse and validate an INI configuration. Unknown sections or keys are errors.
inline Config parse_config_stream(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  const auto& schema = config_schema();
  for (const auto& [section, body] : tree) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("config: unknown section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("config: key outside a section: " + section);
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("config: unknown key " + section + "." + key);
    }
  }
  if (!tree.count("trap")) throw ConfigError("config: missing required section [trap]");

  Config c;
  auto section = [&](const char* name) {
    const auto found = tree.find(name);
    return detail::SectionReader(found == tree.not_found() ? nullptr : &found->second, name,
                                 c.resolved);
  };

  auto trap = section("trap");
  c.trap.a = trap.vec3("a", Vec3::Zero(), true);
  c.trap.q = trap.vec3("q", Vec3::Zero(), true);
  c.trap.omega_rf_hz = trap.number("omega_rf_hz", 0.0, true);
  c.trap.n_ions = trap.integer("n_ions", 1, true);
  c.trap.ion_mass_amu = trap.number("ion_mass_amu", 0.0, true);
  c.trap.charge = trap.integer("charge", 1);
  detail::require_positive(c.trap.omega_rf_hz, "trap.omega_rf_hz");
  detail::require_positive(c.trap.ion_mass_amu, "trap.ion_mass_amu");
  if (c.trap.n_ions < 1) throw ConfigError("config: trap.n_ions must be at least 1");
  if (c.trap.charge == 0) throw ConfigError("config: trap.charge must be nonzero");
  const int n = c.trap.n_ions;

  auto ions = section("ions");
  c.ions.seed = static_cast<std::uint64_t>(ions.integer("seed", 7));
  c.ions.jitter = ions.number("jitter", 0.1);
  c.ions.full_rf = ions.flag("full_rf", false);
  c.ions.cooling_profile = ions.text("cooling_profile", "linear", {"linear", "cosine"});
  c.ions.cooling_periods = ions.number("cooling_periods", 400.0);
  c.ions.steps_per_period = ions.integer("steps_per_period", 256);
  c.ions.integrator_order = ions.integer("integrator_order", 4);
  detail::require_positive(c.ions.cooling_periods, "ions.cooling_periods");
  if (c.ions.jitter < 0.0) throw ConfigError("config: ions.jitter must be non-negative");
  if (c.ions.steps_per_period < 2) throw ConfigError("config: ions.steps_per_period < 2");

  auto tw = section("tweezers");
  c.tweezers.max_nu_hz = tw.number("max_nu_hz", 1.0e6);
  c.tweezers.max_offset_um = tw.number("max_offset_um", 0.25);
  c.tweezers.waist_um = tw.number("waist_um", 1.0);
  detail::require_positive(c.tweezers.max_nu_hz, "tweezers.max_nu_hz");
  detail::require_positive(c.tweezers.waist_um, "tweezers.waist_um");
  if (c.tweezers.max_offset_um < 0.0) {
    throw ConfigError("config: tweezers.max_offset_um must be non-negative");
  }
  std::vector<double> nu = tw.list("nu_hz", {0.0});
  if (nu.size() == 1) nu.assign(n, nu.front());
  if (static_cast<int>(nu.size()) != n) {
    throw ConfigError("config: tweezers.nu_hz needs one value or one per ion");
  }
  for (int i = 0; i < n; ++i) {
    if (nu[i] < 0.0 || nu[i] > c.tweezers.max_nu_hz) {
      throw ConfigError("config: tweezers.nu_hz of ion " + std::to_string(i) +
                        " outside [0, max_nu_hz]");
    }
  }
  c.tweezers.nu_hz = nu;
  std::vector<double> off = tw.list("offsets_um", {});
  if (off.empty()) off.assign(2 * n, 0.0);
  if (static_cast<int>(off.size()) != 2 * n) {
    throw ConfigError("config: tweezers.offsets_um needs two values (y, z) per ion");
  }
  for (int k = 0; k < 2 * n; ++k) {
    if (std::abs(off[k]) > c.tweezers.max_offset_um) {
      throw ConfigError("config: tweezers.offsets_um of ion " + std::to_string(k / 2) +
                        " exceeds max_offset_um");
    }
  }
  c.tweezers.offsets_um = off;

  auto drive = section("drive");
  c.drive.k = drive.vec3("k", Vec3::UnitY());
  c.drive.wavelength_nm = drive.number("wavelength_nm", 411.0);
  c.drive.mu_hz = drive.number("mu_hz", 0.0);
  c.drive.doppler = drive.flag("doppler", false);
  if (!(c.drive.k.norm() > 0.0)) throw ConfigError("config: drive.k must be nonzero");
  detail::require_positive(c.drive.wavelength_nm, "drive.wavelength_nm");
  if (c.drive.mu_hz < 0.0) throw ConfigError("config: drive.mu_hz must be non-negative");

  auto target = section("target");
  c.target.kind = target.text("kind", "spin_ladder", {"spin_ladder", "power_law", "file"});
  c.target.j1 = target.number("j1", 1.0);
  c.target.j2 = target.number("j2", -0.5);
  c.target.xi = target.number("xi", 1.0);
  c.target.path = target.text("path", "");
  if (c.target.kind == "file" && c.target.path.empty()) {
    throw ConfigError("config: target.path required for kind = file");
  }

  auto opt = section("optimize");
  c.optimize.backend = opt.text("backend", "pseudo", {"pseudo", "floquet"});
  c.optimize.budget = opt.integer("budget", 30000);
  c.optimize.restarts = opt.integer("restarts", 4);
  c.optimize.t_initial = opt.number("t_initial", 0.3);
  c.optimize.t_final = opt.number("t_final", 1e-4);
  c.optimize.step_fraction = opt.number("step_fraction", 0.05);
  c.optimize.mu_min_hz = opt.number("mu_min_hz", 0.3e6);
  c.optimize.mu_max_hz = opt.number("mu_max_hz", 1.0e6);
  c.optimize.gap_hz = opt.number("gap_hz", 10e3);
  c.optimize.penalty = opt.number("penalty", 1e3);
  c.optimize.symmetry = opt.flag("symmetry", false);
  c.optimize.rescale = opt.flag("rescale", true);
  c.optimize.offsets = opt.flag("offsets", false);
  c.optimize.offset_mode = opt.text("offset_mode", "exact", {"exact", "two_step"});
  c.optimize.threshold = opt.number("threshold", 1.2);
  c.optimize.floquet_steps = opt.integer("floquet_steps", 1024);
  c.optimize.seed = static_cast<std::uint64_t>(opt.integer("seed", 1));
  if (c.optimize.budget < 1 || c.optimize.restarts < 1) {
    throw ConfigError("config: optimize.budget and optimize.restarts must be positive");
  }
  detail::require_positive(c.optimize.t_initial, "optimize.t_initial");
  detail::require_positive(c.optimize.t_final, "optimize.t_final");
  detail::require_positive(c.optimize.step_fraction, "optimize.step_fraction");
  detail::require_positive(c.optimize.mu_min_hz, "optimize.mu_min_hz");
  detail::require_positive(c.optimize.gap_hz, "optimize.gap_hz");
  if (!(c.optimize.mu_max_hz > c.optimize.mu_min_hz)) {
    throw ConfigError("config: optimize.mu_max_hz must exceed mu_min_hz");
  }
  if (!(c.optimize.penalty > 1.0)) throw ConfigError("config: optimize.penalty must exceed 1");
  if (!(c.optimize.threshold >= 1.0)) throw ConfigError("config: optimize.threshold must be >= 1");
  if (c.optimize.floquet_steps < 2 || c.optimize.floquet_steps % 2 != 0) {
    throw ConfigError("config: optimize.floquet_steps must be even and >= 2");
  }

  auto noise = section("noise");
  c.noise.delta_p = noise.list("delta_p", c.noise.delta_p);
  c.noise.repeat = noise.integer("repeat", 10000);
  c.noise.mode = noise.text("mode", "power", {"power", "direct"});
  c.noise.seed = static_cast<std::uint64_t>(noise.integer("seed", 3));
  if (c.noise.repeat < 1) throw ConfigError("config: noise.repeat must be at least 1");
  for (double dp : c.noise.delta_p) {
    if (dp < 0.0) throw ConfigError("config: noise.delta_p must be non-negative");
  }
  return c;
}

inline Config parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_config_stream(in);
}

inline Config parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config_stream(in);
}

inline TrapParams trap_from(const Config& c) {
  return TrapParams::create(c.trap.a, c.trap.q, constants::two_pi * c.trap.omega_rf_hz,
                            c.trap.n_ions);
}

inline double ion_mass_kg(const Config& c) {
  return c.trap.ion_mass_amu * constants::atomic_mass_unit;
}

inline CoolingSchedule cooling_from(const Config& c) {
  CoolingSchedule s;
  s.profile = c.ions.cooling_profile == "cosine" ? CoolingSchedule::Profile::cosine
                                                 : CoolingSchedule::Profile::linear;
  s.periods = c.ions.cooling_periods;
  return s;
}

inline EquilibriumOptions equilibrium_options_from(const Config& c) {
  EquilibriumOptions o;
  o.jitter = c.ions.jitter;
  o.steps_per_period = c.ions.steps_per_period;
  o.integrator_order = c.ions.integrator_order;
  return o;
}

inline AnnealSchedule schedule_from(const Config& c) {
  AnnealSchedule s;
  s.budget = c.optimize.budget;
  s.restarts = c.optimize.restarts;
  s.t_initial = c.optimize.t_initial;
  s.t_final = c.optimize.t_final;
  s.step_fraction = c.optimize.step_fraction;
  return s;
}

inline Bounds bounds_from(const Config& c, const UnitSystem& units) {
  return Bounds::from_si(units, c.tweezers.max_nu_hz, c.optimize.mu_min_hz, c.optimize.mu_max_hz,
                         c.optimize.gap_hz, c.tweezers.max_offset_um * 1e-6);
}

inline TweezerPattern pattern_from(const Config& c, const UnitSystem& units) {
  const int n = c.trap.n_ions;
  Vec nu_hz = Eigen::Map<const Vec>(c.tweezers.nu_hz.data(), n);
  PlanePositions off(n, 2);
  for (int i = 0; i < n; ++i) {
    off(i, 0) = c.tweezers.offsets_um[2 * i] * 1e-6;
    off(i, 1) = c.tweezers.offsets_um[2 * i + 1] * 1e-6;
  }
  return TweezerPattern::from_si(units, nu_hz, off, c.tweezers.waist_um * 1e-6,
                                 c.tweezers.max_nu_hz, c.tweezers.max_offset_um * 1e-6);
}

}  // namespace iontweez
