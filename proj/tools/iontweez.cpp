// iontweez command-line front end. Every subcommand reads one INI config,
// writes CSV files (header row, units row, SI values) plus manifest.json.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "iontweez/pipeline.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace iontweez;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  int threads = 1;
};

struct RunContext {
  Scenario scenario;
  tools::RunManifest manifest;
  int threads;

  const UnitSystem& units() const { return scenario.units(); }
};

Config load(const GlobalOptions& g) {
  Config c = parse_config(g.config);
  if (g.seed) {
    c.optimize.seed = *g.seed;
    c.noise.seed = *g.seed;
  }
  if (g.threads < 1) throw ConfigError("--threads must be at least 1");
  return c;
}

RunContext open_run(const GlobalOptions& g, const std::string& sub, Config c) {
  auto resolved = c.resolved;
  RunContext ctx{Scenario(std::move(c)), tools::RunManifest(g.out_dir, sub, std::move(resolved)),
                 g.threads};
  ctx.manifest.seed("crystal", ctx.scenario.config().ions.seed);
  return ctx;
}

Backend parse_backend(const std::string& s) {
  if (s == "pseudo" || s == "pseudopotential") return Backend::pseudopotential;
  if (s == "floquet") return Backend::floquet;
  throw ConfigError("unknown backend '" + s + "'");
}

CsvTable positions_table(const UnitSystem& u, const Positions& r) {
  CsvTable t({"ion", "x_m", "y_m", "z_m"}, {"1", "m", "m", "m"});
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    t.add_row({static_cast<double>(i), u.length_to_si(r(i, kX)), u.length_to_si(r(i, kY)),
               u.length_to_si(r(i, kZ))});
  }
  return t;
}

CsvTable modes_table(const UnitSystem& u, const ModeStructure& ms) {
  CsvTable t({"mode", "frequency_hz", "in_plane", "com_axis"}, {"1", "Hz", "1", "1"});
  for (Eigen::Index m = 0; m < ms.size(); ++m) {
    const ModeLabel label = m < static_cast<Eigen::Index>(ms.labels.size()) ? ms.labels[m]
                                                                            : ModeLabel{};
    t.add_row({static_cast<double>(m), to_hz(u, ms.frequencies(m)),
               label.plane == Plane::in_plane ? 1.0 : 0.0, static_cast<double>(label.com_axis)});
  }
  return t;
}

CsvTable trace_table(const std::vector<std::pair<std::string, const AnnealResult*>>& runs) {
  CsvTable t({"run", "evaluation", "value", "best"}, {"1", "1", "1", "1"});
  for (std::size_t r = 0; r < runs.size(); ++r) {
    for (const TracePoint& p : runs[r].second->trace) {
      t.add_row({static_cast<double>(r), static_cast<double>(p.evaluation), p.value, p.best});
    }
  }
  return t;
}

void print_line(const std::string& s) { std::cout << s << '\n'; }

// equilibrium -------------------------------------------------------------

void run_equilibrium(const GlobalOptions& g, bool full_rf) {
  Config c = load(g);
  full_rf = full_rf || c.ions.full_rf;
  RunContext ctx = open_run(g, "equilibrium", std::move(c));
  const Scenario& s = ctx.scenario;
  ctx.manifest.write("positions_pseudo.csv", positions_table(s.units(), s.pseudo().static_positions));
  if (full_rf) {
    const IonCrystal& rf = s.rf();
    const Positions amp = micromotion_amplitude_first_order(rf, s.trap());
    CsvTable t({"ion", "x_m", "y_m", "z_m", "micromotion_y_m", "micromotion_max_m"},
               {"1", "m", "m", "m", "m", "m"});
    for (int i = 0; i < rf.n_ions; ++i) {
      double peak = 0.0;
      for (const Positions& snap : rf.trajectory) {
        peak = std::max(peak, (snap.row(i) - rf.period_average.row(i)).norm());
      }
      t.add_row({static_cast<double>(i), s.units().length_to_si(rf.period_average(i, kX)),
                 s.units().length_to_si(rf.period_average(i, kY)),
                 s.units().length_to_si(rf.period_average(i, kZ)),
                 s.units().length_to_si(amp(i, kY)), s.units().length_to_si(peak)});
    }
    ctx.manifest.write("positions_rf.csv", t);
    print_line("rf orbit periodicity error " + format_number(rf.periodicity_error));
  }
  ctx.manifest.finish();
}

// modes -------------------------------------------------------------------

void run_modes(const GlobalOptions& g, bool floquet) {
  RunContext ctx = open_run(g, "modes", load(g));
  const Scenario& s = ctx.scenario;
  const Vec nu = s.pattern().nu;
  const ModeStructure pseudo = pseudo_modes(with_tweezers(static_hessians(s.pseudo(), s.trap()), nu));
  ctx.manifest.write("modes_pseudo.csv", modes_table(s.units(), pseudo));
  if (floquet) {
    const ModeStructure fl = floquet_modes(with_tweezers(hessian_set(s.rf(), s.trap()), nu),
                                           s.trap(), s.floquet_options());
    ctx.manifest.write("modes_floquet.csv", modes_table(s.units(), fl));
  }
  ctx.manifest.finish();
}

// couple ------------------------------------------------------------------

void run_couple(const GlobalOptions& g) {
  RunContext ctx = open_run(g, "couple", load(g));
  const Scenario& s = ctx.scenario;
  const Config& c = s.config();
  const CouplingObjective obj(s.problem(Backend::pseudopotential, c.drive.doppler));
  const Evaluation ev = obj.evaluate(s.pattern().nu, s.configured_mu());
  if (!ev.stable) throw InstabilityError("couple: tweezer pattern is not stable");
  ctx.manifest.write("coupling_target.csv", matrix_table(obj.problem().target.j, "J", "1"));
  ctx.manifest.write("coupling_engineered.csv", matrix_table(ev.engineered.j, "J", "1"));
  CsvTable summary({"epsilon", "scale", "gap_violations", "mu_hz"}, {"1", "1", "1", "Hz"});
  summary.add_row({ev.epsilon, ev.scale, static_cast<double>(ev.gap_violations),
                   to_hz(s.units(), s.configured_mu())});
  ctx.manifest.write("coupling_summary.csv", summary);
  print_line("epsilon " + format_number(ev.epsilon));
  ctx.manifest.finish();
}

// optimize ----------------------------------------------------------------

struct OptimizeFlags {
  std::string backend;
  bool doppler = false;
  bool offsets = false;
  int budget = 0;
};

void run_optimize(const GlobalOptions& g, const OptimizeFlags& f) {
  Config c = load(g);
  if (!f.backend.empty()) c.optimize.backend = f.backend;
  if (f.doppler) c.drive.doppler = true;
  if (f.offsets) c.optimize.offsets = true;
  if (f.budget > 0) c.optimize.budget = f.budget;
  RunContext ctx = open_run(g, "optimize", std::move(c));
  const Scenario& s = ctx.scenario;
  const Config& cfg = s.config();
  const Backend backend = parse_backend(cfg.optimize.backend);
  ctx.manifest.seed("optimize", cfg.optimize.seed);

  const CouplingObjective obj(s.problem(backend, cfg.drive.doppler));
  AnnealResult r = simulated_annealing(obj, s.schedule(), cfg.optimize.seed, ctx.threads);
  const Evaluation ev = obj.evaluate(r.nu, r.mu);
  double best = ev.epsilon;
  std::vector<std::pair<std::string, const AnnealResult*>> runs = {{"couplings", &r}};
  AnnealResult offsets;
  if (cfg.optimize.offsets) {
    if (backend != Backend::pseudopotential) {
      throw ConfigError("optimize: offsets need the pseudopotential backend");
    }
    const OffsetObjective off(s.offset_problem(r.nu, r.mu));
    offsets = optimize_offsets(off, s.schedule(), derive_seed(cfg.optimize.seed, 1));
    best = offsets.best_epsilon;
    r.offsets = offsets.offsets;
    runs.push_back({"offsets", &offsets});
  }
  ctx.manifest.write("pattern.csv", pattern_table(s.units(), r.nu, r.mu, r.offsets));
  ctx.manifest.write("trace.csv", trace_table(runs));
  ctx.manifest.write("coupling_engineered.csv", matrix_table(ev.engineered.j, "J", "1"));
  CsvTable summary({"epsilon", "epsilon_offsets", "gap_violations", "evaluations", "mu_hz"},
                   {"1", "1", "1", "1", "Hz"});
  summary.add_row({ev.epsilon, best, static_cast<double>(ev.gap_violations),
                   static_cast<double>(r.evaluations + offsets.evaluations),
                   to_hz(s.units(), r.mu)});
  ctx.manifest.write("summary.csv", summary);
  print_line(std::string("backend ") + to_string(backend) + " epsilon " + format_number(best));
  ctx.manifest.finish();
}

// stress ------------------------------------------------------------------

CsvTable stress_validation(const Scenario& s, const Vec& nu, int ion,
                           const std::vector<double>& offsets_m) {
  CsvTable t({"offset_m", "rho_exact_m", "rho_first_order_m", "relative_error", "newton_iterations"},
             {"m", "m", "m", "1", "1"});
  const Bounds b = s.bounds();
  for (double dm : offsets_m) {
    TweezerPattern pat = TweezerPattern::centered(nu, b.nu_max, std::max(b.offset_max, 1.0));
    pat.offsets(ion, 0) = s.units().length_from_si(dm);
    pat.offsets(ion, 1) = s.units().length_from_si(0.5 * dm);
    const StressedState fo = first_order_stress(s.pseudo().static_positions, s.trap(), s.units(), pat);
    const StressedState ex =
        exact_stressed_equilibrium(s.pseudo().static_positions, s.trap(), s.units(), pat);
    const double rel = (fo.displacement - ex.displacement).norm() / ex.displacement.norm();
    t.add_row({dm, s.units().length_to_si(ex.displacement.norm()),
               s.units().length_to_si(fo.displacement.norm()), rel,
               static_cast<double>(ex.iterations)});
  }
  return t;
}

void run_stress(const GlobalOptions& g, bool validate, double pin_hz) {
  RunContext ctx = open_run(g, "stress", load(g));
  const Scenario& s = ctx.scenario;
  const TweezerPattern pat = s.pattern();
  const StressedState fo = first_order_stress(s.pseudo().static_positions, s.trap(), s.units(), pat);
  const StressedState ex =
      exact_stressed_equilibrium(s.pseudo().static_positions, s.trap(), s.units(), pat);
  CsvTable t({"ion", "dy_first_order_m", "dz_first_order_m", "dy_exact_m", "dz_exact_m"},
             {"1", "m", "m", "m", "m"});
  for (int i = 0; i < s.n_ions(); ++i) {
    t.add_row({static_cast<double>(i), s.units().length_to_si(fo.displacement(2 * i)),
               s.units().length_to_si(fo.displacement(2 * i + 1)),
               s.units().length_to_si(ex.displacement(2 * i)),
               s.units().length_to_si(ex.displacement(2 * i + 1))});
  }
  ctx.manifest.write("stress_displacements.csv", t);
  if (validate) {
    const Vec nu = Vec::Constant(s.n_ions(), s.bounds().nu_max * 0.5);
    ctx.manifest.write("stress_validation.csv",
                       stress_validation(s, nu, s.n_ions() / 4, {25e-9, 50e-9, 100e-9, 200e-9}));
    const double nu_pin = s.units().frequency_from_si(constants::two_pi * pin_hz);
    const PinnedShift shift = tweezer_position_shift(s.trap(), s.rf(), nu_pin, cooling_from(s.config()),
                                                     equilibrium_options_from(s.config()));
    CsvTable p({"nu_hz", "max_shift_m", "orbit_multiplier"}, {"Hz", "m", "1"});
    p.add_row({pin_hz, shift.max_shift, shift.max_multiplier});
    ctx.manifest.write("pinned_shift.csv", p);
    print_line("pinned shift " + format_number(shift.max_shift) + " m");
  }
  ctx.manifest.finish();
}

// noise -------------------------------------------------------------------

CsvTable noise_table(const std::vector<std::pair<double, std::vector<NoisePoint>>>& curves) {
  CsvTable t({"ratio", "delta_p", "mean_epsilon", "stderr_epsilon", "diff_mean", "diff_stderr",
              "clamps", "instabilities", "gap_violations"},
             {"1", "1", "1", "1", "1", "1", "1", "1", "1"});
  for (const auto& [ratio, pts] : curves) {
    for (const NoisePoint& p : pts) {
      t.add_row({ratio, p.delta_p, p.mean_epsilon, p.stderr_epsilon, p.diff_mean, p.diff_stderr,
                 static_cast<double>(p.clamps), static_cast<double>(p.instabilities),
                 static_cast<double>(p.gap_violations)});
    }
  }
  return t;
}

NoiseStudy noise_study(const Scenario& s, const Vec& nu, double mu) {
  NoiseStudy st;
  st.nu = nu;
  st.mu = mu;
  st.delta_p_grid = s.config().noise.delta_p;
  st.n_repeat = s.config().noise.repeat;
  st.seed = s.config().noise.seed;
  st.mode = s.noise_mode();
  return st;
}

void run_noise(const GlobalOptions& g, const std::string& pattern_path,
               const std::vector<double>& delta_p, int repeat) {
  Config c = load(g);
  if (!delta_p.empty()) c.noise.delta_p = delta_p;
  if (repeat > 0) c.noise.repeat = repeat;
  RunContext ctx = open_run(g, "noise", std::move(c));
  const Scenario& s = ctx.scenario;
  ctx.manifest.seed("noise", s.config().noise.seed);
  const CouplingObjective obj(s.problem(Backend::pseudopotential, false));
  Vec nu = s.pattern().nu;
  double mu = s.configured_mu();
  if (!pattern_path.empty()) {
    const PatternFile pf = read_pattern(pattern_path, s.units(), s.n_ions());
    nu = pf.nu;
    mu = pf.mu;
  }
  const auto pts = noise_sweep(noise_study(s, nu, mu), obj, ctx.threads);
  const double ratio = -s.config().target.j2 / s.config().target.j1;
  ctx.manifest.write("noise.csv", noise_table({{ratio, pts}}));
  ctx.manifest.finish();
}

// reproduce-figN ------------------------------------------------------------

Config with_ratio(Config c, double ratio) {
  c.target.kind = "spin_ladder";
  c.target.j1 = 1.0;
  c.target.j2 = -ratio;
  return c;
}

void run_fig1(const GlobalOptions& g) {
  RunContext ctx = open_run(g, "reproduce-fig1", load(g));
  const Scenario& s = ctx.scenario;
  const ModeStructure pseudo = pseudo_modes(static_hessians(s.pseudo(), s.trap()));
  const ModeStructure fl = floquet_modes(hessian_set(s.rf(), s.trap()), s.trap(), s.floquet_options());
  const MatchResult match = match_and_shift(fl, pseudo);
  CsvTable t({"mode", "frequency_floquet_hz", "frequency_pseudo_hz", "relative_shift", "overlap",
              "in_plane", "com_axis"},
             {"1", "Hz", "Hz", "1", "1", "1", "1"});
  for (const ModeMatch& m : match.pairs) {
    const ModeLabel label = fl.labels[m.full_index];
    t.add_row({static_cast<double>(m.full_index), to_hz(s.units(), fl.frequencies(m.full_index)),
               to_hz(s.units(), pseudo.frequencies(m.pseudo_index)), m.shift, m.overlap,
               label.plane == Plane::in_plane ? 1.0 : 0.0, static_cast<double>(label.com_axis)});
  }
  ctx.manifest.write("fig1_modes.csv", t);
  ctx.manifest.write("positions_rf.csv", positions_table(s.units(), s.rf().period_average));
  print_line("symplectic residual " + format_number(fl.symplectic_residual));
  ctx.manifest.finish();
}

void run_fig2(const GlobalOptions& g) {
  RunContext ctx = open_run(g, "reproduce-fig2", load(g));
  const Scenario& s = ctx.scenario;
  const Config& c = s.config();
  ctx.manifest.seed("optimize", c.optimize.seed);
  const CouplingObjective pseudo(s.problem(Backend::pseudopotential, c.drive.doppler));
  const AnnealResult r = simulated_annealing(pseudo, s.schedule(), c.optimize.seed, ctx.threads);
  const Evaluation ep = pseudo.evaluate(r.nu, r.mu);
  const CouplingObjective full(s.problem(Backend::floquet, c.drive.doppler));
  const Evaluation naive = naive_micromotion_rescore(r, full);
  ctx.manifest.write("fig2_target.csv", matrix_table(pseudo.problem().target.j, "J", "1"));
  ctx.manifest.write("fig2_pseudo.csv", matrix_table(ep.engineered.j, "J", "1"));
  ctx.manifest.write("fig2_naive_floquet.csv", matrix_table(naive.engineered.j, "J", "1"));
  ctx.manifest.write("fig2_pattern.csv", pattern_table(s.units(), r.nu, r.mu));
  CsvTable summary({"epsilon_pseudo", "epsilon_naive_floquet", "scale_pseudo", "scale_naive"},
                   {"1", "1", "1", "1"});
  summary.add_row({ep.epsilon, naive.epsilon, ep.scale, naive.scale});
  ctx.manifest.write("fig2_summary.csv", summary);
  print_line("epsilon pseudo " + format_number(ep.epsilon) + " naive floquet " +
             format_number(naive.epsilon));
  ctx.manifest.finish();
}

void run_fig3(const GlobalOptions& g) {
  RunContext ctx = open_run(g, "reproduce-fig3", load(g));
  const Scenario& s = ctx.scenario;
  const Config& c = s.config();
  ctx.manifest.seed("optimize", c.optimize.seed);
  std::vector<AnnealResult> results;
  std::vector<std::string> names;
  CsvTable summary({"run", "floquet", "doppler", "epsilon"}, {"1", "1", "1", "1"});
  for (const bool doppler : {false, true}) {
    for (const Backend b : {Backend::pseudopotential, Backend::floquet}) {
      const CouplingObjective obj(s.problem(b, doppler));
      results.push_back(simulated_annealing(obj, s.schedule(), c.optimize.seed, ctx.threads));
      names.push_back(std::string(to_string(b)) + (doppler ? "+doppler" : ""));
      summary.add_row({static_cast<double>(results.size() - 1), b == Backend::floquet ? 1.0 : 0.0,
                       doppler ? 1.0 : 0.0, results.back().best_epsilon});
      print_line(names.back() + " epsilon " + format_number(results.back().best_epsilon));
    }
  }
  std::vector<std::pair<std::string, const AnnealResult*>> runs;
  for (std::size_t i = 0; i < results.size(); ++i) runs.push_back({names[i], &results[i]});
  ctx.manifest.write("fig3_trace.csv", trace_table(runs));
  ctx.manifest.write("fig3_summary.csv", summary);
  ctx.manifest.finish();
}

void run_fig4(const GlobalOptions& g, const std::vector<double>& ratios) {
  Config base = load(g);
  RunContext ctx = open_run(g, "reproduce-fig4", base);
  ctx.manifest.seed("optimize", base.optimize.seed);
  CsvTable t({"ratio", "epsilon_centered", "epsilon_offsets", "improvement", "max_offset_m"},
             {"1", "1", "1", "1", "m"});
  for (const double ratio : ratios) {
    const Scenario s(with_ratio(base, ratio));
    const CouplingObjective obj(s.problem(Backend::pseudopotential, false));
    const AnnealResult r = simulated_annealing(obj, s.schedule(), base.optimize.seed, ctx.threads);
    const OffsetObjective off(s.offset_problem(r.nu, r.mu));
    const double centered = off.evaluate(Vec::Zero(off.dimension()), true).epsilon;
    const AnnealResult o = optimize_offsets(off, s.schedule(), derive_seed(base.optimize.seed, 1));
    const double max_off = o.offsets.rows() ? o.offsets.cwiseAbs().maxCoeff() : 0.0;
    t.add_row({ratio, centered, o.best_epsilon, centered - o.best_epsilon,
               s.units().length_to_si(max_off)});
    print_line("ratio " + format_number(ratio) + " centered " + format_number(centered) +
               " offsets " + format_number(o.best_epsilon));
  }
  ctx.manifest.write("fig4_sweep.csv", t);
  ctx.manifest.finish();
}

void run_fig5(const GlobalOptions& g, const std::vector<double>& ratios) {
  Config base = load(g);
  RunContext ctx = open_run(g, "reproduce-fig5", base);
  ctx.manifest.seed("optimize", base.optimize.seed);
  ctx.manifest.seed("noise", base.noise.seed);
  std::vector<std::pair<double, std::vector<NoisePoint>>> curves;
  for (const double ratio : ratios) {
    const Scenario s(with_ratio(base, ratio));
    const CouplingObjective obj(s.problem(Backend::pseudopotential, false));
    const AnnealResult r = simulated_annealing(obj, s.schedule(), base.optimize.seed, ctx.threads);
    curves.push_back({ratio, noise_sweep(noise_study(s, r.nu, r.mu), obj, ctx.threads)});
  }
  ctx.manifest.write("fig5_noise.csv", noise_table(curves));
  ctx.manifest.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tweezer-engineered spin couplings in ion Coulomb crystals"};
  app.require_subcommand(1);
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "INI configuration file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for optimization and noise draws");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  bool full_rf = false;
  auto* eq = app.add_subcommand("equilibrium", "Crystal equilibrium positions");
  eq->add_flag("--full-rf", full_rf, "Also solve the periodic RF orbit");

  bool modes_floquet = false;
  auto* modes = app.add_subcommand("modes", "Normal modes with the configured tweezers");
  modes->add_flag("--floquet", modes_floquet, "Also compute Floquet modes of the RF orbit");

  auto* couple = app.add_subcommand("couple", "Coupling matrix of the configured pattern");

  OptimizeFlags of;
  auto* opt = app.add_subcommand("optimize", "Anneal tweezer frequencies and beatnote");
  opt->add_option("--backend", of.backend, "pseudo or floquet")
      ->check(CLI::IsMember({"pseudo", "floquet"}));
  opt->add_flag("--doppler", of.doppler, "Include Doppler modulation from micromotion");
  opt->add_flag("--offsets", of.offsets, "Then optimize tweezer focus offsets");
  opt->add_option("--budget", of.budget, "Evaluations per restart")->check(CLI::PositiveNumber);

  bool validate = false;
  double pin_hz = 10e6;
  auto* stress = app.add_subcommand("stress", "Equilibrium shifts from offset tweezers");
  stress->add_flag("--validate", validate, "Compare first-order and exact shifts");
  stress->add_option("--pin-hz", pin_hz, "Tweezer frequency for the pinned-orbit shift check");

  std::string pattern_path;
  std::vector<double> delta_p;
  int repeat = 0;
  auto* noise = app.add_subcommand("noise", "Tweezer intensity noise sweep");
  noise->add_option("--pattern", pattern_path, "pattern.csv written by optimize")
      ->check(CLI::ExistingFile);
  noise->add_option("--deltap", delta_p, "Fractional power noise levels")->delimiter(',');
  noise->add_option("--repeat", repeat, "Draws per noise level")->check(CLI::PositiveNumber);

  std::vector<double> ratios4 = {0.25, 0.5, 1.0, 1.5, 2.0, 3.0};
  std::vector<double> ratios5 = {0.5, 1.0};
  auto* fig1 = app.add_subcommand("reproduce-fig1", "Micromotion mode shifts");
  auto* fig2 = app.add_subcommand("reproduce-fig2", "Pseudopotential optimum and naive rescore");
  auto* fig3 = app.add_subcommand("reproduce-fig3", "Backend and Doppler comparison");
  auto* fig4 = app.add_subcommand("reproduce-fig4", "Offset optimization over ladder ratios");
  fig4->add_option("--ratios", ratios4, "Values of -j2/j1")->delimiter(',');
  auto* fig5 = app.add_subcommand("reproduce-fig5", "Noise curves for two ladder ratios");
  fig5->add_option("--ratios", ratios5, "Values of -j2/j1")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorCategory::config);
  }
  if (seed_opt->count()) g.seed = seed;

  try {
    if (*eq) run_equilibrium(g, full_rf);
    else if (*modes) run_modes(g, modes_floquet);
    else if (*couple) run_couple(g);
    else if (*opt) run_optimize(g, of);
    else if (*stress) run_stress(g, validate, pin_hz);
    else if (*noise) run_noise(g, pattern_path, delta_p, repeat);
    else if (*fig1) run_fig1(g);
    else if (*fig2) run_fig2(g);
    else if (*fig3) run_fig3(g);
    else if (*fig4) run_fig4(g, ratios4);
    else if (*fig5) run_fig5(g, ratios5);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::numerical);
  }
  return 0;
}
