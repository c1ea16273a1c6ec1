// Acceptance report: one PASS/FAIL line per criterion, preceded by indented
// measurements. Exits 0 once every criterion has been evaluated; a nonzero
// exit means the run itself broke. Pass --smoke for reduced budgets and
// --report <file> to mirror the report into a file.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "iontweez/pipeline.hpp"
#include "reference.hpp"

using namespace iontweez;
using namespace iontweez::testing;

namespace {

bool g_smoke = false;
int g_failed = 0;
std::FILE* g_report = nullptr;  // mirror of stdout, read back by ctest

void emit(const std::string& line) {
  std::fputs(line.c_str(), stdout);
  std::fflush(stdout);
  if (g_report) {
    std::fputs(line.c_str(), g_report);
    std::fflush(g_report);
  }
}

void note(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
void note(const char* fmt, ...) {
  char buf[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  emit(std::string("    ") + buf + "\n");
}

void verdict(int id, const char* name, bool pass, const std::string& summary) {
  if (!pass) ++g_failed;
  emit(std::string(pass ? "PASS" : "FAIL") + " [" + std::to_string(id) + "] " + name + ": " +
       summary + "\n");
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Config reference_config() {
  Config c = parse_config_text(R"(
[trap]
a = 0.018704, -0.018900, 0.000196
q = 0.202780, -0.202780, 0
omega_rf_hz = 20e6
n_ions = 12
ion_mass_amu = 170.936
[ions]
seed = 7
[optimize]
floquet_steps = 512
)");
  if (g_smoke) {
    c.optimize.budget = 5000;
    c.noise.repeat = 1000;
  }
  return c;
}

Config with_drive(Config c, const Vec3& k) {
  c.drive.k = k;
  return c;
}

Config with_ratio(Config c, double ratio) {
  c.target.j1 = 1.0;
  c.target.j2 = -ratio;
  return c;
}

// 1 ------------------------------------------------------------------------

void criterion_frequencies() {
  const Vec3 theta = pseudo_frequencies(reference_trap()) / constants::two_pi / 1e6;
  const Vec3 quoted(2.0, 0.4, 0.14);
  double worst = 0.0;
  for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(theta(a) - quoted(a)) / quoted(a));
  note("Theta/2pi = {%.4f, %.4f, %.4f} MHz", theta(0), theta(1), theta(2));
  verdict(1, "pseudopotential frequencies", worst <= 0.02,
          fmt("worst deviation from quoted %.3f%%", 100 * worst));
}

// 2 ------------------------------------------------------------------------

void criterion_two_ion() {
  const TrapParams trap = reference_trap(2);
  const UnitSystem u = axial_units();
  const IonCrystal c = solve_pseudo_equilibrium(trap, u, 3);
  const double z0 = std::cbrt(0.25);
  const auto& r = c.static_positions;
  const double pos_err = std::max(std::abs(std::max(r(0, kZ), r(1, kZ)) - z0),
                                  std::abs(std::min(r(0, kZ), r(1, kZ)) + z0));
  const ModeStructure ms = pseudo_modes(static_hessian(r, trap, u));
  const double mode_err = std::max(std::abs(ms.frequencies(0) - 1.0),
                                   std::abs(ms.frequencies(1) - std::sqrt(3.0)));
  note("position error %.3e, mode error %.3e (axial units)", pos_err, mode_err);
  verdict(2, "two-ion oracle", pos_err < 1e-8 && mode_err < 1e-6,
          fmt("max errors %.2e", std::max(pos_err, mode_err)));
}

// 3 ------------------------------------------------------------------------

void criterion_mathieu() {
  const double a = 0.018704, q = 0.202780;
  const TrapParams trap = reference_trap(1);
  const IonCrystal ion = solve_pseudo_equilibrium(trap, rf_units(), 1);
  const IonCrystal rf = solve_rf_equilibrium(trap, rf_units(), ion);
  const ModeStructure fl = floquet_modes(hessian_set(rf, trap), trap);
  double gamma = 0.0;
  for (Eigen::Index m = 0; m < fl.size(); ++m) {
    if (fl.labels[m].com_axis == kX) gamma = fl.frequencies(m);
  }
  const double oracle = mathieu_exponent(a, q);
  const double rel = std::abs(gamma / oracle - 1.0);
  const double dev = gamma - std::sqrt(a + 0.5 * q * q);
  const double ratio = std::abs(dev) / std::pow(q, 4);
  note("gamma = %.12f, continued fraction %.12f, deviation from lowest order %.3e = %.2f q^4",
       gamma, oracle, dev, ratio);
  verdict(3, "Mathieu oracle", rel < 1e-8 && dev != 0.0 && ratio > 0.1 && ratio < 10.0,
          fmt("relative error %.2e", rel));
}

// 4 ------------------------------------------------------------------------

void criterion_micromotion_shifts() {
  const TrapParams trap = reference_trap();
  const HessianSet hs = hessian_set(reference_rf_crystal(), trap);
  const ModeStructure fl = floquet_modes(hs, trap);
  const ModeStructure ps = pseudo_modes(static_hessians(reference_crystal(), trap));
  double com_err = 0.0;
  int com_found = 0;
  for (Eigen::Index m = 0; m < fl.size(); ++m) {
    const int axis = fl.labels[m].com_axis;
    if (axis < 0) continue;
    ++com_found;
    com_err = std::max(com_err, std::abs(fl.frequencies(m) /
                                             mathieu_exponent(trap.a(axis), trap.q(axis)) - 1.0));
  }
  const MatchResult match = match_and_shift(fl, ps);
  double worst = 0.0;
  Eigen::Index worst_mode = 0;
  for (const ModeMatch& p : match.pairs) {
    if (std::abs(p.shift) > worst) {
      worst = std::abs(p.shift);
      worst_mode = p.full_index;
    }
  }
  const UnitSystem u = rf_units();
  note("com modes found %d, max relative deviation from single ion %.2e", com_found, com_err);
  note("largest |shift| %.2f%% at mode %ld (%.1f kHz Floquet, %s)", 100 * worst,
       static_cast<long>(worst_mode), to_hz(u, fl.frequencies(worst_mode)) / 1e3,
       to_string(fl.labels[worst_mode].plane));
  note("monodromy symplecticity residual %.2e", fl.symplectic_residual);
  const bool i_ok = com_found == 3 && com_err < 1e-6;
  const bool ii_ok = worst < 0.02;
  const bool iii_ok = fl.symplectic_residual < 1e-8;
  std::string summary = std::string("(i) ") + (i_ok ? "ok" : "fail") + ", (ii) " +
                        (ii_ok ? "ok" : "fail") + fmt(" max shift %.2f%%", 100 * worst) +
                        ", (iii) " + (iii_ok ? "ok" : "fail");
  verdict(4, "micromotion mode shifts", i_ok && ii_ok && iii_ok, summary);
}

// 5 ------------------------------------------------------------------------

struct SaRun {
  double epsilon = 0.0;
  double seconds = 0.0;
};

SaRun anneal_scenario(const Scenario& s, Backend b, bool doppler) {
  const auto t0 = std::chrono::steady_clock::now();
  const CouplingObjective obj(s.problem(b, doppler));
  const AnnealResult r = simulated_annealing(obj, s.schedule(), s.config().optimize.seed);
  return {r.best_epsilon, seconds_since(t0)};
}

void criterion_fig2() {
  const Scenario s(reference_config());
  const auto t0 = std::chrono::steady_clock::now();
  const CouplingObjective pseudo(s.problem(Backend::pseudopotential, false));
  const AnnealResult r = simulated_annealing(pseudo, s.schedule(), s.config().optimize.seed);
  const CouplingObjective full(s.problem(Backend::floquet, false));
  const Evaluation naive = naive_micromotion_rescore(r, full);
  std::string chains;
  for (const AnnealChain& c : r.chains) chains += fmt(" %.4f", c.best_value);
  note("budget %d x %d restarts, chain optima%s", s.schedule().budget, s.schedule().restarts,
       chains.c_str());
  note("best pseudo eps %.4f, naive Floquet rescore %.4f, gap %.4f, %.0f s", r.best_epsilon,
       naive.epsilon, naive.epsilon - r.best_epsilon, seconds_since(t0));
  const bool ok = r.best_epsilon <= 0.35 && naive.epsilon - r.best_epsilon >= 0.10;
  verdict(5, "pseudopotential optimum and naive rescore", ok,
          fmt("eps %.3f", r.best_epsilon) + fmt(", naive gap %.3f", naive.epsilon - r.best_epsilon));
}

// 6 ------------------------------------------------------------------------

void criterion_fig3() {
  const std::vector<Vec3> drives = {Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(0, 1, 1)};
  bool similar = false;
  double best_gap = 1e9;
  SaRun pseudo010, floquet010;
  for (std::size_t d = 0; d < drives.size() && !similar; ++d) {
    const Scenario s(with_drive(reference_config(), drives[d]));
    const SaRun p = anneal_scenario(s, Backend::pseudopotential, false);
    const SaRun f = anneal_scenario(s, Backend::floquet, false);
    if (d == 0) {
      pseudo010 = p;
      floquet010 = f;
    }
    const double gap = std::abs(f.epsilon - p.epsilon);
    best_gap = std::min(best_gap, gap);
    similar = gap <= 0.08;
    note("k = [%g,%g,%g]: pseudo %.4f (%.0f s), Floquet %.4f (%.0f s), |diff| %.4f",
         drives[d](0), drives[d](1), drives[d](2), p.epsilon, p.seconds, f.epsilon, f.seconds,
         gap);
  }
  if (similar) note("stopped at the first drive direction within 0.08");

  const Scenario s(reference_config());
  const SaRun pd = anneal_scenario(s, Backend::pseudopotential, true);
  const SaRun fd = anneal_scenario(s, Backend::floquet, true);
  note("k = [0,1,0] with Doppler: pseudo %.4f (was %.4f), Floquet %.4f (was %.4f)", pd.epsilon,
       pseudo010.epsilon, fd.epsilon, floquet010.epsilon);
  const bool doppler_ok = pd.epsilon > pseudo010.epsilon && fd.epsilon > floquet010.epsilon;

  // Smoke-budget ordering is required to hold as well.
  Config smoke = reference_config();
  smoke.optimize.budget = 5000;
  const Scenario ss(smoke);
  const SaRun sp0 = anneal_scenario(ss, Backend::pseudopotential, false);
  const SaRun sp1 = anneal_scenario(ss, Backend::pseudopotential, true);
  const SaRun sf0 = anneal_scenario(ss, Backend::floquet, false);
  const SaRun sf1 = anneal_scenario(ss, Backend::floquet, true);
  note("smoke 5e3: pseudo %.4f -> %.4f, Floquet %.4f -> %.4f with Doppler", sp0.epsilon,
       sp1.epsilon, sf0.epsilon, sf1.epsilon);
  const bool smoke_ok = sp1.epsilon > sp0.epsilon && sf1.epsilon > sf0.epsilon;
  verdict(6, "Floquet backend and Doppler", similar && doppler_ok && smoke_ok,
          fmt("closest backend gap %.3f", best_gap) + (doppler_ok ? ", Doppler raises eps" :
                                                                     ", Doppler ordering broken") +
              (smoke_ok ? "" : ", smoke ordering broken"));
}

// 7 ------------------------------------------------------------------------

void criterion_stress() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrapParams trap = reference_trap();
  const UnitSystem u = rf_units();
  const Positions& r = reference_crystal().static_positions;
  bool first_order_ok = true;
  double prev_err = 0.0;
  std::vector<double> ratios;
  for (double dm : {25e-9, 50e-9, 100e-9}) {
    PlanePositions off = PlanePositions::Zero(12, 2);
    off(3, 0) = dm;
    off(3, 1) = 0.5 * dm;
    const TweezerPattern p = TweezerPattern::from_si(u, Vec::Constant(12, 0.5e6), off);
    const StressedState fo = first_order_stress(r, trap, u, p);
    const StressedState ex = exact_stressed_equilibrium(r, trap, u, p);
    const double err = (fo.displacement - ex.displacement).norm();
    const double rel = err / ex.displacement.norm();
    note("offset %.0f nm: |rho| %.3f nm, first-order relative error %.3f%%", dm * 1e9,
         u.length_to_si(ex.displacement.norm()) * 1e9, 100 * rel);
    first_order_ok = first_order_ok && rel < 0.05;
    if (prev_err > 0.0) ratios.push_back(err / prev_err);
    prev_err = err;
  }
  bool quadratic = true;
  for (double q : ratios) {
    note("error ratio per doubling %.3f (quadratic: 4)", q);
    quadratic = quadratic && std::abs(q - 4.0) < 0.4;
  }

  Config base = reference_config();
  double worst_gain = 0.0;
  double min_gain = 1e9;
  for (double ratio : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    const Scenario s(with_ratio(base, ratio));
    const CouplingObjective obj(s.problem(Backend::pseudopotential, false));
    const AnnealResult a = simulated_annealing(obj, s.schedule(), base.optimize.seed);
    const OffsetObjective off(s.offset_problem(a.nu, a.mu));
    const double centered = off.evaluate(Vec::Zero(off.dimension()), true).epsilon;
    const AnnealResult o = optimize_offsets(off, s.schedule(), derive_seed(base.optimize.seed, 1));
    const double gain = centered - o.best_epsilon;
    note("ratio %.2f: centered %.4f, with offsets %.4f, improvement %.4f, max offset %.0f nm",
         ratio, centered, o.best_epsilon, gain,
         u.length_to_si(o.offsets.cwiseAbs().maxCoeff()) * 1e9);
    worst_gain = std::max(worst_gain, gain);
    min_gain = std::min(min_gain, gain);
  }
  const bool offsets_ok = worst_gain < 0.05 && min_gain >= 0.0;

  const double nu_pin = u.frequency_from_si(constants::two_pi * 10e6);
  const PinnedShift shift = tweezer_position_shift(trap, reference_rf_crystal(), nu_pin);
  note("10 MHz pinning on every ion: max position change %.1f nm, orbit multiplier %.3f",
       shift.max_shift * 1e9, shift.max_multiplier);
  if (shift.max_multiplier > 1.0 + 1e-6) {
    note("the pinned orbit is parametrically unstable at this frequency");
  }
  const bool shift_ok = shift.max_shift >= 10e-9 / 3.0 && shift.max_shift <= 30e-9;
  note("%.0f s", seconds_since(t0));
  verdict(7, "local stress", first_order_ok && quadratic && offsets_ok && shift_ok,
          fmt("max offset gain %.3f", worst_gain) + fmt(", pinned shift %.1f nm", shift.max_shift * 1e9) +
              (first_order_ok && quadratic ? ", first order ok" : ", first order fails"));
}

// 8 ------------------------------------------------------------------------

void criterion_noise() {
  const auto t0 = std::chrono::steady_clock::now();
  Config base = reference_config();
  bool ok = true;
  for (double ratio : {0.5, 1.0}) {
    const Scenario s(with_ratio(base, ratio));
    const CouplingObjective obj(s.problem(Backend::pseudopotential, false));
    const AnnealResult a = simulated_annealing(obj, s.schedule(), base.optimize.seed);
    NoiseStudy st;
    st.nu = a.nu;
    st.mu = a.mu;
    st.delta_p_grid = {0.0, 0.0025, 0.005, 0.01, 0.02};
    st.n_repeat = s.config().noise.repeat;
    st.seed = s.config().noise.seed;
    const auto pts = noise_sweep(st, obj);
    note("ratio %.2f, %d repeats:", ratio, st.n_repeat);
    bool monotone = true;
    for (std::size_t g = 0; g < pts.size(); ++g) {
      note("  dP %.4f: mean %.5f +- %.5f, step %.5f +- %.5f, gap hits %ld", pts[g].delta_p,
           pts[g].mean_epsilon, pts[g].stderr_epsilon, pts[g].diff_mean, pts[g].diff_stderr,
           pts[g].gap_violations);
      if (g > 0) monotone = monotone && pts[g].diff_mean > 3.0 * pts[g].diff_stderr;
    }
    // eps(1%) - eps(0), paired over the same draws.
    double d = 0.0, se2 = 0.0;
    for (std::size_t g = 1; g <= 3; ++g) d += pts[g].diff_mean;
    const double unpaired_se = pts[3].stderr_epsilon;  // eps(0) has no spread
    se2 = unpaired_se * unpaired_se;
    const bool visible = d > 3.0 * std::sqrt(se2);
    note("  eps(1%%) - eps(0) = %.5f, %.1f standard errors", d, d / std::sqrt(se2));
    ok = ok && monotone && visible;
  }
  note("%.0f s", seconds_since(t0));
  verdict(8, "intensity noise", ok, ok ? "monotone at 3 SE for both ratios" : "not resolved");
}

// 9 ------------------------------------------------------------------------

void criterion_hygiene() {
  std::vector<std::string> failures;
  const Positions& r = reference_crystal().static_positions;

  // Coulomb Hessian vs central differences of the gradient.
  const Mat h = coulomb_hessian<3>(r);
  Mat h_fd(r.size(), r.size());
  const double eps = 1e-5;
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    Vec x = flatten<3>(r);
    x(k) += eps;
    const Vec gp = coulomb_gradient<3>(unflatten<3>(x));
    x(k) -= 2 * eps;
    h_fd.col(k) = (gp - coulomb_gradient<3>(unflatten<3>(x))) / (2 * eps);
  }
  const double hess_err = (h - h_fd).cwiseAbs().maxCoeff() / h.cwiseAbs().maxCoeff();
  note("Coulomb Hessian vs finite difference: %.2e", hess_err);
  if (!(hess_err < 1e-6)) failures.push_back("hessian");

  // Third-derivative contraction: O(t^2) remainder.
  const PlanePositions plane = plane_of(r);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec rho(plane.size());
  for (Eigen::Index k = 0; k < rho.size(); ++k) rho(k) = gauss(rng);
  const Mat c3 = coulomb_third_contraction<2>(plane, rho);
  const Mat h0 = coulomb_hessian<2>(plane);
  auto remainder = [&](double t) {
    return (coulomb_hessian<2>(unflatten<2>(flatten<2>(plane) + t * rho)) - h0 - t * c3).norm();
  };
  const double order = std::log2(remainder(2e-3) / remainder(1e-3));
  note("third-derivative contraction remainder order %.3f (expected 2)", order);
  if (!(std::abs(order - 2.0) < 0.1)) failures.push_back("third derivative");

  // dJ/dmu.
  const HessianSet hs = static_hessians(reference_crystal(), reference_trap());
  const ModeStructure ms = pseudo_modes(with_tweezers(hs, Vec::LinSpaced(12, 0.01, 0.08)));
  RamanDrive drive;
  drive.k = Vec3(0, 1, 1);
  drive.mu = 0.0617;
  const Mat dj = spin_spin_derivative(ms, drive).j;
  RamanDrive up = drive, down = drive;
  up.mu += 1e-7;
  down.mu -= 1e-7;
  const double dj_err =
      ((spin_spin_matrix(ms, up).j - spin_spin_matrix(ms, down).j) / 2e-7 - dj).norm() / dj.norm();
  note("dJ/dmu vs finite difference: %.2e", dj_err);
  if (!(dj_err < 1e-5)) failures.push_back("dJ/dmu");

  // Eigen sum rule.
  const ModeStructure base = pseudo_modes(hs);
  const double sum_err =
      std::abs(base.frequencies.array().square().sum() - hs.static_full.trace()) /
      hs.static_full.trace();
  note("sum rule relative error %.2e", sum_err);
  if (!(sum_err < 1e-10)) failures.push_back("sum rule");

  // Uniform pinning shifts every in-plane eigenvalue by nu^2.
  const double nu = 0.05;
  const Mat plane_h = plane_block(hs.static_full);
  Eigen::SelfAdjointEigenSolver<Mat> e0(plane_h);
  Eigen::SelfAdjointEigenSolver<Mat> e1(plane_h + nu * nu * Mat::Identity(24, 24));
  const double shift_err =
      (e1.eigenvalues() - e0.eigenvalues() - Vec::Constant(24, nu * nu)).cwiseAbs().maxCoeff();
  note("diagonal-shift identity error %.2e", shift_err);
  if (!(shift_err < 1e-10)) failures.push_back("diagonal shift");

  // Seed reproducibility.
  const Scenario s(reference_config());
  const CouplingObjective obj(s.problem(Backend::pseudopotential, false));
  AnnealSchedule sch;
  sch.budget = 500;
  sch.restarts = 2;
  const AnnealResult a = simulated_annealing(obj, sch, 77);
  const AnnealResult b = simulated_annealing(obj, sch, 77);
  NoiseStudy st;
  st.nu = a.nu;
  st.mu = a.mu;
  st.delta_p_grid = {0.01};
  st.n_repeat = 50;
  st.seed = 4;
  const auto na = noise_sweep(st, obj);
  const auto nb = noise_sweep(st, obj);
  const IonCrystal c2 = solve_pseudo_equilibrium(reference_trap(), rf_units(), 7);
  const bool same = (a.nu.array() == b.nu.array()).all() && a.mu == b.mu &&
                    a.best_epsilon == b.best_epsilon && na[0].mean_epsilon == nb[0].mean_epsilon &&
                    (c2.static_positions.array() == r.array()).all();
  note("seed reproducibility bit-exact: %s", same ? "yes" : "no");
  if (!same) failures.push_back("reproducibility");

  std::string summary = failures.empty() ? "all checks within tolerance" : "failed:";
  for (const auto& f : failures) summary += " " + f;
  verdict(9, "numerical hygiene", failures.empty(), summary);
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--smoke") == 0) g_smoke = true;
    if (std::strcmp(argv[i], "--report") == 0 && i + 1 < argc) {
      g_report = std::fopen(argv[++i], "w");
      if (!g_report) {
        std::fprintf(stderr, "acceptance: cannot open %s\n", argv[i]);
        return 1;
      }
    }
  }
  const std::vector<std::function<void()>> criteria = {
      criterion_frequencies, criterion_two_ion, criterion_mathieu,
      criterion_micromotion_shifts, criterion_fig2, criterion_fig3,
      criterion_stress, criterion_noise, criterion_hygiene};
  int id = 0;
  for (const auto& c : criteria) {
    ++id;
    try {
      c();
    } catch (const std::exception& e) {
      verdict(id, "criterion", false, std::string("error: ") + e.what());
    }
  }
  emit(std::to_string(g_failed) + " of " + std::to_string(criteria.size()) + " criteria failed\n");
  if (g_report) std::fclose(g_report);
  return 0;
}
