// Acceptance suite: every criterion prints one PASS/FAIL line with the
// measured numbers; the exit code is the number of failed criteria.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "mlpath/mlpath.hpp"

#include "oracles.hpp"

using namespace mlpath;

namespace {

int failures = 0;

void report(int index, const char* title, bool pass, const std::string& detail) {
  std::printf("[%s] C%d %s: %s\n", pass ? "PASS" : "FAIL", index, title, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt1(const char* f, double a) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// --- C1: eps^2 OM - FW - eps^2 correction == 0 and the gap scales as eps^2.
void criterion1() {
  const std::vector<double> eps_list{1.0, 0.3, 0.1, 0.03};
  double worst_identity = 0.0;
  double worst_ratio_dev = 0.0;
  for (const char* name : {"ou", "double_well"}) {
    const DriftModel drift =
        std::string(name) == "ou" ? preset_drift("ou", 1.0) : preset_drift(name);
    const double z0 = std::string(name) == "ou" ? 0.0 : -1.0;
    const double zT = std::string(name) == "ou" ? 0.8 : 1.0;
    TimeGrid g(2.0, 400);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto z = oracles::random_smooth_path(g, z0, zT, 7000 + s);
      const double fw = fw_sde(drift, z, z0).value;
      const double corr = om_correction(drift, z);
      for (double eps : eps_list) {
        const double om = om_sde(drift, z, eps, z0).value;
        worst_identity =
            std::max(worst_identity, std::fabs(eps * eps * om - fw - eps * eps * corr));
        const double ratio =
            pointwise_gap(drift, z, eps) / pointwise_gap(drift, z, eps / 2.0);
        worst_ratio_dev = std::max(worst_ratio_dev, std::fabs(ratio - 4.0));
      }
    }
  }
  const bool pass = worst_identity <= 1e-10 && worst_ratio_dev <= 1e-6;
  report(1, "pointwise-convergence identity", pass,
         fmt1("max |identity residual| = %.3e", worst_identity) +
             fmt1(", max |gap ratio - 4| = %.3e", worst_ratio_dev));
}

// --- C2: mode convergence along the eps ladder.
void criterion2() {
  const std::vector<double> ladder{1.0, 0.5, 0.2, 0.1, 0.05};

  Constraints pins;
  pins.pin_start = -1.0;
  pins.pin_end = 1.0;
  TimeGrid g(5.0, 1000);
  const DriftModel dw = preset_drift("double_well");
  const auto sweep = eps_sweep(dw, g, pins, ladder);

  TimeGrid fine(5.0, 8000);
  const auto fw_fine =
      minimize(fw_path_objective(dw, -1.0), linear_path(fine, -1.0, 1.0), pins);
  std::vector<double> down(static_cast<std::size_t>(g.n_nodes()));
  for (int i = 0; i < g.n_nodes(); ++i)
    down[static_cast<std::size_t>(i)] = fw_fine.path.values[static_cast<std::size_t>(8 * i)];
  const DiscretePath fw_ref(g, down);

  bool decreasing = true;
  for (std::size_t i = 1; i < sweep.distances.size(); ++i)
    if (!(sweep.distances[i] < sweep.distances[i - 1])) decreasing = false;
  const double final_dist = sup_distance(sweep.entries.back().result.path, fw_ref);

  const DriftModel ou = preset_drift("ou", 1.0);
  const auto ou_sweep = eps_sweep(ou, g, pins, ladder);
  double ou_worst = 0.0;
  for (double d : ou_sweep.distances) ou_worst = std::max(ou_worst, d);

  std::string detail = "double-well distances = {";
  for (std::size_t i = 0; i < sweep.distances.size(); ++i)
    detail += fmt1(i ? ", %.3e" : "%.3e", sweep.distances[i]);
  detail += fmt1("}, final vs fine-grid FW = %.3e (need <= 1e-3, decreasing)", final_dist);
  detail += fmt1("; ou max distance = %.3e (need <= 1e-8)", ou_worst);
  const bool pass = decreasing && final_dist <= 1e-3 && ou_worst <= 1e-8;
  report(2, "mode convergence", pass, detail);
}

// --- C3: closed-form functional values.
void criterion3() {
  TimeGrid g(1.0, 4000);
  const auto line = linear_path(g, 0.0, 1.0);
  const DriftModel ou = preset_drift("ou", 1.0);
  const double om = om_sde(ou, line, 0.5).value;
  const double fw = fw_sde(ou, line).value;

  TimeGrid gp(1.0, 2000);
  PathDependentModel pd([](double) { return 1.0; }, [](double t) { return t; }, gp);
  const double pd_val = path_dependent_cm_half_norm(pd, linear_path(gp, 0.0, 1.0));
  const double pd_target = (1.0 - std::exp(-2.0)) / 4.0;

  const std::size_t n = 1000000;
  const auto sys = algebraic_system_preset(harmonic_weights(n), "zero");
  const double alg = algebraic_fw(sys, std::vector<double>(n, 1.0)).value;

  const bool pass = std::fabs(om - 25.0 / 6.0) <= 1e-6 &&
                    std::fabs(fw - 7.0 / 6.0) <= 1e-6 &&
                    std::fabs(pd_val - pd_target) <= 1e-5 &&
                    std::fabs(alg - 0.822467) <= 1e-5;
  report(3, "closed-form values", pass,
         fmt1("om-25/6 = %.2e", om - 25.0 / 6.0) + fmt1(", fw-7/6 = %.2e", fw - 7.0 / 6.0) +
             fmt1(", path-dependent dev = %.2e", pd_val - pd_target) +
             fmt1(", algebraic dev = %.2e", alg - 0.822467));
}

// --- C4: variational oracle for the pinned OU bridge + gradient checks.
void criterion4() {
  TimeGrid g(1.0, 2000);
  Constraints pins;
  pins.pin_start = 0.0;
  pins.pin_end = 1.0;
  const DriftModel ou = preset_drift("ou", 1.0);
  const auto res = minimize(fw_path_objective(ou, 0.0), linear_path(g, 0.0, 1.0), pins);
  const auto oracle =
      path_from_function(g, [](double t) { return std::sinh(t) / std::sinh(1.0); });
  const double dist = sup_distance(res.path, oracle);
  const double closed = (std::exp(2.0) - 1.0) / (4.0 * std::sinh(1.0) * std::sinh(1.0));
  const double vdev = std::fabs(res.value - closed);

  // Analytic gradient vs central finite differences across the presets.
  double worst_rel = 0.0;
  TimeGrid gg(1.0, 200);
  for (const char* name : {"zero", "ou", "double_well"}) {
    const DriftModel drift =
        std::string(name) == "ou" ? preset_drift("ou", 1.0) : preset_drift(name);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto z = oracles::random_smooth_path(gg, 0.0, 0.8, 8800 + s);
      for (const auto& obj :
           {fw_path_objective(drift, 0.0), om_path_objective(drift, 0.7, 0.0)}) {
        const auto grad = obj.gradient(z);
        for (int k = 1; k < gg.n_nodes() - 1; k += 11) {
          const double h =
              6e-6 * std::max(1.0, std::fabs(z.values[static_cast<std::size_t>(k)]));
          DiscretePath zp = z, zm = z;
          zp.values[static_cast<std::size_t>(k)] += h;
          zm.values[static_cast<std::size_t>(k)] -= h;
          const double fd = (obj.value(zp) - obj.value(zm)) / (2.0 * h);
          const double denom = std::max(
              {1e-10, std::fabs(fd), std::fabs(grad[static_cast<std::size_t>(k)])});
          worst_rel = std::max(
              worst_rel, std::fabs(fd - grad[static_cast<std::size_t>(k)]) / denom);
        }
      }
    }
  }
  const bool pass = res.converged && dist <= 1e-5 && vdev <= 1e-5 && worst_rel <= 1e-6;
  report(4, "variational oracle", pass,
         fmt1("sup|mode - sinh| = %.2e", dist) + fmt1(", |value - closed form| = %.2e", vdev) +
             fmt1(", worst gradient rel err = %.2e", worst_rel));
}

// --- C5: the OM definition by Monte Carlo.
void criterion5() {
  const DriftModel zero = preset_drift("zero");

  // Scalar case: N(0,1) against the error-function oracle.
  TimeGrid g1(1.0, 1);
  const auto z1 = linear_path(g1, 0.0, 1.0);
  const auto z2 = constant_path(g1, 0.0);
  const auto ens = simulate(zero, 1.0, g1, 10000000, 424242);
  const std::vector<double> deltas{0.8, 0.6, 0.4, 0.3, 0.05};
  const auto ladder = small_ball_ladder(ens, z1, z2, deltas);

  const double d = 0.05;
  const double oracle =
      (oracles::normal_cdf(1.0 + d) - oracles::normal_cdf(1.0 - d)) /
      (oracles::normal_cdf(d) - oracles::normal_cdf(-d));
  const RatioEstimate& at005 = ladder.back();
  const bool ci_covers = !at005.flag_undefined && at005.ci_low <= oracle &&
                         oracle <= at005.ci_high;

  const double limit = std::exp(-0.5);
  bool monotone = true;
  for (std::size_t i = 1; i + 1 < ladder.size(); ++i)
    if (!(ladder[i].point_estimate < ladder[i - 1].point_estimate)) monotone = false;
  const bool approaches =
      std::fabs(ladder[ladder.size() - 2].point_estimate - limit) <
      std::fabs(ladder.front().point_estimate - limit);

  // 8-node Brownian case against an independent direct-MC oracle
  // (std::mt19937_64 + std::normal_distribution, separate code path).
  TimeGrid g8(1.0, 8);
  const auto w1 = linear_path(g8, 0.0, 0.5);
  const auto w2 = constant_path(g8, 0.0);
  const double delta8 = 0.4;
  const auto ens8 = simulate(zero, 1.0, g8, 10000000, 777001);
  const auto est8 = small_ball_ratio(ens8, w1, w2, delta8);

  std::mt19937_64 orng(20240807);
  std::normal_distribution<double> normal(0.0, std::sqrt(1.0 / 8.0));
  const std::int64_t n_oracle = 20000000;
  std::int64_t oh1 = 0, oh2 = 0, oboth = 0;
  for (std::int64_t i = 0; i < n_oracle; ++i) {
    double x = 0.0, dev1 = 0.0, dev2 = 0.0;
    for (int j = 1; j <= 8; ++j) {
      x += normal(orng);
      dev1 = std::max(dev1, std::fabs(x - 0.5 * (j / 8.0)));
      dev2 = std::max(dev2, std::fabs(x));
    }
    const bool in1 = dev1 <= delta8, in2 = dev2 <= delta8;
    oh1 += in1;
    oh2 += in2;
    oboth += in1 && in2;
  }
  const double op1 = static_cast<double>(oh1) / n_oracle;
  const double op2 = static_cast<double>(oh2) / n_oracle;
  const double op12 = static_cast<double>(oboth) / n_oracle;
  const double oracle_log_ratio = std::log(op1 / op2);
  const double oracle_var = (1.0 - op1) / (n_oracle * op1) +
                            (1.0 - op2) / (n_oracle * op2) -
                            2.0 * (op12 - op1 * op2) / (n_oracle * op1 * op2);

  const double impl_log_ratio = std::log(est8.point_estimate);
  const double impl_half = 0.5 * (std::log(est8.ci_high) - std::log(est8.ci_low));
  const double impl_var = std::pow(impl_half / 1.959963984540054, 2);
  const double log_dev = std::fabs(impl_log_ratio - oracle_log_ratio);
  const double band = 3.0 * std::sqrt(std::max(0.0, impl_var + oracle_var));
  const bool eight_ok = !est8.flag_undefined && log_dev <= band;

  const bool pass = ci_covers && monotone && approaches && eight_ok;
  report(5, "OM definition by Monte Carlo", pass,
         fmt1("scalar CI [%.4f", at005.ci_low) + fmt1(", %.4f]", at005.ci_high) +
             fmt1(" covers %.4f", oracle) +
             (monotone && approaches ? "; ladder monotone toward e^{-1/2}"
                                     : "; ladder NOT monotone") +
             fmt1("; 8-node |dlog| = %.4f", log_dev) + fmt1(" <= %.4f", band));
}

// --- C6: LDP decay rate for the terminal event.
void criterion6() {
  const DriftModel zero = preset_drift("zero");
  TimeGrid g(1.0, 16);
  const std::vector<double> eps{1.0, 0.7, 0.5, 0.4};
  const auto rate =
      ldp_rate(zero, event_terminal_at_least(1.0), eps, 10000000, 99120, g);
  bool bands = true;
  double worst_pull = 0.0;
  for (const auto& e : rate.entries) {
    if (!e.defined) {
      bands = false;
      continue;
    }
    const double target = e.eps * e.eps * std::log(oracles::normal_tail(1.0 / e.eps));
    const double pulls = std::fabs(e.scaled_log - target) / e.se;
    worst_pull = std::max(worst_pull, pulls);
    if (pulls > 3.0) bands = false;
  }
  TimeGrid vg(1.0, 400);
  const double fw_inf =
      fw_infimum_over_event(zero, EventShape::terminal_at_least, 1.0, vg);
  const double rate_dev = std::fabs(rate.extrapolated + fw_inf);
  const bool pass = bands && rate.extrapolation_defined && rate_dev <= 0.05;
  report(6, "LDP rate vs Gaussian tail", pass,
         fmt1("worst |dev|/se = %.2f", worst_pull) +
             fmt1(", extrapolated = %.4f", rate.extrapolated) +
             fmt1(", -inf FW = %.4f", -fw_inf) + fmt1(", |sum| = %.4f <= 0.05", rate_dev));
}

// --- C7: consistency triangle between the three FW derivations.
void criterion7() {
  TimeGrid g(1.5, 256);
  const auto spec = wiener_spec(g, 1.0);
  double worst = 0.0;
  for (const char* name : {"zero", "ou", "double_well"}) {
    const DriftModel drift =
        std::string(name) == "ou" ? preset_drift("ou", 1.0) : preset_drift(name);
    const auto expansion = sde_expansion(drift, g);
    const auto h = h_from_drift(drift);
    for (std::uint64_t s = 0; s < 100; ++s) {
      const auto z = oracles::random_smooth_path(g, 0.0, 0.8, 5100 + s);
      const double a = fw_sde(drift, z).value;
      const double b = fw_girsanov_residual(spec, h, z).value;
      const double c = fw_tilted(spec, expansion, z, false).value;
      const double scale = std::max({1.0, std::fabs(a), std::fabs(b), std::fabs(c)});
      worst = std::max({worst, std::fabs(a - b) / scale, std::fabs(a - c) / scale,
                        std::fabs(b - c) / scale});
    }
  }
  report(7, "FW consistency triangle", worst <= 1e-8,
         fmt1("worst pairwise relative deviation = %.3e (need <= 1e-8)", worst));
}

// --- C8: Girsanov normalization.
void criterion8() {
  const DriftModel ou = preset_drift("ou", 1.0);
  TimeGrid g(1.0, 128);
  bool pass = true;
  std::string detail;
  for (double eps : {1.0, 0.5}) {
    const auto wm = girsanov_weight_mean(ou, eps, g, 1000000, 600 + (eps < 1.0));
    const double pulls = std::fabs(wm.mean - 1.0) / wm.se;
    if (pulls > 3.0) pass = false;
    detail += fmt1("eps=%.1f: ", eps) + fmt1("mean=%.6f ", wm.mean) +
              fmt1("(|dev|/se=%.2f) ", pulls);
  }
  report(8, "Girsanov normalization", pass, detail + "(need <= 3)");
}

// --- C9: Gamma-diagnostic sanity for the OU family at the FW mode.
void criterion9() {
  const DriftModel ou = preset_drift("ou", 1.0);
  TimeGrid g(1.0, 200);
  Constraints pins;
  pins.pin_start = 0.0;
  pins.pin_end = 1.0;
  const auto mode = minimize(fw_path_objective(ou, 0.0), linear_path(g, 0.0, 1.0), pins);
  const auto report9 = gamma_diagnostic(
      om_family(ou, 0.0), mode.path, {1e-1, 3e-2, 1e-2, 3e-3},
      {3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4}, 256, mode.value);
  bool liminf_ok = true;
  double worst_slack = 0.0;
  for (const auto& r : report9.radii)
    if (r.radius <= 1e-2) {
      worst_slack = std::max(worst_slack, mode.value - r.liminf_estimate);
      if (!(r.liminf_estimate >= mode.value - 1e-3)) liminf_ok = false;
    }
  const bool pass = liminf_ok && report9.recovery_gap <= 1e-8;
  report(9, "Gamma-diagnostic sanity", pass,
         fmt1("worst liminf slack at r <= 1e-2: %.3e (need <= 1e-3)", worst_slack) +
             fmt1(", recovery gap = %.3e (need <= 1e-8)", report9.recovery_gap));
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
