// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <invlab/dynamics.hpp>
#include <invlab/optimal.hpp>
#include <invlab/protocols.hpp>
#include <invlab/rng.hpp>
#include <invlab/sensitivity.hpp>
#include <invlab/sweeps.hpp>

#ifndef INVLAB_CLI_PATH
#error "INVLAB_CLI_PATH must point at the invlab executable"
#endif

using namespace invlab;
namespace fs = std::filesystem;

namespace {

constexpr double kQuarterPiSq = pi * pi / 4.0;
constexpr double kOptimalQn = 1.82424;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s | %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

double p2_pure(const ControlField& f, double beta) {
  return std::norm(evolve_pure(f, PureState::ground(), beta).final_state().c2);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main() {
  const TimeGrid grid;

  report(1, "flat pi: q_N formula/analytic and q_S equal pi^2/4", [&] {
    Outcome o;
    const ControlField f = make_flat_pi(0.0, grid);
    const double a = *qn_formula(f).q_n;
    const double b = *qn_pi_analytic(f).q_n;
    const double c = *qs_formula(f).q_s;
    o.require(std::abs(a - kQuarterPiSq) <= 1e-6, "qn_formula=" + num(a));
    o.require(std::abs(b - kQuarterPiSq) <= 1e-6, "qn_pi_analytic=" + num(b));
    o.require(std::abs(c - kQuarterPiSq) <= 1e-6, "qs_formula=" + num(c));
    return o;
  });

  report(2, "optimal noise q_N and approximate theta", [&] {
    Outcome o;
    const ControlField f = make_optimal_noise(7, grid);
    const double a = *qn_formula(f).q_n;
    const double b = *qn_finite_difference(f).q_n;
    const auto zero = TimeFunction::constant(0.0);
    const ControlField approx = make_invariant_engineered(
        InvariantAngles(approximate_optimal_theta(), TimeFunction::constant(pi / 4), zero), grid);
    const double c = *qn_formula(approx).q_n;
    o.require(std::abs(a - kOptimalQn) <= 1e-3, "formula=" + num(a));
    o.require(std::abs(b - kOptimalQn) <= 0.01 * kOptimalQn, "finite_difference=" + num(b));
    o.require(std::abs(c - 1.82538) <= 1e-3, "approximate=" + num(c));
    return o;
  });

  report(3, "transitionless example q_N and bare reference", [&] {
    Outcome o;
    const double q = *qn_formula(make_transitionless(kExampleOmega0, kExampleDelta0, grid)).q_n;
    const double p = final_p2(make_sinusoidal(kExampleOmega0, kExampleDelta0, grid));
    o.require(std::abs(q - 3.21) <= 0.02 * 3.21, "q_N=" + num(q));
    o.require(p < 0.999, "reference P2=" + num(p));
    return o;
  });

  report(4, "q_N surface minimum near (0.5, 0.5)", [&] {
    Outcome o;
    const SweepResult r = sweep_qn_transitionless(default_omega0_axis(), default_delta0_axis(), grid);
    const auto [i, j] = r.argmin();
    const double x = r.grid_spec.axis1[i];
    const double y = (*r.grid_spec.axis2)[j];
    const double v = *r.at(i, j);
    o.require(std::abs(x - 0.5) <= r.grid_spec.axis1.spacing() + 1e-12 &&
                  std::abs(y - 0.5) <= r.grid_spec.axis2->spacing() + 1e-12,
              "argmin=(" + num(x) + ", " + num(y) + ")");
    o.require(std::abs(v - 2.475) <= 0.02 * 2.475, "min=" + num(v));
    std::size_t missing = 0;
    for (const auto& c : r.values) missing += c ? 0 : 1;
    o.require(missing == 0, "missing=" + std::to_string(missing));
    return o;
  });

  report(5, "zero-systematic family", [&] {
    Outcome o;
    for (int n : {1, 2, 3}) {
      const auto theta = linear_theta();
      const double q = qs_invariant(InvariantAngles(theta, TimeFunction::constant(0.0), zero_systematic_gamma(theta, n)), grid);
      o.require(q <= 1e-10, "qs_invariant(n=" + std::to_string(n) + ")=" + num(q));
    }
    const ControlField f = make_optimal_systematic(1, grid);
    const double qs = *qs_formula(f).q_s;
    o.require(qs <= 1e-8, "qs_formula(n=1)=" + num(qs));
    const SweepResult curve = robustness_curve(f, RobustnessVariable::beta, {"beta", 0.0, 0.05, 2});
    o.require(*curve.at(1) >= 1.0 - 1e-3, "P2(0.05)=" + num(*curve.at(1)));
    return o;
  });

  report(6, "pi-pulse q_S universality and beta closed form", [&] {
    Outcome o;
    const std::vector<std::pair<std::string, std::function<double(double)>>> envelopes{
        {"flat", [](double) { return 1.0; }},
        {"sine", [](double t) { return std::sin(pi * t); }},
        {"sine2", [](double t) { return std::pow(std::sin(pi * t), 2); }},
        {"gaussian", [](double t) { return std::exp(-0.5 * std::pow((t - 0.5) / 0.15, 2)); }}};
    for (const auto& [name, env] : envelopes) {
      const double q = *qs_formula(make_shaped_pi(env, 0.0, grid)).q_s;
      o.require(std::abs(q - kQuarterPiSq) <= 1e-6, name + "=" + num(q));
    }
    const ControlField f = make_flat_pi(0.0, grid);
    double worst = 0.0;
    for (double beta : {-1.0, -0.5, 0.3, 1.0}) {
      worst = std::max(worst, std::abs(p2_pure(f, beta) - (0.5 - 0.5 * std::cos((1.0 + beta) * pi))));
    }
    o.require(worst <= 1e-8, "max closed-form deviation=" + num(worst));
    return o;
  });

  report(7, "flat real pi pulse under noise matches closed form", [&] {
    Outcome o;
    const ControlField f = make_flat_pi(0.0, grid);
    double worst = 0.0;
    for (double lambda : {0.1, 0.5, 1.0}) {
      const double exact = 0.5 + 0.5 * std::exp(-lambda * lambda * pi * pi / 2.0);
      worst = std::max(worst, std::abs(final_p2(f, {0.0, lambda * lambda}) - exact));
    }
    o.require(worst <= 1e-8, "max deviation=" + num(worst));
    return o;
  });

  report(8, "SSE ensemble agrees with the master equation", [&] {
    Outcome o;
    const double lambda2 = 0.3 * 0.3;
    for (const ControlField& f : {make_flat_pi(0.0, grid), make_optimal_noise(7, grid)}) {
      const EnsembleResult mc = monte_carlo_p2(f, lambda2, 10000, 1.0 / 4000, 20120915);
      const double master = final_p2(f, {0.0, lambda2});
      const double gap = std::abs(mc.p2_mean - master);
      o.require(gap < 3.0 * mc.p2_stderr && mc.p2_stderr < 0.005,
                f.label() + ": |mc-master|=" + num(gap) + " stderr=" + num(mc.p2_stderr));
    }
    return o;
  });

  report(9, "q_N lower bound over random pi envelopes", [&] {
    Outcome o;
    const rng::CounterStream stream(9, 0);
    double lowest = HUGE_VAL;
    for (std::uint64_t k = 0; k < 50; ++k) {
      const auto [a, b] = stream.uniform_pair(3 * k);
      const auto [c, d] = stream.uniform_pair(3 * k + 1);
      const auto [e, g] = stream.uniform_pair(3 * k + 2);
      const auto env = [=](double t) {
        return a + b * std::sin(pi * t) + c * std::pow(std::sin(2.0 * pi * t), 2) + d * t + e * std::exp(-g * 10.0 * t);
      };
      lowest = std::min(lowest, *qn_formula(make_shaped_pi(env, 0.0, grid)).q_n);
    }
    const double flat = *qn_formula(make_flat_pi(0.0, grid)).q_n;
    o.require(lowest > kQuarterPiSq + 1e-6, "lowest random q_N=" + num(lowest));
    o.require(std::abs(flat - kQuarterPiSq) <= 1e-6, "flat=" + num(flat));
    return o;
  });

  report(10, "variational margin of the optimal theta", [&] {
    Outcome o;
    const auto zero = TimeFunction::constant(0.0);
    const InvariantAngles candidate =
        InvariantAngles(solve_optimal_theta(grid).function, TimeFunction::constant(pi / 4), zero).with_m(zero);
    const StationarityReport r = verify_stationarity(candidate, grid, 0.05, 20);
    double lowest = HUGE_VAL;
    for (double q : r.perturbed_qn) lowest = std::min(lowest, q);
    o.require(r.perturbed_qn.size() == 20, "perturbations=" + std::to_string(r.perturbed_qn.size()));
    o.require(lowest >= kOptimalQn - 1e-6, "lowest perturbed q_N=" + num(lowest));
    return o;
  });

  report(11, "formula vs finite-difference for every generator", [&] {
    Outcome o;
    const std::vector<ControlField> fields{
        make_flat_pi(0.0, grid),
        make_shaped_pi([](double t) { return std::sin(pi * t); }, 0.0, grid),
        make_transitionless(kExampleOmega0, kExampleDelta0, grid),
        make_invariant_engineered(InvariantAngles(approximate_optimal_theta(), TimeFunction::constant(0.3),
                                                  zero_systematic_gamma(approximate_optimal_theta(), 0.5)),
                                  grid),
        make_optimal_noise(7, grid),
        make_optimal_systematic(1, grid)};
    const auto agree = [](double a, double ea, double b, double eb) {
      return std::abs(a - b) <= std::max(0.01 * std::abs(a), ea + eb);
    };
    for (const auto& f : fields) {
      const auto qa = qn_formula(f);
      const auto qb = qn_finite_difference(f);
      const auto sa = qs_formula(f);
      const auto sb = qs_finite_difference(f);
      const bool ok = agree(*qa.q_n, qa.error_estimate, *qb.q_n, qb.error_estimate) &&
                      agree(*sa.q_s, sa.error_estimate, *sb.q_s, sb.error_estimate);
      o.require(ok, f.label() + " q_N " + num(*qa.q_n) + "/" + num(*qb.q_n) + " q_S " + num(*sa.q_s) + "/" +
                        num(*sb.q_s));
    }
    // The bare sinusoidal reference does not invert, so the formulas are undefined for it.
    const ControlField bare = make_sinusoidal(kExampleOmega0, kExampleDelta0, grid);
    int refused = 0;
    for (const auto& fn : std::vector<std::function<void()>>{[&] { qn_formula(bare); }, [&] { qs_formula(bare); }}) {
      try {
        fn();
      } catch (const PreconditionError&) {
        ++refused;
      }
    }
    o.require(refused == 2, "sinusoidal reference: formulas refused " + std::to_string(refused) + "/2");
    return o;
  });

  report(12, "CLI outputs byte-identical across runs and thread counts", [&] {
    Outcome o;
    const fs::path dir = fs::temp_directory_path() / "invlab_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<std::string> sse, sweep, sens;
    int run = 0;
    for (const char* threads : {"1", "1", "8", "8"}) {
      const std::string tag = std::to_string(run++);
      const std::string prefix = std::string("INVLAB_THREADS=") + threads + " \"" + INVLAB_CLI_PATH + "\" ";
      const fs::path sse_out = dir / ("sse" + tag + ".json");
      const fs::path sens_out = dir / ("sens" + tag + ".json");
      const fs::path sweep_dir = dir / ("sweep" + tag);
      fs::create_directories(sweep_dir);
      const std::string cmds[] = {
          prefix + "simulate --kind optimal_noise --n 7 --lambda2 0.09 --sse --n-traj 4000 --seed 42 --out \"" +
              sse_out.string() + "\"",
          prefix + "sensitivity --kind transitionless --method both --out \"" + sens_out.string() + "\"",
          prefix + "sweep --figure 7 --grid-steps 501 --out \"" + sweep_dir.string() + "\" > /dev/null"};
      for (const auto& cmd : cmds) {
        const int status = std::system(cmd.c_str());
        if (status != 0) o.require(false, "exit status " + std::to_string(status) + " for: " + cmd);
      }
      sse.push_back(slurp(sse_out));
      sens.push_back(slurp(sens_out));
      std::string all;
      for (const char* name : {"fig7_transitionless", "fig7_optimal_systematic", "fig7_optimal_noise"}) {
        all += slurp(sweep_dir / (std::string(name) + ".csv")) + slurp(sweep_dir / (std::string(name) + ".json"));
      }
      sweep.push_back(all);
    }
    const auto same = [](const std::vector<std::string>& v) {
      for (const auto& s : v) {
        if (s.empty() || s != v.front()) return false;
      }
      return true;
    };
    o.require(same(sse), "simulate --sse");
    o.require(same(sens), "sensitivity");
    o.require(same(sweep), "sweep --figure 7");
    return o;
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "OK" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}
