#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <invlab/protocols.hpp>
#include <invlab/rng.hpp>
#include <invlab/sensitivity.hpp>

using namespace invlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kQuarterPiSq = pi * pi / 4.0;

double gk(const std::function<double(double)>& f) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-14);
}

}  // namespace

TEST_CASE("flat pi pulse sensitivities") {
  const ControlField f = make_flat_pi(0.0, TimeGrid());
  CHECK_THAT(*qn_formula(f).q_n, WithinAbs(kQuarterPiSq, 1e-6));
  CHECK_THAT(*qn_pi_analytic(f).q_n, WithinAbs(kQuarterPiSq, 1e-6));
  CHECK_THAT(*qs_formula(f).q_s, WithinAbs(kQuarterPiSq, 1e-6));
  CHECK_THAT(*qn_finite_difference(f).q_n, WithinRel(kQuarterPiSq, 0.01));
  CHECK_THAT(*qs_finite_difference(f).q_s, WithinRel(kQuarterPiSq, 0.01));
  const auto report = qn_formula(f);
  CHECK_FALSE(report.q_s.has_value());
  CHECK(report.method == SensitivityMethod::formula);
  CHECK(report.n_steps == 2001);
  CHECK(report.error_estimate >= 0.0);
}

TEST_CASE("q_N of a real pi pulse scales as 1/T") {
  const ControlField f = make_flat_pi(0.0, TimeGrid(2001, 2.0));
  CHECK_THAT(*qn_formula(f).q_n, WithinAbs(kQuarterPiSq / 2.0, 1e-6));
  CHECK_THAT(*qs_formula(f).q_s, WithinAbs(kQuarterPiSq, 1e-6));
}

TEST_CASE("sine envelope pi pulse") {
  const ControlField f = make_shaped_pi([](double t) { return std::sin(pi * t); }, 0.0, TimeGrid());
  // (1/4)(pi^2/2)^2 (1/2)
  CHECK_THAT(*qn_pi_analytic(f).q_n, WithinAbs(std::pow(pi, 4) / 32.0, 1e-8));
  CHECK_THAT(*qn_formula(f).q_n, WithinAbs(std::pow(pi, 4) / 32.0, 1e-6));
}

TEST_CASE("analytic pi formula rejects other fields") {
  const TimeGrid grid;
  CHECK_THROWS_AS(qn_pi_analytic(make_flat_pi(0.5, grid)), PreconditionError);
  CHECK_THROWS_AS(qn_pi_analytic(make_transitionless(3.0, 2.0, grid)), PreconditionError);
  const ControlField half = make_flat_pi(0.0, TimeGrid(2001, 2.0)).relabeled("half");
  CHECK_NOTHROW(qn_pi_analytic(half));
}

TEST_CASE("formulas require an inverting protocol") {
  const ControlField f = make_sinusoidal(4.0, 5.0, TimeGrid());
  CHECK_THROWS_AS(qn_formula(f), PreconditionError);
  CHECK_THROWS_AS(qs_formula(f), PreconditionError);
  // The curvature fit is defined without inversion.
  CHECK(*qn_finite_difference(f).q_n >= 0.0);
}

TEST_CASE("finite-difference fits reject degenerate samples") {
  const ControlField f = make_flat_pi(0.0, TimeGrid());
  CHECK_THROWS_AS(qn_finite_difference(f, {0.01, 0.01, 0.01}), FitDegeneracyError);
  CHECK_THROWS_AS(qn_finite_difference(f, {0.01, 0.02}), FitDegeneracyError);
  CHECK_THROWS_AS(qs_finite_difference(f, {0.0, 0.01, 0.01}), FitDegeneracyError);
  CHECK_THROWS_AS(qn_finite_difference(f, {-0.01, 0.01, 0.02}), ValidationError);
  CHECK_THROWS_AS(qn_finite_difference(f, {0.1, 0.2, 0.3}), PreconditionError);
}

TEST_CASE("optimal noise protocol sensitivity") {
  const ControlField f = make_optimal_noise(7, TimeGrid());
  // c = int_0^pi sqrt(3 + cos 2u) du, q_N = c^2 / 16
  const double c = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double u) { return std::sqrt(3.0 + std::cos(2.0 * u)); }, 0.0, pi, 15, 1e-15);
  CHECK_THAT(c * c / 16.0, WithinAbs(1.82424, 5e-6));
  CHECK_THAT(*qn_formula(f).q_n, WithinAbs(c * c / 16.0, 1e-7));
  CHECK_THAT(*qn_finite_difference(f).q_n, WithinRel(1.82424, 0.01));
}

TEST_CASE("transitionless example sensitivities") {
  const ControlField f = make_transitionless(5.57 / 4.3 * pi, std::pow(5.57 / 4.3, 2) * pi, TimeGrid());
  CHECK_THAT(*qn_formula(f).q_n, WithinRel(3.21, 0.02));
  CHECK(*qs_formula(f).q_s < kQuarterPiSq);
  const ControlField small = make_transitionless(0.5, 0.5, TimeGrid());
  CHECK_THAT(*qn_formula(small).q_n, WithinRel(2.475, 0.02));
}

TEST_CASE("zero systematic family") {
  const TimeGrid grid;
  for (int n : {1, 2, 3}) {
    const auto theta = linear_theta();
    const InvariantAngles angles(theta, TimeFunction::constant(0.0), zero_systematic_gamma(theta, n));
    CHECK(qs_invariant(angles, grid) <= 1e-10);
  }
  const ControlField f = make_optimal_systematic(1, grid);
  CHECK(*qs_formula(f).q_s <= 1e-8);
  CHECK(std::abs(*qs_finite_difference(f).q_s) < 1e-3);
}

TEST_CASE("qs_invariant closed form for non-integer n") {
  const TimeGrid grid;
  for (double n : {0.5, 0.25, 1.5}) {
    const auto theta = approximate_optimal_theta();
    const InvariantAngles angles(theta, TimeFunction::constant(0.0), zero_systematic_gamma(theta, n));
    const double expected = std::pow(std::sin(n * pi), 2) / (4.0 * n * n);
    CHECK_THAT(qs_invariant(angles, grid), WithinAbs(expected, 1e-8));
  }
}

TEST_CASE("qs_invariant with constant gamma is theta independent") {
  const TimeGrid grid;
  const auto gamma = TimeFunction::constant(0.8);
  const auto alpha = TimeFunction::constant(0.0);
  const std::vector<TimeFunction> thetas{
      linear_theta(), approximate_optimal_theta(),
      TimeFunction::closed_form([](double t) { return pi * t * t; }, [](double t) { return 2.0 * pi * t; })};
  for (const auto& th : thetas) {
    CHECK_THAT(qs_invariant(InvariantAngles(th, alpha, gamma), grid), WithinAbs(kQuarterPiSq, 1e-9));
  }
}

TEST_CASE("qs_invariant agrees with qs_formula on the generated field") {
  const TimeGrid grid;
  const auto theta = approximate_optimal_theta();
  const auto alpha = TimeFunction::closed_form([](double t) { return 0.4 * t * t; }, [](double t) { return 0.8 * t; });
  for (double n : {0.3, 0.5, 2.0}) {
    const InvariantAngles angles(theta, alpha, zero_systematic_gamma(theta, n));
    const ControlField f = make_invariant_engineered(angles, grid);
    CHECK_THAT(*qs_formula(f).q_s, WithinAbs(qs_invariant(angles, grid), 1e-6));
  }
}

TEST_CASE("pi pulse q_S is independent of the envelope") {
  const TimeGrid grid;
  const std::vector<std::function<double(double)>> envelopes{
      [](double t) { return std::sin(pi * t); }, [](double t) { return std::pow(std::sin(pi * t), 2); },
      [](double t) { return std::exp(-0.5 * std::pow((t - 0.5) / 0.15, 2)); }, [](double t) { return 1.0 + t; }};
  for (const auto& e : envelopes) {
    CHECK_THAT(*qs_formula(make_shaped_pi(e, 0.7, grid)).q_s, WithinAbs(kQuarterPiSq, 1e-6));
  }
}

TEST_CASE("Lagrangian matches the formula on generated fields") {
  const TimeGrid grid;
  const auto theta = approximate_optimal_theta();
  const InvariantAngles flat(linear_theta(), TimeFunction::constant(0.0), TimeFunction::constant(0.0));
  CHECK_THAT(qn_lagrangian(flat, grid), WithinAbs(kQuarterPiSq, 1e-9));
  const InvariantAngles quarter(theta, TimeFunction::constant(pi / 4), TimeFunction::constant(0.0));
  // m = 0, alpha = pi/4: L = Theta'^2 (3 + cos 2 Theta) / 16
  const double oracle = gk([&](double t) {
    const double d = theta.derivative(t);
    return d * d * (3.0 + std::cos(2.0 * theta(t))) / 16.0;
  });
  CHECK_THAT(qn_lagrangian(quarter, grid), WithinAbs(oracle, 1e-9));
  CHECK_THAT(oracle, WithinAbs(1.82538, 1e-5));

  const auto alpha = TimeFunction::closed_form([](double t) { return 0.3 + 0.2 * t; }, [](double) { return 0.2; });
  const InvariantAngles general(theta, alpha, zero_systematic_gamma(theta, 0.7));
  const ControlField f = make_invariant_engineered(general, grid);
  CHECK_THAT(qn_lagrangian(general, grid), WithinAbs(*qn_formula(f).q_n, 1e-6));
}

TEST_CASE("noise Lagrangian reduces for alpha = 0, m = 0") {
  for (double th : {0.0, 0.5, 1.3, 2.9}) {
    CHECK_THAT(noise_lagrangian(0.0, 0.0, th, 2.0), WithinAbs(1.0, 1e-14));
  }
}

TEST_CASE("Schwartz bound over random envelopes") {
  const TimeGrid grid;
  const rng::CounterStream stream(2024, 1);
  for (std::uint64_t k = 0; k < 25; ++k) {
    const auto [a, b] = stream.uniform_pair(2 * k);
    const auto [c, d] = stream.uniform_pair(2 * k + 1);
    const auto env = [=](double t) { return 0.2 + a * std::sin(pi * t) + b * std::pow(std::sin(2 * pi * t), 2) + c * d * t; };
    const ControlField f = make_shaped_pi(env, 0.0, grid);
    CHECK(*qn_pi_analytic(f).q_n >= kQuarterPiSq);
    CHECK(*qn_formula(f).q_n >= kQuarterPiSq - 1e-9);
  }
}

TEST_CASE("dual-method agreement for the generators") {
  const TimeGrid grid;
  const std::vector<ControlField> fields{
      make_flat_pi(0.3, grid), make_shaped_pi([](double t) { return std::sin(pi * t); }, 0.0, grid),
      make_transitionless(3.0, 4.0, grid), make_optimal_noise(3, grid), make_optimal_systematic(2, grid)};
  for (const auto& f : fields) {
    const auto a = qn_formula(f);
    const auto b = qn_finite_difference(f);
    CHECK(std::abs(*a.q_n - *b.q_n) <= std::max(0.01 * *a.q_n, a.error_estimate + b.error_estimate));
    const auto c = qs_formula(f);
    const auto d = qs_finite_difference(f);
    CHECK(std::abs(*c.q_s - *d.q_s) <= std::max(0.01 * *c.q_s, c.error_estimate + d.error_estimate));
  }
}

TEST_CASE("optimal noise beats other tested protocols") {
  const TimeGrid grid;
  const double best = *qn_formula(make_optimal_noise(1, grid)).q_n;
  CHECK(best < *qn_formula(make_flat_pi(0.0, grid)).q_n);
  for (double w : {0.5, 2.0, 4.07}) {
    for (double d : {0.5, 3.0, 5.27}) CHECK(best < *qn_formula(make_transitionless(w, d, grid)).q_n);
  }
}
