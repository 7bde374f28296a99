#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include <invlab/sweeps.hpp>

using namespace invlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("axis validation and spacing") {
  const Axis a{"x", 0.0, 1.0, 5};
  CHECK_NOTHROW(a.validate());
  CHECK(a.values() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK_THROWS_AS((Axis{"x", 1.0, 1.0, 5}.validate()), ValidationError);
  CHECK_THROWS_AS((Axis{"x", 0.0, 1.0, 1}.validate()), ValidationError);
}

TEST_CASE("q_N surface of transitionless protocols") {
  const TimeGrid grid(1001);
  const SweepResult r = sweep_qn_transitionless({"omega0", 0.25, 2.0, 8}, {"delta0", 0.25, 2.0, 8}, grid);
  CHECK(r.values.size() == 64);
  CHECK(r.quantity == Quantity::q_n);
  for (const auto& v : r.values) {
    REQUIRE(v.has_value());
    CHECK(*v >= 1.82424);
  }
  const auto [i, j] = r.argmin();
  CHECK(i <= 1);
  CHECK(j <= 1);
}

TEST_CASE("q_N sweep minimum is stable under refinement") {
  const TimeGrid grid(1001);
  const SweepResult coarse = sweep_qn_transitionless({"omega0", 0.25, 3.0, 12}, {"delta0", 0.25, 3.0, 12}, grid);
  const SweepResult fine = sweep_qn_transitionless({"omega0", 0.25, 3.0, 23}, {"delta0", 0.25, 3.0, 23}, grid);
  const auto [ci, cj] = coarse.argmin();
  const auto [fi, fj] = fine.argmin();
  const double cell = coarse.grid_spec.axis1.spacing();
  CHECK(std::abs(coarse.grid_spec.axis1[ci] - fine.grid_spec.axis1[fi]) < cell);
  CHECK(std::abs(coarse.grid_spec.axis2->operator[](cj) - fine.grid_spec.axis2->operator[](fj)) < cell);
}

TEST_CASE("failed cells become missing values") {
  const TimeGrid grid(501);
  // delta0 = 0 with omega0 > 0 makes the counter-diabatic denominator vanish at the endpoints.
  const SweepResult r = sweep_qs_transitionless({"omega0", 1.0, 2.0, 2}, {"delta0", 0.0, 1.0, 2}, grid);
  CHECK_FALSE(r.at(0, 0).has_value());
  CHECK(r.at(0, 1).has_value());
  std::ostringstream out;
  io::write_sweep_csv(out, r);
  CHECK(out.str() == "omega0,delta0,value\n1,0,\n1,1," + io::format_double(*r.at(0, 1)) + "\n2,0,\n2,1," +
                         io::format_double(*r.at(1, 1)) + "\n");
  const auto side = io::sidecar_json(r, grid);
  CHECK(side["missing_cells"] == 2);
  CHECK(side["quantity"] == "q_s");
}

TEST_CASE("q_S surface stays below the pi-pulse value") {
  const TimeGrid grid(1001);
  const SweepResult r = sweep_qs_transitionless({"omega0", 0.25, 8.0, 6}, {"delta0", 0.25, 8.0, 6}, grid);
  for (const auto& v : r.values) {
    REQUIRE(v.has_value());
    CHECK(*v >= 0.0);
    CHECK(*v < pi * pi / 4);
  }
  // Large Rabi amplitude, small detuning: approaches a pi pulse from below.
  const double near_pi = *qs_formula(make_transitionless(60.0, 0.05, TimeGrid(8001))).q_s;
  CHECK(near_pi < pi * pi / 4);
  CHECK(near_pi > 0.9 * pi * pi / 4);
}

TEST_CASE("robustness curves") {
  const TimeGrid grid;
  const SweepResult flat_beta = robustness_curve(make_flat_pi(0.0, grid), RobustnessVariable::beta, {"beta", -1, 1, 5});
  CHECK_THAT(*flat_beta.at(0), WithinAbs(0.0, 1e-10));
  CHECK_THAT(*flat_beta.at(4), WithinAbs(0.0, 1e-10));
  CHECK_THAT(*flat_beta.at(2), WithinAbs(1.0, 1e-10));

  const Axis lambda{"lambda", 0.0, 0.3, 7};
  const SweepResult flat = robustness_curve(make_flat_pi(0.0, grid), RobustnessVariable::lambda, lambda);
  const SweepResult opt = robustness_curve(make_optimal_noise(7, grid), RobustnessVariable::lambda, lambda);
  for (std::size_t k = 1; k < 7; ++k) CHECK(*opt.at(k) > *flat.at(k));

  const SweepResult sys =
      robustness_curve(make_optimal_systematic(1, grid), RobustnessVariable::beta, {"beta", -0.05, 0.05, 3});
  CHECK(*sys.at(2) >= 1.0 - 1e-3);
  CHECK(*sys.at(0) >= 1.0 - 1e-3);
}

TEST_CASE("combined-error maps") {
  const TimeGrid grid;
  const Axis lambda{"lambda", 0.0, 0.6, 4};
  const Axis beta{"beta", -0.6, 0.6, 5};
  const ControlField noise = make_optimal_noise(7, grid);
  const ControlField sys = make_optimal_systematic(1, grid);
  const SweepResult a = map_p2(noise, lambda, beta);
  const SweepResult b = map_p2(sys, lambda, beta);
  CHECK_THAT(*a.at(0, 2), WithinAbs(1.0, 1e-9));
  CHECK_THAT(*b.at(0, 2), WithinAbs(1.0, 1e-9));
  for (const auto& v : a.values) CHECK((*v >= 0.0 && *v <= 1.0));
  const SweepResult slice = robustness_curve(noise, RobustnessVariable::beta, beta);
  for (std::size_t j = 0; j < 5; ++j) CHECK_THAT(*a.at(0, j), WithinAbs(*slice.at(j), 1e-9));
  // Noise only: the noise-optimal pulse wins. Systematic error only: the other one.
  CHECK(*a.at(3, 2) > *b.at(3, 2));
  CHECK(*b.at(0, 4) > *a.at(0, 4));
  CHECK(*b.at(0, 0) > *a.at(0, 0));
}

TEST_CASE("figure data panels") {
  const TimeGrid grid(401);
  CHECK(figure_data(1, grid).size() == 4);
  CHECK(figure_data(4, grid).size() == 3);
  CHECK_THROWS_AS(figure_data(3, grid), ValidationError);
}
