// Prints the noise and systematic sensitivities of every protocol family
// together with P2(T) at a small noise and error level.
#include <cstdio>
#include <vector>

#include <invlab/dynamics.hpp>
#include <invlab/protocols.hpp>
#include <invlab/sensitivity.hpp>
#include <invlab/sweeps.hpp>

int main() {
  using namespace invlab;
  const TimeGrid grid;
  const std::vector<ControlField> fields{
      make_flat_pi(0.0, grid),
      make_shaped_pi([](double t) { return std::sin(pi * t); }, 0.0, grid, "sine_pi"),
      make_transitionless(kExampleOmega0, kExampleDelta0, grid),
      make_optimal_noise(7, grid),
      make_optimal_systematic(1, grid),
  };
  std::printf("%-20s %10s %10s %12s %12s\n", "protocol", "q_N T", "q_S", "P2(l2=.05)", "P2(b=.1)");
  for (const auto& field : fields) {
    const double qn = *qn_formula(field).q_n;
    const double qs = *qs_formula(field).q_s;
    const double p_noise = final_p2(field, {0.0, 0.05});
    const double p_sys = final_p2(field, {0.1, 0.0});
    std::printf("%-20s %10.6f %10.6f %12.6f %12.6f\n", field.label().c_str(), qn, qs, p_noise, p_sys);
  }
}
