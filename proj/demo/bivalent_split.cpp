// Transports a density concentrated near the north pole onto the uniform
// measure on S^2, then prints where the optimal plan splits mass and how
// regular the two branches of the map look.
//
//   bivalent_split [mesh_count] [cap_floor]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "sphereot/sphereot.hpp"

using namespace sphereot;

int main(int argc, char** argv) {
  const int count = argc > 1 ? std::atoi(argv[1]) : 800;
  const std::string cap = argc > 2 ? argv[2] : "0.9";

  const Mesh mesh = quasi_uniform_mesh(2, count, 0);
  const auto mu = sample_density(builtin_density("cap:" + cap), mesh);
  const auto nu = sample_density(builtin_density("uniform"), mesh);
  const auto sol = solve_exact(mu, nu);
  std::printf("atoms %d  transport cost %.6f\n", count, sol.coupling.total_cost);

  const auto mm = classify_regions(extract_multimap(sol.coupling, mu, nu, 3 * mesh.spacing), mesh.spacing);
  const auto inv = invert_maps(mm, sol.coupling, mu, nu);
  const auto S1 = mm.indices_in(SourceRegion::S1);
  const auto S2 = mm.indices_in(SourceRegion::S2);
  std::printf("source: S0 %zu  S1 %zu  S2 %zu\n", mm.indices_in(SourceRegion::S0).size(), S1.size(), S2.size());
  std::printf("target: T0 %zu  T1 %zu  T2 %zu\n", inv.indices_in(TargetRegion::T0).size(),
              inv.indices_in(TargetRegion::T1).size(), inv.indices_in(TargetRegion::T2).size());

  // A few split atoms: x, both images, and lambda with t+ - t- = lambda x.
  for (std::size_t k = 0; k < S2.size() && k < 5; ++k) {
    const auto& e = mm[S2[k]];
    std::printf("  x.t+ %+.3f  x.t- %+.3f  lambda %.3f  residual %.2e\n", e.x.dot(e.t_plus), e.x.dot(e.t_minus),
                e.lambda, e.collinearity_residual);
  }

  const auto window = ScaleWindow::for_spacing(mesh.spacing);
  std::printf("proven exponent 1/(4n-1) = %.4f\n", holder_exponent(2));
  try {
    const auto fit = holder_fit(map_samples(mm, S1, MapBranch::Plus), {}, window, "S1");
    std::printf("t+ on S1: alpha_hat %.3f  C_hat %.3f  (%zu pairs)\n", fit.alpha_hat, fit.C_hat, fit.pair_count);
    const auto rc = region_constants(mm, S2, window);
    std::printf("S2: k_U %.3f  C+ %.3f  C- %.3f / %.3f\n", rc.k_U, rc.C_plus, rc.C_minus_statement,
                rc.C_minus_proof);
    std::printf("t- bound ratio %.4f (<= 1 expected)\n", t_minus_bound_check(mm, S2, window));
  } catch (const InsufficientData& e) {
    std::printf("not enough resolution: %s\n", e.what());
  }
  return 0;
}
