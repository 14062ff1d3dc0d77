// A loaded die read by a camera that confuses neighbouring faces. We only see
// the camera's readings and want the die's face distribution back.

#include "umaxent/umaxent.hpp"

#include <cstdio>

using namespace umaxent;

int main() {
  const Simplex truth({0.05, 0.10, 0.10, 0.15, 0.20, 0.40});

  // The camera reports the true face 60% of the time and a neighbour otherwise.
  Eigen::MatrixXd channel = Eigen::MatrixXd::Zero(6, 6);
  for (int face = 0; face < 6; ++face) {
    channel(face, face) = 0.6;
    channel(face, (face + 1) % 6) += 0.2;
    channel(face, (face + 5) % 6) += 0.2;
  }
  const ObservationModel camera(channel);

  Rng rng(7);
  const Dataset rolls = draw_dataset(truth, camera, 20000, rng);
  const Simplex readings = rolls.empirical_omega(rolls.size());
  const FeatureMap faces = FeatureMap::indicators(6);

  const UMaxEntResult fit = solve_umaxent(readings, camera, faces, EmConfig{});
  const SolveReport decoded = solve_ml_x(readings, camera, faces, SolverConfig{});

  std::printf("face   truth  readings  decoded  umaxent\n");
  for (Eigen::Index f = 0; f < 6; ++f) {
    std::printf("%4ld  %6.3f  %8.3f  %7.3f  %7.3f\n", static_cast<long>(f + 1), truth[f],
                readings[f], decoded.posterior[f], fit.posterior[f]);
  }
  std::printf("\nJSD to truth: readings %.5f, decoded %.5f, umaxent %.5f\n", jsd(readings, truth),
              jsd(decoded.posterior, truth), jsd(fit.posterior, truth));
  std::printf("EM iterations %d, converged %s\n", fit.em_iterations, fit.converged ? "yes" : "no");
  return 0;
}
