// Generate a forward-moving scene, predict feature positions from the IMU
// stream and match one frame pair both ways.

#include <iostream>

#include "guidedmatch/guidedmatch.hpp"

int main() {
  using namespace guidedmatch;

  SceneConfig cfg;
  cfg.trajectory = Trajectory::forward(1.0);
  cfg.seed = 7;
  const Scene scene = generate_scene(cfg);

  const StateLog log = build_log(scene.imu, integrator_config_for(cfg));
  const Frame& a = scene.frames[5];
  const Frame& b = scene.frames[6];

  const auto predictions = predict_frame(a, log, b.timestamp, cfg.intrinsics);
  const MatchParams params;  // 10 px window, hamming <= 64
  const MatchReport windowed = neighboring_match(a, b, predictions, params);
  const MatchReport brute = brute_force_match(a, b, params);

  const MatchScore ws = score_matches(windowed, scene.truth, 5, 6);
  const MatchScore bs = score_matches(brute, scene.truth, 5, 6);
  std::cout << "features: " << a.features.size() << " -> " << b.features.size() << '\n'
            << "windowed: " << windowed.comparisons << " comparisons, " << ws.total << " matches, "
            << ws.false_matches << " false\n"
            << "brute:    " << brute.comparisons << " comparisons, " << bs.total << " matches, "
            << bs.false_matches << " false\n";
}
