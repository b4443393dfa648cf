#pragma once

#include <utility>
#include <vector>

namespace sdm {

// Per-vehicle kinematic state. x is lateral position across the lanes,
// y runs along the road, theta = 0 points straight down-road.
struct VehicleState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double v = 0.0;      // m/s, >= 0
  double theta = 0.0;  // rad, wrapped to [-pi, pi]
};

// Per-step increments of speed and heading.
struct ActionCmd {
  double dv = 0.0;
  double dtheta = 0.0;
};

struct RoadConfig {
  int lane_count = 3;
  double lane_width = 3.5;  // m
  double length = 400.0;    // m

  double width() const { return lane_count * lane_width; }
  double laneCenter(int lane) const { return (lane + 0.5) * lane_width; }
  int laneIndex(double x) const;
};

struct RewardConfig {
  double v_max_av = 40.0;         // m/s, speed-reward normalizer
  double r_a = 10.0;              // AV-BV collision penalty magnitude
  double r_b = 10.0;              // BV-BV collision penalty magnitude
  double gamma = 0.99;            // discount
  int horizon_h = 100;            // max steps per episode
  double dt = 0.1;                // s
  double footprint_length = 5.0;  // m
  double footprint_width = 2.0;   // m
  double dv_max = 0.5;            // m/s per step
  double dtheta_max = 0.05;       // rad per step
};

// Vehicle 0 is the AV, vehicles 1..N are the BVs.
struct WorldState {
  std::vector<VehicleState> vehicles;
  int step_index = 0;
  double elapsed_time = 0.0;  // = step_index * dt

  int bvCount() const { return static_cast<int>(vehicles.size()) - 1; }
};

struct StepEvents {
  bool av_bv_collision = false;
  bool bv_bv_collision = false;
  std::vector<bool> off_road;  // per vehicle, post-step
  bool reached_end = false;    // AV crossed the road end
};

struct RewardPair {
  double r_av = 0.0;
  double r_bv = 0.0;
};

double wrapAngle(double a);

ActionCmd clampAction(const ActionCmd& a, const RewardConfig& cfg);

// Semi-implicit update: speed and heading increments are applied first,
// then the position integrates with the new values.
VehicleState stepKinematics(const VehicleState& s, const ActionCmd& a, double dt);

// Oriented-rectangle overlap via the separating-axis test on the four
// candidate axes. Touching footprints count as colliding.
bool checkCollision(const VehicleState& a, const VehicleState& b,
                    const RewardConfig& cfg);

// Signed SAT margin: positive = penetration depth, negative = separation.
double collisionMargin(const VehicleState& a, const VehicleState& b,
                       const RewardConfig& cfg);

bool isOffRoad(const VehicleState& s, const RoadConfig& road);

// Advances every vehicle and evaluates collision/off-road/road-end events
// on the post-step states. Off-road vehicles are excluded from collision
// pairs. Throws on an action-count mismatch.
std::pair<WorldState, StepEvents> stepWorld(const WorldState& world,
                                            const ActionCmd& a_av,
                                            const std::vector<ActionCmd>& a_bv,
                                            const RewardConfig& cfg,
                                            const RoadConfig& road);

RewardPair computeRewards(const StepEvents& events, const WorldState& world_after,
                          const RewardConfig& cfg);

bool isTerminal(const WorldState& world, const StepEvents& events,
                const RewardConfig& cfg);

}  // namespace sdm
