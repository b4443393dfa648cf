#include "sdm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sdm/error.hpp"

namespace sdm {

namespace {
constexpr double kPi = std::numbers::pi;
}

double wrapAngle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}

int RoadConfig::laneIndex(double x) const {
  int lane = static_cast<int>(std::floor(x / lane_width));
  return std::clamp(lane, 0, lane_count - 1);
}

ActionCmd clampAction(const ActionCmd& a, const RewardConfig& cfg) {
  return {std::clamp(a.dv, -cfg.dv_max, cfg.dv_max),
          std::clamp(a.dtheta, -cfg.dtheta_max, cfg.dtheta_max)};
}

VehicleState stepKinematics(const VehicleState& s, const ActionCmd& a, double dt) {
  VehicleState out;
  out.v = std::max(0.0, s.v + a.dv);
  out.theta = wrapAngle(s.theta + a.dtheta);
  out.y = s.y + out.v * dt * std::cos(out.theta);
  out.x = s.x + out.v * dt * std::sin(out.theta);
  return out;
}

double collisionMargin(const VehicleState& a, const VehicleState& b,
                       const RewardConfig& cfg) {
  const double hl = 0.5 * cfg.footprint_length;
  const double hw = 0.5 * cfg.footprint_width;

  // Local axes: heading 0 points along +y, so the length axis of a
  // footprint is (sin theta, cos theta) and the width axis is its normal.
  const double axes[4][2] = {
      {std::sin(a.theta), std::cos(a.theta)},
      {std::cos(a.theta), -std::sin(a.theta)},
      {std::sin(b.theta), std::cos(b.theta)},
      {std::cos(b.theta), -std::sin(b.theta)},
  };
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;

  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    const double ux = axes[i][0];
    const double uy = axes[i][1];
    // Projected half-extent of each rectangle onto this axis.
    const double ra = hl * std::abs(ux * axes[0][0] + uy * axes[0][1]) +
                      hw * std::abs(ux * axes[1][0] + uy * axes[1][1]);
    const double rb = hl * std::abs(ux * axes[2][0] + uy * axes[2][1]) +
                      hw * std::abs(ux * axes[3][0] + uy * axes[3][1]);
    const double dist = std::abs(ux * dx + uy * dy);
    margin = std::min(margin, ra + rb - dist);
  }
  return margin;
}

bool checkCollision(const VehicleState& a, const VehicleState& b,
                    const RewardConfig& cfg) {
  return collisionMargin(a, b, cfg) >= 0.0;
}

bool isOffRoad(const VehicleState& s, const RoadConfig& road) {
  return s.x < 0.0 || s.x > road.width();
}

std::pair<WorldState, StepEvents> stepWorld(const WorldState& world,
                                            const ActionCmd& a_av,
                                            const std::vector<ActionCmd>& a_bv,
                                            const RewardConfig& cfg,
                                            const RoadConfig& road) {
  const int n_bv = world.bvCount();
  if (static_cast<int>(a_bv.size()) != n_bv) {
    throw Error(ErrorCode::InvalidArg,
                "stepWorld: expected " + std::to_string(n_bv) + " BV actions, got " +
                    std::to_string(a_bv.size()));
  }

  WorldState next;
  next.vehicles.resize(world.vehicles.size());
  next.vehicles[0] = stepKinematics(world.vehicles[0], clampAction(a_av, cfg), cfg.dt);
  for (int i = 0; i < n_bv; ++i) {
    next.vehicles[i + 1] =
        stepKinematics(world.vehicles[i + 1], clampAction(a_bv[i], cfg), cfg.dt);
  }
  next.step_index = world.step_index + 1;
  next.elapsed_time = next.step_index * cfg.dt;

  StepEvents ev;
  ev.off_road.resize(next.vehicles.size());
  for (std::size_t i = 0; i < next.vehicles.size(); ++i) {
    ev.off_road[i] = isOffRoad(next.vehicles[i], road);
  }
  ev.reached_end = next.vehicles[0].y > road.length;

  // Off-road vehicles lose collision relevance.
  for (std::size_t i = 1; i < next.vehicles.size(); ++i) {
    if (ev.off_road[0] || ev.off_road[i]) continue;
    if (checkCollision(next.vehicles[0], next.vehicles[i], cfg)) {
      ev.av_bv_collision = true;
      break;
    }
  }
  for (std::size_t i = 1; i < next.vehicles.size() && !ev.bv_bv_collision; ++i) {
    if (ev.off_road[i]) continue;
    for (std::size_t j = i + 1; j < next.vehicles.size(); ++j) {
      if (ev.off_road[j]) continue;
      if (checkCollision(next.vehicles[i], next.vehicles[j], cfg)) {
        ev.bv_bv_collision = true;
        break;
      }
    }
  }
  return {std::move(next), std::move(ev)};
}

RewardPair computeRewards(const StepEvents& events, const WorldState& world_after,
                          const RewardConfig& cfg) {
  const double r_speed = world_after.vehicles[0].v / cfg.v_max_av;
  const double r_av_col = events.av_bv_collision ? -cfg.r_a : 0.0;
  const double r_bv_col = events.bv_bv_collision ? -cfg.r_b : 0.0;
  RewardPair r;
  r.r_av = r_speed + r_av_col;
  r.r_bv = -r_speed - r_av_col + r_bv_col;
  return r;
}

bool isTerminal(const WorldState& world, const StepEvents& events,
                const RewardConfig& cfg) {
  return events.av_bv_collision || events.bv_bv_collision ||
         (!events.off_road.empty() && events.off_road[0]) || events.reached_end ||
         world.step_index >= cfg.horizon_h;
}

}  // namespace sdm
