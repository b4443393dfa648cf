#include "sdm/env.hpp"

#include <cmath>
#include <numbers>

#include "sdm/error.hpp"

namespace sdm::env {

int obsDim(int vehicle_count) { return 4 * vehicle_count; }

void normalizeFlat(std::span<const double> raw, const RoadConfig& road,
                   const RewardConfig& cfg, std::span<double> out) {
  const double inv_w = 1.0 / road.width();
  const double inv_l = 1.0 / road.length;
  const double inv_v = 1.0 / cfg.v_max_av;
  const double inv_pi = 1.0 / std::numbers::pi;
  for (std::size_t i = 0; i + 3 < raw.size(); i += 4) {
    out[i + 0] = raw[i + 0] * inv_w;
    out[i + 1] = raw[i + 1] * inv_l;
    out[i + 2] = raw[i + 2] * inv_v;
    out[i + 3] = raw[i + 3] * inv_pi;
  }
}

std::vector<double> flattenWorld(const WorldState& w) {
  std::vector<double> out(4 * w.vehicles.size());
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    out[4 * i + 0] = w.vehicles[i].x;
    out[4 * i + 1] = w.vehicles[i].y;
    out[4 * i + 2] = w.vehicles[i].v;
    out[4 * i + 3] = w.vehicles[i].theta;
  }
  return out;
}

void buildObs(const WorldState& w, const RoadConfig& road, const RewardConfig& cfg,
              std::span<double> out) {
  const auto raw = flattenWorld(w);
  normalizeFlat(raw, road, cfg, out);
}

ActionCmd toActionCmd(std::span<const double> a) { return {a[0], a[1]}; }

std::vector<ActionCmd> toBvActions(std::span<const double> a) {
  std::vector<ActionCmd> out(a.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {a[2 * i], a[2 * i + 1]};
  return out;
}

WorldState ScenarioProvider::next(std::mt19937_64& rng, const RoadConfig& road,
                                  const RewardConfig& cfg) {
  switch (kind) {
    case Kind::DriveAlone: {
      WorldState w;
      std::uniform_int_distribution<int> lane(0, road.lane_count - 1);
      std::uniform_real_distribution<double> speed(15.0, 30.0);
      VehicleState s;
      s.x = road.laneCenter(lane(rng));
      s.y = 0.0;
      s.v = speed(rng);
      s.theta = 0.0;
      w.vehicles.push_back(s);
      return w;
    }
    case Kind::Synthetic:
      return scenario::toWorldState(scenario::sampleSynthetic(rng, vehicle_count, road, cfg));
    case Kind::FileList: {
      if (list.empty()) throw Error(ErrorCode::State, "ScenarioProvider: empty scenario list");
      const auto& s = list[cursor % list.size()];
      cursor = (cursor + 1) % list.size();
      return scenario::toWorldState(s);
    }
  }
  throw Error(ErrorCode::State, "ScenarioProvider: bad kind");
}

HighwayEnv::HighwayEnv(RewardConfig cfg, RoadConfig road, ScenarioProvider provider)
    : cfg_(cfg), road_(road), provider_(std::move(provider)) {}

void HighwayEnv::reset(std::mt19937_64& rng) {
  if (provider_.kind == ScenarioProvider::Kind::FileList) {
    scenario_id_ = provider_.list[provider_.cursor % provider_.list.size()].scenario_id;
  } else {
    scenario_id_ = provider_.kind == ScenarioProvider::Kind::DriveAlone ? "drive_alone"
                                                                        : "synthetic";
  }
  world_ = provider_.next(rng, road_, cfg_);
  needs_reset_ = false;
}

StepResult HighwayEnv::step(const ActionCmd& a_av, const std::vector<ActionCmd>& a_bv) {
  if (needs_reset_) throw Error(ErrorCode::State, "HighwayEnv: step before reset");
  auto [next, events] = stepWorld(world_, a_av, a_bv, cfg_, road_);
  StepResult r;
  r.events = std::move(events);
  r.rewards = computeRewards(r.events, next, cfg_);
  r.done = isTerminal(next, r.events, cfg_);
  world_ = std::move(next);
  needs_reset_ = r.done;
  return r;
}

ActionCmd RlAvController::act(const WorldState&, std::span<const double> obs,
                              bool stochastic, std::mt19937_64& rng) {
  if (stochastic) {
    return toActionCmd(sac::sampleAction(policy_, obs, rng).action);
  }
  return toActionCmd(sac::meanAction(policy_, obs));
}

std::vector<ActionCmd> RlBvController::act(const WorldState&, std::span<const double> obs,
                                           bool stochastic, std::mt19937_64& rng) {
  if (stochastic) {
    return toBvActions(sac::sampleAction(policy_, obs, rng).action);
  }
  return toBvActions(sac::meanAction(policy_, obs));
}

sac::Batch makeBatch(const std::vector<const scenario::Transition*>& ts,
                     const RoadConfig& road, const RewardConfig& cfg) {
  if (ts.empty()) throw Error(ErrorCode::NotReady, "makeBatch: empty sample");
  sac::Batch b;
  b.n = static_cast<int>(ts.size());
  b.state_dim = static_cast<int>(ts[0]->s.size());
  b.av_dim = static_cast<int>(ts[0]->a_av.size());
  b.bv_dim = static_cast<int>(ts[0]->a_bv.size());
  b.s.resize(static_cast<std::size_t>(b.n) * b.state_dim);
  b.s_next.resize(b.s.size());
  b.raw_s.resize(b.s.size());
  b.raw_s_next.resize(b.s.size());
  b.a_av.resize(static_cast<std::size_t>(b.n) * b.av_dim);
  b.a_bv.resize(static_cast<std::size_t>(b.n) * b.bv_dim);
  b.r_av.resize(b.n);
  b.r_bv.resize(b.n);
  b.done.resize(b.n);
  for (int i = 0; i < b.n; ++i) {
    const auto& t = *ts[i];
    const std::size_t so = static_cast<std::size_t>(i) * b.state_dim;
    std::copy(t.s.begin(), t.s.end(), b.raw_s.begin() + so);
    std::copy(t.s_next.begin(), t.s_next.end(), b.raw_s_next.begin() + so);
    normalizeFlat(std::span<const double>(t.s), road, cfg,
                  std::span<double>(b.s).subspan(so, b.state_dim));
    normalizeFlat(std::span<const double>(t.s_next), road, cfg,
                  std::span<double>(b.s_next).subspan(so, b.state_dim));
    std::copy(t.a_av.begin(), t.a_av.end(),
              b.a_av.begin() + static_cast<std::size_t>(i) * b.av_dim);
    std::copy(t.a_bv.begin(), t.a_bv.end(),
              b.a_bv.begin() + static_cast<std::size_t>(i) * b.bv_dim);
    b.r_av[i] = t.r_av;
    b.r_bv[i] = t.r_bv;
    b.done[i] = t.done ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace sdm::env
