#pragma once

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "sdm/sac.hpp"
#include "sdm/scenario.hpp"
#include "sdm/sim.hpp"

namespace sdm::env {

// Observation: [x/road_width, y/road_length, v/v_max_av, theta/pi] per
// vehicle, AV first. Both policies consume the full joint state.
int obsDim(int vehicle_count);
void buildObs(const WorldState& w, const RoadConfig& road, const RewardConfig& cfg,
              std::span<double> out);
std::vector<double> flattenWorld(const WorldState& w);
void normalizeFlat(std::span<const double> raw, const RoadConfig& road,
                   const RewardConfig& cfg, std::span<double> out);

ActionCmd toActionCmd(std::span<const double> a);
std::vector<ActionCmd> toBvActions(std::span<const double> a);

// Per-run source of initial worlds; holds only serializable state (the
// file-list cursor).
struct ScenarioProvider {
  enum class Kind { Synthetic, DriveAlone, FileList };
  Kind kind = Kind::Synthetic;
  int vehicle_count = 2;
  std::vector<scenario::Scenario> list;
  std::size_t cursor = 0;

  WorldState next(std::mt19937_64& rng, const RoadConfig& road, const RewardConfig& cfg);
};

struct StepResult {
  StepEvents events;
  RewardPair rewards;
  bool done = false;
};

// Episode-stepping wrapper around the kinematic simulator.
class HighwayEnv {
 public:
  HighwayEnv(RewardConfig cfg, RoadConfig road, ScenarioProvider provider);

  void reset(std::mt19937_64& rng);
  StepResult step(const ActionCmd& a_av, const std::vector<ActionCmd>& a_bv);

  const WorldState& world() const { return world_; }
  void setWorld(WorldState w) { world_ = std::move(w); }
  bool needsReset() const { return needs_reset_; }
  void setNeedsReset(bool v) { needs_reset_ = v; }
  int vehicleCount() const { return static_cast<int>(world_.vehicles.size()); }
  const RewardConfig& rewardConfig() const { return cfg_; }
  const RoadConfig& roadConfig() const { return road_; }
  ScenarioProvider& provider() { return provider_; }
  const std::string& scenarioId() const { return scenario_id_; }

 private:
  RewardConfig cfg_;
  RoadConfig road_;
  ScenarioProvider provider_;
  WorldState world_;
  std::string scenario_id_;
  bool needs_reset_ = true;
};

// Per-step action providers used by rollouts and evaluation.
class AvController {
 public:
  virtual ~AvController() = default;
  virtual ActionCmd act(const WorldState& w, std::span<const double> obs,
                        bool stochastic, std::mt19937_64& rng) = 0;
};

class BvController {
 public:
  virtual ~BvController() = default;
  virtual std::vector<ActionCmd> act(const WorldState& w, std::span<const double> obs,
                                     bool stochastic, std::mt19937_64& rng) = 0;
};

class RlAvController : public AvController {
 public:
  explicit RlAvController(const sac::GaussianPolicy& policy) : policy_(policy) {}
  ActionCmd act(const WorldState& w, std::span<const double> obs, bool stochastic,
                std::mt19937_64& rng) override;

 private:
  const sac::GaussianPolicy& policy_;
};

class RlBvController : public BvController {
 public:
  explicit RlBvController(const sac::GaussianPolicy& policy) : policy_(policy) {}
  std::vector<ActionCmd> act(const WorldState& w, std::span<const double> obs,
                             bool stochastic, std::mt19937_64& rng) override;

 private:
  const sac::GaussianPolicy& policy_;
};

class ScriptedAvController : public AvController {
 public:
  explicit ScriptedAvController(ActionCmd cmd) : cmd_(cmd) {}
  ActionCmd act(const WorldState&, std::span<const double>, bool,
                std::mt19937_64&) override {
    return cmd_;
  }

 private:
  ActionCmd cmd_;
};

// Assembles a loss-ready minibatch from sampled transitions.
sac::Batch makeBatch(const std::vector<const scenario::Transition*>& ts,
                     const RoadConfig& road, const RewardConfig& cfg);

}  // namespace sdm::env
