#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sdm/diff.hpp"
#include "sdm/env.hpp"
#include "sdm/sac.hpp"
#include "sdm/scenario.hpp"

namespace sdm::game {

enum class LeaderRole { Av, Bv };

struct GameConfig {
  double beta = 0.2;             // aggressiveness regularization scale
  int f_av = 5;                  // AV policy updates per round
  int f_bv = 1;                  // BV policy updates per round
  LeaderRole leader = LeaderRole::Av;
  int cg_max_iters = 20;
  double cg_tol = 1e-4;          // relative residual
  double damping_lambda = 1e-3;  // Tikhonov damping on the follower Hessian
  int rounds = 0;
  int steps_per_round = 50;      // environment transitions collected per round
};

struct LeaderUpdateReport {
  double plain_grad_norm = 0.0;
  double implicit_term_norm = 0.0;
  int cg_iterations = 0;
  bool cg_converged = false;
  bool fell_back_to_first_order = false;
};

// Role-inverted configuration: BV leads, beta forced to 0, 1:1 updates.
GameConfig configureIsdm(GameConfig cfg);

// Leader total derivative
//   g - (d_leader d_follower L_f) (d_follower^2 L_f + lambda I)^{-1} d_follower L_l
// with the inverse applied matrix-free by conjugate gradient. On CG
// failure (iteration cap or indefinite curvature) the plain gradient is
// returned and the report flags the fallback.
LeaderUpdateReport leaderTotalGradient(const diff::BlockLoss& leader_loss,
                                       const diff::BlockLoss& follower_loss,
                                       diff::Block leader_block,
                                       std::span<const double> a,
                                       std::span<const double> b,
                                       const GameConfig& cfg,
                                       diff::ParamVector* out);

// Matrix-free CG for (A + lambda I) x = rhs; returns (iterations,
// converged). Exposed for the solver-health property tests.
std::pair<int, bool> conjugateGradient(
    const std::function<diff::ParamVector(std::span<const double>)>& apply,
    std::span<const double> rhs, double lambda, int max_iters, double tol,
    diff::ParamVector* x);

struct GameAgents {
  sac::Agent av;
  sac::Agent bv;
};

struct RngSet;  // defined in trainer.hpp

struct UpdateRecord {
  long global_step = 0;
  int round = 0;
  sac::Role role = sac::Role::Av;
  bool is_leader = false;
  double policy_loss = 0.0;
  double critic_loss = 0.0;
  bool has_report = false;
  LeaderUpdateReport report;
};

using UpdateLogger = std::function<void(const UpdateRecord&)>;

// One leader-or-follower update: critic gradient step (with Polyak) then
// the policy step; the leader's policy step uses the total derivative.
struct GameUpdateContext {
  const sac::SacConfig& sac_cfg;
  const GameConfig& game_cfg;
  const RoadConfig& road;
  const RewardConfig& reward;
  scenario::ReplayBuffer& buffer;
  std::mt19937_64& rng_buffer;
  std::mt19937_64& rng_update;
};

UpdateRecord gameAgentUpdate(GameAgents& agents, sac::Role role, bool as_leader,
                             GameUpdateContext& ctx);

}  // namespace sdm::game
