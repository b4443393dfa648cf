#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "sdm/diff.hpp"
#include "sdm/sim.hpp"

namespace sdm::sac {

enum class Role { Av, Bv };

struct SacConfig {
  double alpha = 0.2;      // entropy temperature, shared by default
  double gamma = 0.99;
  double tau = 0.005;      // Polyak rate
  double lr_policy = 3e-4;
  double lr_critic = 3e-4;
  int batch_size = 256;
  // The policy losses are written against target critics; switch to the
  // standard online-critic form for comparison.
  bool targets_in_policy_loss = true;
  // Entropy bonus inside the Bellman target (standard SAC form).
  bool entropy_in_target = true;
};

// Squashed-Gaussian policy: the net emits one mean and one log-std per
// action dimension; log-stds are clamped to [-20, 2].
struct GaussianPolicy {
  diff::NetSpec spec;
  diff::ParamVector params;
  std::vector<double> low, high;

  int actionDim() const { return static_cast<int>(low.size()); }
};

struct TwinCritics {
  diff::NetSpec spec;  // input (s, a_av, a_bv) -> scalar
  diff::ParamVector q1, q2, q1_targ, q2_targ;
};

GaussianPolicy makePolicy(int state_dim, std::vector<double> low,
                          std::vector<double> high, const std::vector<int>& hidden,
                          std::uint64_t seed);
TwinCritics makeCritics(int input_dim, const std::vector<int>& hidden,
                        std::uint64_t seed);

struct ActionSample {
  std::vector<double> action;
  std::vector<double> noise;  // the standard-normal draws, kept for replay
  double log_prob = 0.0;
};

ActionSample sampleAction(const GaussianPolicy& policy, std::span<const double> state,
                          std::mt19937_64& rng);
// Exploration-free action at the squashed mean.
std::vector<double> meanAction(const GaussianPolicy& policy,
                               std::span<const double> state);
// Log-density of an arbitrary in-bounds action (inverse-squash route).
double logProb(const GaussianPolicy& policy, std::span<const double> state,
               std::span<const double> action);
// Action and log-prob implied by pre-drawn noise; the double instantiation
// of the loss path, exposed so tests can replay loss computations.
ActionSample actionFromNoise(const GaussianPolicy& policy, std::span<const double> state,
                             std::span<const double> noise);

// Minibatch in loss-ready layout. States are observation-normalized;
// raw flattened snapshots are kept for controllers that need geometry.
struct Batch {
  int n = 0;
  int state_dim = 0;
  int av_dim = 0;
  int bv_dim = 0;
  std::vector<double> s, s_next;          // n x state_dim, normalized
  std::vector<double> raw_s, raw_s_next;  // n x (4 * vehicles)
  std::vector<double> a_av, a_bv;         // executed actions
  std::vector<double> r_av, r_bv;
  std::vector<double> done;               // 0/1
  std::span<const double> reward(Role r) const {
    return r == Role::Av ? std::span<const double>(r_av) : std::span<const double>(r_bv);
  }
};

// One side of the joint action inside a policy objective: either
// reparameterized through a policy block or a constant executed action.
struct ActionSource {
  const diff::NetSpec* spec = nullptr;  // null => constant actions
  const std::vector<double>* low = nullptr;
  const std::vector<double>* high = nullptr;
  std::span<const double> noise;          // n x dim, used when spec != null
  std::span<const double> const_actions;  // n x dim, used when spec == null
  int dim = 0;
};

// SAC-form policy objective over a batch, as a two-block differentiable
// loss: block A holds the AV policy parameters, block B the BV policy
// parameters. With beta > 0 the follower regularization term
// -beta * min_j Q_j^opp is added.
class PolicyObjective : public diff::BlockLossBase<PolicyObjective> {
 public:
  PolicyObjective(Role own, double alpha, double beta,
                  const diff::NetSpec& critic_spec_own,
                  std::span<const double> own_q1, std::span<const double> own_q2,
                  const diff::NetSpec* critic_spec_opp,
                  std::span<const double> opp_q1, std::span<const double> opp_q2,
                  std::span<const double> states, int state_dim, int n,
                  ActionSource av_side, ActionSource bv_side);

  std::size_t sizeA() const override;
  std::size_t sizeB() const override;

  template <typename T>
  T evalT(std::span<const T> a, std::span<const T> b, std::vector<T>* grad_a,
          std::vector<T>* grad_b) const;

 private:
  Role own_;
  double alpha_, beta_;
  const diff::NetSpec& critic_own_;
  std::span<const double> own_q1_, own_q2_;
  const diff::NetSpec* critic_opp_;
  std::span<const double> opp_q1_, opp_q2_;
  std::span<const double> states_;
  int state_dim_, n_;
  ActionSource av_, bv_;
};

// Bellman targets y = r + gamma * (1 - done) * (min_j Qtarg_j(s', a') -
// alpha * log pi_own(a'_own | s')). Next actions are pre-drawn by the
// caller so the computation replays exactly.
std::vector<double> criticTargets(const TwinCritics& critics, const Batch& batch,
                                  Role own, std::span<const double> next_a_av,
                                  std::span<const double> next_a_bv,
                                  std::span<const double> next_logp_own,
                                  const SacConfig& cfg);

// Mean over the batch of 0.5 * (Q_j(s, a_av, a_bv) - y)^2 summed over
// j = 1, 2; gradients are accumulated when non-null.
double criticLossAndGrad(const TwinCritics& critics, const Batch& batch,
                         std::span<const double> y, diff::ParamVector* grad_q1,
                         diff::ParamVector* grad_q2);

void polyakUpdate(TwinCritics& critics, double tau);

struct AdamState {
  diff::ParamVector m, v;
  std::int64_t t = 0;
};

void adamStep(diff::ParamVector& params, std::span<const double> grad,
              AdamState& state, double lr);

struct Agent {
  GaussianPolicy policy;
  TwinCritics critics;
  AdamState opt_policy, opt_q1, opt_q2;
};

// Samples next own actions with log-probs over the batch's next states.
void sampleNextOwn(const GaussianPolicy& policy, const Batch& batch,
                   std::mt19937_64& rng, std::vector<double>& actions,
                   std::vector<double>& logp);
// Samples opponent next actions (log-probs discarded).
void sampleNextActions(const GaussianPolicy& policy, const Batch& batch,
                       std::mt19937_64& rng, std::vector<double>& actions);

}  // namespace sdm::sac
