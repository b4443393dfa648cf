#include "sdm/sac.hpp"

#include <cmath>
#include <numbers>

#include "sdm/error.hpp"

namespace sdm::sac {

namespace {

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kHalfLog2Pi = 0.5 * 1.8378770664093454836;  // log(2*pi)
constexpr double kLog2 = 0.6931471805599453;

std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

template <typename T>
T softplus(T x) {
  return diff::log(T(1.0) + diff::exp(x));
}

// log(1 - tanh(u)^2), stable for large |u|.
template <typename T>
T log1mTanhSq(T u) {
  const T au = diff::scalarValue(u) < 0.0 ? -u : u;
  return T(2.0) * (T(kLog2) - au - softplus(T(-2.0) * au));
}

// Per-dimension state of the squashed-Gaussian head kept for the
// backward pass.
template <typename T>
struct HeadDim {
  T mu, logstd, sigma, u, th, act;
  bool clamped = false;
};

template <typename T>
void headForward(std::span<const T> net_out, int act_dim, const std::vector<double>& low,
                 const std::vector<double>& high, std::span<const double> noise,
                 std::vector<HeadDim<T>>& dims) {
  dims.resize(act_dim);
  for (int k = 0; k < act_dim; ++k) {
    HeadDim<T>& d = dims[k];
    d.mu = net_out[k];
    T raw = net_out[act_dim + k];
    const double rv = diff::scalarValue(raw);
    if (rv < kLogStdMin) {
      d.logstd = T(kLogStdMin);
      d.clamped = true;
    } else if (rv > kLogStdMax) {
      d.logstd = T(kLogStdMax);
      d.clamped = true;
    } else {
      d.logstd = raw;
    }
    d.sigma = diff::exp(d.logstd);
    d.u = d.mu + d.sigma * T(noise[k]);
    d.th = diff::tanh(d.u);
    d.act = T(low[k]) + T(0.5 * (high[k] - low[k])) * (d.th + T(1.0));
  }
}

template <typename T>
T headLogProb(const std::vector<HeadDim<T>>& dims, std::span<const double> noise,
              const std::vector<double>& low, const std::vector<double>& high) {
  T logp(0.0);
  for (std::size_t k = 0; k < dims.size(); ++k) {
    logp += T(-0.5 * noise[k] * noise[k] - kHalfLog2Pi -
              std::log(0.5 * (high[k] - low[k]))) -
            dims[k].logstd - log1mTanhSq(dims[k].u);
  }
  return logp;
}

// Maps adjoints on actions (and the optional entropy adjoint alpha on the
// own-side log-prob) back to adjoints on the net outputs [mu..., logstd...].
template <typename T>
void headBackward(const std::vector<HeadDim<T>>& dims, std::span<const double> noise,
                  const std::vector<double>& low, const std::vector<double>& high,
                  std::span<const T> act_adj, double logp_adj,
                  std::vector<T>& out_adj) {
  const int act_dim = static_cast<int>(dims.size());
  out_adj.assign(2 * act_dim, T(0.0));
  for (int k = 0; k < act_dim; ++k) {
    const HeadDim<T>& d = dims[k];
    const T d_th = act_adj[k] * T(0.5 * (high[k] - low[k]));
    T d_u = d_th * (T(1.0) - d.th * d.th);
    if (logp_adj != 0.0) {
      // d(-log(1 - tanh(u)^2))/du = 2 tanh(u)
      d_u += T(logp_adj) * T(2.0) * d.th;
    }
    out_adj[k] = d_u;
    if (!d.clamped) {
      T d_ls = d_u * d.sigma * T(noise[k]);
      if (logp_adj != 0.0) d_ls += T(-logp_adj);
      out_adj[act_dim + k] = d_ls;
    }
  }
}

}  // namespace

GaussianPolicy makePolicy(int state_dim, std::vector<double> low,
                          std::vector<double> high, const std::vector<int>& hidden,
                          std::uint64_t seed) {
  if (low.size() != high.size() || low.empty()) {
    throw Error(ErrorCode::InvalidArg, "makePolicy: bad action bounds");
  }
  GaussianPolicy p;
  p.spec.input_dim = state_dim;
  p.spec.output_dim = 2 * static_cast<int>(low.size());
  p.spec.hidden = hidden;
  p.params = diff::initParams(p.spec, seed);
  p.low = std::move(low);
  p.high = std::move(high);
  return p;
}

TwinCritics makeCritics(int input_dim, const std::vector<int>& hidden,
                        std::uint64_t seed) {
  TwinCritics c;
  c.spec.input_dim = input_dim;
  c.spec.output_dim = 1;
  c.spec.hidden = hidden;
  c.q1 = diff::initParams(c.spec, mixSeed(seed, 1));
  c.q2 = diff::initParams(c.spec, mixSeed(seed, 2));
  c.q1_targ = c.q1;
  c.q2_targ = c.q2;
  return c;
}

ActionSample actionFromNoise(const GaussianPolicy& policy, std::span<const double> state,
                             std::span<const double> noise) {
  if (static_cast<int>(state.size()) != policy.spec.input_dim) {
    throw Error(ErrorCode::InvalidArg, "actionFromNoise: state dimension mismatch");
  }
  diff::MlpCache<double> cache;
  diff::mlpForward<double, double>(policy.spec, policy.params, state, cache);
  std::vector<HeadDim<double>> dims;
  headForward<double>(cache.act.back(), policy.actionDim(), policy.low, policy.high,
                      noise, dims);
  ActionSample out;
  out.noise.assign(noise.begin(), noise.end());
  out.action.resize(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) out.action[k] = dims[k].act;
  out.log_prob = headLogProb<double>(dims, noise, policy.low, policy.high);
  return out;
}

ActionSample sampleAction(const GaussianPolicy& policy, std::span<const double> state,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(policy.actionDim());
  for (double& z : noise) z = normal(rng);
  return actionFromNoise(policy, state, noise);
}

std::vector<double> meanAction(const GaussianPolicy& policy,
                               std::span<const double> state) {
  diff::MlpCache<double> cache;
  diff::mlpForward<double, double>(policy.spec, policy.params, state, cache);
  const auto& out = cache.act.back();
  std::vector<double> act(policy.actionDim());
  for (int k = 0; k < policy.actionDim(); ++k) {
    act[k] = policy.low[k] +
             0.5 * (policy.high[k] - policy.low[k]) * (std::tanh(out[k]) + 1.0);
  }
  return act;
}

double logProb(const GaussianPolicy& policy, std::span<const double> state,
               std::span<const double> action) {
  diff::MlpCache<double> cache;
  diff::mlpForward<double, double>(policy.spec, policy.params, state, cache);
  const auto& out = cache.act.back();
  const int d = policy.actionDim();
  double logp = 0.0;
  for (int k = 0; k < d; ++k) {
    const double mu = out[k];
    const double ls = std::clamp(out[d + k], kLogStdMin, kLogStdMax);
    const double sigma = std::exp(ls);
    // Invert the squash; clamp into the open interval to keep atanh finite.
    double z = 2.0 * (action[k] - policy.low[k]) / (policy.high[k] - policy.low[k]) - 1.0;
    z = std::clamp(z, -1.0 + 1e-12, 1.0 - 1e-12);
    const double u = std::atanh(z);
    const double e = (u - mu) / sigma;
    logp += -0.5 * e * e - ls - kHalfLog2Pi - log1mTanhSq(u) -
            std::log(0.5 * (policy.high[k] - policy.low[k]));
  }
  return logp;
}

PolicyObjective::PolicyObjective(Role own, double alpha, double beta,
                                 const diff::NetSpec& critic_spec_own,
                                 std::span<const double> own_q1,
                                 std::span<const double> own_q2,
                                 const diff::NetSpec* critic_spec_opp,
                                 std::span<const double> opp_q1,
                                 std::span<const double> opp_q2,
                                 std::span<const double> states, int state_dim, int n,
                                 ActionSource av_side, ActionSource bv_side)
    : own_(own),
      alpha_(alpha),
      beta_(beta),
      critic_own_(critic_spec_own),
      own_q1_(own_q1),
      own_q2_(own_q2),
      critic_opp_(critic_spec_opp),
      opp_q1_(opp_q1),
      opp_q2_(opp_q2),
      states_(states),
      state_dim_(state_dim),
      n_(n),
      av_(av_side),
      bv_(bv_side) {
  if (n_ <= 0) throw Error(ErrorCode::NotReady, "PolicyObjective: empty batch");
  const ActionSource& own_side = own_ == Role::Av ? av_ : bv_;
  if (own_side.spec == nullptr) {
    throw Error(ErrorCode::InvalidArg, "PolicyObjective: own side must be a policy");
  }
  if (beta_ != 0.0 && critic_opp_ == nullptr) {
    throw Error(ErrorCode::InvalidArg,
                "PolicyObjective: beta term requires opponent critics");
  }
  if (critic_own_.input_dim != state_dim_ + av_.dim + bv_.dim) {
    throw Error(ErrorCode::InvalidArg, "PolicyObjective: critic input dim mismatch");
  }
}

std::size_t PolicyObjective::sizeA() const {
  return av_.spec ? av_.spec->paramCount() : 0;
}
std::size_t PolicyObjective::sizeB() const {
  return bv_.spec ? bv_.spec->paramCount() : 0;
}

template <typename T>
T PolicyObjective::evalT(std::span<const T> a, std::span<const T> b,
                         std::vector<T>* grad_a, std::vector<T>* grad_b) const {
  if (grad_a) grad_a->assign(sizeA(), T(0.0));
  if (grad_b) grad_b->assign(sizeB(), T(0.0));

  diff::MlpCache<T> cache_av, cache_bv, cache_q1, cache_q2, cache_p1, cache_p2;
  std::vector<HeadDim<T>> head_av, head_bv;
  std::vector<T> obs(state_dim_);
  const int qin_dim = state_dim_ + av_.dim + bv_.dim;
  std::vector<T> qin(qin_dim), qin_adj(qin_dim), out_adj;
  std::vector<T> act_adj_av(av_.dim), act_adj_bv(bv_.dim);
  const T one_adj[1] = {T(-1.0)};
  const T beta_adj[1] = {T(-beta_)};

  T total(0.0);
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < state_dim_; ++k) obs[k] = T(states_[i * state_dim_ + k]);

    // Joint action: reparameterized through the policy blocks or constant.
    if (av_.spec) {
      diff::mlpForward<T, T>(*av_.spec, a, std::span<const T>(obs), cache_av);
      headForward<T>(cache_av.act.back(), av_.dim, *av_.low, *av_.high,
                     av_.noise.subspan(static_cast<std::size_t>(i) * av_.dim, av_.dim),
                     head_av);
      for (int k = 0; k < av_.dim; ++k) qin[state_dim_ + k] = head_av[k].act;
    } else {
      for (int k = 0; k < av_.dim; ++k) {
        qin[state_dim_ + k] = T(av_.const_actions[static_cast<std::size_t>(i) * av_.dim + k]);
      }
    }
    if (bv_.spec) {
      diff::mlpForward<T, T>(*bv_.spec, b, std::span<const T>(obs), cache_bv);
      headForward<T>(cache_bv.act.back(), bv_.dim, *bv_.low, *bv_.high,
                     bv_.noise.subspan(static_cast<std::size_t>(i) * bv_.dim, bv_.dim),
                     head_bv);
      for (int k = 0; k < bv_.dim; ++k) qin[state_dim_ + av_.dim + k] = head_bv[k].act;
    } else {
      for (int k = 0; k < bv_.dim; ++k) {
        qin[state_dim_ + av_.dim + k] =
            T(bv_.const_actions[static_cast<std::size_t>(i) * bv_.dim + k]);
      }
    }
    for (int k = 0; k < state_dim_; ++k) qin[k] = obs[k];

    const auto& own_head = own_ == Role::Av ? head_av : head_bv;
    const auto& own_side = own_ == Role::Av ? av_ : bv_;
    const T logp = headLogProb<T>(
        own_head,
        own_side.noise.subspan(static_cast<std::size_t>(i) * own_side.dim, own_side.dim),
        *own_side.low, *own_side.high);

    diff::mlpForward<double, T>(critic_own_, own_q1_, std::span<const T>(qin), cache_q1);
    diff::mlpForward<double, T>(critic_own_, own_q2_, std::span<const T>(qin), cache_q2);
    const T q1 = cache_q1.act.back()[0];
    const T q2 = cache_q2.act.back()[0];
    const bool own_first = diff::scalarValue(q1) <= diff::scalarValue(q2);
    const T qmin_own = own_first ? q1 : q2;

    T item = T(alpha_) * logp - qmin_own;

    bool opp_first = true;
    if (beta_ != 0.0) {
      diff::mlpForward<double, T>(*critic_opp_, opp_q1_, std::span<const T>(qin), cache_p1);
      diff::mlpForward<double, T>(*critic_opp_, opp_q2_, std::span<const T>(qin), cache_p2);
      const T p1 = cache_p1.act.back()[0];
      const T p2 = cache_p2.act.back()[0];
      opp_first = diff::scalarValue(p1) <= diff::scalarValue(p2);
      item -= T(beta_) * (opp_first ? p1 : p2);
    }
    total += item;

    if (!grad_a && !grad_b) continue;

    // Reverse pass: critic inputs, then the policy heads.
    std::fill(qin_adj.begin(), qin_adj.end(), T(0.0));
    diff::mlpBackward<double, T>(critic_own_, own_first ? own_q1_ : own_q2_,
                                 own_first ? cache_q1 : cache_q2,
                                 std::span<const T>(one_adj, 1), {}, qin_adj);
    if (beta_ != 0.0) {
      diff::mlpBackward<double, T>(*critic_opp_, opp_first ? opp_q1_ : opp_q2_,
                                   opp_first ? cache_p1 : cache_p2,
                                   std::span<const T>(beta_adj, 1), {}, qin_adj);
    }

    if (av_.spec && grad_a) {
      for (int k = 0; k < av_.dim; ++k) act_adj_av[k] = qin_adj[state_dim_ + k];
      headBackward<T>(head_av,
                      av_.noise.subspan(static_cast<std::size_t>(i) * av_.dim, av_.dim),
                      *av_.low, *av_.high, act_adj_av,
                      own_ == Role::Av ? alpha_ : 0.0, out_adj);
      diff::mlpBackward<T, T>(*av_.spec, a, cache_av, std::span<const T>(out_adj),
                              std::span<T>(*grad_a), {});
    }
    if (bv_.spec && grad_b) {
      for (int k = 0; k < bv_.dim; ++k) act_adj_bv[k] = qin_adj[state_dim_ + av_.dim + k];
      headBackward<T>(head_bv,
                      bv_.noise.subspan(static_cast<std::size_t>(i) * bv_.dim, bv_.dim),
                      *bv_.low, *bv_.high, act_adj_bv,
                      own_ == Role::Bv ? alpha_ : 0.0, out_adj);
      diff::mlpBackward<T, T>(*bv_.spec, b, cache_bv, std::span<const T>(out_adj),
                              std::span<T>(*grad_b), {});
    }
  }

  const T scale(1.0 / n_);
  if (grad_a) {
    for (T& g : *grad_a) g = g * scale;
  }
  if (grad_b) {
    for (T& g : *grad_b) g = g * scale;
  }
  return total * scale;
}

template double PolicyObjective::evalT<double>(std::span<const double>,
                                               std::span<const double>,
                                               std::vector<double>*,
                                               std::vector<double>*) const;
template diff::Dual PolicyObjective::evalT<diff::Dual>(std::span<const diff::Dual>,
                                                       std::span<const diff::Dual>,
                                                       std::vector<diff::Dual>*,
                                                       std::vector<diff::Dual>*) const;

std::vector<double> criticTargets(const TwinCritics& critics, const Batch& batch,
                                  Role own, std::span<const double> next_a_av,
                                  std::span<const double> next_a_bv,
                                  std::span<const double> next_logp_own,
                                  const SacConfig& cfg) {
  const int qin_dim = critics.spec.input_dim;
  std::vector<double> qin(qin_dim);
  std::vector<double> y(batch.n);
  diff::MlpCache<double> c1, c2;
  const auto reward = batch.reward(own);
  for (int i = 0; i < batch.n; ++i) {
    int k = 0;
    for (int j = 0; j < batch.state_dim; ++j) qin[k++] = batch.s_next[i * batch.state_dim + j];
    for (int j = 0; j < batch.av_dim; ++j) qin[k++] = next_a_av[i * batch.av_dim + j];
    for (int j = 0; j < batch.bv_dim; ++j) qin[k++] = next_a_bv[i * batch.bv_dim + j];
    diff::mlpForward<double, double>(critics.spec, critics.q1_targ, qin, c1);
    diff::mlpForward<double, double>(critics.spec, critics.q2_targ, qin, c2);
    double qmin = std::min(c1.act.back()[0], c2.act.back()[0]);
    if (cfg.entropy_in_target) qmin -= cfg.alpha * next_logp_own[i];
    y[i] = reward[i] + cfg.gamma * (1.0 - batch.done[i]) * qmin;
  }
  return y;
}

double criticLossAndGrad(const TwinCritics& critics, const Batch& batch,
                         std::span<const double> y, diff::ParamVector* grad_q1,
                         diff::ParamVector* grad_q2) {
  if (batch.n == 0) throw Error(ErrorCode::NotReady, "criticLossAndGrad: empty batch");
  const int qin_dim = critics.spec.input_dim;
  if (qin_dim != batch.state_dim + batch.av_dim + batch.bv_dim) {
    throw Error(ErrorCode::InvalidArg, "criticLossAndGrad: critic input dim mismatch");
  }
  if (grad_q1) grad_q1->assign(critics.spec.paramCount(), 0.0);
  if (grad_q2) grad_q2->assign(critics.spec.paramCount(), 0.0);

  std::vector<double> qin(qin_dim);
  diff::MlpCache<double> c1, c2;
  double loss = 0.0;
  for (int i = 0; i < batch.n; ++i) {
    int k = 0;
    for (int j = 0; j < batch.state_dim; ++j) qin[k++] = batch.s[i * batch.state_dim + j];
    for (int j = 0; j < batch.av_dim; ++j) qin[k++] = batch.a_av[i * batch.av_dim + j];
    for (int j = 0; j < batch.bv_dim; ++j) qin[k++] = batch.a_bv[i * batch.bv_dim + j];
    diff::mlpForward<double, double>(critics.spec, critics.q1, qin, c1);
    diff::mlpForward<double, double>(critics.spec, critics.q2, qin, c2);
    const double d1 = c1.act.back()[0] - y[i];
    const double d2 = c2.act.back()[0] - y[i];
    loss += 0.5 * d1 * d1 + 0.5 * d2 * d2;
    if (grad_q1) {
      const double adj1[1] = {d1};
      diff::mlpBackward<double, double>(critics.spec, critics.q1, c1,
                                        std::span<const double>(adj1, 1),
                                        std::span<double>(*grad_q1), {});
    }
    if (grad_q2) {
      const double adj2[1] = {d2};
      diff::mlpBackward<double, double>(critics.spec, critics.q2, c2,
                                        std::span<const double>(adj2, 1),
                                        std::span<double>(*grad_q2), {});
    }
  }
  const double inv_n = 1.0 / batch.n;
  if (grad_q1) {
    for (double& g : *grad_q1) g *= inv_n;
  }
  if (grad_q2) {
    for (double& g : *grad_q2) g *= inv_n;
  }
  return loss * inv_n;
}

void polyakUpdate(TwinCritics& critics, double tau) {
  for (std::size_t i = 0; i < critics.q1.size(); ++i) {
    critics.q1_targ[i] = (1.0 - tau) * critics.q1_targ[i] + tau * critics.q1[i];
    critics.q2_targ[i] = (1.0 - tau) * critics.q2_targ[i] + tau * critics.q2[i];
  }
}

void adamStep(diff::ParamVector& params, std::span<const double> grad,
              AdamState& state, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (grad.size() != params.size()) {
    throw Error(ErrorCode::InvalidArg, "adamStep: gradient size mismatch");
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + eps);
  }
}

void sampleNextOwn(const GaussianPolicy& policy, const Batch& batch,
                   std::mt19937_64& rng, std::vector<double>& actions,
                   std::vector<double>& logp) {
  const int d = policy.actionDim();
  actions.resize(static_cast<std::size_t>(batch.n) * d);
  logp.resize(batch.n);
  for (int i = 0; i < batch.n; ++i) {
    auto s = sampleAction(
        policy,
        std::span<const double>(batch.s_next).subspan(
            static_cast<std::size_t>(i) * batch.state_dim, batch.state_dim),
        rng);
    std::copy(s.action.begin(), s.action.end(), actions.begin() + static_cast<std::size_t>(i) * d);
    logp[i] = s.log_prob;
  }
}

void sampleNextActions(const GaussianPolicy& policy, const Batch& batch,
                       std::mt19937_64& rng, std::vector<double>& actions) {
  const int d = policy.actionDim();
  actions.resize(static_cast<std::size_t>(batch.n) * d);
  for (int i = 0; i < batch.n; ++i) {
    auto s = sampleAction(
        policy,
        std::span<const double>(batch.s_next).subspan(
            static_cast<std::size_t>(i) * batch.state_dim, batch.state_dim),
        rng);
    std::copy(s.action.begin(), s.action.end(), actions.begin() + static_cast<std::size_t>(i) * d);
  }
}

}  // namespace sdm::sac
