#include "sdm/diff.hpp"

#include <cmath>
#include <random>

#include "sdm/error.hpp"

namespace sdm::diff {

std::vector<int> NetSpec::dims() const {
  std::vector<int> d;
  d.reserve(hidden.size() + 2);
  d.push_back(input_dim);
  for (int h : hidden) d.push_back(h);
  d.push_back(output_dim);
  return d;
}

std::size_t NetSpec::paramCount() const {
  const auto d = dims();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < d.size(); ++l) {
    n += static_cast<std::size_t>(d[l + 1]) * d[l] + d[l + 1];
  }
  return n;
}

ParamVector initParams(const NetSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto d = spec.dims();
  ParamVector params(spec.paramCount());
  std::size_t k = 0;
  for (std::size_t l = 0; l + 1 < d.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t n = static_cast<std::size_t>(d[l + 1]) * d[l] + d[l + 1];
    for (std::size_t i = 0; i < n; ++i) params[k++] = dist(rng);
  }
  return params;
}

template <typename PT, typename T>
void mlpForward(const NetSpec& spec, std::span<const PT> params,
                std::span<const T> input, MlpCache<T>& cache) {
  const auto d = spec.dims();
  const std::size_t layers = d.size() - 1;
  cache.act.resize(layers + 1);
  cache.act[0].assign(input.begin(), input.end());

  std::size_t off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = d[l];
    const int out = d[l + 1];
    const std::vector<T>& h = cache.act[l];
    std::vector<T>& next = cache.act[l + 1];
    next.assign(out, T(0.0));
    const bool last = (l + 1 == layers);
    for (int o = 0; o < out; ++o) {
      T acc = params[off + static_cast<std::size_t>(out) * in + o];  // bias
      const PT* row = params.data() + off + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += row[i] * h[i];
      next[o] = last ? acc : tanh(acc);
    }
    off += static_cast<std::size_t>(out) * in + out;
  }
}

template <typename PT, typename T>
void mlpBackward(const NetSpec& spec, std::span<const PT> params,
                 const MlpCache<T>& cache, std::span<const T> out_adj,
                 std::span<T> param_grad, std::span<T> input_grad) {
  const auto d = spec.dims();
  const std::size_t layers = d.size() - 1;

  std::vector<std::size_t> offsets(layers);
  std::size_t off = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(d[l + 1]) * d[l] + d[l + 1];
  }

  std::vector<T> adj(out_adj.begin(), out_adj.end());
  std::vector<T> prev_adj;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = d[l];
    const int out = d[l + 1];
    const std::vector<T>& h = cache.act[l];
    const std::vector<T>& y = cache.act[l + 1];
    const bool last = (l + 1 == layers);

    // d loss / d preactivation
    if (!last) {
      for (int o = 0; o < out; ++o) {
        adj[o] = adj[o] * (T(1.0) - y[o] * y[o]);
      }
    }
    prev_adj.assign(in, T(0.0));
    for (int o = 0; o < out; ++o) {
      const PT* row = params.data() + offsets[l] + static_cast<std::size_t>(o) * in;
      const T a = adj[o];
      if (!param_grad.empty()) {
        T* grow = param_grad.data() + offsets[l] + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) grow[i] += a * h[i];
        param_grad[offsets[l] + static_cast<std::size_t>(out) * in + o] += a;
      }
      if (l > 0 || !input_grad.empty()) {
        for (int i = 0; i < in; ++i) prev_adj[i] += a * row[i];
      }
    }
    adj.swap(prev_adj);
  }
  if (!input_grad.empty()) {
    for (int i = 0; i < d[0]; ++i) input_grad[i] += adj[i];
  }
}

template void mlpForward<double, double>(const NetSpec&, std::span<const double>,
                                         std::span<const double>, MlpCache<double>&);
template void mlpForward<double, Dual>(const NetSpec&, std::span<const double>,
                                       std::span<const Dual>, MlpCache<Dual>&);
template void mlpForward<Dual, Dual>(const NetSpec&, std::span<const Dual>,
                                     std::span<const Dual>, MlpCache<Dual>&);
template void mlpBackward<double, double>(const NetSpec&, std::span<const double>,
                                          const MlpCache<double>&,
                                          std::span<const double>, std::span<double>,
                                          std::span<double>);
template void mlpBackward<double, Dual>(const NetSpec&, std::span<const double>,
                                        const MlpCache<Dual>&, std::span<const Dual>,
                                        std::span<Dual>, std::span<Dual>);
template void mlpBackward<Dual, Dual>(const NetSpec&, std::span<const Dual>,
                                      const MlpCache<Dual>&, std::span<const Dual>,
                                      std::span<Dual>, std::span<Dual>);

double lossValue(const BlockLoss& loss, std::span<const double> a,
                 std::span<const double> b) {
  return loss.eval(a, b, nullptr, nullptr);
}

ParamVector grad(const BlockLoss& loss, Block wrt, std::span<const double> a,
                 std::span<const double> b) {
  std::vector<double> g;
  if (wrt == Block::A) {
    loss.eval(a, b, &g, nullptr);
  } else {
    loss.eval(a, b, nullptr, &g);
  }
  for (double x : g) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::Numeric, "grad: non-finite gradient entry");
    }
  }
  return g;
}

namespace {

std::vector<Dual> liftWithTangent(std::span<const double> x,
                                  std::span<const double> v) {
  std::vector<Dual> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = Dual(x[i], v.empty() ? 0.0 : v[i]);
  }
  return out;
}

ParamVector tangents(const std::vector<Dual>& g) {
  ParamVector out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i].t) || !std::isfinite(g[i].v)) {
      throw Error(ErrorCode::Numeric, "second-order product: non-finite entry");
    }
    out[i] = g[i].t;
  }
  return out;
}

}  // namespace

ParamVector hvp(const BlockLoss& loss, Block wrt, std::span<const double> a,
                std::span<const double> b, std::span<const double> v) {
  const std::size_t n = (wrt == Block::A) ? loss.sizeA() : loss.sizeB();
  if (v.size() != n) {
    throw Error(ErrorCode::InvalidArg, "hvp: direction length mismatch");
  }
  auto da = liftWithTangent(a, wrt == Block::A ? v : std::span<const double>{});
  auto db = liftWithTangent(b, wrt == Block::B ? v : std::span<const double>{});
  std::vector<Dual> g;
  if (wrt == Block::A) {
    loss.eval(std::span<const Dual>(da), std::span<const Dual>(db), &g, nullptr);
  } else {
    loss.eval(std::span<const Dual>(da), std::span<const Dual>(db), nullptr, &g);
  }
  return tangents(g);
}

ParamVector mixedVjp(const BlockLoss& loss, Block outer, Block inner,
                     std::span<const double> a, std::span<const double> b,
                     std::span<const double> v) {
  if (outer == inner) {
    throw Error(ErrorCode::InvalidArg, "mixedVjp: blocks must differ");
  }
  const std::size_t n_inner = (inner == Block::A) ? loss.sizeA() : loss.sizeB();
  if (v.size() != n_inner) {
    throw Error(ErrorCode::InvalidArg, "mixedVjp: direction length mismatch");
  }
  auto da = liftWithTangent(a, inner == Block::A ? v : std::span<const double>{});
  auto db = liftWithTangent(b, inner == Block::B ? v : std::span<const double>{});
  std::vector<Dual> g;
  if (outer == Block::A) {
    loss.eval(std::span<const Dual>(da), std::span<const Dual>(db), &g, nullptr);
  } else {
    loss.eval(std::span<const Dual>(da), std::span<const Dual>(db), nullptr, &g);
  }
  return tangents(g);
}

}  // namespace sdm::diff
