#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sdm::diff {

// Forward-mode scalar carrying one directional tangent. Running the
// hand-written reverse passes below with Dual scalars yields exact
// Hessian-vector and mixed second-derivative products
// (forward-over-reverse), so second-order quantities never require a
// materialized Hessian.
struct Dual {
  double v = 0.0;  // value
  double t = 0.0;  // tangent

  Dual() = default;
  Dual(double value) : v(value) {}  // constants lift with a zero tangent
  Dual(double value, double tangent) : v(value), t(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    t += o.t;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    t -= o.t;
    return *this;
  }
  Dual operator-() const { return {-v, -t}; }
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.t + b.t}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.t - b.t}; }
inline Dual operator*(Dual a, Dual b) {
  return {a.v * b.v, a.t * b.v + a.v * b.t};
}
inline Dual operator/(Dual a, Dual b) {
  const double inv = 1.0 / b.v;
  const double q = a.v * inv;
  return {q, (a.t - q * b.t) * inv};
}

inline double scalarValue(double x) { return x; }
inline double scalarValue(const Dual& x) { return x.v; }

inline Dual tanh(Dual a) {
  const double th = std::tanh(a.v);
  return {th, a.t * (1.0 - th * th)};
}
inline Dual exp(Dual a) {
  const double e = std::exp(a.v);
  return {e, a.t * e};
}
inline Dual log(Dual a) { return {std::log(a.v), a.t / a.v}; }

using std::exp;
using std::log;
using std::tanh;

// Branch-by-value min; ties take the first argument, matching the
// derivative convention used for min_j Q_j terms.
template <typename T>
inline T minByValue(const T& a, const T& b) {
  return scalarValue(a) <= scalarValue(b) ? a : b;
}

// Feed-forward net: affine layers with tanh on every hidden layer and a
// linear output layer. Parameters are stored flat, per layer: weight
// matrix (row-major, out x in) followed by bias.
struct NetSpec {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden;

  std::size_t layerCount() const { return hidden.size() + 1; }
  std::vector<int> dims() const;
  std::size_t paramCount() const;

  bool operator==(const NetSpec&) const = default;
};

// Flat parameter container all gradient/HVP operations act on.
using ParamVector = std::vector<double>;

// Uniform fan-in initialization from a dedicated seeded stream.
ParamVector initParams(const NetSpec& spec, std::uint64_t seed);

// Per-evaluation scratch holding the activations the backward pass needs.
template <typename T>
struct MlpCache {
  std::vector<std::vector<T>> act;  // act[0] = input, act[L] = output
};

// PT is the parameter scalar, T the data scalar (T must be at least as
// wide: (double,double), (double,Dual) and (Dual,Dual) are the used
// instantiations).
template <typename PT, typename T>
void mlpForward(const NetSpec& spec, std::span<const PT> params,
                std::span<const T> input, MlpCache<T>& cache);

// Accumulates (+=) into param_grad / input_grad; pass an empty span to
// skip either side.
template <typename PT, typename T>
void mlpBackward(const NetSpec& spec, std::span<const PT> params,
                 const MlpCache<T>& cache, std::span<const T> out_adj,
                 std::span<T> param_grad, std::span<T> input_grad);

// A twice-differentiable scalar function of two parameter blocks.
// Implementations provide one templated evaluation and surface it for
// double (values, gradients) and Dual (second-order products) scalars.
class BlockLoss {
 public:
  virtual ~BlockLoss() = default;
  virtual std::size_t sizeA() const = 0;
  virtual std::size_t sizeB() const = 0;
  // When grad_a/grad_b are non-null they are resized and overwritten with
  // the gradient of the mean loss for that block.
  virtual double eval(std::span<const double> a, std::span<const double> b,
                      std::vector<double>* grad_a,
                      std::vector<double>* grad_b) const = 0;
  virtual Dual eval(std::span<const Dual> a, std::span<const Dual> b,
                    std::vector<Dual>* grad_a,
                    std::vector<Dual>* grad_b) const = 0;
};

// CRTP helper: Derived implements
//   template <typename T> T evalT(span<const T> a, span<const T> b,
//                                 vector<T>* ga, vector<T>* gb) const;
template <class Derived>
class BlockLossBase : public BlockLoss {
 public:
  double eval(std::span<const double> a, std::span<const double> b,
              std::vector<double>* ga, std::vector<double>* gb) const override {
    return static_cast<const Derived*>(this)->template evalT<double>(a, b, ga, gb);
  }
  Dual eval(std::span<const Dual> a, std::span<const Dual> b,
            std::vector<Dual>* ga, std::vector<Dual>* gb) const override {
    return static_cast<const Derived*>(this)->template evalT<Dual>(a, b, ga, gb);
  }
};

enum class Block { A, B };

double lossValue(const BlockLoss& loss, std::span<const double> a,
                 std::span<const double> b);

// Exact reverse-mode gradient with respect to the selected block.
ParamVector grad(const BlockLoss& loss, Block wrt, std::span<const double> a,
                 std::span<const double> b);

// Hessian-vector product (d^2 L / d wrt^2) v via forward-over-reverse.
ParamVector hvp(const BlockLoss& loss, Block wrt, std::span<const double> a,
                std::span<const double> b, std::span<const double> v);

// Mixed product (d_outer d_inner L) v, i.e. the derivative with respect
// to the outer block of <grad_inner L, v>.
ParamVector mixedVjp(const BlockLoss& loss, Block outer, Block inner,
                     std::span<const double> a, std::span<const double> b,
                     std::span<const double> v);

}  // namespace sdm::diff
