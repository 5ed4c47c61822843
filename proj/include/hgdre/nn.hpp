#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hgdre/autodiff.hpp"
#include "hgdre/errors.hpp"

namespace hgdre::nn {

using hgdre::ad::Matrix;
using hgdre::ad::Tape;
using hgdre::ad::Tensor;

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Owns every parameter tensor, keyed by a module path such as
// "encoder.local.l0.fwd.W". Initialization is seeded by (master seed, name)
// so values do not depend on creation order.
template <class Real>
class ParameterStore {
 public:
  explicit ParameterStore(uint64_t seed = 0) : seed_(seed) {}

  Tensor<Real>& uniform(const std::string& name, long rows, long cols, Real lo, Real hi,
                        bool trainable = true) {
    std::mt19937_64 rng(seed_ ^ fnv1a64(name));
    std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
    Tensor<Real>& t = create(name, rows, cols, trainable);
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) t.value(i, j) = static_cast<Real>(dist(rng));
    return t;
  }

  // Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  Tensor<Real>& glorot(const std::string& name, long rows, long cols, bool trainable = true) {
    Real a = static_cast<Real>(std::sqrt(6.0 / static_cast<double>(rows + cols)));
    return uniform(name, rows, cols, -a, a, trainable);
  }

  Tensor<Real>& zeros(const std::string& name, long rows, long cols, bool trainable = true) {
    Tensor<Real>& t = create(name, rows, cols, trainable);
    t.value.setZero();
    return t;
  }

  Tensor<Real>& get(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
    return *it->second;
  }
  const Tensor<Real>& get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter: " + name);
    return *it->second;
  }
  bool contains(const std::string& name) const { return by_name_.count(name) != 0; }

  std::vector<Tensor<Real>*> all() {
    std::vector<Tensor<Real>*> out;
    out.reserve(by_name_.size());
    for (auto& [name, t] : by_name_) out.push_back(t);
    return out;  // map order: deterministic by name
  }
  std::vector<const Tensor<Real>*> all() const {
    std::vector<const Tensor<Real>*> out;
    out.reserve(by_name_.size());
    for (auto& [name, t] : by_name_) out.push_back(t);
    return out;
  }

  long trainable_count() const {
    long n = 0;
    for (auto& [name, t] : by_name_)
      if (t->trainable) n += t->size();
    return n;
  }
  long frozen_count() const {
    long n = 0;
    for (auto& [name, t] : by_name_)
      if (!t->trainable) n += t->size();
    return n;
  }

  void zero_grads() {
    for (auto& [name, t] : by_name_)
      if (t->trainable) t->zero_grad();
  }

  uint64_t seed() const { return seed_; }

 private:
  Tensor<Real>& create(const std::string& name, long rows, long cols, bool trainable) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter: " + name);
    auto t = std::make_unique<Tensor<Real>>();
    t->name = name;
    t->value.resize(rows, cols);
    t->trainable = trainable;
    Tensor<Real>* raw = t.get();
    owned_.push_back(std::move(t));
    by_name_.emplace(name, raw);
    return *raw;
  }

  uint64_t seed_;
  std::vector<std::unique_ptr<Tensor<Real>>> owned_;
  std::map<std::string, Tensor<Real>*> by_name_;
};

template <class Real>
struct Linear {
  Tensor<Real>* W = nullptr;  // in x out
  Tensor<Real>* b = nullptr;  // 1 x out

  static Linear create(ParameterStore<Real>& store, const std::string& prefix, long in,
                       long out) {
    Linear lin;
    lin.W = &store.glorot(prefix + ".W", in, out);
    lin.b = &store.zeros(prefix + ".b", 1, out);
    return lin;
  }

  typename Tape<Real>::Var apply(Tape<Real>& t, typename Tape<Real>::Var x) const {
    return t.add_rowvec(t.matmul(x, t.leaf(*W)), t.leaf(*b));
  }
};

// One direction of one LSTM layer. Gate order in the fused matrices is
// [input, forget, cell, output].
template <class Real>
struct LstmDirection {
  Tensor<Real>* W = nullptr;  // in x 4h
  Tensor<Real>* U = nullptr;  // h x 4h
  Tensor<Real>* b = nullptr;  // 1 x 4h
  int hidden = 0;

  static LstmDirection create(ParameterStore<Real>& store, const std::string& prefix, long in,
                              long hidden) {
    LstmDirection d;
    d.hidden = static_cast<int>(hidden);
    d.W = &store.glorot(prefix + ".W", in, 4 * hidden);
    d.U = &store.glorot(prefix + ".U", hidden, 4 * hidden);
    d.b = &store.zeros(prefix + ".b", 1, 4 * hidden);
    return d;
  }

  // Runs the recurrence over a T x in input; returns T x h hidden states in
  // input order. reverse = true processes right-to-left.
  typename Tape<Real>::Var run(Tape<Real>& t, typename Tape<Real>::Var input,
                               bool reverse) const {
    using Var = typename Tape<Real>::Var;
    const int T = t.rows(input);
    const int h = hidden;
    Var xw = t.add_rowvec(t.matmul(input, t.leaf(*W)), t.leaf(*b));  // T x 4h
    Var u = t.leaf(*U);
    Var hstate = t.constant(Matrix<Real>::Zero(1, h));
    Var cstate = t.constant(Matrix<Real>::Zero(1, h));
    std::vector<Var> rows(static_cast<size_t>(T));
    for (int step = 0; step < T; ++step) {
      int at = reverse ? T - 1 - step : step;
      Var z = t.add(t.gather_rows(xw, {at}), t.matmul(hstate, u));  // 1 x 4h
      Var ig = t.sigmoid(t.slice_cols(z, 0, h));
      Var fg = t.sigmoid(t.slice_cols(z, h, h));
      Var gg = t.tanh_(t.slice_cols(z, 2 * h, h));
      Var og = t.sigmoid(t.slice_cols(z, 3 * h, h));
      cstate = t.add(t.cmul(fg, cstate), t.cmul(ig, gg));
      hstate = t.cmul(og, t.tanh_(cstate));
      rows[static_cast<size_t>(at)] = hstate;
    }
    return t.vcat(std::span<const Var>(rows));
  }
};

// Stacked bidirectional LSTM; per-layer output is [forward; backward]
// concatenated per step, with dropout applied between stacked layers.
template <class Real>
struct BiLstm {
  std::vector<LstmDirection<Real>> fwd;
  std::vector<LstmDirection<Real>> bwd;
  int input_dim = 0;
  int hidden = 0;
  Real dropout = Real(0);

  static BiLstm create(ParameterStore<Real>& store, const std::string& prefix, long in,
                       long hidden, int layers, Real dropout) {
    BiLstm b;
    b.input_dim = static_cast<int>(in);
    b.hidden = static_cast<int>(hidden);
    b.dropout = dropout;
    long layer_in = in;
    for (int l = 0; l < layers; ++l) {
      std::string lp = prefix + ".l" + std::to_string(l);
      b.fwd.push_back(LstmDirection<Real>::create(store, lp + ".fwd", layer_in, hidden));
      b.bwd.push_back(LstmDirection<Real>::create(store, lp + ".bwd", layer_in, hidden));
      layer_in = 2 * hidden;
    }
    return b;
  }

  int output_dim() const { return 2 * hidden; }

  typename Tape<Real>::Var run(Tape<Real>& t, typename Tape<Real>::Var input, bool train,
                               std::mt19937_64* dropout_rng) const {
    using Var = typename Tape<Real>::Var;
    Var x = input;
    for (size_t l = 0; l < fwd.size(); ++l) {
      if (l > 0 && train && dropout > Real(0)) {
        if (!dropout_rng) throw ConfigError("BiLstm: dropout requires an RNG in train mode");
        std::bernoulli_distribution keep(1.0 - static_cast<double>(dropout));
        Matrix<Real> mask(t.rows(x), t.cols(x));
        for (long i = 0; i < mask.rows(); ++i)
          for (long j = 0; j < mask.cols(); ++j)
            mask(i, j) = keep(*dropout_rng) ? Real(1) / (Real(1) - dropout) : Real(0);
        x = t.cmul_const(x, std::move(mask));
      }
      Var f = fwd[l].run(t, x, /*reverse=*/false);
      Var b = bwd[l].run(t, x, /*reverse=*/true);
      x = t.hcat({f, b});
    }
    return x;
  }
};

// Adaptive moment estimation with bias correction. State is keyed by
// parameter name so checkpoint round-trips can restore it.
template <class Real>
class Adam {
 public:
  Adam(Real lr, Real beta1 = Real(0.9), Real beta2 = Real(0.999), Real eps = Real(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParameterStore<Real>& store) {
    ++t_;
    const double bc1 = 1.0 - std::pow(static_cast<double>(beta1_), t_);
    const double bc2 = 1.0 - std::pow(static_cast<double>(beta2_), t_);
    for (Tensor<Real>* p : store.all()) {
      if (!p->trainable || p->grad.size() == 0) continue;
      Moments& m = state_[p->name];
      if (m.m.size() == 0) {
        m.m.setZero(p->value.rows(), p->value.cols());
        m.v.setZero(p->value.rows(), p->value.cols());
      }
      m.m = beta1_ * m.m + (Real(1) - beta1_) * p->grad;
      m.v.array() = beta2_ * m.v.array() + (Real(1) - beta2_) * p->grad.array().square();
      p->value.array() -= lr_ * (m.m.array() / static_cast<Real>(bc1)) /
                          ((m.v.array() / static_cast<Real>(bc2)).sqrt() + eps_);
    }
  }

  Real learning_rate() const { return lr_; }

 private:
  struct Moments {
    Matrix<Real> m, v;
  };
  Real lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace hgdre::nn
