#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgdre/errors.hpp"

namespace hgdre::ad {

template <class Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
template <class Real>
using ColVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

// A named parameter matrix with its gradient accumulator. Frozen tensors
// (trainable = false) take part in forward passes but receive no gradient
// and are skipped by optimizers.
template <class Real>
struct Tensor {
  std::string name;
  Matrix<Real> value;
  Matrix<Real> grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  long size() const { return static_cast<long>(value.size()); }
};

// Reverse-mode tape over dense matrices. Forward values are computed eagerly;
// backward closures are recorded per node and replayed in reverse. With
// record_gradients = false the tape skips all bookkeeping (inference mode).
template <class Real>
class Tape {
 public:
  using Var = int;

  explicit Tape(bool record_gradients = true) : record_(record_gradients) {
    nodes_.reserve(4096);
  }

  const Matrix<Real>& val(Var v) const {
    const Node& n = nodes_[static_cast<size_t>(v)];
    return n.tensor ? n.tensor->value : n.val;
  }

  int rows(Var v) const { return static_cast<int>(val(v).rows()); }
  int cols(Var v) const { return static_cast<int>(val(v).cols()); }
  size_t node_count() const { return nodes_.size(); }

  Var constant(Matrix<Real> m) {
    return push(std::move(m), false, nullptr);
  }

  Var leaf(Tensor<Real>& t) {
    if (t.trainable && t.grad.size() == 0) t.zero_grad();
    Node n;
    n.tensor = &t;
    n.needs = record_ && t.trainable;
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  Var matmul(Var a, Var b) {
    if (cols(a) != rows(b)) throw ConfigError("matmul: inner dimensions differ");
    Matrix<Real> out = val(a) * val(b);
    Var v = push(std::move(out), needs(a) || needs(b), [this, a, b](Var self) {
      const Matrix<Real>& g = grad_of(self);
      if (needs(a)) grad_of(a).noalias() += g * val(b).transpose();
      if (needs(b)) grad_of(b).noalias() += val(a).transpose() * g;
    });
    return v;
  }

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Matrix<Real> out = val(a) + val(b);
    return push(std::move(out), needs(a) || needs(b), [this, a, b](Var self) {
      const Matrix<Real>& g = grad_of(self);
      if (needs(a)) grad_of(a) += g;
      if (needs(b)) grad_of(b) += g;
    });
  }

  // a (r x c) + row vector (1 x c) broadcast down the rows.
  Var add_rowvec(Var a, Var b) {
    if (rows(b) != 1 || cols(a) != cols(b)) throw ConfigError("add_rowvec: shape mismatch");
    Matrix<Real> out = val(a).rowwise() + val(b).row(0);
    return push(std::move(out), needs(a) || needs(b), [this, a, b](Var self) {
      const Matrix<Real>& g = grad_of(self);
      if (needs(a)) grad_of(a) += g;
      if (needs(b)) grad_of(b).row(0) += g.colwise().sum();
    });
  }

  Var cmul(Var a, Var b) {
    check_same_shape(a, b, "cmul");
    Matrix<Real> out = val(a).cwiseProduct(val(b));
    return push(std::move(out), needs(a) || needs(b), [this, a, b](Var self) {
      const Matrix<Real>& g = grad_of(self);
      if (needs(a)) grad_of(a) += g.cwiseProduct(val(b));
      if (needs(b)) grad_of(b) += g.cwiseProduct(val(a));
    });
  }

  Var cmul_const(Var a, Matrix<Real> m) {
    if (m.rows() != rows(a) || m.cols() != cols(a))
      throw ConfigError("cmul_const: shape mismatch");
    Matrix<Real> out = val(a).cwiseProduct(m);
    auto mask = std::make_shared<Matrix<Real>>(std::move(m));
    return push(std::move(out), needs(a), [this, a, mask](Var self) {
      if (needs(a)) grad_of(a) += grad_of(self).cwiseProduct(*mask);
    });
  }

  // Scales row i of a by mask[i]; mask carries no gradient.
  Var row_scale(Var a, ColVec<Real> mask) {
    if (mask.size() != rows(a)) throw ConfigError("row_scale: mask length mismatch");
    Matrix<Real> out = mask.asDiagonal() * val(a);
    auto m = std::make_shared<ColVec<Real>>(std::move(mask));
    return push(std::move(out), needs(a), [this, a, m](Var self) {
      if (needs(a)) grad_of(a) += m->asDiagonal() * grad_of(self);
    });
  }

  Var scale(Var a, Real s) {
    Matrix<Real> out = val(a) * s;
    return push(std::move(out), needs(a), [this, a, s](Var self) {
      if (needs(a)) grad_of(a) += grad_of(self) * s;
    });
  }

  Var hcat(std::span<const Var> parts) {
    if (parts.empty()) throw ConfigError("hcat: no inputs");
    int r = rows(parts[0]);
    int c = 0;
    for (Var p : parts) {
      if (rows(p) != r) throw ConfigError("hcat: row count mismatch");
      c += cols(p);
    }
    Matrix<Real> out(r, c);
    int at = 0;
    bool any = false;
    for (Var p : parts) {
      out.middleCols(at, cols(p)) = val(p);
      at += cols(p);
      any = any || needs(p);
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(out), any, [this, ps](Var self) {
      const Matrix<Real>& g = grad_of(self);
      int at = 0;
      for (Var p : ps) {
        if (needs(p)) grad_of(p) += g.middleCols(at, cols(p));
        at += cols(p);
      }
    });
  }
  Var hcat(std::initializer_list<Var> parts) {
    std::vector<Var> v(parts);
    return hcat(std::span<const Var>(v));
  }

  Var vcat(std::span<const Var> parts) {
    if (parts.empty()) throw ConfigError("vcat: no inputs");
    int c = cols(parts[0]);
    int r = 0;
    for (Var p : parts) {
      if (cols(p) != c) throw ConfigError("vcat: column count mismatch");
      r += rows(p);
    }
    Matrix<Real> out(r, c);
    int at = 0;
    bool any = false;
    for (Var p : parts) {
      out.middleRows(at, rows(p)) = val(p);
      at += rows(p);
      any = any || needs(p);
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(out), any, [this, ps](Var self) {
      const Matrix<Real>& g = grad_of(self);
      int at = 0;
      for (Var p : ps) {
        if (needs(p)) grad_of(p) += g.middleRows(at, rows(p));
        at += rows(p);
      }
    });
  }
  Var vcat(std::initializer_list<Var> parts) {
    std::vector<Var> v(parts);
    return vcat(std::span<const Var>(v));
  }

  Var slice_cols(Var a, int begin, int n) {
    if (begin < 0 || begin + n > cols(a)) throw ConfigError("slice_cols: out of range");
    Matrix<Real> out = val(a).middleCols(begin, n);
    return push(std::move(out), needs(a), [this, a, begin, n](Var self) {
      if (needs(a)) grad_of(a).middleCols(begin, n) += grad_of(self);
    });
  }

  Var gather_rows(Var a, std::vector<int> idx) {
    Matrix<Real> out(static_cast<long>(idx.size()), cols(a));
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0 || idx[i] >= rows(a)) throw ConfigError("gather_rows: index out of range");
      out.row(static_cast<long>(i)) = val(a).row(idx[i]);
    }
    auto ids = std::make_shared<std::vector<int>>(std::move(idx));
    return push(std::move(out), needs(a), [this, a, ids](Var self) {
      if (!needs(a)) return;
      const Matrix<Real>& g = grad_of(self);
      Matrix<Real>& ga = grad_of(a);
      for (size_t i = 0; i < ids->size(); ++i)
        ga.row((*ids)[i]) += g.row(static_cast<long>(i));
    });
  }

  Var sigmoid(Var a) {
    Matrix<Real> out = val(a).unaryExpr([](Real x) {
      if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
      Real e = std::exp(x);
      return e / (Real(1) + e);
    });
    return push(std::move(out), needs(a), [this, a](Var self) {
      if (!needs(a)) return;
      const Matrix<Real>& y = val_of(self);
      grad_of(a).array() += grad_of(self).array() * y.array() * (Real(1) - y.array());
    });
  }

  Var tanh_(Var a) {
    Matrix<Real> out = val(a).array().tanh();
    return push(std::move(out), needs(a), [this, a](Var self) {
      if (!needs(a)) return;
      const Matrix<Real>& y = val_of(self);
      grad_of(a).array() += grad_of(self).array() * (Real(1) - y.array().square());
    });
  }

  Var relu(Var a) {
    Matrix<Real> out = val(a).cwiseMax(Real(0));
    return push(std::move(out), needs(a), [this, a](Var self) {
      if (!needs(a)) return;
      grad_of(a).array() +=
          grad_of(self).array() * (val(a).array() > Real(0)).template cast<Real>();
    });
  }

  Var leaky_relu(Var a, Real slope) {
    Matrix<Real> out = val(a).unaryExpr([slope](Real x) { return x > Real(0) ? x : slope * x; });
    return push(std::move(out), needs(a), [this, a, slope](Var self) {
      if (!needs(a)) return;
      Matrix<Real> d = val(a).unaryExpr([slope](Real x) { return x > Real(0) ? Real(1) : slope; });
      grad_of(a).array() += grad_of(self).array() * d.array();
    });
  }

  Var elu(Var a, Real alpha = Real(1)) {
    Matrix<Real> out = val(a).unaryExpr(
        [alpha](Real x) { return x > Real(0) ? x : alpha * (std::exp(x) - Real(1)); });
    return push(std::move(out), needs(a), [this, a, alpha](Var self) {
      if (!needs(a)) return;
      Matrix<Real> d = val(a).unaryExpr(
          [alpha](Real x) { return x > Real(0) ? Real(1) : alpha * std::exp(x); });
      grad_of(a).array() += grad_of(self).array() * d.array();
    });
  }

  Var softplus(Var a) {
    Matrix<Real> out = val(a).unaryExpr([](Real x) {
      return x > Real(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    });
    return push(std::move(out), needs(a), [this, a](Var self) {
      if (!needs(a)) return;
      grad_of(a).array() += grad_of(self).array() * val(a).unaryExpr([](Real x) {
        if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
        Real e = std::exp(x);
        return e / (Real(1) + e);
      }).array();
    });
  }

  // Column-wise max over rows -> 1 x c. Ties break to the lowest row index,
  // which keeps summation order deterministic.
  Var colwise_max(Var a) {
    const Matrix<Real>& x = val(a);
    Matrix<Real> out(1, x.cols());
    auto arg = std::make_shared<std::vector<int>>(static_cast<size_t>(x.cols()));
    for (long c = 0; c < x.cols(); ++c) {
      long best = 0;
      for (long r = 1; r < x.rows(); ++r)
        if (x(r, c) > x(best, c)) best = r;
      out(0, c) = x(best, c);
      (*arg)[static_cast<size_t>(c)] = static_cast<int>(best);
    }
    return push(std::move(out), needs(a), [this, a, arg](Var self) {
      if (!needs(a)) return;
      const Matrix<Real>& g = grad_of(self);
      Matrix<Real>& ga = grad_of(a);
      for (long c = 0; c < g.cols(); ++c) ga((*arg)[static_cast<size_t>(c)], c) += g(0, c);
    });
  }

  Var sum_all(Var a) {
    Matrix<Real> out(1, 1);
    out(0, 0) = val(a).sum();
    return push(std::move(out), needs(a), [this, a](Var self) {
      if (needs(a)) grad_of(a).array() += grad_of(self)(0, 0);
    });
  }

  Var mean_all(Var a) {
    Real n = static_cast<Real>(val(a).size());
    Matrix<Real> out(1, 1);
    out(0, 0) = val(a).sum() / n;
    return push(std::move(out), needs(a), [this, a, n](Var self) {
      if (needs(a)) grad_of(a).array() += grad_of(self)(0, 0) / n;
    });
  }

  // Softmax within contiguous runs of equal segment id, independently per
  // column. `segments` must be non-decreasing, one entry per row.
  Var segment_softmax(Var a, std::vector<int> segments) {
    const Matrix<Real>& x = val(a);
    if (static_cast<long>(segments.size()) != x.rows())
      throw ConfigError("segment_softmax: segment list length mismatch");
    Matrix<Real> out(x.rows(), x.cols());
    auto runs = std::make_shared<std::vector<std::pair<long, long>>>();
    long s = 0;
    while (s < x.rows()) {
      long e = s + 1;
      while (e < x.rows() && segments[static_cast<size_t>(e)] == segments[static_cast<size_t>(s)]) ++e;
      if (e < x.rows() && segments[static_cast<size_t>(e)] < segments[static_cast<size_t>(s)])
        throw ConfigError("segment_softmax: segments not sorted");
      for (long c = 0; c < x.cols(); ++c) {
        Real m = x(s, c);
        for (long r = s + 1; r < e; ++r) m = std::max(m, x(r, c));
        Real z = Real(0);
        for (long r = s; r < e; ++r) z += std::exp(x(r, c) - m);
        for (long r = s; r < e; ++r) out(r, c) = std::exp(x(r, c) - m) / z;
      }
      runs->emplace_back(s, e);
      s = e;
    }
    return push(std::move(out), needs(a), [this, a, runs](Var self) {
      if (!needs(a)) return;
      const Matrix<Real>& y = val_of(self);
      const Matrix<Real>& g = grad_of(self);
      Matrix<Real>& ga = grad_of(a);
      for (auto [rs, re] : *runs) {
        for (long c = 0; c < y.cols(); ++c) {
          Real dot = Real(0);
          for (long r = rs; r < re; ++r) dot += y(r, c) * g(r, c);
          for (long r = rs; r < re; ++r) ga(r, c) += y(r, c) * (g(r, c) - dot);
        }
      }
    });
  }

  // Multi-head attention aggregation. alpha is E x K (per-edge, per-head
  // weights), values is S x (K*head_dim) with head-major column blocks.
  // Output row t, block k = sum over edges e with tgt[e]==t of
  // alpha(e,k) * values.row(src[e]).block(k).
  Var gat_aggregate(Var alpha, Var values, std::vector<int> src, std::vector<int> tgt,
                    int n_targets, int head_dim) {
    const Matrix<Real>& al = val(alpha);
    const Matrix<Real>& v = val(values);
    const int heads = static_cast<int>(al.cols());
    if (v.cols() != static_cast<long>(heads) * head_dim)
      throw ConfigError("gat_aggregate: values width != heads * head_dim");
    if (al.rows() != static_cast<long>(src.size()) || src.size() != tgt.size())
      throw ConfigError("gat_aggregate: edge list length mismatch");
    Matrix<Real> out = Matrix<Real>::Zero(n_targets, v.cols());
    for (size_t e = 0; e < src.size(); ++e)
      for (int k = 0; k < heads; ++k)
        out.row(tgt[e]).segment(k * head_dim, head_dim) +=
            al(static_cast<long>(e), k) * v.row(src[e]).segment(k * head_dim, head_dim);
    auto s = std::make_shared<std::vector<int>>(std::move(src));
    auto t = std::make_shared<std::vector<int>>(std::move(tgt));
    return push(std::move(out), needs(alpha) || needs(values),
                [this, alpha, values, s, t, heads, head_dim](Var self) {
      const Matrix<Real>& g = grad_of(self);
      const Matrix<Real>& al = val(alpha);
      const Matrix<Real>& v = val(values);
      for (size_t e = 0; e < s->size(); ++e) {
        for (int k = 0; k < heads; ++k) {
          auto gblk = g.row((*t)[e]).segment(k * head_dim, head_dim);
          if (needs(alpha))
            grad_of(alpha)(static_cast<long>(e), k) +=
                gblk.dot(v.row((*s)[e]).segment(k * head_dim, head_dim));
          if (needs(values))
            grad_of(values).row((*s)[e]).segment(k * head_dim, head_dim) +=
                al(static_cast<long>(e), k) * gblk;
        }
      }
    });
  }

  // Runs reverse accumulation from a 1x1 loss node. Parameter gradients are
  // accumulated into their Tensor::grad (call zero_grad between steps).
  void backward(Var loss) {
    if (!record_) throw ConfigError("backward called on a non-recording tape");
    if (val(loss).size() != 1) throw ConfigError("backward: loss must be 1x1");
    grad_of(loss).setConstant(Real(1));
    for (long i = static_cast<long>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.back) continue;
      if (!n.tensor && n.grad.size() == 0) continue;  // never reached from the loss
      n.back(static_cast<Var>(i));
    }
  }

 private:
  struct Node {
    Matrix<Real> val;
    Matrix<Real> grad;
    Tensor<Real>* tensor = nullptr;
    std::function<void(Var)> back;
    bool needs = false;
  };

  bool needs(Var v) const { return nodes_[static_cast<size_t>(v)].needs; }

  const Matrix<Real>& val_of(Var v) const { return val(v); }

  Matrix<Real>& grad_of(Var v) {
    Node& n = nodes_[static_cast<size_t>(v)];
    if (n.tensor) {
      if (n.tensor->grad.size() == 0) n.tensor->zero_grad();
      return n.tensor->grad;
    }
    if (n.grad.size() == 0) n.grad.setZero(n.val.rows(), n.val.cols());
    return n.grad;
  }

  void check_same_shape(Var a, Var b, const char* op) const {
    if (rows(a) != rows(b) || cols(a) != cols(b))
      throw ConfigError(std::string(op) + ": shape mismatch");
  }

  template <class F>
  Var push(Matrix<Real> out, bool needs_grad, F&& back) {
    Node n;
    n.val = std::move(out);
    n.needs = record_ && needs_grad;
    if (n.needs) n.back = std::forward<F>(back);
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  Var push(Matrix<Real> out, bool needs_grad, std::nullptr_t) {
    Node n;
    n.val = std::move(out);
    n.needs = false;
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  bool record_;
};

}  // namespace hgdre::ad
