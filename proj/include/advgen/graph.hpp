#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "advgen/tensor.hpp"

namespace advgen {

class Graph;

/// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;
};

/// Reverse-mode autodiff tape. Nodes are appended in creation order, which
/// is a topological order, so backward() is a single reverse sweep that
/// visits each node exactly once. Gradients accumulate on reuse. A Graph
/// owns all of its state; separate graphs never interact.
class Graph {
 public:
  Var leaf(Tensor value, bool requires_grad = true) {
    nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, requires_grad});
    return Var{this, nodes_.size() - 1};
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Tensor::scalar(v), false); }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }

  void backward(Var out) {
    if (out.graph != this) throw std::invalid_argument("backward: var from another graph");
    if (nodes_.at(out.id).value.size() != 1)
      throw std::invalid_argument("backward: output must be scalar");
    for (std::size_t i = 0; i <= out.id; ++i)
      nodes_[i].grad = Tensor(nodes_[i].value.shape);
    nodes_[out.id].grad.data[0] = 1.0;
    for (std::size_t i = out.id + 1; i-- > 0;) {
      if (nodes_[i].backprop && nodes_[i].requires_grad) nodes_[i].backprop();
    }
  }

  std::size_t size() const { return nodes_.size(); }
  bool needs_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Emits an op node. `backprop` receives (output grad) read access via the
  /// graph; it is installed only when some parent participates in autodiff.
  Var emit(Tensor value, const std::vector<Var>& parents,
           const std::function<void(Graph&, std::size_t out_id)>& backprop) {
    bool rg = false;
    for (Var p : parents) {
      if (p.graph != this) throw std::invalid_argument("op: vars must live on the same graph");
      rg = rg || needs_grad(p);
    }
    nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, rg});
    std::size_t id = nodes_.size() - 1;
    if (rg && backprop) {
      Graph* self = this;
      nodes_[id].backprop = [self, id, backprop]() { backprop(*self, id); };
    }
    return Var{this, id};
  }

  Tensor& grad_ref(std::size_t id) { return nodes_[id].grad; }
  const Tensor& value_ref(std::size_t id) const { return nodes_[id].value; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backprop;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) +
                                " vs " + shape_string(b));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Var add(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::check_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  std::size_t ai = a.id, bi = b.id;
  return g.emit(std::move(out), {a, b}, [ai, bi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& da = gr.grad_ref(ai);
    Tensor& db = gr.grad_ref(bi);
    for (std::size_t i = 0; i < d.size(); ++i) {
      da[i] += d[i];
      db[i] += d[i];
    }
  });
}

inline Var sub(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::check_same_shape(av, bv, "sub");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  std::size_t ai = a.id, bi = b.id;
  return g.emit(std::move(out), {a, b}, [ai, bi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& da = gr.grad_ref(ai);
    Tensor& db = gr.grad_ref(bi);
    for (std::size_t i = 0; i < d.size(); ++i) {
      da[i] += d[i];
      db[i] -= d[i];
    }
  });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::check_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  std::size_t ai = a.id, bi = b.id;
  return g.emit(std::move(out), {a, b}, [ai, bi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& av2 = gr.value_ref(ai);
    const Tensor& bv2 = gr.value_ref(bi);
    Tensor& da = gr.grad_ref(ai);
    Tensor& db = gr.grad_ref(bi);
    for (std::size_t i = 0; i < d.size(); ++i) {
      da[i] += d[i] * bv2[i];
      db[i] += d[i] * av2[i];
    }
  });
}

inline Var mul_scalar(Var a, double c) {
  Graph& g = *a.graph;
  Tensor out = g.value(a);
  for (double& v : out.data) v *= c;
  std::size_t ai = a.id;
  return g.emit(std::move(out), {a}, [ai, c](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& da = gr.grad_ref(ai);
    for (std::size_t i = 0; i < d.size(); ++i) da[i] += c * d[i];
  });
}

inline Var add_scalar(Var a, double c) {
  Graph& g = *a.graph;
  Tensor out = g.value(a);
  for (double& v : out.data) v += c;
  std::size_t ai = a.id;
  return g.emit(std::move(out), {a}, [ai](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& da = gr.grad_ref(ai);
    for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
  });
}

inline Var neg(Var a) { return mul_scalar(a, -1.0); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return mul_scalar(a, c); }

/// [n,m] + [1,m] broadcast over rows (bias add).
inline Var add_rowvec(Var x, Var bias) {
  Graph& g = *x.graph;
  const Tensor& xv = g.value(x);
  const Tensor& bv = g.value(bias);
  std::size_t n = xv.rows(), m = xv.cols();
  if (bv.size() != m)
    throw std::invalid_argument("add_rowvec: bias width " + std::to_string(bv.size()) +
                                " vs " + std::to_string(m));
  Tensor out = xv;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out.data[r * m + c] += bv[c];
  std::size_t xi = x.id, bi = bias.id;
  return g.emit(std::move(out), {x, bias}, [xi, bi, n, m](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    Tensor& db = gr.grad_ref(bi);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) {
        dx.data[r * m + c] += d.data[r * m + c];
        db[c] += d.data[r * m + c];
      }
  });
}

// ---------------------------------------------------------------------------
// Matrix product

inline Var matmul(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  std::size_t n = av.rows(), k = av.cols(), k2 = bv.rows(), m = bv.cols();
  if (k != k2)
    throw std::invalid_argument("matmul: inner dims " + shape_string(av) + " vs " +
                                shape_string(bv));
  Tensor out({n, m});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < k; ++j) {
      double ar = av.data[r * k + j];
      if (ar == 0.0) continue;
      for (std::size_t c = 0; c < m; ++c) out.data[r * m + c] += ar * bv.data[j * m + c];
    }
  std::size_t ai = a.id, bi = b.id;
  return g.emit(std::move(out), {a, b}, [ai, bi, n, k, m](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& av2 = gr.value_ref(ai);
    const Tensor& bv2 = gr.value_ref(bi);
    Tensor& da = gr.grad_ref(ai);
    Tensor& db = gr.grad_ref(bi);
    // dA += dC * B^T ; dB += A^T * dC
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m; ++c) acc += d.data[r * m + c] * bv2.data[j * m + c];
        da.data[r * k + j] += acc;
      }
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t c = 0; c < m; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += av2.data[r * k + j] * d.data[r * m + c];
        db.data[j * m + c] += acc;
      }
  });
}

// ---------------------------------------------------------------------------
// Activations and pointwise functions

inline Var relu(Var x) {
  Graph& g = *x.graph;
  Tensor out = g.value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& xv = gr.value_ref(xi);
    Tensor& dx = gr.grad_ref(xi);
    // Subgradient 0 at the kink.
    for (std::size_t i = 0; i < d.size(); ++i)
      if (xv[i] > 0.0) dx[i] += d[i];
  });
}

inline Var tanh(Var x) {
  Graph& g = *x.graph;
  Tensor out = g.value(x);
  for (double& v : out.data) v = std::tanh(v);
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& y = gr.value_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var sigmoid(Var x) {
  Graph& g = *x.graph;
  Tensor out = g.value(x);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& y = gr.value_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i] * y[i] * (1.0 - y[i]);
  });
}

inline Var log(Var x) {
  Graph& g = *x.graph;
  Tensor out = g.value(x);
  for (double& v : out.data) {
    if (v <= 0.0) throw std::domain_error("log: non-positive input");
    v = std::log(v);
  }
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& xv = gr.value_ref(xi);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i] / xv[i];
  });
}

inline Var exp(Var x) {
  Graph& g = *x.graph;
  Tensor out = g.value(x);
  for (double& v : out.data) v = std::exp(v);
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& y = gr.value_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i] * y[i];
  });
}

inline Var sqrt(Var x) {
  Graph& g = *x.graph;
  Tensor out = g.value(x);
  for (double& v : out.data) {
    if (v < 0.0) throw std::domain_error("sqrt: negative input");
    v = std::sqrt(v);
  }
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& y = gr.value_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    // Subgradient 0 at the origin kink.
    for (std::size_t i = 0; i < d.size(); ++i)
      if (y[i] > 0.0) dx[i] += d[i] * 0.5 / y[i];
  });
}

/// Row-wise softmax of an [n,k] tensor (rank-1 input is one row).
inline Var softmax(Var x) {
  Graph& g = *x.graph;
  const Tensor& xv = g.value(x);
  std::size_t n = xv.rows(), k = xv.cols();
  Tensor out = xv;
  for (std::size_t r = 0; r < n; ++r) {
    double mx = out.data[r * k];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, out.data[r * k + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      out.data[r * k + c] = std::exp(out.data[r * k + c] - mx);
      z += out.data[r * k + c];
    }
    for (std::size_t c = 0; c < k; ++c) out.data[r * k + c] /= z;
  }
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi, n, k](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& y = gr.value_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < k; ++c) dot += d.data[r * k + c] * y.data[r * k + c];
      for (std::size_t c = 0; c < k; ++c)
        dx.data[r * k + c] += y.data[r * k + c] * (d.data[r * k + c] - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// Min / max / clamp (subgradient convention: gradient to the selected branch,
// ties select the first argument)

inline Var min(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::check_same_shape(av, bv, "min");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] <= bv[i] ? av[i] : bv[i];
  std::size_t ai = a.id, bi = b.id;
  return g.emit(std::move(out), {a, b}, [ai, bi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& av2 = gr.value_ref(ai);
    const Tensor& bv2 = gr.value_ref(bi);
    Tensor& da = gr.grad_ref(ai);
    Tensor& db = gr.grad_ref(bi);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (av2[i] <= bv2[i]) da[i] += d[i];
      else db[i] += d[i];
    }
  });
}

inline Var max(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::check_same_shape(av, bv, "max");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] >= bv[i] ? av[i] : bv[i];
  std::size_t ai = a.id, bi = b.id;
  return g.emit(std::move(out), {a, b}, [ai, bi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& av2 = gr.value_ref(ai);
    const Tensor& bv2 = gr.value_ref(bi);
    Tensor& da = gr.grad_ref(ai);
    Tensor& db = gr.grad_ref(bi);
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (av2[i] >= bv2[i]) da[i] += d[i];
      else db[i] += d[i];
    }
  });
}

/// Clamp to [lo, hi]; the input keeps its gradient when it sits exactly on a
/// bound (the input is the first argument of the underlying min/max pair).
inline Var clamp(Var x, double lo, double hi) {
  Graph& g = *x.graph;
  Tensor out = g.value(x);
  for (double& v : out.data) v = v < lo ? lo : (v > hi ? hi : v);
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi, lo, hi](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    const Tensor& xv = gr.value_ref(xi);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (xv[i] >= lo && xv[i] <= hi) dx[i] += d[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Var sum(Var x) {
  Graph& g = *x.graph;
  double s = 0.0;
  for (double v : g.value(x).data) s += v;
  std::size_t xi = x.id;
  return g.emit(Tensor::scalar(s), {x}, [xi](Graph& gr, std::size_t id) {
    double d = gr.grad_ref(id).data[0];
    Tensor& dx = gr.grad_ref(xi);
    for (double& v : dx.data) v += d;
  });
}

inline Var mean(Var x) {
  Graph& g = *x.graph;
  const Tensor& xv = g.value(x);
  double s = 0.0;
  for (double v : xv.data) s += v;
  double n = static_cast<double>(xv.size());
  std::size_t xi = x.id;
  return g.emit(Tensor::scalar(s / n), {x}, [xi, n](Graph& gr, std::size_t id) {
    double d = gr.grad_ref(id).data[0] / n;
    Tensor& dx = gr.grad_ref(xi);
    for (double& v : dx.data) v += d;
  });
}

/// Sum along axis 1: [n,m] -> [n,1].
inline Var sum_rows(Var x) {
  Graph& g = *x.graph;
  const Tensor& xv = g.value(x);
  std::size_t n = xv.rows(), m = xv.cols();
  Tensor out({n, 1});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out.data[r] += xv.data[r * m + c];
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi, n, m](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) dx.data[r * m + c] += d.data[r];
  });
}

/// Euclidean norm of the whole tensor -> scalar.
inline Var l2_norm(Var x) {
  Graph& g = *x.graph;
  const Tensor& xv = g.value(x);
  double s = 0.0;
  for (double v : xv.data) s += v * v;
  double norm = std::sqrt(s);
  std::size_t xi = x.id;
  return g.emit(Tensor::scalar(norm), {x}, [xi, norm](Graph& gr, std::size_t id) {
    if (norm == 0.0) return;  // kink at the origin
    double d = gr.grad_ref(id).data[0];
    const Tensor& xv2 = gr.value_ref(xi);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d * xv2[i] / norm;
  });
}

// ---------------------------------------------------------------------------
// Classification losses

/// Mean cross-entropy of integer labels against [n,k] logits (log-sum-exp
/// stabilized). Rank-1 logits are a single row.
inline Var cross_entropy(Var logits, const std::vector<int>& labels) {
  Graph& g = *logits.graph;
  const Tensor& lv = g.value(logits);
  std::size_t n = lv.rows(), k = lv.cols();
  if (labels.size() != n)
    throw std::invalid_argument("cross_entropy: label count " + std::to_string(labels.size()) +
                                " vs batch " + std::to_string(n));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw std::invalid_argument("cross_entropy: label outside class range");
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double mx = lv.data[r * k];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, lv.data[r * k + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(lv.data[r * k + c] - mx);
    total += mx + std::log(z) - lv.data[r * k + static_cast<std::size_t>(labels[r])];
  }
  std::size_t li = logits.id;
  std::vector<int> ys = labels;
  return g.emit(Tensor::scalar(total / static_cast<double>(n)), {logits},
                [li, n, k, ys](Graph& gr, std::size_t id) {
    double d = gr.grad_ref(id).data[0] / static_cast<double>(n);
    const Tensor& lv2 = gr.value_ref(li);
    Tensor& dl = gr.grad_ref(li);
    for (std::size_t r = 0; r < n; ++r) {
      double mx = lv2.data[r * k];
      for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, lv2.data[r * k + c]);
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += std::exp(lv2.data[r * k + c] - mx);
      for (std::size_t c = 0; c < k; ++c) {
        double p = std::exp(lv2.data[r * k + c] - mx) / z;
        double t = (static_cast<std::size_t>(ys[r]) == c) ? 1.0 : 0.0;
        dl.data[r * k + c] += d * (p - t);
      }
    }
  });
}

/// Mean cross-entropy against soft target rows (used for one-hot blocks).
/// Per row: sum_c t_c * (logsumexp(x) - x_c).
inline Var cross_entropy_soft(Var logits, Var targets) {
  Graph& g = *logits.graph;
  const Tensor& lv = g.value(logits);
  const Tensor& tv = g.value(targets);
  detail::check_same_shape(lv, tv, "cross_entropy_soft");
  std::size_t n = lv.rows(), k = lv.cols();
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double mx = lv.data[r * k];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, lv.data[r * k + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(lv.data[r * k + c] - mx);
    double lse = mx + std::log(z);
    for (std::size_t c = 0; c < k; ++c)
      total += tv.data[r * k + c] * (lse - lv.data[r * k + c]);
  }
  std::size_t li = logits.id, ti = targets.id;
  return g.emit(Tensor::scalar(total / static_cast<double>(n)), {logits, targets},
                [li, ti, n, k](Graph& gr, std::size_t id) {
    double d = gr.grad_ref(id).data[0] / static_cast<double>(n);
    const Tensor& lv2 = gr.value_ref(li);
    const Tensor& tv2 = gr.value_ref(ti);
    Tensor& dl = gr.grad_ref(li);
    for (std::size_t r = 0; r < n; ++r) {
      double mx = lv2.data[r * k];
      for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, lv2.data[r * k + c]);
      double z = 0.0, st = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        z += std::exp(lv2.data[r * k + c] - mx);
        st += tv2.data[r * k + c];
      }
      for (std::size_t c = 0; c < k; ++c) {
        double p = std::exp(lv2.data[r * k + c] - mx) / z;
        dl.data[r * k + c] += d * (st * p - tv2.data[r * k + c]);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Structural ops

inline Var slice_cols(Var x, std::size_t start, std::size_t count) {
  Graph& g = *x.graph;
  const Tensor& xv = g.value(x);
  std::size_t n = xv.rows(), m = xv.cols();
  if (start + count > m) throw std::invalid_argument("slice_cols: range out of bounds");
  Tensor out({n, count});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < count; ++c) out.data[r * count + c] = xv.data[r * m + start + c];
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi, n, m, start, count](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < count; ++c)
        dx.data[r * m + start + c] += d.data[r * count + c];
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  Graph& g = *parts[0].graph;
  std::size_t n = g.value(parts[0]).rows();
  std::size_t m = 0;
  for (Var p : parts) {
    if (g.value(p).rows() != n) throw std::invalid_argument("concat_cols: row mismatch");
    m += g.value(p).cols();
  }
  Tensor out({n, m});
  std::size_t off = 0;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // (id, width)
  for (Var p : parts) {
    const Tensor& pv = g.value(p);
    std::size_t w = pv.cols();
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < w; ++c) out.data[r * m + off + c] = pv.data[r * w + c];
    spans.emplace_back(p.id, w);
    off += w;
  }
  return g.emit(std::move(out), parts, [spans, n, m](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    std::size_t off2 = 0;
    for (auto [pid, w] : spans) {
      Tensor& dp = gr.grad_ref(pid);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < w; ++c) dp.data[r * w + c] += d.data[r * m + off2 + c];
      off2 += w;
    }
  });
}

/// Per-column affine map: out[:,j] = x[:,j] * scale[j] + offset[j]. The
/// constant Jacobian diag(scale) makes this the workhorse for the invertible
/// feature maps.
inline Var col_affine(Var x, std::vector<double> scale, std::vector<double> offset) {
  Graph& g = *x.graph;
  const Tensor& xv = g.value(x);
  std::size_t n = xv.rows(), m = xv.cols();
  if (scale.size() != m || offset.size() != m)
    throw std::invalid_argument("col_affine: vector width vs tensor cols");
  Tensor out = xv;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c)
      out.data[r * m + c] = out.data[r * m + c] * scale[c] + offset[c];
  std::size_t xi = x.id;
  return g.emit(std::move(out), {x}, [xi, n, m, scale](Graph& gr, std::size_t id) {
    const Tensor& d = gr.grad_ref(id);
    Tensor& dx = gr.grad_ref(xi);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < m; ++c) dx.data[r * m + c] += d.data[r * m + c] * scale[c];
  });
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
};

/// Central-difference check of reverse-mode gradients for a scalar-valued
/// function of one or more tensors. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic| + |numeric|, 1e-8).
inline GradCheckResult grad_check(
    const std::function<Var(Graph&, const std::vector<Var>&)>& fn,
    const std::vector<Tensor>& point, double h = 1e-5) {
  auto eval = [&](const std::vector<Tensor>& at, std::vector<Tensor>* grads) {
    Graph g;
    std::vector<Var> leaves;
    leaves.reserve(at.size());
    for (const Tensor& t : at) leaves.push_back(g.leaf(t));
    Var out = fn(g, leaves);
    if (g.value(out).size() != 1)
      throw std::invalid_argument("grad_check: function must be scalar-valued");
    double v = g.value(out).item();
    if (grads) {
      g.backward(out);
      grads->clear();
      for (Var l : leaves) grads->push_back(g.grad(l));
    }
    return v;
  };

  std::vector<Tensor> analytic;
  eval(point, &analytic);

  GradCheckResult result;
  std::vector<Tensor> probe = point;
  for (std::size_t t = 0; t < point.size(); ++t) {
    for (std::size_t i = 0; i < point[t].size(); ++i) {
      double saved = probe[t][i];
      probe[t][i] = saved + h;
      double fp = eval(probe, nullptr);
      probe[t][i] = saved - h;
      double fm = eval(probe, nullptr);
      probe[t][i] = saved;
      double numeric = (fp - fm) / (2.0 * h);
      double a = analytic[t][i];
      double err = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst_tensor = t;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace advgen
