#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "advgen/graph.hpp"
#include "advgen/rng.hpp"
#include "advgen/tensor.hpp"

namespace advgen {

enum class Activation { linear, relu, tanh, sigmoid, softmax };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "linear";
}

inline Activation activation_from_name(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softmax") return Activation::softmax;
  throw std::invalid_argument("unknown activation: " + s);
}

inline Var apply_activation(Var x, Activation a) {
  switch (a) {
    case Activation::linear: return x;
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::softmax: return softmax(x);
  }
  return x;
}

/// Fully connected feed-forward net held as plain tensors. Parameters are
/// bound onto a Graph per forward pass, so one net can serve many tapes.
struct DenseNet {
  struct Layer {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]
    Activation activation = Activation::linear;
  };
  std::vector<Layer> layers;

  std::size_t input_dim() const {
    return layers.empty() ? 0 : layers.front().weight.rows();
  }
  std::size_t output_dim() const {
    return layers.empty() ? 0 : layers.back().weight.cols();
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (Layer& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> out;
    for (const Layer& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }
};

/// Xavier-uniform initialization: weights ~ U(-limit, limit) with
/// limit = sqrt(6 / (fan_in + fan_out)), biases zero. Draw order is fixed
/// (row-major weights, layer by layer) so a seed pins every parameter.
inline DenseNet make_dense_net(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                               std::size_t output_dim, Activation hidden_act,
                               Activation output_act, Rng& rng) {
  if (input_dim == 0 || output_dim == 0)
    throw std::invalid_argument("make_dense_net: zero-width layer");
  std::vector<std::size_t> dims;
  dims.push_back(input_dim);
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("make_dense_net: zero-width layer");
    dims.push_back(h);
  }
  dims.push_back(output_dim);

  DenseNet net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    std::size_t fan_in = dims[i], fan_out = dims[i + 1];
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseNet::Layer layer;
    layer.weight = Tensor({fan_in, fan_out});
    for (double& w : layer.weight.data) w = rng.uniform(-limit, limit);
    layer.bias = Tensor({fan_out});
    layer.activation = (i + 2 < dims.size()) ? hidden_act : output_act;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

/// A net's parameters materialized as graph leaves, in parameters() order.
struct BoundNet {
  std::vector<Var> params;
};

inline BoundNet bind(Graph& g, const DenseNet& net, bool requires_grad = true) {
  BoundNet b;
  for (const Tensor* p : net.parameters()) b.params.push_back(g.leaf(*p, requires_grad));
  return b;
}

inline Var forward(Graph& g, const DenseNet& net, const BoundNet& bound, Var x) {
  if (bound.params.size() != net.layers.size() * 2)
    throw std::invalid_argument("forward: bound params do not match net");
  Var h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    h = matmul(h, bound.params[2 * i]);
    h = add_rowvec(h, bound.params[2 * i + 1]);
    h = apply_activation(h, net.layers[i].activation);
  }
  (void)g;
  return h;
}

/// Convenience: bind with gradients and run one forward pass.
inline std::pair<BoundNet, Var> forward_bound(Graph& g, const DenseNet& net, Var x,
                                              bool requires_grad = true) {
  BoundNet b = bind(g, net, requires_grad);
  Var out = forward(g, net, b, x);
  return {b, out};
}

/// Inference without a tape: returns logits/output for a [n,d] batch.
inline Tensor predict(const DenseNet& net, const Tensor& x) {
  Graph g;
  Var in = g.constant(x);
  auto [b, out] = forward_bound(g, net, in, false);
  (void)b;
  return g.value(out);
}

/// Argmax class per row; ties resolve to the lowest index.
inline std::vector<int> argmax_rows(const Tensor& t) {
  std::size_t n = t.rows(), k = t.cols();
  std::vector<int> out(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    double best = t.data[r * k];
    for (std::size_t c = 1; c < k; ++c)
      if (t.data[r * k + c] > best) {
        best = t.data[r * k + c];
        out[r] = static_cast<int>(c);
      }
  }
  return out;
}

}  // namespace advgen
