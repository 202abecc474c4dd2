#pragma once

// Fully connected ReLU network with a linear output head, written directly on
// flat double storage: forward pass, exact backpropagation of the selected-head
// squared error, and fan-in uniform initialization. The same struct holds the
// online parameters theta and, as a plain copy, the frozen target theta*.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "qstop/matrix.hpp"
#include "qstop/rng.hpp"

namespace qstop {

enum class Activation { kRelu, kIdentity };

struct Layer {
  Matrix weights;            // out x in
  std::vector<double> bias;  // out
  Activation activation = Activation::kRelu;

  int fan_in() const { return weights.cols(); }
  int fan_out() const { return weights.rows(); }
};

struct DenseNet {
  std::vector<Layer> layers;

  int input_dim() const { return layers.front().fan_in(); }
  int output_dim() const { return layers.back().fan_out(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) {
      n += static_cast<std::size_t>(l.fan_in()) * l.fan_out() + l.fan_out();
    }
    return n;
  }
};

// arch = {input, hidden..., output}; needs at least one hidden layer. Every
// weight and bias of a layer is drawn uniformly from
// [-sqrt(1/fan_in), +sqrt(1/fan_in)], weights row-major first, then biases.
inline DenseNet init_net(const std::vector<int>& arch, CounterRng& rng) {
  if (arch.size() < 3) {
    throw std::invalid_argument("init_net: need at least one hidden layer");
  }
  for (int s : arch) {
    if (s < 1) throw std::invalid_argument("init_net: zero-sized layer");
  }
  DenseNet net;
  net.layers.reserve(arch.size() - 1);
  for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
    Layer layer;
    layer.weights = Matrix(arch[l + 1], arch[l]);
    layer.bias.assign(arch[l + 1], 0.0);
    layer.activation =
        (l + 2 == arch.size()) ? Activation::kIdentity : Activation::kRelu;
    const double bound = std::sqrt(1.0 / arch[l]);
    for (double& w : layer.weights.values()) {
      w = bound * (2.0 * rng.next_unit() - 1.0);
    }
    for (double& b : layer.bias) {
      b = bound * (2.0 * rng.next_unit() - 1.0);
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

namespace detail {

inline void apply_layer(const Layer& layer, const Matrix& in, Matrix& out) {
  const int rows = in.rows();
  const int ni = layer.fan_in();
  const int no = layer.fan_out();
  for (int r = 0; r < rows; ++r) {
    const double* x = in.row(r).data();
    double* y = out.row(r).data();
    for (int o = 0; o < no; ++o) {
      const double* w = layer.weights.row(o).data();
      double acc = layer.bias[o];
      for (int i = 0; i < ni; ++i) acc += w[i] * x[i];
      y[o] = (layer.activation == Activation::kRelu && acc < 0.0) ? 0.0 : acc;
    }
  }
}

}  // namespace detail

// Activations per layer, acts[0] = input batch, acts.back() = network output.
inline void forward_into(const DenseNet& net, const Matrix& batch,
                         std::vector<Matrix>& acts) {
  if (batch.cols() != net.input_dim()) {
    throw std::invalid_argument("forward: batch width != input_dim");
  }
  acts.resize(net.layers.size() + 1);
  acts[0] = batch;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Matrix& out = acts[l + 1];
    if (out.rows() != batch.rows() || out.cols() != net.layers[l].fan_out()) {
      out = Matrix(batch.rows(), net.layers[l].fan_out());
    }
    detail::apply_layer(net.layers[l], acts[l], out);
  }
}

inline Matrix forward(const DenseNet& net, const Matrix& batch) {
  std::vector<Matrix> acts;
  forward_into(net, batch, acts);
  return std::move(acts.back());
}

// Reusable single-row evaluator; keeps two scratch buffers to avoid
// per-call allocation in episode generation and policy evaluation.
// Not safe to share across threads; copy one per worker.
class RowEval {
 public:
  explicit RowEval(const DenseNet& net) : net_(&net) {
    int w = net.input_dim();
    for (const Layer& l : net.layers) w = std::max(w, l.fan_out());
    a_.resize(w);
    b_.resize(w);
  }

  std::span<const double> operator()(std::span<const double> input) {
    if (static_cast<int>(input.size()) != net_->input_dim()) {
      throw std::invalid_argument("RowEval: input width != input_dim");
    }
    const double* x = input.data();
    double* cur = a_.data();
    double* nxt = b_.data();
    for (const Layer& layer : net_->layers) {
      const int ni = layer.fan_in();
      const int no = layer.fan_out();
      for (int o = 0; o < no; ++o) {
        const double* w = layer.weights.row(o).data();
        double acc = layer.bias[o];
        for (int i = 0; i < ni; ++i) acc += w[i] * x[i];
        nxt[o] = (layer.activation == Activation::kRelu && acc < 0.0) ? 0.0 : acc;
      }
      x = nxt;
      std::swap(cur, nxt);
    }
    return {x, static_cast<std::size_t>(net_->output_dim())};
  }

  const DenseNet& net() const { return *net_; }

 private:
  const DenseNet* net_;
  std::vector<double> a_, b_;
};

// Per-parameter partials, same shapes as the network.
struct GradientSet {
  std::vector<Matrix> dw;
  std::vector<std::vector<double>> db;

  static GradientSet zeros_like(const DenseNet& net) {
    GradientSet g;
    g.dw.reserve(net.layers.size());
    g.db.reserve(net.layers.size());
    for (const Layer& l : net.layers) {
      g.dw.emplace_back(l.fan_out(), l.fan_in());
      g.db.emplace_back(l.fan_out(), 0.0);
    }
    return g;
  }

  void clear() {
    for (Matrix& m : dw) m.fill(0.0);
    for (auto& b : db) b.assign(b.size(), 0.0);
  }

  bool shapes_match(const DenseNet& net) const {
    if (dw.size() != net.layers.size() || db.size() != net.layers.size()) return false;
    for (std::size_t l = 0; l < dw.size(); ++l) {
      if (dw[l].rows() != net.layers[l].fan_out() ||
          dw[l].cols() != net.layers[l].fan_in() ||
          static_cast<int>(db[l].size()) != net.layers[l].fan_out()) {
        return false;
      }
    }
    return true;
  }
};

struct BackpropWorkspace {
  std::vector<Matrix> acts;
  std::vector<Matrix> deltas;
};

// Mean squared error between the selected head Q(s_i, a_i) and fixed targets:
//   loss = (1/B) * sum_i (target_i - Q(s_i, a_i))^2.
// Gradients are the exact partials; only the selected head of each row
// receives error signal. Targets are constants (no gradient flows into them).
inline double loss_and_grads_into(const DenseNet& net, const Matrix& states,
                                  std::span<const int> actions,
                                  std::span<const double> targets,
                                  GradientSet& grads, BackpropWorkspace& ws) {
  const int batch = states.rows();
  if (batch == 0) throw std::invalid_argument("loss_and_grads: empty batch");
  if (actions.size() != static_cast<std::size_t>(batch) ||
      targets.size() != static_cast<std::size_t>(batch)) {
    throw std::invalid_argument("loss_and_grads: actions/targets size mismatch");
  }
  for (double t : targets) {
    if (!std::isfinite(t)) {
      throw std::invalid_argument("loss_and_grads: non-finite target");
    }
  }
  const int n_out = net.output_dim();
  for (int a : actions) {
    if (a < 0 || a >= n_out) {
      throw std::invalid_argument("loss_and_grads: action index out of range");
    }
  }
  if (!grads.shapes_match(net)) grads = GradientSet::zeros_like(net);
  grads.clear();

  forward_into(net, states, ws.acts);
  const Matrix& out = ws.acts.back();

  const std::size_t n_layers = net.layers.size();
  ws.deltas.resize(n_layers);
  if (ws.deltas.back().rows() != batch || ws.deltas.back().cols() != n_out) {
    ws.deltas.back() = Matrix(batch, n_out);
  }

  // Output delta: d(loss)/d(output). Output layer is linear.
  double loss = 0.0;
  const double scale = 2.0 / batch;
  for (int r = 0; r < batch; ++r) {
    const double err = out(r, actions[r]) - targets[r];
    loss += err * err;
    for (int o = 0; o < n_out; ++o) ws.deltas.back()(r, o) = 0.0;
    ws.deltas.back()(r, actions[r]) = scale * err;
  }
  loss /= batch;

  // Backward sweep. delta_l holds d(loss)/d(pre-activation of layer l); the
  // ReLU subgradient at 0 is taken as 0 (post-activation mask).
  for (int l = static_cast<int>(n_layers) - 1; l >= 0; --l) {
    const Layer& layer = net.layers[l];
    const Matrix& a_in = ws.acts[l];
    const Matrix& delta = ws.deltas[l];
    const int ni = layer.fan_in();
    const int no = layer.fan_out();

    Matrix& dw = grads.dw[l];
    std::vector<double>& db = grads.db[l];
    for (int r = 0; r < batch; ++r) {
      const double* d = delta.row(r).data();
      const double* x = a_in.row(r).data();
      for (int o = 0; o < no; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        db[o] += dv;
        double* w = dw.row(o).data();
        for (int i = 0; i < ni; ++i) w[i] += dv * x[i];
      }
    }

    if (l == 0) break;
    Matrix& dprev = ws.deltas[l - 1];
    if (dprev.rows() != batch || dprev.cols() != ni) dprev = Matrix(batch, ni);
    for (int r = 0; r < batch; ++r) {
      const double* d = delta.row(r).data();
      const double* h = a_in.row(r).data();
      double* dp = dprev.row(r).data();
      for (int i = 0; i < ni; ++i) dp[i] = 0.0;
      for (int o = 0; o < no; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        const double* w = layer.weights.row(o).data();
        for (int i = 0; i < ni; ++i) dp[i] += dv * w[i];
      }
      // Mask by the ReLU derivative of the producing layer.
      if (net.layers[l - 1].activation == Activation::kRelu) {
        for (int i = 0; i < ni; ++i) {
          if (h[i] <= 0.0) dp[i] = 0.0;
        }
      }
    }
  }
  return loss;
}

struct LossGrads {
  double loss = 0.0;
  GradientSet grads;
};

inline LossGrads loss_and_grads(const DenseNet& net, const Matrix& states,
                                std::span<const int> actions,
                                std::span<const double> targets) {
  LossGrads out;
  BackpropWorkspace ws;
  out.grads = GradientSet::zeros_like(net);
  out.loss = loss_and_grads_into(net, states, actions, targets, out.grads, ws);
  return out;
}

// Deep copy for the frozen target network; later updates to the source do not
// touch the copy.
inline DenseNet sync_target(const DenseNet& net) { return net; }

inline bool parameters_finite(const DenseNet& net) {
  for (const Layer& l : net.layers) {
    for (double w : l.weights.values()) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : l.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

}  // namespace qstop
