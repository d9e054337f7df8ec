#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "idinit/conv.hpp"
#include "idinit/matrix.hpp"
#include "idinit/rng.hpp"

namespace idinit {

enum class Activation { Identity, Tanh, Relu };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "?";
}

// Dense layer: y = act(x W^T), W is d_out x d_in.
struct DenseLayer {
  std::size_t d_in = 0, d_out = 0;
  Activation act = Activation::Identity;
};

// Residual block: y = x + g * W_k act(W_{k-1} ... act(W_1 x)). The main
// branch stays linear; the activation lives inside the stem only. The gate
// g is an optional trainable scalar (fixed at 1 when absent).
struct ResidualBlock {
  std::size_t width = 0;
  std::size_t stem_depth = 2;
  Activation act = Activation::Identity;
  bool gated = false;
};

// Forward-only convolution; present so conv initializers can be probed, not
// trainable.
struct Conv2DLayer {
  std::size_t k = 0, c_in = 0, c_out = 0;
};

using Layer = std::variant<DenseLayer, ResidualBlock, Conv2DLayer>;

struct NetworkSpec {
  std::vector<Layer> layers;

  std::size_t input_dim() const {
    if (layers.empty()) return 0;
    if (const auto* d = std::get_if<DenseLayer>(&layers.front())) return d->d_in;
    if (const auto* r = std::get_if<ResidualBlock>(&layers.front())) return r->width;
    throw UnsupportedError("input_dim: conv layers have no flat input dim");
  }

  std::size_t output_dim() const {
    if (layers.empty()) return 0;
    if (const auto* d = std::get_if<DenseLayer>(&layers.back())) return d->d_out;
    if (const auto* r = std::get_if<ResidualBlock>(&layers.back())) return r->width;
    throw UnsupportedError("output_dim: conv layers have no flat output dim");
  }

  // Dimensions must chain; residual stems map width -> width.
  void validate() const {
    std::size_t cur = 0;
    bool have = false;
    for (const Layer& l : layers) {
      if (const auto* d = std::get_if<DenseLayer>(&l)) {
        if (have && d->d_in != cur) throw ShapeError("layer dims do not chain");
        cur = d->d_out;
        have = true;
      } else if (const auto* r = std::get_if<ResidualBlock>(&l)) {
        if (have && r->width != cur) throw ShapeError("layer dims do not chain");
        if (r->stem_depth < 1) throw ShapeError("residual stem must have depth >= 1");
        cur = r->width;
        have = true;
      }
    }
  }

  static NetworkSpec mlp(const std::vector<std::size_t>& dims, Activation act,
                         bool act_on_last = false) {
    NetworkSpec net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      const bool last = i + 2 == dims.size();
      net.layers.push_back(
          DenseLayer{dims[i], dims[i + 1], last && !act_on_last ? Activation::Identity : act});
    }
    return net;
  }

  static NetworkSpec residual_stack(std::size_t width, std::size_t blocks,
                                    std::size_t stem_depth, Activation act,
                                    bool gated = false) {
    NetworkSpec net;
    for (std::size_t i = 0; i < blocks; ++i)
      net.layers.push_back(ResidualBlock{width, stem_depth, act, gated});
    return net;
  }
};

// Live parameters plus SGD momentum buffers, shapes mirroring the spec.
struct LayerParams {
  std::vector<Matrix> weights;   // dense: 1; residual: stem_depth
  std::vector<Matrix> momenta;   // zero-initialized, same shapes
  ConvKernel kernel;             // conv layers only
  bool has_gate = false;
  double gate = 1.0;
  double gate_momentum = 0.0;
};

struct ParamSet {
  std::vector<LayerParams> layers;

  void reset_momentum() {
    for (LayerParams& lp : layers) {
      for (Matrix& m : lp.momenta)
        std::fill(m.data().begin(), m.data().end(), 0.0);
      lp.gate_momentum = 0.0;
    }
  }
};

inline ParamSet zero_params(const NetworkSpec& net) {
  ParamSet p;
  for (const Layer& l : net.layers) {
    LayerParams lp;
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      lp.weights.emplace_back(d->d_out, d->d_in);
      lp.momenta.emplace_back(d->d_out, d->d_in);
    } else if (const auto* r = std::get_if<ResidualBlock>(&l)) {
      for (std::size_t i = 0; i < r->stem_depth; ++i) {
        lp.weights.emplace_back(r->width, r->width);
        lp.momenta.emplace_back(r->width, r->width);
      }
      lp.has_gate = r->gated;
      lp.gate = r->gated ? 0.0 : 1.0;  // gates start closed
    } else if (const auto* c = std::get_if<Conv2DLayer>(&l)) {
      lp.kernel = ConvKernel(c->k, c->k, c->c_in, c->c_out);
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

inline void apply_activation(Matrix& z, Activation act) {
  switch (act) {
    case Activation::Identity: return;
    case Activation::Tanh:
      for (double& v : z.data()) v = std::tanh(v);
      return;
    case Activation::Relu:
      for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
      return;
  }
}

// Forward pass over batch-major input (batch x d_in), keeping every
// intermediate needed by backward.
struct LayerTrace {
  Matrix input;                // activation entering the layer
  std::vector<Matrix> pre;     // pre-activations Z_i per stem weight
  std::vector<Matrix> post;    // act(Z_i); post.back() is unactivated for residual stems
  Matrix output;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Matrix output;
};

inline ForwardTrace forward(const NetworkSpec& net, const ParamSet& params, const Matrix& x) {
  ForwardTrace trace;
  Matrix cur = x;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    LayerTrace lt;
    lt.input = cur;
    const Layer& l = net.layers[li];
    const LayerParams& lp = params.layers[li];
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      if (cur.cols() != d->d_in) throw ShapeError("forward: dense input dim mismatch");
      Matrix z = matmul_bt(cur, lp.weights[0]);
      lt.pre.push_back(z);
      apply_activation(z, d->act);
      lt.post.push_back(z);
      cur = z;
    } else if (const auto* r = std::get_if<ResidualBlock>(&l)) {
      if (cur.cols() != r->width) throw ShapeError("forward: residual width mismatch");
      Matrix h = cur;
      for (std::size_t s = 0; s < r->stem_depth; ++s) {
        Matrix z = matmul_bt(h, lp.weights[s]);
        lt.pre.push_back(z);
        if (s + 1 < r->stem_depth) apply_activation(z, r->act);
        lt.post.push_back(z);
        h = z;
      }
      Matrix out = cur;
      const double g = lp.has_gate ? lp.gate : 1.0;
      for (std::size_t i = 0; i < out.size(); ++i)
        out.data()[i] += g * h.data()[i];
      cur = out;
    } else {
      throw UnsupportedError("forward: conv layers are probe-only, use conv2d_forward");
    }
    lt.output = cur;
    trace.layers.push_back(std::move(lt));
  }
  trace.output = cur;
  return trace;
}

// ---- Losses ----

enum class LossKind { MSE, SoftmaxCrossEntropy };

struct LossGrad {
  double value = 0.0;
  Matrix grad;  // dL/d(pred), batch x d
};

// L = sum_dims (pred - target)^2 / (2 * batch); matches the two-step
// derivation's single-sample gradient (pred - target) x^T.
inline LossGrad mse_loss(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target)) throw ShapeError("mse_loss: shape mismatch");
  LossGrad lg;
  lg.grad = Matrix(pred.rows(), pred.cols());
  const double inv_b = 1.0 / static_cast<double>(pred.rows());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    s += d * d;
    lg.grad.data()[i] = d * inv_b;
  }
  lg.value = 0.5 * s * inv_b;
  return lg;
}

// Plain mean squared error (per sample and dimension), used for reporting.
inline double mean_squared_error(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target)) throw ShapeError("mean_squared_error: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

inline LossGrad softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  if (logits.rows() != labels.size())
    throw ShapeError("softmax_cross_entropy: batch size mismatch");
  LossGrad lg;
  lg.grad = Matrix(logits.rows(), logits.cols());
  const double inv_b = 1.0 / static_cast<double>(logits.rows());
  double loss = 0.0;
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const double* zr = logits.row(b);
    double zmax = zr[0];
    for (std::size_t j = 1; j < logits.cols(); ++j) zmax = std::max(zmax, zr[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) denom += std::exp(zr[j] - zmax);
    const double log_denom = std::log(denom);
    const int y = labels[b];
    loss += -(zr[y] - zmax - log_denom);
    double* gr = lg.grad.row(b);
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      const double p = std::exp(zr[j] - zmax) / denom;
      gr[j] = (p - (static_cast<int>(j) == y ? 1.0 : 0.0)) * inv_b;
    }
  }
  lg.value = loss * inv_b;
  return lg;
}

// ---- Backward ----

struct Gradients {
  std::vector<std::vector<Matrix>> weights;  // per layer, per stem index
  std::vector<double> gates;                 // per layer (0 when ungated)
};

inline Matrix activation_backward(const Matrix& dpost, const Matrix& pre, const Matrix& post,
                                  Activation act) {
  if (act == Activation::Identity) return dpost;
  Matrix dz = dpost;
  if (act == Activation::Tanh) {
    for (std::size_t i = 0; i < dz.size(); ++i)
      dz.data()[i] *= 1.0 - post.data()[i] * post.data()[i];
  } else {  // Relu
    for (std::size_t i = 0; i < dz.size(); ++i)
      if (pre.data()[i] <= 0.0) dz.data()[i] = 0.0;
  }
  return dz;
}

// Exact gradients for dense/residual layers given dL/d(output).
inline Gradients backward(const NetworkSpec& net, const ParamSet& params,
                          const ForwardTrace& trace, const Matrix& dout) {
  Gradients grads;
  grads.weights.resize(net.layers.size());
  grads.gates.assign(net.layers.size(), 0.0);

  Matrix dcur = dout;
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const Layer& l = net.layers[li];
    const LayerParams& lp = params.layers[li];
    const LayerTrace& lt = trace.layers[li];
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      Matrix dz = activation_backward(dcur, lt.pre[0], lt.post[0], d->act);
      grads.weights[li].push_back(matmul_at(dz, lt.input));  // dW = dZ^T X
      dcur = matmul(dz, lp.weights[0]);                      // dX = dZ W
    } else if (const auto* r = std::get_if<ResidualBlock>(&l)) {
      const double g = lp.has_gate ? lp.gate : 1.0;
      if (lp.has_gate) {
        // dg = sum(dout . stem_out); stem output is post.back() (unactivated)
        const Matrix& stem_out = lt.post.back();
        double dg = 0.0;
        for (std::size_t i = 0; i < dcur.size(); ++i)
          dg += dcur.data()[i] * stem_out.data()[i];
        grads.gates[li] = dg;
      }
      Matrix dstem = scale(dcur, g);
      grads.weights[li].resize(r->stem_depth);
      for (std::size_t s = r->stem_depth; s-- > 0;) {
        Matrix dz = s + 1 < r->stem_depth
                        ? activation_backward(dstem, lt.pre[s], lt.post[s], r->act)
                        : dstem;  // no activation after the last stem weight
        const Matrix& in = s == 0 ? lt.input : lt.post[s - 1];
        grads.weights[li][s] = matmul_at(dz, in);
        dstem = matmul(dz, lp.weights[s]);
      }
      // skip connection
      dcur = add(dcur, dstem);
    } else {
      throw UnsupportedError("backward: conv layers are not trainable");
    }
  }
  return grads;
}

// ---- SGD with momentum ----

enum class TrainMode { FullBatchGD, MinibatchSGD };
enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.0;       // in [0, 1)
  double weight_decay = 0.0;   // coupled into the gradient
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  LossKind loss = LossKind::MSE;
  TrainMode mode = TrainMode::MinibatchSGD;
  LrSchedule schedule = LrSchedule::Constant;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e12;
};

inline double scheduled_lr(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.schedule == LrSchedule::Constant) return cfg.learning_rate;
  const double t = cfg.epochs > 0 ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs)
                                  : 0.0;
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

// m <- momentum*m + lr*(g + wd*theta); theta <- theta - m.
inline void sgd_step(ParamSet& params, const Gradients& grads, const TrainConfig& cfg,
                     double lr) {
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    LayerParams& lp = params.layers[li];
    for (std::size_t wi = 0; wi < lp.weights.size(); ++wi) {
      Matrix& w = lp.weights[wi];
      Matrix& m = lp.momenta[wi];
      const Matrix& g = grads.weights[li][wi];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double geff = g.data()[i] + cfg.weight_decay * w.data()[i];
        m.data()[i] = cfg.momentum * m.data()[i] + lr * geff;
        w.data()[i] -= m.data()[i];
      }
    }
    if (lp.has_gate) {
      const double geff = grads.gates[li] + cfg.weight_decay * lp.gate;
      lp.gate_momentum = cfg.momentum * lp.gate_momentum + lr * geff;
      lp.gate -= lp.gate_momentum;
    }
  }
}

inline void sgd_step(ParamSet& params, const Gradients& grads, const TrainConfig& cfg) {
  sgd_step(params, grads, cfg, cfg.learning_rate);
}

// ---- Training loop ----

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = -1.0;  // negative when not a classification run
  std::size_t steps = 0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  bool diverged = false;
  std::size_t total_steps = 0;
};

struct TrainDataset {
  Matrix inputs;                 // n x d
  Matrix targets;                // n x k (regression / one-hot source)
  std::vector<int> labels;       // classification targets
  bool classification = false;

  std::size_t size() const { return inputs.rows(); }
};

inline Matrix take_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(m.row(idx[i]), m.row(idx[i]) + m.cols(), out.row(i));
  return out;
}

// Deterministic training: the shuffle order comes from the config seed only.
// per_step/per_epoch callbacks observe (but do not mutate) progress.
using StepCallback = std::function<void(std::size_t step, const ParamSet&)>;
using EpochCallback = std::function<void(const EpochStats&, const ParamSet&)>;

inline TrainResult train(const NetworkSpec& net, ParamSet& params, const TrainDataset& data,
                         const TrainConfig& cfg, const StepCallback& per_step = nullptr,
                         const EpochCallback& per_epoch = nullptr) {
  net.validate();
  TrainResult result;
  Rng rng(cfg.seed);
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0, steps_in_epoch = 0;

    const std::size_t bs =
        cfg.mode == TrainMode::FullBatchGD ? n : std::min(cfg.batch_size, n);
    if (cfg.mode == TrainMode::MinibatchSGD) {
      for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(order[i - 1], order[j]);
      }
    }

    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(start + bs, n);
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      const Matrix xb = take_rows(data.inputs, idx);
      const ForwardTrace trace = forward(net, params, xb);

      LossGrad lg;
      if (cfg.loss == LossKind::SoftmaxCrossEntropy) {
        std::vector<int> yb(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = data.labels[idx[i]];
        lg = softmax_cross_entropy(trace.output, yb);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          const double* r = trace.output.row(i);
          std::size_t arg = 0;
          for (std::size_t j = 1; j < trace.output.cols(); ++j)
            if (r[j] > r[arg]) arg = j;
          if (static_cast<int>(arg) == yb[i]) ++correct;
        }
        seen += idx.size();
      } else {
        lg = mse_loss(trace.output, take_rows(data.targets, idx));
      }

      if (!std::isfinite(lg.value) || lg.value > cfg.divergence_threshold) {
        result.diverged = true;
        result.total_steps = step;
        return result;
      }

      const Gradients grads = backward(net, params, trace, lg.grad);
      sgd_step(params, grads, cfg, lr);
      ++step;
      ++steps_in_epoch;
      loss_sum += lg.value;
      if (per_step) per_step(step, params);
    }

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_sum / static_cast<double>(steps_in_epoch);
    es.steps = steps_in_epoch;
    if (cfg.loss == LossKind::SoftmaxCrossEntropy && seen > 0)
      es.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    result.epochs.push_back(es);
    if (per_epoch) per_epoch(es, params);
  }
  result.total_steps = step;
  return result;
}

inline double evaluate_accuracy(const NetworkSpec& net, const ParamSet& params,
                                const Matrix& inputs, const std::vector<int>& labels,
                                std::size_t eval_batch = 256) {
  std::size_t correct = 0;
  for (std::size_t start = 0; start < inputs.rows(); start += eval_batch) {
    const std::size_t end = std::min(start + eval_batch, inputs.rows());
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix out = forward(net, params, take_rows(inputs, idx)).output;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      const double* r = out.row(i);
      std::size_t arg = 0;
      for (std::size_t j = 1; j < out.cols(); ++j)
        if (r[j] > r[arg]) arg = j;
      if (static_cast<int>(arg) == labels[start + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(inputs.rows());
}

// ---- Input-output Jacobian ----

inline bool all_identity_activations(const NetworkSpec& net) {
  for (const Layer& l : net.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      if (d->act != Activation::Identity) return false;
    } else if (const auto* r = std::get_if<ResidualBlock>(&l)) {
      if (r->act != Activation::Identity && r->stem_depth > 1) return false;
    } else {
      return false;
    }
  }
  return true;
}

// d(output)/d(input) at x, materialized densely. Identity-activation nets
// get the exact product of effective layer maps; otherwise central finite
// differences (h = 1e-5) column by column.
inline Matrix io_jacobian(const NetworkSpec& net, const ParamSet& params,
                          const std::vector<double>& x) {
  const std::size_t d_in = net.input_dim();
  if (x.size() != d_in) throw ShapeError("io_jacobian: input dim mismatch");

  if (all_identity_activations(net)) {
    Matrix j = Matrix::identity(d_in);
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
      const LayerParams& lp = params.layers[li];
      if (std::holds_alternative<DenseLayer>(net.layers[li])) {
        j = matmul(lp.weights[0], j);
      } else {
        const auto& r = std::get<ResidualBlock>(net.layers[li]);
        Matrix stem = lp.weights[0];
        for (std::size_t s = 1; s < r.stem_depth; ++s) stem = matmul(lp.weights[s], stem);
        const double g = lp.has_gate ? lp.gate : 1.0;
        Matrix eff = add(Matrix::identity(r.width), scale(stem, g));
        j = matmul(eff, j);
      }
    }
    return j;
  }

  constexpr double kStep = 1e-5;
  const std::size_t d_out = net.output_dim();
  Matrix j(d_out, d_in);
  Matrix probe(1, d_in, std::vector<double>(x));
  for (std::size_t col = 0; col < d_in; ++col) {
    probe(0, col) = x[col] + kStep;
    const Matrix up = forward(net, params, probe).output;
    probe(0, col) = x[col] - kStep;
    const Matrix dn = forward(net, params, probe).output;
    probe(0, col) = x[col];
    for (std::size_t r = 0; r < d_out; ++r)
      j(r, col) = (up(0, r) - dn(0, r)) / (2.0 * kStep);
  }
  return j;
}

}  // namespace idinit
