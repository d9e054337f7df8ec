#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "idinit/data.hpp"
#include "idinit/init.hpp"
#include "idinit/matrix.hpp"
#include "idinit/net.hpp"
#include "idinit/report.hpp"
#include "idinit/svd.hpp"

namespace idinit {

// ---- Two-step gradient and asymmetry (single identity layer, MSE) ----

// Gradient after the second step when theta starts at I and is trained on
// (x1, y1) then (x2, y2):
//   x2 x2^T - eta x1 x1^T x2 x2^T + eta y1 x1^T x2 x2^T - y2 x2^T.
inline Matrix two_step_gradient(const std::vector<double>& x1, const std::vector<double>& y1,
                                const std::vector<double>& x2, const std::vector<double>& y2,
                                double eta) {
  const std::size_t d = x1.size();
  if (y1.size() != d || x2.size() != d || y2.size() != d)
    throw ShapeError("two_step_gradient: vectors must share one dimension");
  double s = 0.0;  // x1^T x2
  for (std::size_t i = 0; i < d; ++i) s += x1[i] * x2[i];
  Matrix g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      g(i, j) = x2[i] * x2[j] - eta * x1[i] * s * x2[j] + eta * y1[i] * s * x2[j] -
                y2[i] * x2[j];
  return g;
}

// ||m - m^T||_F^2
inline double asymmetry_magnitude(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("asymmetry_magnitude: matrix must be square");
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double d = m(i, j) - m(j, i);
      s += d * d;
    }
  return s;
}

struct AsymmetryProbe {
  std::size_t d = 64;
  double sigma = 1.0;
  double eta = 0.1;
  std::size_t n_samples = 20000;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_samples < 1) throw ShapeError("AsymmetryProbe: n_samples must be >= 1");
    if (sigma < 0.0 || eta < 0.0) throw ShapeError("AsymmetryProbe: sigma, eta must be >= 0");
  }
};

struct AsymmetryEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  double lower_bound = 0.0;  // 4 eta^2 d^3 s^8 - 4 eta^2 d^2 s^8 + 2 d^2 s^4
  double upper_bound = 0.0;  // 6 eta^2 d^3 s^8 + 3 d^2 s^4
  std::size_t n_samples = 0;
};

// The asymmetric component collapses to a rank-one form Omega = w x2^T with
// w = eta (x1^T x2)(y1 - x1) - y2, giving
//   ||Omega - Omega^T||_F^2 = 2 (||w||^2 ||x2||^2 - (w^T x2)^2),
// which the Monte-Carlo loop evaluates in O(d) per draw.
inline AsymmetryEstimate monte_carlo_asymmetry(const AsymmetryProbe& probe) {
  probe.validate();
  Rng rng(probe.seed);
  const std::size_t d = probe.d;
  std::vector<double> x1(d), y1(d), x2(d), y2(d);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t k = 0; k < probe.n_samples; ++k) {
    for (std::size_t i = 0; i < d; ++i) x1[i] = rng.normal(0.0, probe.sigma);
    for (std::size_t i = 0; i < d; ++i) y1[i] = rng.normal(0.0, probe.sigma);
    for (std::size_t i = 0; i < d; ++i) x2[i] = rng.normal(0.0, probe.sigma);
    for (std::size_t i = 0; i < d; ++i) y2[i] = rng.normal(0.0, probe.sigma);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += x1[i] * x2[i];
    double ww = 0.0, xx = 0.0, wx = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double w = probe.eta * s * (y1[i] - x1[i]) - y2[i];
      ww += w * w;
      xx += x2[i] * x2[i];
      wx += w * x2[i];
    }
    const double v = 2.0 * (ww * xx - wx * wx);
    sum += v;
    sum_sq += v * v;
  }
  AsymmetryEstimate est;
  est.n_samples = probe.n_samples;
  est.mean = sum / static_cast<double>(probe.n_samples);
  const double var =
      (sum_sq - sum * sum / static_cast<double>(probe.n_samples)) /
      (probe.n_samples > 1 ? static_cast<double>(probe.n_samples - 1) : 1.0);
  est.std_err = std::sqrt(std::max(var, 0.0) / static_cast<double>(probe.n_samples));
  const double dd = static_cast<double>(d);
  const double s4 = std::pow(probe.sigma, 4.0);
  const double s8 = s4 * s4;
  const double e2 = probe.eta * probe.eta;
  est.lower_bound = 4.0 * e2 * dd * dd * dd * s8 - 4.0 * e2 * dd * dd * s8 +
                    2.0 * dd * dd * s4;
  est.upper_bound = 6.0 * e2 * dd * dd * dd * s8 + 3.0 * dd * dd * s4;
  return est;
}

// Mean over layer pairs of the elementwise mean absolute difference.
inline double layer_distance(const std::vector<Matrix>& layers) {
  if (layers.size() < 2) throw ShapeError("layer_distance: need at least two layers");
  for (std::size_t i = 1; i < layers.size(); ++i)
    if (!layers[i].same_shape(layers[0]))
      throw ShapeError("layer_distance: layers must share one shape");
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < layers.size(); ++i)
    for (std::size_t j = i + 1; j < layers.size(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < layers[i].size(); ++t)
        s += std::abs(layers[i].data()[t] - layers[j].data()[t]);
      total += s / static_cast<double>(layers[i].size());
      ++pairs;
    }
  return total / static_cast<double>(pairs);
}

// ---- Symmetry-breaking experiment (4-layer linear net on Y = -X + noise) ----

enum class OptimizerMode { GD, GDMomentum, SGD, SGDMomentum };

inline const char* to_string(OptimizerMode m) {
  switch (m) {
    case OptimizerMode::GD: return "gd";
    case OptimizerMode::GDMomentum: return "gd+momentum";
    case OptimizerMode::SGD: return "sgd";
    case OptimizerMode::SGDMomentum: return "sgd+momentum";
  }
  return "?";
}

struct SymmetryConfig {
  std::size_t dim = 10;
  std::size_t depth = 4;
  std::size_t n_train = 2000;
  std::size_t n_test = 2000;
  double noise_std = 1e-2;
  std::size_t batch_size = 4;
  std::size_t epochs = 200;
  // Small enough that 200 full-batch GD steps stay near the symmetric
  // initialization, large enough that minibatch noise plus momentum flips
  // every eigendirection of the product within the epoch budget.
  double learning_rate = 1.2e-4;
  double momentum = 0.95;
};

inline ExperimentReport symmetry_experiment(OptimizerMode mode, std::uint64_t seed,
                                            const SymmetryConfig& cfg = {}) {
  ExperimentReport report("symmetry", seed);
  report.config()["mode"] = to_string(mode);
  report.config()["dim"] = cfg.dim;
  report.config()["depth"] = cfg.depth;
  report.config()["n_train"] = cfg.n_train;
  report.config()["n_test"] = cfg.n_test;
  report.config()["noise_std"] = cfg.noise_std;
  report.config()["batch_size"] = cfg.batch_size;
  report.config()["epochs"] = cfg.epochs;
  report.config()["learning_rate"] = cfg.learning_rate;
  report.config()["momentum"] = cfg.momentum;

  Matrix target_map = scale(Matrix::identity(cfg.dim), -1.0);
  Dataset train_set = synth_linear_map(cfg.n_train, cfg.dim, target_map, cfg.noise_std, seed);
  Dataset test_set =
      synth_linear_map(cfg.n_test, cfg.dim, target_map, cfg.noise_std, seed ^ 0x7e57da7aULL);

  std::vector<std::size_t> dims(cfg.depth + 1, cfg.dim);
  NetworkSpec net = NetworkSpec::mlp(dims, Activation::Identity);
  ParamSet params = zero_params(net);
  for (LayerParams& lp : params.layers) lp.weights[0] = Matrix::identity(cfg.dim);

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = mode == OptimizerMode::GDMomentum || mode == OptimizerMode::SGDMomentum
                    ? cfg.momentum
                    : 0.0;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.loss = LossKind::MSE;
  tc.mode = mode == OptimizerMode::GD || mode == OptimizerMode::GDMomentum
                ? TrainMode::FullBatchGD
                : TrainMode::MinibatchSGD;
  tc.seed = seed;

  TrainDataset td{train_set.inputs, train_set.targets, {}, false};

  const auto test_mse = [&](const ParamSet& p) {
    return mean_squared_error(forward(net, p, test_set.inputs).output, test_set.targets);
  };
  const auto distance = [&](const ParamSet& p) {
    std::vector<Matrix> ws;
    for (const LayerParams& lp : p.layers) ws.push_back(lp.weights[0]);
    return layer_distance(ws);
  };

  report.add_point("layer_distance", 0, distance(params));
  const double initial_mse = test_mse(params);
  report.add_point("test_mse", 0, initial_mse);
  report.set_summary("initial_test_mse", initial_mse);

  TrainResult tr = train(net, params, td, tc, nullptr,
                         [&](const EpochStats& es, const ParamSet& p) {
                           report.add_point("layer_distance",
                                            static_cast<std::int64_t>(es.epoch) + 1,
                                            distance(p));
                           report.add_point("test_mse",
                                            static_cast<std::int64_t>(es.epoch) + 1,
                                            test_mse(p));
                           report.add_point("train_loss",
                                            static_cast<std::int64_t>(es.epoch) + 1,
                                            es.train_loss);
                         });
  report.set_diverged(tr.diverged);
  report.set_summary("final_layer_distance", distance(params));
  report.set_summary("final_test_mse", test_mse(params));
  return report;
}

// ---- Rank-constraint experiment (3-layer linear net, Theorem 1 setting) ----

enum class RankInit { IDInit, PartialIdentityZeroPad, Hadamard };

inline const char* to_string(RankInit m) {
  switch (m) {
    case RankInit::IDInit: return "idinit";
    case RankInit::PartialIdentityZeroPad: return "zero-pad";
    case RankInit::Hadamard: return "hadamard";
  }
  return "?";
}

struct RankConfig {
  std::size_t d0 = 8;
  std::size_t dh = 32;
  std::size_t dl = 8;
  std::size_t steps = 2;
  double learning_rate = 0.05;
};

// Tracks rank(theta1 - I) while a 3-layer linear net trains with plain SGD
// on batches of d0 linearly independent samples. Ranks are recorded every
// step for the first ten, then every tenth.
inline ExperimentReport rank_experiment(RankInit mode, const RankConfig& cfg,
                                        std::uint64_t seed) {
  if (cfg.dh <= cfg.d0 || cfg.dh <= cfg.dl)
    throw ShapeError("rank_experiment: requires dh > d0 and dh > dl");
  ExperimentReport report("rank", seed);
  report.config()["init"] = to_string(mode);
  report.config()["d0"] = cfg.d0;
  report.config()["dh"] = cfg.dh;
  report.config()["dl"] = cfg.dl;
  report.config()["steps"] = cfg.steps;
  report.config()["learning_rate"] = cfg.learning_rate;

  NetworkSpec net;
  net.layers.push_back(DenseLayer{cfg.d0, cfg.dh, Activation::Identity});
  net.layers.push_back(DenseLayer{cfg.dh, cfg.dh, Activation::Identity});
  net.layers.push_back(DenseLayer{cfg.dh, cfg.dl, Activation::Identity});
  ParamSet params = zero_params(net);

  switch (mode) {
    case RankInit::IDInit:
      params.layers[0].weights[0] = idi(cfg.dh, cfg.d0, 1.0, 0.0);
      params.layers[1].weights[0] = idi(cfg.dh, cfg.dh, 1.0, 0.0);
      params.layers[2].weights[0] = idi(cfg.dl, cfg.dh, 1.0, 0.0);
      break;
    case RankInit::PartialIdentityZeroPad:
      params.layers[0].weights[0] = baseline(
          InitSpec{InitMethod::PartialIdentityZeroPad, 1.0, 1e-6, 0.0, seed}, cfg.dh, cfg.d0);
      params.layers[1].weights[0] = Matrix::identity(cfg.dh);
      params.layers[2].weights[0] = baseline(
          InitSpec{InitMethod::PartialIdentityZeroPad, 1.0, 1e-6, 0.0, seed}, cfg.dl, cfg.dh);
      break;
    case RankInit::Hadamard: {
      // ZerO-style dimension increase: the first d0 columns of a normalized
      // Hadamard matrix.
      const Matrix h = scale(hadamard(cfg.dh), 1.0 / std::sqrt(static_cast<double>(cfg.dh)));
      Matrix theta0(cfg.dh, cfg.d0);
      for (std::size_t i = 0; i < cfg.dh; ++i)
        for (std::size_t j = 0; j < cfg.d0; ++j) theta0(i, j) = h(i, j);
      params.layers[0].weights[0] = theta0;
      params.layers[1].weights[0] = Matrix::identity(cfg.dh);
      params.layers[2].weights[0] = baseline(
          InitSpec{InitMethod::PartialIdentityZeroPad, 1.0, 1e-6, 0.0, seed}, cfg.dl, cfg.dh);
      break;
    }
  }

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.loss = LossKind::MSE;
  tc.mode = TrainMode::FullBatchGD;  // each step below feeds one fresh batch
  tc.epochs = 1;
  tc.seed = seed;

  Rng rng(seed);
  const auto record = [&](std::size_t step) {
    const Matrix delta = sub(params.layers[1].weights[0], Matrix::identity(cfg.dh));
    report.add_point("rank", static_cast<std::int64_t>(step),
                     static_cast<double>(numerical_rank(delta)));
  };
  record(0);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const Matrix xb = independent_batch(cfg.d0, cfg.d0, rng);
    const Matrix yb = gaussian_matrix(rng, cfg.d0, cfg.dl, 0.0, 1.0);
    const ForwardTrace trace = forward(net, params, xb);
    const LossGrad lg = mse_loss(trace.output, yb);
    const Gradients grads = backward(net, params, trace, lg.grad);
    sgd_step(params, grads, tc);
    if (step <= 10 || step % 10 == 0) record(step);
  }

  const auto& pts = report.trace("rank");
  report.set_summary("final_rank", pts.back().second);
  double max_rank = 0.0;
  for (const auto& [s, v] : pts) max_rank = std::max(max_rank, v);
  report.set_summary("max_rank", max_rank);
  return report;
}

// ---- Variance propagation probe ----

enum class NetKind { FC, ResFC, Conv, ResConv };

inline const char* to_string(NetKind k) {
  switch (k) {
    case NetKind::FC: return "fc";
    case NetKind::ResFC: return "resfc";
    case NetKind::Conv: return "conv";
    case NetKind::ResConv: return "resconv";
  }
  return "?";
}

struct VarianceConfig {
  std::size_t rounds = 500;
  double noise_std = 0.0;
  std::size_t res_blocks = 10;
  std::size_t fc_batch = 32;
  std::size_t fc_dim = 96;
  std::size_t image_hw = 8;
};

namespace detail {

inline double tensor_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

// Forward-only signal propagation: per-layer activation std, averaged over
// rounds with a fresh input (and fresh weight draw) per round.
inline ExperimentReport variance_probe(NetKind kind, InitMethod init,
                                       const VarianceConfig& cfg, std::uint64_t seed) {
  ExperimentReport report("variance", seed);
  report.config()["net"] = to_string(kind);
  report.config()["init"] = to_string(init);
  report.config()["noise_std"] = cfg.noise_std;
  report.config()["rounds"] = cfg.rounds;

  Rng rng(seed);
  std::vector<double> in_std_sum;
  std::vector<double> layer_std_sum;  // accumulated per layer

  const bool conv_kind = kind == NetKind::Conv || kind == NetKind::ResConv;

  if (!conv_kind) {
    NetworkSpec net;
    if (kind == NetKind::FC) {
      // Funnel of widths from the variance-propagation setup.
      const std::vector<std::size_t> hidden = {200, 400, 600, 800, 1000,
                                               1000, 800, 600, 400, 200};
      std::size_t prev = cfg.fc_dim;
      for (std::size_t h : hidden) {
        net.layers.push_back(DenseLayer{prev, h, Activation::Identity});
        prev = h;
      }
    } else {
      net = NetworkSpec::residual_stack(cfg.fc_dim, cfg.res_blocks, 2, Activation::Identity);
    }
    layer_std_sum.assign(net.layers.size(), 0.0);
    double in_sum = 0.0;
    for (std::size_t round = 0; round < cfg.rounds; ++round) {
      InitPolicy policy = InitPolicy::of(init, rng.next_u64());
      const ParamSet params = init_network(net, policy);
      Matrix x = gaussian_matrix(rng, cfg.fc_batch, cfg.fc_dim, 0.0, 1.0);
      if (cfg.noise_std > 0.0)
        for (double& v : x.data()) v += rng.normal(0.0, cfg.noise_std);
      in_sum += detail::tensor_std(x.data());
      const ForwardTrace trace = forward(net, params, x);
      for (std::size_t li = 0; li < trace.layers.size(); ++li)
        layer_std_sum[li] += detail::tensor_std(trace.layers[li].output.data());
    }
    const double in_std = in_sum / static_cast<double>(cfg.rounds);
    report.set_summary("input_std", in_std);
    for (std::size_t li = 0; li < layer_std_sum.size(); ++li)
      report.add_point("layer_std", static_cast<std::int64_t>(li + 1),
                       layer_std_sum[li] / static_cast<double>(cfg.rounds));
    const double out_std = layer_std_sum.back() / static_cast<double>(cfg.rounds);
    report.set_summary("output_std", out_std);
    report.set_summary("std_ratio", out_std / in_std);
    return report;
  }

  // Convolutional kinds, single image per round.
  struct ConvStage {
    std::size_t k, c_in, c_out;
    bool relu;
  };
  std::vector<ConvStage> stages;
  std::size_t res_entry_channels = 16;
  if (kind == NetKind::Conv) {
    // 9-layer all-convolutional stack.
    stages = {{3, 3, 96, true},    {3, 96, 96, true},  {3, 96, 96, true},
              {3, 96, 192, true},  {3, 192, 192, true}, {3, 192, 192, true},
              {3, 192, 192, true}, {1, 192, 192, true}, {1, 192, 10, false}};
  }

  const std::size_t hw = cfg.image_hw;
  std::size_t n_layers = kind == NetKind::Conv ? stages.size() : cfg.res_blocks;
  layer_std_sum.assign(n_layers, 0.0);
  double in_sum = 0.0;

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    Rng wrng(rng.next_u64());
    Tensor3 x(3, hw, hw);
    for (double& v : x.data) v = rng.normal(0.0, 1.0);
    if (cfg.noise_std > 0.0)
      for (double& v : x.data) v += rng.normal(0.0, cfg.noise_std);

    // ReLU conv nets: sqrt(2) on the network's first layer, 1 elsewhere.
    bool first_layer = true;
    const auto make_kernel = [&](std::size_t k, std::size_t ci, std::size_t co,
                                 bool stem_end) {
      const double tau = first_layer ? std::sqrt(2.0) : 1.0;
      first_layer = false;
      if (init == InitMethod::IDI)
        return stem_end ? idizc(k, ci, co, 1e-6) : idic(k, ci, co, tau, 1e-6, &wrng);
      InitSpec spec{init, 1.0, 1e-6, 0.0, wrng.next_u64()};
      return ConvKernel::from_matrix(baseline(spec, co, k * k * ci), k, k, ci);
    };

    if (kind == NetKind::Conv) {
      Tensor3 h = x;
      in_sum += detail::tensor_std(h.data);
      for (std::size_t li = 0; li < stages.size(); ++li) {
        const ConvStage& st = stages[li];
        h = conv2d_forward(make_kernel(st.k, st.c_in, st.c_out, false), h);
        if (st.relu)
          for (double& v : h.data) v = v > 0.0 ? v : 0.0;
        layer_std_sum[li] += detail::tensor_std(h.data);
      }
    } else {
      // Entry conv to res_entry_channels, then residual conv blocks.
      Tensor3 h = conv2d_forward(make_kernel(3, 3, res_entry_channels, false), x);
      in_sum += detail::tensor_std(h.data);
      for (std::size_t b = 0; b < cfg.res_blocks; ++b) {
        Tensor3 s1 = conv2d_forward(make_kernel(3, res_entry_channels, res_entry_channels,
                                                false),
                                    h);
        for (double& v : s1.data) v = v > 0.0 ? v : 0.0;
        Tensor3 s2 = conv2d_forward(make_kernel(3, res_entry_channels, res_entry_channels,
                                                true),
                                    s1);
        for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] += s2.data[i];
        layer_std_sum[b] += detail::tensor_std(h.data);
      }
    }
  }

  const double in_std = in_sum / static_cast<double>(cfg.rounds);
  report.set_summary("input_std", in_std);
  for (std::size_t li = 0; li < layer_std_sum.size(); ++li)
    report.add_point("layer_std", static_cast<std::int64_t>(li + 1),
                     layer_std_sum[li] / static_cast<double>(cfg.rounds));
  const double out_std = layer_std_sum.back() / static_cast<double>(cfg.rounds);
  report.set_summary("output_std", out_std);
  report.set_summary("std_ratio", out_std / in_std);
  return report;
}

// ---- Dead-neuron accounting ----

enum class DeadNeuronVariant { ZeroWeightZeroGate, IdizWeightZeroGate };

inline const char* to_string(DeadNeuronVariant v) {
  return v == DeadNeuronVariant::ZeroWeightZeroGate ? "zero" : "idiz";
}

struct DeadNeuronConfig {
  std::size_t width = 16;
  std::size_t steps = 100;
  std::size_t n = 256;
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double epsilon = 1e-6;
};

// One gated residual block; the gate starts at 0 (the zero-downstream
// mechanism). An entry is dead when its cumulative absolute update stays
// below 1e-15.
inline ExperimentReport dead_neuron_experiment(DeadNeuronVariant variant,
                                               const DeadNeuronConfig& cfg,
                                               std::uint64_t seed) {
  ExperimentReport report("deadneuron", seed);
  report.config()["variant"] = to_string(variant);
  report.config()["width"] = cfg.width;
  report.config()["steps"] = cfg.steps;
  report.config()["learning_rate"] = cfg.learning_rate;
  report.config()["momentum"] = cfg.momentum;
  report.config()["epsilon"] = cfg.epsilon;

  NetworkSpec net = NetworkSpec::residual_stack(cfg.width, 1, 2, Activation::Relu, true);
  ParamSet params = zero_params(net);
  params.layers[0].weights[0] = idi(cfg.width, cfg.width, 1.0, 0.0);
  params.layers[0].weights[1] =
      variant == DeadNeuronVariant::IdizWeightZeroGate
          ? idiz(cfg.width, cfg.width, cfg.epsilon)
          : Matrix(cfg.width, cfg.width);
  params.layers[0].gate = 0.0;

  Rng rng(seed);
  const Matrix map = gaussian_matrix(rng, cfg.width, cfg.width, 0.0, 1.0);
  Dataset data = synth_linear_map(cfg.n, cfg.width, map, 0.0, rng.next_u64());

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = cfg.momentum;
  tc.batch_size = cfg.batch_size;
  tc.loss = LossKind::MSE;
  tc.mode = TrainMode::MinibatchSGD;
  tc.seed = seed;
  tc.epochs = 1;

  Matrix cumulative(cfg.width, cfg.width);
  Matrix prev = params.layers[0].weights[1];

  std::size_t step = 0;
  std::vector<std::size_t> order(cfg.n);
  std::iota(order.begin(), order.end(), 0);
  while (step < cfg.steps) {
    for (std::size_t i = cfg.n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    for (std::size_t start = 0; start + cfg.batch_size <= cfg.n && step < cfg.steps;
         start += cfg.batch_size) {
      std::vector<std::size_t> idx(order.begin() + start,
                                   order.begin() + start + cfg.batch_size);
      const Matrix xb = take_rows(data.inputs, idx);
      const Matrix yb = take_rows(data.targets, idx);
      const ForwardTrace trace = forward(net, params, xb);
      const LossGrad lg = mse_loss(trace.output, yb);
      const Gradients grads = backward(net, params, trace, lg.grad);
      sgd_step(params, grads, tc);
      ++step;
      const Matrix& cur = params.layers[0].weights[1];
      for (std::size_t i = 0; i < cumulative.size(); ++i)
        cumulative.data()[i] += std::abs(cur.data()[i] - prev.data()[i]);
      prev = cur;
    }
  }

  std::size_t dead = 0;
  for (double v : cumulative.data())
    if (v < 1e-15) ++dead;
  report.set_summary("dead_fraction",
                     static_cast<double>(dead) / static_cast<double>(cumulative.size()));
  report.set_summary("gate", params.layers[0].gate);
  return report;
}

// ---- Toy dynamics (scalar residual/non-residual depth-L chain) ----

struct ToyConfig {
  int r = 1;  // 1 residual, 0 non-residual
  std::size_t depth = 5;
  double learning_rate = 2e-6;  // below the stable step for both r settings
  double w1_0 = 1.0;
  double w2_0 = 0.0;
  std::vector<double> inputs = {1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8};
  double target_scale = 50.0;
  std::size_t steps = 200000;

  void validate() const {
    if (r != 0 && r != 1) throw ShapeError("ToyConfig: r must be 0 or 1");
    if (depth < 1 || learning_rate < 0.0) throw ShapeError("ToyConfig: bad depth/lr");
    if (inputs.empty()) throw ShapeError("ToyConfig: inputs empty");
  }
};

struct ToyResult {
  std::vector<double> w1_path, w2_path;  // subsampled trajectory
  double final_w1 = 0.0, final_w2 = 0.0;
  double final_product = 0.0;
  double min_dist_to_saddle = 0.0;  // distance to (w1, w2) = (-1, 1)
  bool diverged = false;
};

// Gradient descent on R = mean_i ((r + w2 w1)^L x_i - scale * x_i)^2 with
// simultaneous updates of both scalars.
inline ToyResult toy_dynamics(const ToyConfig& cfg) {
  cfg.validate();
  ToyResult res;
  double w1 = cfg.w1_0, w2 = cfg.w2_0;
  const double n = static_cast<double>(cfg.inputs.size());
  double cx = 0.0;  // mean x^2
  for (double x : cfg.inputs) cx += x * x;
  cx /= n;
  const double L = static_cast<double>(cfg.depth);

  double min_dist = std::hypot(w1 + 1.0, w2 - 1.0);
  const std::size_t stride = std::max<std::size_t>(1, cfg.steps / 1000);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    if (t % stride == 0) {
      res.w1_path.push_back(w1);
      res.w2_path.push_back(w2);
    }
    const double p = static_cast<double>(cfg.r) + w2 * w1;
    const double pl = std::pow(p, L);
    const double plm1 = std::pow(p, L - 1.0);
    // dR/dw1 = mean 2 (p^L - s) x^2 * L p^{L-1} w2
    const double common = 2.0 * (pl - cfg.target_scale) * cx * L * plm1;
    const double g1 = common * w2;
    const double g2 = common * w1;
    w1 -= cfg.learning_rate * g1;
    w2 -= cfg.learning_rate * g2;
    if (!std::isfinite(w1) || !std::isfinite(w2)) {
      res.diverged = true;
      break;
    }
    min_dist = std::min(min_dist, std::hypot(w1 + 1.0, w2 - 1.0));
  }
  res.w1_path.push_back(w1);
  res.w2_path.push_back(w2);
  res.final_w1 = w1;
  res.final_w2 = w2;
  res.final_product = w1 * w2;
  res.min_dist_to_saddle = min_dist;
  return res;
}

inline ExperimentReport toy_report(const ToyConfig& cfg, std::uint64_t seed) {
  ExperimentReport report("toy", seed);
  report.config()["r"] = cfg.r;
  report.config()["depth"] = cfg.depth;
  report.config()["learning_rate"] = cfg.learning_rate;
  report.config()["w1_0"] = cfg.w1_0;
  report.config()["w2_0"] = cfg.w2_0;
  report.config()["target_scale"] = cfg.target_scale;
  report.config()["steps"] = cfg.steps;
  const ToyResult res = toy_dynamics(cfg);
  for (std::size_t i = 0; i < res.w1_path.size(); ++i) {
    report.add_point("w1", static_cast<std::int64_t>(i), res.w1_path[i]);
    report.add_point("w2", static_cast<std::int64_t>(i), res.w2_path[i]);
  }
  report.set_diverged(res.diverged);
  report.set_summary("final_w1", res.final_w1);
  report.set_summary("final_w2", res.final_w2);
  report.set_summary("final_product", res.final_product);
  report.set_summary("min_dist_to_saddle", res.min_dist_to_saddle);
  return report;
}

// ---- Long residual stem probe ----

struct LongStemConfig {
  std::size_t width = 16;
  std::size_t stem_depth = 32;
  std::size_t epochs = 35;
  std::size_t n = 256;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double explosion_factor = 1e3;
};

// One residual block with a deep stem, trained on a synthetic regression;
// records the output std per epoch and flags explosion.
inline ExperimentReport long_stem_probe(InitMethod init, const LongStemConfig& cfg,
                                        std::uint64_t seed) {
  ExperimentReport report("longstem", seed);
  report.config()["init"] = to_string(init);
  report.config()["width"] = cfg.width;
  report.config()["stem_depth"] = cfg.stem_depth;
  report.config()["epochs"] = cfg.epochs;
  report.config()["learning_rate"] = cfg.learning_rate;

  NetworkSpec net =
      NetworkSpec::residual_stack(cfg.width, 1, cfg.stem_depth, Activation::Relu);
  ParamSet params = init_network(net, InitPolicy::of(init, seed));

  Rng rng(seed);
  const Matrix map = orthogonal_init(rng, cfg.width, cfg.width);
  Dataset data = synth_linear_map(cfg.n, cfg.width, map, 0.0, rng.next_u64());
  const Matrix probe = gaussian_matrix(rng, 64, cfg.width, 0.0, 1.0);
  const double in_std = detail::tensor_std(probe.data());

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = 0.0;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.loss = LossKind::MSE;
  tc.mode = TrainMode::MinibatchSGD;
  tc.seed = seed;

  bool exploded = false;
  const auto output_std = [&]() {
    const Matrix out = forward(net, params, probe).output;
    if (!all_finite(out)) return std::numeric_limits<double>::infinity();
    return detail::tensor_std(out.data());
  };

  const double std0 = output_std();
  report.add_point("output_std", 0, std0);

  TrainDataset td{data.inputs, data.targets, {}, false};
  TrainResult tr = train(net, params, td, tc, nullptr,
                         [&](const EpochStats& es, const ParamSet&) {
                           const double s = output_std();
                           report.add_point("output_std",
                                            static_cast<std::int64_t>(es.epoch) + 1, s);
                           if (!std::isfinite(s) || s > cfg.explosion_factor * in_std)
                             exploded = true;
                         });
  if (tr.diverged) exploded = true;
  report.set_diverged(tr.diverged);
  report.set_summary("input_std", in_std);
  report.set_summary("exploded", exploded ? 1.0 : 0.0);
  return report;
}

// ---- Dynamical isometry probe ----

struct IsometryConfig {
  std::size_t width = 64;
  std::size_t blocks = 64;
  Activation act = Activation::Relu;
};

// chi = mean squared singular value of the input-output Jacobian at
// initialization; the log singular values come along for the spectra plots.
inline ExperimentReport isometry_probe(InitMethod init, const IsometryConfig& cfg,
                                       std::uint64_t seed) {
  ExperimentReport report("isometry", seed);
  report.config()["init"] = to_string(init);
  report.config()["width"] = cfg.width;
  report.config()["blocks"] = cfg.blocks;
  report.config()["activation"] = to_string(cfg.act);

  NetworkSpec net = NetworkSpec::residual_stack(cfg.width, cfg.blocks, 2, cfg.act);
  ParamSet params = init_network(net, InitPolicy::of(init, seed));

  Rng rng(seed ^ 0x15050ABCDULL);
  std::vector<double> x(cfg.width);
  for (double& v : x) v = rng.normal(0.0, 1.0);

  const Matrix j = io_jacobian(net, params, x);
  const std::vector<double> sv = singular_values(j);
  double chi = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    chi += sv[i] * sv[i];
    report.add_point("log_singular_value", static_cast<std::int64_t>(i),
                     std::log(std::max(sv[i], 1e-300)));
  }
  chi /= static_cast<double>(sv.size());
  report.set_summary("chi", chi);
  report.set_summary("sigma_max", sv.front());
  report.set_summary("sigma_min", sv.back());
  return report;
}

}  // namespace idinit
