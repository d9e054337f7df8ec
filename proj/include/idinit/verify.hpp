#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "idinit/analysis.hpp"
#include "idinit/init.hpp"
#include "idinit/matrix.hpp"
#include "idinit/net.hpp"
#include "idinit/svd.hpp"

namespace idinit {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace detail

// ---- Pattern validators (shared with the fault-injection tests) ----

// True when m carries the stacked-identity pattern: structural zeros are
// exactly zero and each tau entry lies within loose_tol of tau.
inline bool idi_pattern_ok(const Matrix& m, std::size_t d_out, std::size_t d_in, double tau,
                           double loose_tol) {
  if (m.rows() != d_out || m.cols() != d_in) return false;
  for (std::size_t r = 0; r < d_out; ++r)
    for (std::size_t c = 0; c < d_in; ++c) {
      if (c == r % d_in) {
        if (std::abs(m(r, c) - tau) > loose_tol) return false;
      } else if (m(r, c) != 0.0) {
        return false;
      }
    }
  return true;
}

// True when every entry is 0 or +-eps and (for d_in >= 2) every row sums to
// exactly zero.
inline bool idiz_pattern_ok(const Matrix& m, double eps) {
  for (double v : m.data())
    if (v != 0.0 && std::abs(std::abs(v) - eps) > 0.0) return false;
  if (m.cols() >= 2) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < m.cols(); ++c) s += m(r, c);
      if (s != 0.0) return false;
    }
  }
  return true;
}

// ---- Initializer invariants ----

inline std::vector<CheckResult> verify_initializers(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng(seed);
  const auto push = [&out](const std::string& name, bool ok, const std::string& detail) {
    out.push_back({"initializers", name, ok, detail});
  };

  {  // exact identity transition: stacked copies, bitwise
    bool ok = true;
    for (std::size_t d_in : {1u, 2u, 3u, 5u, 8u, 16u}) {
      for (std::size_t q = 1; q <= 4 && ok; ++q) {
        const std::size_t d_out = q * d_in;
        const Matrix w = idi(d_out, d_in, 1.0, 0.0);
        std::vector<double> x(d_in);
        for (double& v : x) v = rng.normal(0.0, 1.0);
        const std::vector<double> y = matvec(w, x);
        for (std::size_t i = 0; i < d_out && ok; ++i) ok = y[i] == x[i % d_in];
      }
    }
    push("idi_identity_transition", ok, "stacked copies reproduced exactly");
  }

  {  // pattern validator across shapes, loose and exact
    bool ok = true;
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {
        {4, 2}, {2, 2}, {2, 4}, {7, 3}, {16, 5}};
    for (auto [d_out, d_in] : shapes) {
      ok = ok && idi_pattern_ok(idi(d_out, d_in, 1.0, 0.0), d_out, d_in, 1.0, 0.0);
      ok = ok && idi_pattern_ok(idi(d_out, d_in, 1.0, 1e-6, &rng), d_out, d_in, 1.0, 1e-5);
    }
    push("idi_pattern", ok, "tau entries at m = j (mod d_in), zeros elsewhere");
  }

  {  // full column/row rank
    bool ok = true;
    const std::vector<std::pair<std::size_t, std::size_t>> shapes = {
        {6, 4}, {4, 4}, {3, 7}, {32, 8}};
    for (auto [d_out, d_in] : shapes) {
      const std::size_t r = numerical_rank(idi(d_out, d_in, 1.0, 0.0));
      ok = ok && r == std::min(d_out, d_in);
    }
    push("idi_full_rank", ok, "rank(idi) = min(d_out, d_in)");
  }

  {  // zero transition: mean 0, variance 2 phi eps^2 within 5%
    const std::size_t d = 8, n = 100000;
    const double eps = 1e-3;
    const Matrix w = idiz(d, d, eps);
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> x(d);
    for (std::size_t k = 0; k < n; ++k) {
      for (double& v : x) v = rng.normal(0.0, 1.0);
      const std::vector<double> y = matvec(w, x);
      for (double v : y) {
        sum += v;
        sum_sq += v * v;
      }
    }
    const double count = static_cast<double>(n * d);
    const double mean = sum / count;
    const double var = sum_sq / count - mean * mean;
    const double target = 2.0 * eps * eps;
    const bool ok = std::abs(var / target - 1.0) < 0.05 &&
                    std::abs(mean) < 4.0 * std::sqrt(target / count);
    push("idiz_zero_transition", ok,
         "var=" + detail::fmt(var) + " target=" + detail::fmt(target) +
             " mean=" + detail::fmt(mean));
  }

  {  // loose condition: bounded deviation, identical zero pattern
    const Matrix exact = idi(64, 16, 1.0, 0.0);
    const Matrix loose = idi(64, 16, 1.0, 1e-6, &rng);
    const double dev = max_abs(sub(loose, exact));
    bool pattern = true;
    for (std::size_t i = 0; i < exact.size(); ++i)
      pattern = pattern && ((exact.data()[i] == 0.0) == (loose.data()[i] == 0.0));
    push("idi_loose_condition", dev < 1e-5 && pattern,
         "max deviation " + detail::fmt(dev) + ", zero pattern preserved");
  }

  {  // channel-maintain transits identity exactly when c_in = c_out
    const ConvKernel k = channel_maintain(3, 4, 4, 1.0);
    Tensor3 x(4, 6, 6);
    for (double& v : x.data) v = rng.normal(0.0, 1.0);
    const Tensor3 y = conv2d_forward(k, x);
    bool ok = y.data == x.data;
    push("channel_maintain_identity", ok, "3x3 center-tap kernel reproduces input");
  }

  {  // reshape round trip is the identity on data
    Rng r2(seed ^ 1);
    const ConvKernel k = idic(3, 2, 5, 1.0, 1e-6, &r2);
    const ConvKernel back = ConvKernel::from_matrix(k.to_matrix(), 3, 3, 2);
    push("idic_reshape_roundtrip", back.data() == k.data(), "bitwise");
  }

  {  // idizc rows sum to zero through the matrix view
    const ConvKernel k = idizc(3, 4, 6, 1e-6);
    push("idizc_rows_zero_sum", idiz_pattern_ok(k.to_matrix(), 1e-6),
         "entries in {0, +-eps}, rows cancel");
  }

  {  // attention block is an eps-bounded perturbation of identity
    const std::size_t d = 16;
    const double eps = 1e-6;
    AttentionInit att = init_attention(d, 1.0, eps, 1e-6, rng);
    std::vector<double> x(d);
    for (double& v : x) v = rng.normal(0.0, 1.0);
    // Single-position attention: the softmax weight is 1, so the block is
    // x + W_O W_V x.
    const std::vector<double> v = matvec(att.w_v, x);
    const std::vector<double> o = matvec(att.w_o, v);
    double dev = 0.0, xmax = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dev = std::max(dev, std::abs(o[i]));
      xmax = std::max(xmax, std::abs(x[i]));
    }
    const bool ok = dev <= static_cast<double>(d) * eps * xmax &&
                    idiz_pattern_ok(att.w_o, eps) && max_abs(att.w_o) == eps;
    push("attention_identity_bound", ok,
         "|out-x| <= d*eps*|x| (" + detail::fmt(dev) + ")");
  }

  {  // Hadamard: H H^T = n I exactly
    const Matrix h = hadamard(8);
    const Matrix hht = matmul_bt(h, h);
    bool ok = true;
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        ok = ok && hht(i, j) == (i == j ? 8.0 : 0.0);
    push("hadamard_orthogonality", ok, "exact");
  }

  {  // orthogonal baseline
    const Matrix q =
        baseline(InitSpec{InitMethod::Orthogonal, 1.0, 1e-6, 0.0, seed}, 16, 16);
    const Matrix qtq = matmul_at(q, q);
    const double dev = max_abs(sub(qtq, Matrix::identity(16)));
    push("orthogonal_baseline", dev < 1e-10, "|Q^T Q - I| = " + detail::fmt(dev));
  }

  {  // Kaiming baseline variance
    const Matrix m =
        baseline(InitSpec{InitMethod::Kaiming, 1.0, 1e-6, 0.0, seed ^ 2}, 1000, 256);
    const double s = std_of(m);
    const double target = std::sqrt(2.0 / 256.0);
    push("kaiming_variance", std::abs(s / target - 1.0) < 0.1,
         "std=" + detail::fmt(s) + " target=" + detail::fmt(target));
  }

  return out;
}

// ---- Gradient / engine invariants ----

namespace detail {

// Central finite-difference loss gradient for one weight entry.
template <typename LossFn>
double fd_weight_grad(Matrix& w, std::size_t i, const LossFn& loss, double h = 1e-5) {
  const double saved = w.data()[i];
  w.data()[i] = saved + h;
  const double up = loss();
  w.data()[i] = saved - h;
  const double dn = loss();
  w.data()[i] = saved;
  return (up - dn) / (2.0 * h);
}

}  // namespace detail

// Compares analytic gradients against central differences on one random
// net; returns the worst relative error (with a 1e-8 absolute floor).
inline double gradient_check(const NetworkSpec& net, ParamSet& params, const Matrix& x,
                             const Matrix& y, LossKind kind,
                             const std::vector<int>& labels = {}) {
  const auto loss_value = [&]() {
    const Matrix out = forward(net, params, x).output;
    return kind == LossKind::MSE ? mse_loss(out, y).value
                                 : softmax_cross_entropy(out, labels).value;
  };
  const ForwardTrace trace = forward(net, params, x);
  const LossGrad lg = kind == LossKind::MSE ? mse_loss(trace.output, y)
                                            : softmax_cross_entropy(trace.output, labels);
  const Gradients grads = backward(net, params, trace, lg.grad);

  double worst = 0.0;
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    LayerParams& lp = params.layers[li];
    for (std::size_t wi = 0; wi < lp.weights.size(); ++wi) {
      Matrix& w = lp.weights[wi];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double fd = detail::fd_weight_grad(w, i, loss_value);
        const double an = grads.weights[li][wi].data()[i];
        const double err = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
        worst = std::max(worst, err);
      }
    }
    if (lp.has_gate) {
      const double saved = lp.gate;
      const double h = 1e-5;
      lp.gate = saved + h;
      const double up = loss_value();
      lp.gate = saved - h;
      const double dn = loss_value();
      lp.gate = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double an = grads.gates[li];
      worst = std::max(worst,
                       std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8}));
    }
  }
  return worst;
}

inline NetworkSpec random_small_net(Rng& rng, std::size_t d_in, std::size_t d_out) {
  NetworkSpec net;
  const std::size_t mid = 3 + rng.below(4);
  const Activation acts[3] = {Activation::Identity, Activation::Tanh, Activation::Relu};
  net.layers.push_back(DenseLayer{d_in, mid, acts[rng.below(3)]});
  if (rng.below(2) == 0)
    net.layers.push_back(ResidualBlock{mid, 2 + static_cast<std::size_t>(rng.below(2)),
                                       acts[rng.below(3)], rng.below(2) == 0});
  net.layers.push_back(DenseLayer{mid, d_out, Activation::Identity});
  return net;
}

inline ParamSet random_params(const NetworkSpec& net, Rng& rng) {
  ParamSet params = zero_params(net);
  for (LayerParams& lp : params.layers) {
    for (Matrix& w : lp.weights) w = gaussian_matrix(rng, w.rows(), w.cols(), 0.0, 0.5);
    if (lp.has_gate) lp.gate = rng.normal(0.5, 0.2);
  }
  return params;
}

inline std::vector<CheckResult> verify_gradients(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng(seed);
  const auto push = [&out](const std::string& name, bool ok, const std::string& detail) {
    out.push_back({"gradients", name, ok, detail});
  };

  {  // analytic vs finite differences on random nets
    double worst = 0.0;
    for (int rep = 0; rep < 6; ++rep) {
      const std::size_t d_in = 3 + rng.below(3);
      const std::size_t d_out = 2 + rng.below(3);
      NetworkSpec net = random_small_net(rng, d_in, d_out);
      ParamSet params = random_params(net, rng);
      const Matrix x = gaussian_matrix(rng, 4, d_in, 0.0, 1.0);
      const Matrix y = gaussian_matrix(rng, 4, d_out, 0.0, 1.0);
      worst = std::max(worst, gradient_check(net, params, x, y, LossKind::MSE));
    }
    push("finite_difference_gradients", worst < 1e-6, "worst rel err " + detail::fmt(worst));
  }

  {  // momentum recurrence equals the scalar oracle
    TrainConfig tc;
    tc.learning_rate = 0.2;
    tc.momentum = 0.9;
    NetworkSpec net;
    net.layers.push_back(DenseLayer{1, 1, Activation::Identity});
    ParamSet params = zero_params(net);
    params.layers[0].weights[0](0, 0) = 1.0;
    double theta = 1.0, m = 0.0;
    bool ok = true;
    for (int step = 0; step < 10; ++step) {
      const double g = 0.3 + 0.01 * step;
      Gradients grads;
      grads.weights.push_back({Matrix{{g}}});
      grads.gates.push_back(0.0);
      sgd_step(params, grads, tc);
      m = tc.momentum * m + tc.learning_rate * g;
      theta -= m;
      ok = ok && std::abs(params.layers[0].weights[0](0, 0) - theta) < 1e-12;
    }
    push("sgd_momentum_recurrence", ok, "10-step scalar oracle");
  }

  {  // closed-form two-step gradient equals the simulated one
    bool ok = true;
    double worst = 0.0;
    for (int rep = 0; rep < 50 && ok; ++rep) {
      const std::size_t d = 3 + rng.below(5);
      std::vector<double> x1(d), y1(d), x2(d), y2(d);
      for (double& v : x1) v = rng.normal(0.0, 1.0);
      for (double& v : y1) v = rng.normal(0.0, 1.0);
      for (double& v : x2) v = rng.normal(0.0, 1.0);
      for (double& v : y2) v = rng.normal(0.0, 1.0);
      const double eta = 0.1;

      NetworkSpec net;
      net.layers.push_back(DenseLayer{d, d, Activation::Identity});
      ParamSet params = zero_params(net);
      params.layers[0].weights[0] = Matrix::identity(d);
      TrainConfig tc;
      tc.learning_rate = eta;

      const Matrix x1m(1, d, x1), y1m(1, d, y1), x2m(1, d, x2), y2m(1, d, y2);
      {
        const ForwardTrace t1 = forward(net, params, x1m);
        const Gradients g1 = backward(net, params, t1, mse_loss(t1.output, y1m).grad);
        sgd_step(params, g1, tc);
      }
      const ForwardTrace t2 = forward(net, params, x2m);
      const Gradients g2 = backward(net, params, t2, mse_loss(t2.output, y2m).grad);

      const Matrix formula = two_step_gradient(x1, y1, x2, y2, eta);
      const double err = max_abs(sub(formula, g2.weights[0][0]));
      worst = std::max(worst, err);
      ok = err < 1e-12;
    }
    push("two_step_gradient_formula", ok, "50 seeds, worst abs err " + detail::fmt(worst));
  }

  {  // matmul associativity
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      const Matrix a = gaussian_matrix(rng, 5 + rng.below(8), 5 + rng.below(8), 0.0, 1.0);
      const Matrix b = gaussian_matrix(rng, a.cols(), 5 + rng.below(8), 0.0, 1.0);
      const Matrix c = gaussian_matrix(rng, b.cols(), 5 + rng.below(8), 0.0, 1.0);
      const Matrix lhs = matmul(matmul(a, b), c);
      const Matrix rhs = matmul(a, matmul(b, c));
      worst = std::max(worst, frobenius_norm(sub(lhs, rhs)) /
                                  std::max(frobenius_norm(lhs), 1e-300));
    }
    push("matmul_associativity", worst < 1e-9, "worst rel err " + detail::fmt(worst));
  }

  return out;
}

// ---- Isometry / spectral invariants ----

inline std::vector<CheckResult> verify_isometry(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng(seed);
  const auto push = [&out](const std::string& name, bool ok, const std::string& detail) {
    out.push_back({"isometry", name, ok, detail});
  };

  {  // Frobenius norm identity
    double worst = 0.0;
    for (int rep = 0; rep < 8; ++rep) {
      const std::size_t r = 4 + rng.below(61), c = 4 + rng.below(61);
      const Matrix a = gaussian_matrix(rng, r, c, 0.0, 1.0);
      const std::vector<double> sv = singular_values(a);
      double s = 0.0;
      for (double v : sv) s += v * v;
      worst = std::max(worst, std::abs(s / frobenius_norm_sq(a) - 1.0));
    }
    push("frobenius_vs_singular_values", worst < 1e-9, "worst rel err " + detail::fmt(worst));
  }

  {  // rank(AB) <= min(rank A, rank B)
    bool ok = true;
    for (int rep = 0; rep < 6 && ok; ++rep) {
      const std::size_t m = 6 + rng.below(6), k = 2 + rng.below(4), n = 6 + rng.below(6);
      const Matrix a = matmul(gaussian_matrix(rng, m, k, 0.0, 1.0),
                              gaussian_matrix(rng, k, m, 0.0, 1.0));
      const Matrix b = gaussian_matrix(rng, m, n, 0.0, 1.0);
      ok = numerical_rank(matmul(a, b)) <=
           std::min(numerical_rank(a), numerical_rank(b));
    }
    push("rank_product_inequality", ok, "random factor pairs");
  }

  {  // identity forward: zeroed stems transmit exactly
    NetworkSpec net = NetworkSpec::residual_stack(12, 6, 2, Activation::Relu);
    ParamSet params = init_network(net, InitPolicy::idinit(seed));
    for (LayerParams& lp : params.layers)
      lp.weights.back() = Matrix(12, 12);  // eps = 0 limit
    const Matrix x = gaussian_matrix(rng, 3, 12, 0.0, 1.0);
    const Matrix y = forward(net, params, x).output;
    const bool exact = y == x;

    ParamSet eps_params = init_network(net, InitPolicy::idinit(seed));
    const Matrix y_eps = forward(net, eps_params, x).output;
    const double dev = max_abs(sub(y_eps, x));
    const double bound = 6.0 * 12.0 * 1e-6 * max_abs(x);
    push("identity_forward", exact && dev <= bound,
         "exact at eps=0; eps deviation " + detail::fmt(dev) + " <= " + detail::fmt(bound));
  }

  {  // chi at initialization
    const ExperimentReport idrep =
        isometry_probe(InitMethod::IDI, IsometryConfig{}, seed);
    const ExperimentReport krep =
        isometry_probe(InitMethod::Kaiming, IsometryConfig{}, seed);
    const double chi_id = idrep.summary("chi");
    const double chi_k = krep.summary("chi");
    push("chi_critical_line", std::abs(chi_id - 1.0) < 1e-3 && chi_k > 10.0,
         "idinit chi=" + detail::fmt(chi_id) + ", kaiming chi=" + detail::fmt(chi_k));
  }

  return out;
}

inline std::vector<CheckResult> verify_suite(const std::string& suite, std::uint64_t seed) {
  std::vector<CheckResult> all;
  if (suite == "all" || suite == "initializers") {
    auto v = verify_initializers(seed);
    all.insert(all.end(), v.begin(), v.end());
  }
  if (suite == "all" || suite == "gradients") {
    auto v = verify_gradients(seed);
    all.insert(all.end(), v.begin(), v.end());
  }
  if (suite == "all" || suite == "isometry") {
    auto v = verify_isometry(seed);
    all.insert(all.end(), v.begin(), v.end());
  }
  return all;
}

inline std::vector<std::string> verify_check_names(const std::string& suite) {
  // Enumerate without executing the heavy checks: names are stable.
  static const std::vector<std::pair<const char*, const char*>> names = {
      {"initializers", "idi_identity_transition"},
      {"initializers", "idi_pattern"},
      {"initializers", "idi_full_rank"},
      {"initializers", "idiz_zero_transition"},
      {"initializers", "idi_loose_condition"},
      {"initializers", "channel_maintain_identity"},
      {"initializers", "idic_reshape_roundtrip"},
      {"initializers", "idizc_rows_zero_sum"},
      {"initializers", "attention_identity_bound"},
      {"initializers", "hadamard_orthogonality"},
      {"initializers", "orthogonal_baseline"},
      {"initializers", "kaiming_variance"},
      {"gradients", "finite_difference_gradients"},
      {"gradients", "sgd_momentum_recurrence"},
      {"gradients", "two_step_gradient_formula"},
      {"gradients", "matmul_associativity"},
      {"isometry", "frobenius_vs_singular_values"},
      {"isometry", "rank_product_inequality"},
      {"isometry", "identity_forward"},
      {"isometry", "chi_critical_line"},
  };
  std::vector<std::string> out;
  for (const auto& [s, n] : names)
    if (suite == "all" || suite == s) out.push_back(std::string(s) + "/" + n);
  return out;
}

}  // namespace idinit
