#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "idinit/conv.hpp"
#include "idinit/matrix.hpp"
#include "idinit/net.hpp"
#include "idinit/rng.hpp"

namespace idinit {

enum class InitMethod {
  IDI,
  IDIZ,
  IDIC,
  IDIZC,
  ChannelMaintain,
  Hadamard,
  Xavier,
  Kaiming,
  Orthogonal,
  Zero,
  PartialIdentityZeroPad,
};

inline const char* to_string(InitMethod m) {
  switch (m) {
    case InitMethod::IDI: return "idi";
    case InitMethod::IDIZ: return "idiz";
    case InitMethod::IDIC: return "idic";
    case InitMethod::IDIZC: return "idizc";
    case InitMethod::ChannelMaintain: return "channel-maintain";
    case InitMethod::Hadamard: return "hadamard";
    case InitMethod::Xavier: return "xavier";
    case InitMethod::Kaiming: return "kaiming";
    case InitMethod::Orthogonal: return "orthogonal";
    case InitMethod::Zero: return "zero";
    case InitMethod::PartialIdentityZeroPad: return "partial-identity";
  }
  return "?";
}

struct InitSpec {
  InitMethod method = InitMethod::IDI;
  double tau = 1.0;
  double epsilon = 1e-6;    // IDIZ/IDIZC magnitude
  double loose_eps = 1e-6;  // std of the loosened tau; 0 disables
  std::uint64_t seed = 0;

  void validate() const {
    if ((method == InitMethod::IDIZ || method == InitMethod::IDIZC) && epsilon <= 0.0)
      throw ShapeError("InitSpec: epsilon must be > 0 for idiz/idizc");
    if ((method == InitMethod::IDI || method == InitMethod::IDIC ||
         method == InitMethod::ChannelMaintain) &&
        tau == 0.0)
      throw ShapeError("InitSpec: tau must be nonzero for idi/idic/channel-maintain");
  }
};

// Identity-preserving initializer: entry (m, j) = tau when m = j (mod d_in),
// zero elsewhere (stacked/truncated identity). With loose_eps > 0 each
// nonzero entry is drawn from N(tau, loose_eps^2); structural zeros stay
// exactly zero so the transition pattern is unchanged.
inline Matrix idi(std::size_t d_out, std::size_t d_in, double tau, double loose_eps,
                  Rng* rng = nullptr) {
  if (d_out == 0 || d_in == 0) throw ShapeError("idi: dims must be >= 1");
  if (loose_eps > 0.0 && rng == nullptr)
    throw ShapeError("idi: loose condition requires an rng");
  Matrix m(d_out, d_in);
  for (std::size_t r = 0; r < d_out; ++r) {
    const std::size_t j = r % d_in;
    m(r, j) = loose_eps > 0.0 ? rng->normal(tau, loose_eps) : tau;
  }
  return m;
}

inline Matrix idi(std::size_t d_out, std::size_t d_in, double tau, double loose_eps,
                  Rng& rng) {
  return idi(d_out, d_in, tau, loose_eps, &rng);
}

// Zero-preserving initializer: every +eps is paired with a -eps so each
// output is eps times a difference of two inputs (mean 0, variance
// 2*phi*eps^2 for i.i.d. inputs of variance phi).
//
// Start from IDI_eps. If d_out < d_in the spare columns take the IDI_{-eps}
// pattern; otherwise each row puts -eps in the column adjacent (wrapping) to
// its +eps.
inline Matrix idiz(std::size_t d_out, std::size_t d_in, double epsilon) {
  if (d_out == 0 || d_in == 0) throw ShapeError("idiz: dims must be >= 1");
  if (epsilon <= 0.0) throw ShapeError("idiz: epsilon must be > 0");
  Matrix m = idi(d_out, d_in, epsilon, 0.0);
  if (d_out < d_in) {
    const std::size_t spare = d_in - d_out;
    for (std::size_t r = 0; r < d_out; ++r) {
      const std::size_t j = r % spare;  // IDI_{-eps} over the spare block
      m(r, d_out + j) = -epsilon;
    }
  } else {
    for (std::size_t r = 0; r < d_out; ++r) {
      const std::size_t j = (r % d_in + 1) % d_in;
      m(r, j) = -epsilon;
    }
  }
  return m;
}

// Patch-maintain convolution: IDI over the flattened (spatial x input
// channel) axis, reshaped into the kernel. Shifts spatial features instead
// of copying channels.
inline ConvKernel idic(std::size_t k, std::size_t c_in, std::size_t c_out, double tau,
                       double loose_eps, Rng* rng = nullptr) {
  return ConvKernel::from_matrix(idi(c_out, k * k * c_in, tau, loose_eps, rng), k, k, c_in);
}

inline ConvKernel idizc(std::size_t k, std::size_t c_in, std::size_t c_out, double epsilon) {
  return ConvKernel::from_matrix(idiz(c_out, k * k * c_in, epsilon), k, k, c_in);
}

// Channel-maintain (Dirac-style) baseline: identity at the center tap only.
inline ConvKernel channel_maintain(std::size_t k, std::size_t c_in, std::size_t c_out,
                                   double tau) {
  if (k % 2 == 0)
    throw UnsupportedError("channel_maintain: kernel size must be odd (needs a center tap)");
  ConvKernel kernel(k, k, c_in, c_out);
  const std::size_t n = (k - 1) / 2;
  const Matrix center = idi(c_out, c_in, tau, 0.0);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t i = 0; i < c_in; ++i) kernel.at(n, n, i, o) = center(o, i);
  return kernel;
}

// Orthonormal columns (rows when d_out < d_in) via Householder QR of a
// Gaussian draw; R's diagonal is forced positive so the result is
// deterministic given the rng.
inline Matrix orthogonal_init(Rng& rng, std::size_t d_out, std::size_t d_in) {
  const bool wide = d_out < d_in;
  const std::size_t m = wide ? d_in : d_out;
  const std::size_t n = wide ? d_out : d_in;

  Matrix a = gaussian_matrix(rng, m, n, 0.0, 1.0);
  Matrix q = Matrix::identity(m);  // accumulate full Q, trim later

  for (std::size_t k = 0; k < n; ++k) {
    // Householder vector for column k
    double norm = 0.0;
    for (std::size_t i = k; i < m; ++i) norm += a(i, k) * a(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = a(k, k) >= 0.0 ? -norm : norm;
    std::vector<double> v(m, 0.0);
    v[k] = a(k, k) - alpha;
    for (std::size_t i = k + 1; i < m; ++i) v[i] = a(i, k);
    double vtv = 0.0;
    for (std::size_t i = k; i < m; ++i) vtv += v[i] * v[i];
    if (vtv == 0.0) continue;
    const double two_over = 2.0 / vtv;
    // a <- (I - 2vv^T/v^Tv) a
    for (std::size_t j = k; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < m; ++i) dot += v[i] * a(i, j);
      const double f = two_over * dot;
      for (std::size_t i = k; i < m; ++i) a(i, j) -= f * v[i];
    }
    // q <- q (I - 2vv^T/v^Tv)
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t t = k; t < m; ++t) dot += q(i, t) * v[t];
      const double f = two_over * dot;
      for (std::size_t t = k; t < m; ++t) q(i, t) -= f * v[t];
    }
  }

  // Sign fix: columns of Q scaled so diag(R) > 0.
  Matrix result(m, n);
  for (std::size_t j = 0; j < n; ++j) {
    const double sign = a(j, j) >= 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < m; ++i) result(i, j) = sign * q(i, j);
  }
  return wide ? transpose(result) : result;
}

// Comparison baselines plus the identity-family constructions behind one
// switch, for matrix-shaped weights.
inline Matrix baseline(const InitSpec& spec, std::size_t d_out, std::size_t d_in) {
  spec.validate();
  Rng rng(spec.seed);
  switch (spec.method) {
    case InitMethod::IDI:
      return idi(d_out, d_in, spec.tau, spec.loose_eps, &rng);
    case InitMethod::IDIZ:
      return idiz(d_out, d_in, spec.epsilon);
    case InitMethod::Zero:
      return Matrix(d_out, d_in);
    case InitMethod::PartialIdentityZeroPad: {
      Matrix m(d_out, d_in);
      for (std::size_t i = 0; i < std::min(d_out, d_in); ++i) m(i, i) = 1.0;
      return m;
    }
    case InitMethod::Hadamard: {
      if (d_out != d_in)
        throw UnsupportedError("hadamard baseline: requires a square matrix");
      return scale(hadamard(d_out), 1.0 / std::sqrt(static_cast<double>(d_out)));
    }
    case InitMethod::Xavier: {
      const double bound = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
      Matrix m(d_out, d_in);
      for (double& v : m.data()) v = rng.uniform(-bound, bound);
      return m;
    }
    case InitMethod::Kaiming:
      return gaussian_matrix(rng, d_out, d_in, 0.0,
                             std::sqrt(2.0 / static_cast<double>(d_in)));
    case InitMethod::Orthogonal:
      return orthogonal_init(rng, d_out, d_in);
    default:
      throw UnsupportedError("baseline: method produces a kernel, not a matrix");
  }
}

// Attention projections: queries/keys/values carry identity, the output
// projection transits zero so a fresh residual attention block is a no-op.
struct AttentionInit {
  Matrix w_q, w_k, w_v, w_o;
};

inline AttentionInit init_attention(std::size_t d_model, double tau, double epsilon,
                                    double loose_eps, Rng& rng) {
  if (d_model == 0) throw ShapeError("init_attention: d_model must be >= 1");
  AttentionInit att;
  att.w_q = idi(d_model, d_model, tau, loose_eps, &rng);
  att.w_k = idi(d_model, d_model, tau, loose_eps, &rng);
  att.w_v = idi(d_model, d_model, tau, loose_eps, &rng);
  att.w_o = idiz(d_model, d_model, epsilon);
  return att;
}

// ---- Whole-network initialization ----

struct InitPolicy {
  InitMethod family = InitMethod::IDI;  // IDI selects the identity scheme
  double tau = 1.0;
  double epsilon = 1e-6;
  double loose_eps = 1e-6;
  std::uint64_t seed = 0;

  static InitPolicy idinit(std::uint64_t seed = 0) {
    return InitPolicy{InitMethod::IDI, 1.0, 1e-6, 1e-6, seed};
  }
  static InitPolicy of(InitMethod m, std::uint64_t seed = 0) {
    InitPolicy p;
    p.family = m;
    p.seed = seed;
    return p;
  }
};

// Identity scheme: IDI/IDIC everywhere; for residual nets, IDIZ/IDIZC on the
// final stem weight of every block and on the final classifier. The first
// layer's tau becomes sqrt(2) when the network activates with ReLU.
// Baseline families initialize every weight with the named method.
inline ParamSet init_network(const NetworkSpec& net, const InitPolicy& policy) {
  net.validate();
  ParamSet params = zero_params(net);
  Rng rng(policy.seed);

  const bool identity_family = policy.family == InitMethod::IDI;
  bool relu_net = false;
  for (const Layer& l : net.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l))
      relu_net = relu_net || d->act == Activation::Relu;
    else if (const auto* r = std::get_if<ResidualBlock>(&l))
      relu_net = relu_net || r->act == Activation::Relu;
  }

  bool residual_net = false;
  for (const Layer& l : net.layers)
    residual_net = residual_net || std::holds_alternative<ResidualBlock>(l);

  std::size_t dense_seen = 0, dense_total = 0;
  for (const Layer& l : net.layers)
    dense_total += std::holds_alternative<DenseLayer>(l) ? 1 : 0;

  bool first_weight = true;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    LayerParams& lp = params.layers[li];
    const Layer& l = net.layers[li];

    if (const auto* c = std::get_if<Conv2DLayer>(&l)) {
      if (identity_family) {
        const double tau = first_weight && relu_net ? std::sqrt(2.0) : policy.tau;
        lp.kernel = idic(c->k, c->c_in, c->c_out, tau, policy.loose_eps, &rng);
      } else {
        InitSpec spec{policy.family, policy.tau, policy.epsilon, policy.loose_eps,
                      rng.next_u64()};
        lp.kernel = ConvKernel::from_matrix(
            baseline(spec, c->c_out, c->k * c->k * c->c_in), c->k, c->k, c->c_in);
      }
      first_weight = false;
      continue;
    }

    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      ++dense_seen;
      const bool final_classifier = residual_net && dense_seen == dense_total &&
                                    li == net.layers.size() - 1;
      if (identity_family) {
        if (final_classifier) {
          lp.weights[0] = idiz(d->d_out, d->d_in, policy.epsilon);
        } else {
          const double tau = first_weight && relu_net ? std::sqrt(2.0) : policy.tau;
          lp.weights[0] = idi(d->d_out, d->d_in, tau, policy.loose_eps, &rng);
        }
      } else {
        InitSpec spec{policy.family, policy.tau, policy.epsilon, policy.loose_eps,
                      rng.next_u64()};
        lp.weights[0] = baseline(spec, d->d_out, d->d_in);
      }
      first_weight = false;
      continue;
    }

    const auto& r = std::get<ResidualBlock>(l);
    for (std::size_t s = 0; s < r.stem_depth; ++s) {
      const bool stem_end = s + 1 == r.stem_depth;
      if (identity_family) {
        if (stem_end) {
          lp.weights[s] = idiz(r.width, r.width, policy.epsilon);
        } else {
          const double tau = first_weight && relu_net ? std::sqrt(2.0) : policy.tau;
          lp.weights[s] = idi(r.width, r.width, tau, policy.loose_eps, &rng);
        }
      } else {
        InitSpec spec{policy.family, policy.tau, policy.epsilon, policy.loose_eps,
                      rng.next_u64()};
        lp.weights[s] = baseline(spec, r.width, r.width);
      }
      first_weight = false;
    }
  }
  return params;
}

}  // namespace idinit
