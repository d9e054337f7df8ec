// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "idinit/idinit.hpp"
#include "oracles.hpp"

using namespace idinit;

namespace {

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<bool(std::string&)> run;
};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- 1. identity transition ----
bool identity_transition(std::string& detail) {
  Rng rng(101);
  std::size_t pairs = 0;
  double worst_loose = 0.0;
  for (std::size_t d_in = 1; d_in <= 256; ++d_in) {
    for (std::size_t d_out = d_in; d_out <= 256; d_out += d_in) {
      ++pairs;
      const Matrix exact = idi(d_out, d_in, 1.0, 0.0);
      std::vector<double> x(d_in);
      for (int rep = 0; rep < 100; ++rep) {
        for (double& v : x) v = rng.normal(0.0, 1.0);
        const std::vector<double> y = matvec(exact, x);
        for (std::size_t i = 0; i < d_out; ++i)
          if (y[i] != x[i % d_in]) {
            detail = "exact stacking violated at d_out=" + std::to_string(d_out) +
                     " d_in=" + std::to_string(d_in);
            return false;
          }
      }
      const Matrix loose = idi(d_out, d_in, 1.0, 1e-6, &rng);
      const double dev = max_abs(sub(loose, exact));
      worst_loose = std::max(worst_loose, dev);
      for (std::size_t i = 0; i < exact.size(); ++i)
        if ((exact.data()[i] == 0.0) != (loose.data()[i] == 0.0)) {
          detail = "loose variant disturbed a structural zero";
          return false;
        }
    }
  }
  if (worst_loose >= 1e-5) {
    detail = "loose deviation " + fmt(worst_loose) + " >= 1e-5";
    return false;
  }
  detail = std::to_string(pairs) + " shapes, loose max dev " + fmt(worst_loose);
  return true;
}

// ---- 2. zero transition ----
bool zero_transition(std::string& detail) {
  const std::size_t d = 16, n = 100000;
  const double eps = 1e-3;
  const Matrix w = idiz(d, d, eps);
  Rng rng(202);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> x(d);
  for (std::size_t k = 0; k < n; ++k) {
    for (double& v : x) v = rng.normal(0.0, 1.0);
    for (double v : matvec(w, x)) {
      sum += v;
      sum_sq += v * v;
    }
  }
  const double count = static_cast<double>(n * d);
  const double mean = sum / count;
  const double var = sum_sq / count - mean * mean;
  const double target = 2.0 * eps * eps;
  const double se = std::sqrt(var / count);
  detail = "mean=" + fmt(mean) + " (4SE=" + fmt(4.0 * se) + "), var=" + fmt(var) +
           " target=" + fmt(target);
  return std::abs(mean) < 4.0 * se && std::abs(var / target - 1.0) < 0.05;
}

// ---- 3. rank constraint ----
bool rank_constraint(std::string& detail) {
  RankConfig cfg;  // d0 = 8, dh = 32, dl = 8, 2 steps
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const ExperimentReport id_rep = rank_experiment(RankInit::IDInit, cfg, seed);
    const double final_rank = id_rep.trace("rank").back().second;
    if (final_rank < 8.0) {
      detail = "idinit rank " + fmt(final_rank) + " < 8 at seed " + std::to_string(seed);
      return false;
    }
    const ExperimentReport pz_rep =
        rank_experiment(RankInit::PartialIdentityZeroPad, cfg, seed);
    for (const auto& [step, rank] : pz_rep.trace("rank"))
      if (rank > 8.0) {
        detail = "zero-pad rank " + fmt(rank) + " > 8 at seed " + std::to_string(seed);
        return false;
      }
  }
  detail = "idinit rank >= 8 after 2 steps, zero-pad <= 8 always (10 seeds)";
  return true;
}

// ---- 4. asymmetry bounds ----
bool asymmetry_bounds(std::string& detail) {
  AsymmetryProbe probe{64, 1.0, 0.1, 20000, 404};
  const AsymmetryEstimate est = monte_carlo_asymmetry(probe);
  const double lo = 0.95 * est.lower_bound;
  const double hi = 1.05 * est.upper_bound;
  if (!(est.mean >= lo && est.mean <= hi)) {
    detail = "estimate " + fmt(est.mean) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]";
    return false;
  }
  AsymmetryProbe control{64, 1.0, 0.0, 20000, 405};
  const AsymmetryEstimate c = monte_carlo_asymmetry(control);
  const double expected = 2.0 * 64.0 * 63.0;
  if (std::abs(c.mean - expected) >= 4.0 * c.std_err) {
    detail = "eta=0 control " + fmt(c.mean) + " vs " + fmt(expected) + " (4SE " +
             fmt(4.0 * c.std_err) + ")";
    return false;
  }
  detail = "estimate " + fmt(est.mean) + " in [" + fmt(lo) + ", " + fmt(hi) +
           "]; control " + fmt(c.mean) + " ~ " + fmt(expected);
  return true;
}

// ---- 5. symmetry breaking ----
bool symmetry_breaking(std::string& detail) {
  SymmetryConfig cfg;
  double min_ratio = 1e300, max_sgdm_rel = 0.0, min_gd_rel = 1e300;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ExperimentReport gd = symmetry_experiment(OptimizerMode::GD, seed, cfg);
    const ExperimentReport sgdm =
        symmetry_experiment(OptimizerMode::SGDMomentum, seed, cfg);
    const double dist_ratio =
        sgdm.summary("final_layer_distance") / gd.summary("final_layer_distance");
    const double sgdm_rel =
        sgdm.summary("final_test_mse") / sgdm.summary("initial_test_mse");
    const double gd_rel = gd.summary("final_test_mse") / gd.summary("initial_test_mse");
    min_ratio = std::min(min_ratio, dist_ratio);
    max_sgdm_rel = std::max(max_sgdm_rel, sgdm_rel);
    min_gd_rel = std::min(min_gd_rel, gd_rel);
  }
  detail = "distance ratio >= " + fmt(min_ratio) + "; sgd+m mse/initial <= " +
           fmt(max_sgdm_rel) + "; gd mse/initial >= " + fmt(min_gd_rel);
  return min_ratio > 10.0 && max_sgdm_rel < 0.05 && min_gd_rel > 0.5;
}

// ---- 6. dynamical isometry ----
bool dynamical_isometry(std::string& detail) {
  IsometryConfig cfg;  // 64 blocks, width 64, relu
  const double chi_id = isometry_probe(InitMethod::IDI, cfg, 606).summary("chi");
  const double chi_k = isometry_probe(InitMethod::Kaiming, cfg, 606).summary("chi");
  detail = "idinit chi=" + fmt(chi_id) + ", kaiming chi=" + fmt(chi_k);
  return std::abs(chi_id - 1.0) < 1e-3 && chi_k > 10.0;
}

// ---- 7. variance propagation ----
bool variance_propagation(std::string& detail) {
  VarianceConfig cfg;  // 10 blocks, 500 rounds
  std::string ratios;
  for (double noise : {0.0, 0.01, 0.1, 1.0}) {
    cfg.noise_std = noise;
    const double ratio =
        variance_probe(NetKind::ResFC, InitMethod::IDI, cfg, 707).summary("std_ratio");
    ratios += " " + fmt(ratio);
    if (!(ratio >= 0.5 && ratio <= 2.0)) {
      detail = "idinit ratio " + fmt(ratio) + " outside [0.5, 2] at noise " + fmt(noise);
      return false;
    }
  }
  cfg.noise_std = 0.0;
  const double xavier =
      variance_probe(NetKind::ResFC, InitMethod::Xavier, cfg, 707).summary("std_ratio");
  detail = "idinit ratios" + ratios + "; xavier ratio " + fmt(xavier);
  return xavier > 5.0;
}

// ---- 8. dead neurons ----
bool dead_neurons(std::string& detail) {
  DeadNeuronConfig cfg;  // 100 steps
  const double dead_zero =
      dead_neuron_experiment(DeadNeuronVariant::ZeroWeightZeroGate, cfg, 808)
          .summary("dead_fraction");
  const double dead_idiz =
      dead_neuron_experiment(DeadNeuronVariant::IdizWeightZeroGate, cfg, 808)
          .summary("dead_fraction");
  detail = "zero variant " + fmt(dead_zero) + ", idiz variant " + fmt(dead_idiz);
  return dead_zero == 1.0 && dead_idiz < 0.05;
}

// ---- 9. toy dynamics ----
bool toy_convergence(std::string& detail) {
  const double residual_target = std::pow(50.0, 0.2) - 1.0;
  const double plain_target = std::pow(50.0, 0.2);

  ToyConfig a;  // r = 1, (1, 0)
  const ToyResult ra = toy_dynamics(a);
  ToyConfig b;
  b.w1_0 = 0.0;
  b.w2_0 = 1.0;
  const ToyResult rb = toy_dynamics(b);
  ToyConfig c;
  c.r = 0;
  c.w1_0 = 1.0;
  c.w2_0 = 1.0;
  const ToyResult rc = toy_dynamics(c);

  detail = "residual products " + fmt(ra.final_product) + ", " + fmt(rb.final_product) +
           " (target " + fmt(residual_target) + "), non-residual " +
           fmt(rc.final_product) + " (target " + fmt(plain_target) + "); min saddle dist " +
           fmt(std::min(ra.min_dist_to_saddle, rb.min_dist_to_saddle));
  return !ra.diverged && !rb.diverged && !rc.diverged &&
         std::abs(ra.final_product - residual_target) < 1e-2 &&
         std::abs(rb.final_product - residual_target) < 1e-2 &&
         std::abs(rc.final_product - plain_target) < 1e-2 &&
         ra.min_dist_to_saddle > 0.05 && rb.min_dist_to_saddle > 0.05;
}

// ---- 10. MNIST Linear-5 ----
bool mnist_linear5(std::string& detail) {
  const std::string dir = data_dir();
  if (!mnist_files_present(dir)) {
    detail = "MNIST IDX files not found under " + dir +
             "; run tools/fetch_mnist.py (see README)";
    return false;
  }
  const bool full = std::getenv("IDINIT_MNIST_FULL") != nullptr;
  MnistConfig cfg;
  cfg.net = "linear5relu";
  cfg.init = InitMethod::IDI;
  if (full) {
    cfg.train_limit = 0;
    cfg.epochs = 30;
  } else {
    cfg.train_limit = 10000;
    cfg.epochs = 12;
  }
  const ExperimentReport id_rep = mnist_experiment(cfg, 1010);
  const double id_acc = id_rep.summary("final_test_accuracy");
  if (full) {
    cfg.init = InitMethod::Kaiming;
    const ExperimentReport k_rep = mnist_experiment(cfg, 1010);
    const double k_acc = k_rep.summary("final_test_accuracy");
    detail = "idinit " + fmt(100.0 * id_acc) + "%, kaiming " + fmt(100.0 * k_acc) +
             "% (full mode)";
    return id_acc >= 0.975 && id_acc >= k_acc - 0.01;
  }
  detail = "idinit " + fmt(100.0 * id_acc) + "% on " +
           fmt(id_rep.summary("train_size")) + " train / " +
           fmt(id_rep.summary("test_size")) + " test (subset mode)";
  return id_acc >= 0.95;
}

// ---- 11. engine soundness ----
bool engine_soundness(std::string& detail) {
  Rng rng(1111);
  double worst_grad = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t d_in = 3 + rng.below(3);
    const std::size_t d_out = 2 + rng.below(3);
    NetworkSpec net = random_small_net(rng, d_in, d_out);
    ParamSet params = random_params(net, rng);
    const Matrix x = gaussian_matrix(rng, 3, d_in, 0.0, 1.0);
    const Matrix y = gaussian_matrix(rng, 3, d_out, 0.0, 1.0);
    worst_grad = std::max(worst_grad, gradient_check(net, params, x, y, LossKind::MSE));
  }
  if (worst_grad >= 1e-6) {
    detail = "gradient check worst rel err " + fmt(worst_grad);
    return false;
  }

  double worst_sv = 0.0;
  const std::vector<std::pair<std::size_t, std::size_t>> shapes = {{6, 4}, {5, 4}, {8, 3}};
  for (auto [r, c] : shapes) {
    const Matrix a = gaussian_matrix(rng, r, c, 0.0, 1.0);
    const std::vector<double> sv = singular_values(a);
    const std::vector<double> eig =
        oracles::psd_eigenvalues_oracle(oracles::matmul_oracle(transpose(a), a));
    if (eig.size() != sv.size()) {
      detail = "eigen-oracle root count mismatch";
      return false;
    }
    for (std::size_t i = 0; i < sv.size(); ++i)
      worst_sv = std::max(worst_sv, std::abs(sv[i] - std::sqrt(std::max(eig[i], 0.0))));
  }
  if (worst_sv >= 1e-8) {
    detail = "svd vs eigen-oracle worst err " + fmt(worst_sv);
    return false;
  }

  // determinism: repeated runs serialize identically
  SymmetryConfig scfg;
  scfg.epochs = 5;
  scfg.n_train = 200;
  scfg.n_test = 100;
  const std::string s1 =
      symmetry_experiment(OptimizerMode::SGDMomentum, 7, scfg).to_json().dump();
  const std::string s2 =
      symmetry_experiment(OptimizerMode::SGDMomentum, 7, scfg).to_json().dump();
  RankConfig rcfg;
  const std::string r1 = rank_experiment(RankInit::IDInit, rcfg, 7).to_json().dump();
  const std::string r2 = rank_experiment(RankInit::IDInit, rcfg, 7).to_json().dump();
  if (s1 != s2 || r1 != r2) {
    detail = "repeated seeded runs produced different reports";
    return false;
  }

  detail = "gradients " + fmt(worst_grad) + ", svd " + fmt(worst_sv) +
           ", reports bitwise stable";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const int only = argc > 1 ? std::atoi(argv[1]) : 0;

  std::vector<Criterion> criteria = {
      {1, "identity transition (stacked copies, loose variant)", 1.0, identity_transition},
      {2, "zero transition (mean 0, variance 2*eps^2)", 5.0, zero_transition},
      {3, "rank constraint broken by identity padding", 10.0, rank_constraint},
      {4, "asymmetry magnitude bounds", 30.0, asymmetry_bounds},
      {5, "symmetry breaking (SGD+momentum vs GD)", 120.0, symmetry_breaking},
      {6, "dynamical isometry (chi at init)", 60.0, dynamical_isometry},
      {7, "variance propagation (ResFC)", 60.0, variance_propagation},
      {8, "dead neurons (zero gate)", 30.0, dead_neurons},
      {9, "toy dynamics fixed points", 5.0, toy_convergence},
      {10, "MNIST Linear-5 accuracy", 1200.0, mnist_linear5},
      {11, "engine soundness (gradcheck, svd oracle, determinism)", 120.0,
       engine_soundness},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    std::string detail;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_s) {
      ok = false;
      detail += " [over budget " + fmt(c.budget_s) + "s]";
    }
    std::printf("[%s] criterion %2d: %s (%.2fs) - %s\n", ok ? "PASS" : "FAIL", c.id,
                c.name.c_str(), secs, detail.c_str());
    if (!ok) ++failures;
  }
  if (failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criteria FAILED\n", failures);
  return failures;
}
