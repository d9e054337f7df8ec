#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "idinit/analysis.hpp"
#include "idinit/report.hpp"

using namespace idinit;

TEST_CASE("two_step_gradient degenerate cases") {
  Rng rng(3);
  const std::size_t d = 5;
  std::vector<double> x1(d), x2(d), y2(d);
  for (double& v : x1) v = rng.normal(0.0, 1.0);
  for (double& v : x2) v = rng.normal(0.0, 1.0);
  for (double& v : y2) v = rng.normal(0.0, 1.0);

  // perfect-fit data: residuals vanish
  const Matrix zero = two_step_gradient(x1, x1, x2, x2, 0.3);
  CHECK(max_abs(zero) < 1e-14);

  // eta = 0 reduces to x2 x2^T - y2 x2^T
  const Matrix g0 = two_step_gradient(x1, x1, x2, y2, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      CHECK(g0(i, j) == Catch::Approx((x2[i] - y2[i]) * x2[j]).margin(1e-14));

  CHECK_THROWS_AS(two_step_gradient(x1, x1, x2, std::vector<double>(d + 1), 0.1),
                  ShapeError);
}

TEST_CASE("asymmetry magnitude") {
  const Matrix sym{{1, 2}, {2, 5}};
  CHECK(asymmetry_magnitude(sym) == 0.0);
  CHECK(asymmetry_magnitude(Matrix{{0, 1}, {-1, 0}}) == 8.0);
  CHECK_THROWS_AS(asymmetry_magnitude(Matrix(2, 3)), ShapeError);

  // loop oracle: sum over i<j of 2 (m_ij - m_ji)^2
  Rng rng(5);
  const Matrix m = gaussian_matrix(rng, 6, 6, 0.0, 1.0);
  double want = 0.0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j)
      want += 2.0 * (m(i, j) - m(j, i)) * (m(i, j) - m(j, i));
  CHECK(asymmetry_magnitude(m) == Catch::Approx(want).margin(1e-12));
}

TEST_CASE("monte carlo asymmetry agrees with the materialized omega") {
  // cross-check the O(d) rank-one shortcut against building omega densely
  Rng rng(7);
  const std::size_t d = 6;
  const double eta = 0.3;
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x1(d), y1(d), x2(d), y2(d);
    for (double& v : x1) v = rng.normal(0.0, 1.0);
    for (double& v : y1) v = rng.normal(0.0, 1.0);
    for (double& v : x2) v = rng.normal(0.0, 1.0);
    for (double& v : y2) v = rng.normal(0.0, 1.0);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += x1[i] * x2[i];
    Matrix omega(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        omega(i, j) = (-eta * x1[i] + eta * y1[i]) * s * x2[j] - y2[i] * x2[j];
    double ww = 0.0, xx = 0.0, wx = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double w = eta * s * (y1[i] - x1[i]) - y2[i];
      ww += w * w;
      xx += x2[i] * x2[i];
      wx += w * x2[i];
    }
    CHECK(asymmetry_magnitude(omega) ==
          Catch::Approx(2.0 * (ww * xx - wx * wx)).epsilon(1e-10));
  }
}

TEST_CASE("monte carlo asymmetry controls") {
  // sigma = 0: everything collapses to zero
  AsymmetryProbe zero_probe{8, 0.0, 0.1, 100, 1};
  CHECK(monte_carlo_asymmetry(zero_probe).mean == 0.0);

  // eta = 0: Omega = -y2 x2^T with exact expectation 2 d (d-1) sigma^4
  AsymmetryProbe eta0{16, 1.0, 0.0, 20000, 2};
  const AsymmetryEstimate est = monte_carlo_asymmetry(eta0);
  const double expected = 2.0 * 16.0 * 15.0;
  CHECK(std::abs(est.mean - expected) < 4.0 * est.std_err);
}

TEST_CASE("monte carlo asymmetry scales as d^3 in the eta-dominant regime") {
  AsymmetryProbe a{16, 1.0, 10.0, 20000, 3};
  AsymmetryProbe b{32, 1.0, 10.0, 20000, 4};
  const double ra = monte_carlo_asymmetry(a).mean;
  const double rb = monte_carlo_asymmetry(b).mean;
  const double ratio = rb / ra;
  CHECK(ratio > 8.0 * 0.85);
  CHECK(ratio < 8.0 * 1.15);
}

TEST_CASE("asymmetry bounds formulas at the reference point") {
  AsymmetryProbe probe{64, 1.0, 0.1, 1, 5};
  const AsymmetryEstimate est = monte_carlo_asymmetry(probe);
  CHECK(est.lower_bound == Catch::Approx(18513.92).margin(1e-9));
  CHECK(est.upper_bound == Catch::Approx(28016.64).margin(1e-9));
}

TEST_CASE("layer distance") {
  const Matrix a = Matrix::identity(3);
  CHECK(layer_distance({a, a, a}) == 0.0);
  CHECK(layer_distance({Matrix{{2.0}}, Matrix{{4.0}}}) == 2.0);
  CHECK_THROWS_AS(layer_distance({a}), ShapeError);
  CHECK_THROWS_AS(layer_distance({a, Matrix(2, 3)}), ShapeError);

  // pairwise loop oracle on a random 4-layer set
  Rng rng(9);
  std::vector<Matrix> layers;
  for (int i = 0; i < 4; ++i) layers.push_back(gaussian_matrix(rng, 5, 5, 0.0, 1.0));
  double want = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < 25; ++t)
        s += std::abs(layers[i].data()[t] - layers[j].data()[t]);
      want += s / 25.0;
    }
  want /= 6.0;
  CHECK(layer_distance(layers) == Catch::Approx(want).margin(1e-14));
}

TEST_CASE("symmetry is preserved exactly under noise-free full-batch GD") {
  SymmetryConfig cfg;
  cfg.noise_std = 0.0;
  cfg.epochs = 20;
  cfg.n_train = 200;
  cfg.n_test = 50;
  const ExperimentReport rep = symmetry_experiment(OptimizerMode::GD, 11, cfg);
  CHECK(rep.summary("final_layer_distance") < 1e-9);
}

TEST_CASE("rank experiment: identity padding breaks the constraint, zero padding cannot") {
  RankConfig cfg;
  cfg.d0 = 4;
  cfg.dh = 16;
  cfg.dl = 4;
  cfg.steps = 6;

  const ExperimentReport id_rep = rank_experiment(RankInit::IDInit, cfg, 21);
  const auto& id_trace = id_rep.trace("rank");
  CHECK(id_trace.front().second == 0.0);  // before any update
  CHECK(id_rep.summary("max_rank") >= 4.0);
  // after the second update the rank exceeds the zero-padding ceiling
  CHECK(id_trace[2].second >= 4.0);

  const ExperimentReport pz_rep =
      rank_experiment(RankInit::PartialIdentityZeroPad, cfg, 21);
  for (const auto& [step, rank] : pz_rep.trace("rank")) CHECK(rank <= 4.0);

  const ExperimentReport h_rep = rank_experiment(RankInit::Hadamard, cfg, 21);
  CHECK(h_rep.summary("max_rank") >= 4.0);
}

TEST_CASE("dead neuron accounting") {
  DeadNeuronConfig cfg;
  cfg.steps = 0;
  const ExperimentReport none =
      dead_neuron_experiment(DeadNeuronVariant::IdizWeightZeroGate, cfg, 31);
  CHECK(none.summary("dead_fraction") == 1.0);

  cfg.steps = 50;
  const ExperimentReport zero =
      dead_neuron_experiment(DeadNeuronVariant::ZeroWeightZeroGate, cfg, 31);
  CHECK(zero.summary("dead_fraction") == 1.0);
  CHECK(zero.summary("gate") == 0.0);
}

TEST_CASE("toy dynamics") {
  SECTION("zero learning rate keeps the trajectory constant") {
    ToyConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.steps = 100;
    const ToyResult res = toy_dynamics(cfg);
    CHECK(res.final_w1 == cfg.w1_0);
    CHECK(res.final_w2 == cfg.w2_0);
  }

  SECTION("residual run converges to 50^(1/5) - 1") {
    ToyConfig cfg;  // r = 1, start (1, 0)
    const ToyResult res = toy_dynamics(cfg);
    REQUIRE_FALSE(res.diverged);
    CHECK(std::abs(res.final_product - (std::pow(50.0, 0.2) - 1.0)) < 1e-2);
    CHECK(res.min_dist_to_saddle > 0.05);
  }

  SECTION("residual run from (0, 1) also avoids the poor region") {
    ToyConfig cfg;
    cfg.w1_0 = 0.0;
    cfg.w2_0 = 1.0;
    const ToyResult res = toy_dynamics(cfg);
    REQUIRE_FALSE(res.diverged);
    CHECK(std::abs(res.final_product - (std::pow(50.0, 0.2) - 1.0)) < 1e-2);
    CHECK(res.min_dist_to_saddle > 0.05);
  }

  SECTION("non-residual run converges to 50^(1/5)") {
    ToyConfig cfg;
    cfg.r = 0;
    cfg.w1_0 = 1.0;
    cfg.w2_0 = 1.0;
    const ToyResult res = toy_dynamics(cfg);
    REQUIRE_FALSE(res.diverged);
    CHECK(std::abs(res.final_product - std::pow(50.0, 0.2)) < 1e-2);
  }
}

TEST_CASE("variance probe smoke: identity scheme is stable on ResFC") {
  VarianceConfig cfg;
  cfg.rounds = 20;
  const ExperimentReport rep = variance_probe(NetKind::ResFC, InitMethod::IDI, cfg, 41);
  const double ratio = rep.summary("std_ratio");
  CHECK(ratio > 0.5);
  CHECK(ratio < 2.0);
}

TEST_CASE("shallow stems do not explode for any method") {
  LongStemConfig cfg;
  cfg.stem_depth = 1;
  cfg.epochs = 5;
  for (InitMethod init : {InitMethod::IDI, InitMethod::Kaiming}) {
    const ExperimentReport rep = long_stem_probe(init, cfg, 43);
    CHECK(rep.summary("exploded") == 0.0);
  }
}

TEST_CASE("isometry probe: small identity-scheme stack sits on the critical line") {
  IsometryConfig cfg;
  cfg.width = 16;
  cfg.blocks = 8;
  const ExperimentReport rep = isometry_probe(InitMethod::IDI, cfg, 47);
  CHECK(std::abs(rep.summary("chi") - 1.0) < 1e-3);
}

TEST_CASE("experiment reports serialize deterministically") {
  ToyConfig cfg;
  cfg.steps = 500;
  const std::string a = toy_report(cfg, 7).to_json().dump();
  const std::string b = toy_report(cfg, 7).to_json().dump();
  CHECK(a == b);
}

TEST_CASE("experiment report enforces monotone traces and writes files") {
  ExperimentReport rep("demo", 1);
  rep.add_point("metric", 0, 1.0);
  rep.add_point("metric", 5, 2.0);
  CHECK_THROWS_AS(rep.add_point("metric", 3, 9.0), ShapeError);
  rep.set_summary("answer", 42.0);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "idinit-report-test";
  fs::remove_all(dir);
  const auto files = rep.write_files(dir.string(), "both");
  CHECK(files.size() == 3);  // json, metric csv, summary csv
  for (const auto& f : files) CHECK(fs::exists(f));
  fs::remove_all(dir);
}
