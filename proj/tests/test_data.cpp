#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "idinit/data.hpp"

using namespace idinit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("idinit-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("idx loader round-trips a crafted fixture") {
  TempDir tmp;
  const std::size_t rows = 28, cols = 28;
  std::vector<std::uint8_t> pixels(2 * rows * cols, 0);
  pixels[0] = 255;  // image 0, pixel (0,0)
  pixels[rows * cols + 5] = 128;
  write_idx_images(tmp.file("imgs"), rows, cols, pixels);
  write_idx_labels(tmp.file("labs"), {7, 2});

  const Dataset ds = load_mnist_idx(tmp.file("imgs"), tmp.file("labs"));
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.inputs.cols() == rows * cols);
  CHECK(ds.labels == std::vector<int>{7, 2});

  // scaling rule: 255 -> 1.0 before mean subtraction
  CHECK(ds.inputs(0, 0) + ds.norm.mean == Catch::Approx(1.0).margin(1e-12));
  CHECK(ds.inputs(1, 5) + ds.norm.mean == Catch::Approx(128.0 / 255.0).margin(1e-12));

  // normalization metadata inverts to raw bytes exactly
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.inputs.cols(); ++j)
      REQUIRE(ds.raw_pixel(i, j) == pixels[i * rows * cols + j]);

  // one-hot on demand
  const Matrix oh = ds.one_hot();
  CHECK(oh(0, 7) == 1.0);
  CHECK(oh(1, 2) == 1.0);
  CHECK(mean_of(oh) == Catch::Approx(2.0 / 20.0).margin(1e-12));
}

TEST_CASE("idx loader validates magics and sizes") {
  TempDir tmp;
  std::vector<std::uint8_t> pixels(28 * 28, 0);
  write_idx_images(tmp.file("imgs"), 28, 28, pixels);
  write_idx_labels(tmp.file("labs"), {1});

  // a labels file with the images magic is rejected
  CHECK_THROWS_MATCHES(load_mnist_idx(tmp.file("imgs"), tmp.file("imgs")), FormatError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("wrong magic")));
  CHECK_THROWS_MATCHES(load_mnist_idx(tmp.file("labs"), tmp.file("labs")), FormatError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("0x00000801")));

  // count mismatch
  write_idx_labels(tmp.file("labs2"), {1, 2});
  CHECK_THROWS_MATCHES(load_mnist_idx(tmp.file("imgs"), tmp.file("labs2")), FormatError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("!= label count")));

  // truncated pixel payload names the offset
  {
    std::ofstream os(tmp.file("short"), std::ios::binary);
    const unsigned char header[16] = {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28};
    os.write(reinterpret_cast<const char*>(header), 16);
    os.write(reinterpret_cast<const char*>(pixels.data()), 100);
  }
  CHECK_THROWS_MATCHES(read_idx_images(tmp.file("short")), FormatError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("truncated pixel data")));
}

TEST_CASE("test split reuses the training mean") {
  TempDir tmp;
  std::vector<std::uint8_t> train_px(4, 200), test_px(4, 10);
  write_idx_images(tmp.file("tri"), 2, 2, train_px);
  write_idx_labels(tmp.file("trl"), {0});
  write_idx_images(tmp.file("tei"), 2, 2, test_px);
  write_idx_labels(tmp.file("tel"), {1});

  const Dataset train = load_mnist_idx(tmp.file("tri"), tmp.file("trl"));
  const Dataset test = load_mnist_idx(tmp.file("tei"), tmp.file("tel"), train.norm.mean);
  CHECK(train.norm.mean == Catch::Approx(200.0 / 255.0).margin(1e-12));
  CHECK(test.norm.mean == train.norm.mean);
  CHECK(test.inputs(0, 0) ==
        Catch::Approx(10.0 / 255.0 - 200.0 / 255.0).margin(1e-12));
}

TEST_CASE("synthetic linear-map datasets") {
  // zero noise, identity map: Y = X exactly
  const Dataset a = synth_linear_map(16, 4, Matrix::identity(4), 0.0, 5);
  CHECK(a.inputs == a.targets);

  // map = -I, noise 1e-2: mean of (Y + X)^2 matches the noise variance
  const std::size_t n = 2000, d = 10;
  const Dataset b = synth_linear_map(n, d, scale(Matrix::identity(d), -1.0), 1e-2, 7);
  double s = 0.0;
  for (std::size_t i = 0; i < b.inputs.size(); ++i) {
    const double r = b.targets.data()[i] + b.inputs.data()[i];
    s += r * r;
  }
  const double mean_sq = s / static_cast<double>(n * d);
  const double se = 1e-4 * std::sqrt(2.0 / static_cast<double>(n * d));
  CHECK(std::abs(mean_sq - 1e-4) < 4.0 * se);

  // fixed seed reproducibility
  const Dataset c1 = synth_linear_map(8, 3, Matrix::identity(3), 0.5, 99);
  const Dataset c2 = synth_linear_map(8, 3, Matrix::identity(3), 0.5, 99);
  CHECK(c1.inputs == c2.inputs);
  CHECK(c1.targets == c2.targets);
}

TEST_CASE("independent batches have full rank") {
  Rng rng(11);
  const Matrix full = independent_batch(8, 8, rng);
  CHECK(numerical_rank(full) == 8);

  const Matrix single = independent_batch(5, 1, rng);
  CHECK(numerical_rank(single) == 1);

  Rng r2(13);
  CHECK_THROWS_AS(independent_batch(3, 4, r2), ShapeError);
}

TEST_CASE("independent batch re-draws after an injected deficient draw") {
  Rng rng(17);
  std::size_t calls = 0;
  const Matrix got = independent_batch_with(
      [&](std::size_t attempt) {
        ++calls;
        if (attempt == 0) {
          Matrix degenerate(3, 6);
          for (std::size_t j = 0; j < 6; ++j) {
            degenerate(0, j) = 1.0;
            degenerate(1, j) = 2.0;  // row 1 = 2 * row 0: rank deficient
            degenerate(2, j) = rng.normal(0.0, 1.0);
          }
          return degenerate;
        }
        return gaussian_matrix(rng, 3, 6, 0.0, 1.0);
      },
      6, 3);
  CHECK(calls == 2);
  CHECK(numerical_rank(got) == 3);
}
