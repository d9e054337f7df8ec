#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "idinit/matrix.hpp"
#include "idinit/rng.hpp"
#include "idinit/svd.hpp"

namespace idinit {

// Inputs with either dense targets (regression) or labels (classification).
struct Dataset {
  Matrix inputs;             // n x d
  Matrix targets;            // n x k, regression targets or one-hot cache
  std::vector<int> labels;   // class labels when classification
  int num_classes = 0;
  std::string split;         // "train" / "test"

  // Normalization applied to raw pixels: v = raw * scale - mean.
  struct Normalization {
    double scale = 1.0;
    double mean = 0.0;
  } norm;

  std::size_t size() const { return inputs.rows(); }

  Matrix one_hot() const {
    Matrix oh(labels.size(), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) oh(i, labels[i]) = 1.0;
    return oh;
  }

  // Recover the raw pixel byte for entry (i, j); exact because the
  // normalization error is far below half a pixel step.
  std::uint8_t raw_pixel(std::size_t i, std::size_t j) const {
    const double raw = (inputs(i, j) + norm.mean) / norm.scale;
    return static_cast<std::uint8_t>(raw + 0.5);
  }
};

namespace detail {

inline std::uint32_t read_u32_be(std::istream& is, const char* field, std::size_t offset,
                                 const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is)
    throw FormatError(path + ": truncated " + field + " at offset " +
                      std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

struct RawIdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;
};

inline RawIdxImages read_idx_images(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open");
  const std::uint32_t magic = detail::read_u32_be(is, "magic", 0, path);
  if (magic != 0x00000803) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", magic);
    throw FormatError(path + ": wrong magic " + buf +
                      " at offset 0 (expected 0x00000803 for images)");
  }
  RawIdxImages img;
  img.count = detail::read_u32_be(is, "count", 4, path);
  img.rows = detail::read_u32_be(is, "rows", 8, path);
  img.cols = detail::read_u32_be(is, "cols", 12, path);
  img.pixels.resize(img.count * img.rows * img.cols);
  is.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(is.gcount()) != img.pixels.size())
    throw FormatError(path + ": truncated pixel data at offset " +
                      std::to_string(16 + is.gcount()) + " (expected " +
                      std::to_string(img.pixels.size()) + " bytes)");
  return img;
}

inline std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(path + ": cannot open");
  const std::uint32_t magic = detail::read_u32_be(is, "magic", 0, path);
  if (magic != 0x00000801) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", magic);
    throw FormatError(path + ": wrong magic " + buf +
                      " at offset 0 (expected 0x00000801 for labels)");
  }
  const std::size_t count = detail::read_u32_be(is, "count", 4, path);
  std::vector<std::uint8_t> labels(count);
  is.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(is.gcount()) != count)
    throw FormatError(path + ": truncated label data at offset " +
                      std::to_string(8 + is.gcount()) + " (expected " +
                      std::to_string(count) + " bytes)");
  return labels;
}

inline void write_idx_images(const std::string& path, std::size_t rows, std::size_t cols,
                             const std::vector<std::uint8_t>& pixels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(path + ": cannot open for write");
  const std::size_t count = pixels.size() / (rows * cols);
  const std::uint32_t header[4] = {0x00000803u, static_cast<std::uint32_t>(count),
                                   static_cast<std::uint32_t>(rows),
                                   static_cast<std::uint32_t>(cols)};
  for (std::uint32_t v : header) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
}

inline void write_idx_labels(const std::string& path,
                             const std::vector<std::uint8_t>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(path + ": cannot open for write");
  const std::uint32_t header[2] = {0x00000801u, static_cast<std::uint32_t>(labels.size())};
  for (std::uint32_t v : header) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  os.write(reinterpret_cast<const char*>(labels.data()),
           static_cast<std::streamsize>(labels.size()));
}

// Load one IDX image/label pair. Pixels are scaled by 1/255 and centered by
// a global scalar mean: the mean is computed from this file when center_mean
// is negative (training set), otherwise the given value is reused (test set
// uses the training mean).
inline Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                              double center_mean = -1.0, std::size_t limit = 0) {
  RawIdxImages img = read_idx_images(images_path);
  std::vector<std::uint8_t> labels = read_idx_labels(labels_path);
  if (img.count != labels.size())
    throw FormatError(images_path + ": image count " + std::to_string(img.count) +
                      " != label count " + std::to_string(labels.size()));

  std::size_t n = img.count;
  if (limit > 0 && limit < n) n = limit;
  const std::size_t dim = img.rows * img.cols;

  Dataset ds;
  ds.norm.scale = 1.0 / 255.0;
  if (center_mean < 0.0) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n * dim; ++i) sum += img.pixels[i] * ds.norm.scale;
    ds.norm.mean = sum / static_cast<double>(n * dim);
  } else {
    ds.norm.mean = center_mean;
  }

  ds.inputs = Matrix(n, dim);
  for (std::size_t i = 0; i < n * dim; ++i)
    ds.inputs.data()[i] = img.pixels[i] * ds.norm.scale - ds.norm.mean;
  ds.labels.assign(labels.begin(), labels.begin() + n);
  ds.num_classes = 10;
  return ds;
}

// X ~ N(0, I); Y = map X + xi with xi ~ N(0, noise_std^2). Inputs/targets
// are row-major samples, so Y_row = X_row map^T + xi.
inline Dataset synth_linear_map(std::size_t n, std::size_t d, const Matrix& map,
                                double noise_std, std::uint64_t seed) {
  if (map.cols() != d) throw ShapeError("synth_linear_map: map columns != input dim");
  Rng rng(seed);
  Dataset ds;
  ds.inputs = gaussian_matrix(rng, n, d, 0.0, 1.0);
  ds.targets = matmul_bt(ds.inputs, map);
  if (noise_std > 0.0)
    for (double& v : ds.targets.data()) v += rng.normal(0.0, noise_std);
  return ds;
}

// Batch of n <= d linearly independent d-dimensional vectors (rows).
// Gaussian draws have full rank almost surely; the rank check re-draws on
// the measure-zero failure path. draw(k) supplies the k-th candidate batch.
inline Matrix independent_batch_with(const std::function<Matrix(std::size_t)>& draw,
                                     std::size_t d, std::size_t n) {
  if (n > d) throw ShapeError("independent_batch: n must be <= d");
  for (std::size_t attempt = 0;; ++attempt) {
    Matrix batch = draw(attempt);
    if (batch.rows() != n || batch.cols() != d)
      throw ShapeError("independent_batch: draw returned wrong shape");
    if (numerical_rank(batch) == n) return batch;
    if (attempt > 16)
      throw FormatError("independent_batch: could not draw an independent batch");
  }
}

inline Matrix independent_batch(std::size_t d, std::size_t n, Rng& rng) {
  return independent_batch_with(
      [&rng, d, n](std::size_t) { return gaussian_matrix(rng, n, d, 0.0, 1.0); }, d, n);
}

// Dataset cache directory: $IDINIT_DATA_DIR or ./data.
inline std::string data_dir() {
  const char* env = std::getenv("IDINIT_DATA_DIR");
  return env && *env ? std::string(env) : std::string("./data");
}

}  // namespace idinit
