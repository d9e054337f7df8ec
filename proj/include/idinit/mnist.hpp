#pragma once

#include <filesystem>
#include <string>

#include "idinit/analysis.hpp"
#include "idinit/data.hpp"
#include "idinit/init.hpp"
#include "idinit/net.hpp"
#include "idinit/report.hpp"

namespace idinit {

struct MnistConfig {
  std::string net = "linear5relu";  // linear5relu | linear5tanh
  InitMethod init = InitMethod::IDI;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t train_limit = 10000;  // 0 = full training set
  std::size_t hidden = 512;
  std::string dir;  // empty = IDINIT_DATA_DIR or ./data
};

struct MnistPair {
  Dataset train, test;
};

inline bool mnist_files_present(const std::string& dir) {
  namespace fs = std::filesystem;
  for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                        "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"})
    if (!fs::exists(fs::path(dir) / f)) return false;
  return true;
}

// Standard file names under dir; the test set reuses the training mean.
inline MnistPair load_mnist(const std::string& dir, std::size_t train_limit = 0) {
  namespace fs = std::filesystem;
  MnistPair pair;
  pair.train = load_mnist_idx((fs::path(dir) / "train-images-idx3-ubyte").string(),
                              (fs::path(dir) / "train-labels-idx1-ubyte").string(), -1.0,
                              train_limit);
  pair.train.split = "train";
  pair.test = load_mnist_idx((fs::path(dir) / "t10k-images-idx3-ubyte").string(),
                             (fs::path(dir) / "t10k-labels-idx1-ubyte").string(),
                             pair.train.norm.mean, 0);
  pair.test.split = "test";
  return pair;
}

// Linear-5 on MNIST: 784 -> 512 x4 -> 10, trained with SGD + momentum and a
// cosine learning-rate schedule.
inline ExperimentReport mnist_experiment(const MnistConfig& cfg, std::uint64_t seed) {
  ExperimentReport report("mnist", seed);
  report.config()["net"] = cfg.net;
  report.config()["init"] = to_string(cfg.init);
  report.config()["epochs"] = cfg.epochs;
  report.config()["batch_size"] = cfg.batch_size;
  report.config()["learning_rate"] = cfg.learning_rate;
  report.config()["momentum"] = cfg.momentum;
  report.config()["weight_decay"] = cfg.weight_decay;
  report.config()["train_limit"] = cfg.train_limit;

  const std::string dir = cfg.dir.empty() ? data_dir() : cfg.dir;
  MnistPair data = load_mnist(dir, cfg.train_limit);

  const Activation act =
      cfg.net == "linear5tanh" ? Activation::Tanh : Activation::Relu;
  const std::size_t d = data.train.inputs.cols();
  NetworkSpec net = NetworkSpec::mlp({d, cfg.hidden, cfg.hidden, cfg.hidden, cfg.hidden, 10},
                                     act);
  ParamSet params = init_network(net, InitPolicy::of(cfg.init, seed));

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = cfg.momentum;
  tc.weight_decay = cfg.weight_decay;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.loss = LossKind::SoftmaxCrossEntropy;
  tc.mode = TrainMode::MinibatchSGD;
  tc.schedule = LrSchedule::Cosine;
  tc.seed = seed;

  TrainDataset td{data.train.inputs, Matrix(), data.train.labels, true};

  TrainResult tr = train(net, params, td, tc, nullptr,
                         [&](const EpochStats& es, const ParamSet& p) {
                           report.add_point("train_loss",
                                            static_cast<std::int64_t>(es.epoch) + 1,
                                            es.train_loss);
                           report.add_point("train_accuracy",
                                            static_cast<std::int64_t>(es.epoch) + 1,
                                            es.train_accuracy);
                           const double acc = evaluate_accuracy(net, p, data.test.inputs,
                                                                data.test.labels);
                           report.add_point("test_accuracy",
                                            static_cast<std::int64_t>(es.epoch) + 1, acc);
                         });
  report.set_diverged(tr.diverged);
  if (report.has_trace("test_accuracy")) {
    const auto& pts = report.trace("test_accuracy");
    double best = 0.0;
    for (const auto& [s, v] : pts) best = std::max(best, v);
    report.set_summary("final_test_accuracy", pts.back().second);
    report.set_summary("best_test_accuracy", best);
  }
  report.set_summary("train_size", static_cast<double>(data.train.size()));
  report.set_summary("test_size", static_cast<double>(data.test.size()));
  return report;
}

}  // namespace idinit
