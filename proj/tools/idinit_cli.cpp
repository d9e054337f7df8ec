// Command-line front end: dump initializer outputs, run the verification
// suites, and execute the named experiments with CSV/JSON reports.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "idinit/idinit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitUsage = 2;

std::string timestamp_tag() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", std::localtime(&t));
  return buf;
}

std::string default_out_dir(const std::string& experiment, std::uint64_t seed) {
  return "./runs/" + experiment + "-" + std::to_string(seed) + "-" + timestamp_tag();
}

idinit::InitMethod parse_method(const std::string& name) {
  using idinit::InitMethod;
  static const std::map<std::string, InitMethod> table = {
      {"idi", InitMethod::IDI},
      {"idinit", InitMethod::IDI},
      {"idiz", InitMethod::IDIZ},
      {"idic", InitMethod::IDIC},
      {"idizc", InitMethod::IDIZC},
      {"channel-maintain", InitMethod::ChannelMaintain},
      {"hadamard", InitMethod::Hadamard},
      {"xavier", InitMethod::Xavier},
      {"kaiming", InitMethod::Kaiming},
      {"orthogonal", InitMethod::Orthogonal},
      {"zero", InitMethod::Zero},
      {"partial-identity", InitMethod::PartialIdentityZeroPad},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw idinit::UnsupportedError("unknown method: " + name);
  return it->second;
}

void print_summary(const idinit::ExperimentReport& report) {
  std::printf("%s seed=%llu%s\n", report.name().c_str(),
              static_cast<unsigned long long>(report.seed()),
              report.diverged() ? " [DIVERGED]" : "");
  for (const auto& [k, v] : report.summaries()) std::printf("  %s = %.17g\n", k.c_str(), v);
}

void write_report(const idinit::ExperimentReport& report, const std::string& dir,
                  const std::string& format) {
  const auto files = report.write_files(dir, format);
  print_summary(report);
  for (const auto& f : files) std::printf("  wrote %s\n", f.c_str());
}

// Option values assembled from defaults, then the config file, then
// explicitly-passed flags.
struct OptionBag {
  json values;

  bool has(const std::string& key) const { return values.contains(key); }
  double num(const std::string& key) const { return values.at(key).get<double>(); }
  std::uint64_t uint(const std::string& key) const {
    return values.at(key).get<std::uint64_t>();
  }
  std::string str(const std::string& key) const {
    return values.at(key).get<std::string>();
  }
};

}  // namespace

int run_dump_init(const std::string& method_name, OptionBag& opt, const std::string& out_dir,
                  const std::string& format) {
  using namespace idinit;
  const InitMethod method = parse_method(method_name);
  const double tau = opt.num("tau");
  const double eps = opt.num("eps");
  const double loose = opt.num("loose");
  const std::uint64_t seed = opt.uint("seed");
  Rng rng(seed);

  Matrix m;
  json sidecar;
  sidecar["method"] = method_name;
  sidecar["tau"] = tau;
  sidecar["epsilon"] = eps;
  sidecar["loose_eps"] = loose;
  sidecar["seed"] = seed;

  const bool conv = method == InitMethod::IDIC || method == InitMethod::IDIZC ||
                    method == InitMethod::ChannelMaintain;
  if (conv) {
    const std::size_t k = opt.uint("k"), c_in = opt.uint("cin"), c_out = opt.uint("cout");
    ConvKernel kernel;
    if (method == InitMethod::IDIC)
      kernel = idic(k, c_in, c_out, tau, loose, &rng);
    else if (method == InitMethod::IDIZC)
      kernel = idizc(k, c_in, c_out, eps);
    else
      kernel = channel_maintain(k, c_in, c_out, tau);
    m = kernel.to_matrix();
    sidecar["kernel"] = {{"k_h", k}, {"k_w", k}, {"c_in", c_in}, {"c_out", c_out}};
    sidecar["layout"] =
        "row = output channel; column = (row offset, col offset, input channel), "
        "input channel fastest";
  } else if (method == InitMethod::Hadamard && opt.has("n")) {
    const std::size_t n = opt.uint("n");
    m = scale(hadamard(n), 1.0 / std::sqrt(static_cast<double>(n)));
    sidecar["n"] = n;
  } else {
    const std::size_t d_out = opt.uint("dout"), d_in = opt.uint("din");
    if (method == InitMethod::IDI)
      m = idi(d_out, d_in, tau, loose, &rng);
    else if (method == InitMethod::IDIZ)
      m = idiz(d_out, d_in, eps);
    else
      m = baseline(InitSpec{method, tau, eps, loose, seed}, d_out, d_in);
    sidecar["d_out"] = d_out;
    sidecar["d_in"] = d_in;
  }
  sidecar["rows"] = m.rows();
  sidecar["cols"] = m.cols();

  fs::create_directories(out_dir);
  const std::string base = (fs::path(out_dir) / method_name).string();
  std::vector<std::string> written;
  if (format == "csv" || format == "both") {
    write_csv(m, base + ".csv");
    written.push_back(base + ".csv");
  }
  if (format == "binary" || format == "both") {
    write_binary(m, base + ".bin");
    written.push_back(base + ".bin");
  }
  {
    std::ofstream os(base + ".json");
    os << sidecar.dump(2) << '\n';
    written.push_back(base + ".json");
  }
  std::printf("dump-init %s: %zux%zu\n", method_name.c_str(), m.rows(), m.cols());
  for (const auto& f : written) std::printf("  wrote %s\n", f.c_str());
  return kExitOk;
}

int run_verify(const std::string& suite, bool list_only, std::uint64_t seed,
               const std::string& out_path) {
  using namespace idinit;
  if (suite != "all" && suite != "initializers" && suite != "gradients" &&
      suite != "isometry") {
    std::fprintf(stderr, "error: unknown suite '%s'\n", suite.c_str());
    return kExitUsage;
  }
  if (list_only) {
    for (const auto& name : verify_check_names(suite)) std::printf("%s\n", name.c_str());
    return kExitOk;
  }
  const std::vector<CheckResult> results = verify_suite(suite, seed);
  json verdicts = json::array();
  bool all_ok = true;
  for (const CheckResult& r : results) {
    verdicts.push_back({{"suite", r.suite},
                        {"check", r.name},
                        {"passed", r.passed},
                        {"detail", r.detail}});
    all_ok = all_ok && r.passed;
    std::printf("[%s] %s/%s: %s\n", r.passed ? "PASS" : "FAIL", r.suite.c_str(),
                r.name.c_str(), r.detail.c_str());
  }
  json doc = {{"suite", suite}, {"seed", seed}, {"passed", all_ok}, {"checks", verdicts}};
  if (!out_path.empty()) {
    fs::create_directories(fs::path(out_path).parent_path().empty()
                               ? "."
                               : fs::path(out_path).parent_path().string());
    std::ofstream os(out_path);
    os << doc.dump(2) << '\n';
  } else {
    std::cout << doc.dump(2) << '\n';
  }
  std::printf("verify %s: %s\n", suite.c_str(), all_ok ? "PASS" : "FAIL");
  return all_ok ? kExitOk : kExitVerifyFailure;
}

int run_experiment(const std::string& name, OptionBag& opt, std::uint64_t seed,
                   std::string out_dir, const std::string& format) {
  using namespace idinit;
  if (out_dir.empty()) out_dir = default_out_dir(name, seed);

  if (name == "symmetry") {
    SymmetryConfig cfg;
    if (opt.has("epochs")) cfg.epochs = opt.uint("epochs");
    if (opt.has("lr")) cfg.learning_rate = opt.num("lr");
    if (opt.has("momentum")) cfg.momentum = opt.num("momentum");
    if (opt.has("batch")) cfg.batch_size = opt.uint("batch");
    if (opt.has("noise")) cfg.noise_std = opt.num("noise");
    const std::string mode = opt.has("mode") ? opt.str("mode") : "all";
    std::vector<OptimizerMode> modes;
    if (mode == "all")
      modes = {OptimizerMode::GD, OptimizerMode::GDMomentum, OptimizerMode::SGD,
               OptimizerMode::SGDMomentum};
    else if (mode == "gd")
      modes = {OptimizerMode::GD};
    else if (mode == "gd+momentum")
      modes = {OptimizerMode::GDMomentum};
    else if (mode == "sgd")
      modes = {OptimizerMode::SGD};
    else if (mode == "sgd+momentum")
      modes = {OptimizerMode::SGDMomentum};
    else {
      std::fprintf(stderr, "error: unknown mode '%s'\n", mode.c_str());
      return kExitUsage;
    }
    for (OptimizerMode m : modes) {
      ExperimentReport rep = symmetry_experiment(m, seed, cfg);
      write_report(rep, (fs::path(out_dir) / to_string(m)).string(), format);
    }
    return kExitOk;
  }

  if (name == "rank") {
    RankConfig cfg;
    if (opt.has("d0")) cfg.d0 = opt.uint("d0");
    if (opt.has("dh")) cfg.dh = opt.uint("dh");
    if (opt.has("dl")) cfg.dl = opt.uint("dl");
    if (opt.has("steps")) cfg.steps = opt.uint("steps");
    if (opt.has("lr")) cfg.learning_rate = opt.num("lr");
    RankInit mode = RankInit::IDInit;
    if (opt.has("init")) {
      const std::string m = opt.str("init");
      if (m == "idinit")
        mode = RankInit::IDInit;
      else if (m == "zero-pad" || m == "partial-identity")
        mode = RankInit::PartialIdentityZeroPad;
      else if (m == "hadamard")
        mode = RankInit::Hadamard;
      else {
        std::fprintf(stderr, "error: unknown rank init '%s'\n", m.c_str());
        return kExitUsage;
      }
    }
    write_report(rank_experiment(mode, cfg, seed), out_dir, format);
    return kExitOk;
  }

  if (name == "isometry") {
    IsometryConfig cfg;
    if (opt.has("blocks")) cfg.blocks = opt.uint("blocks");
    if (opt.has("width")) cfg.width = opt.uint("width");
    const InitMethod init = opt.has("init") ? parse_method(opt.str("init"))
                                            : InitMethod::IDI;
    write_report(isometry_probe(init, cfg, seed), out_dir, format);
    return kExitOk;
  }

  if (name == "variance") {
    VarianceConfig cfg;
    if (opt.has("rounds")) cfg.rounds = opt.uint("rounds");
    if (opt.has("noise")) cfg.noise_std = opt.num("noise");
    NetKind kind = NetKind::ResFC;
    if (opt.has("net")) {
      const std::string k = opt.str("net");
      if (k == "fc")
        kind = NetKind::FC;
      else if (k == "resfc")
        kind = NetKind::ResFC;
      else if (k == "conv")
        kind = NetKind::Conv;
      else if (k == "resconv")
        kind = NetKind::ResConv;
      else {
        std::fprintf(stderr, "error: unknown net kind '%s'\n", k.c_str());
        return kExitUsage;
      }
    }
    const InitMethod init = opt.has("init") ? parse_method(opt.str("init"))
                                            : InitMethod::IDI;
    write_report(variance_probe(kind, init, cfg, seed), out_dir, format);
    return kExitOk;
  }

  if (name == "deadneuron") {
    DeadNeuronConfig cfg;
    if (opt.has("steps")) cfg.steps = opt.uint("steps");
    if (opt.has("lr")) cfg.learning_rate = opt.num("lr");
    DeadNeuronVariant variant = DeadNeuronVariant::IdizWeightZeroGate;
    if (opt.has("variant")) {
      const std::string v = opt.str("variant");
      if (v == "zero")
        variant = DeadNeuronVariant::ZeroWeightZeroGate;
      else if (v == "idiz")
        variant = DeadNeuronVariant::IdizWeightZeroGate;
      else {
        std::fprintf(stderr, "error: unknown variant '%s'\n", v.c_str());
        return kExitUsage;
      }
    }
    write_report(dead_neuron_experiment(variant, cfg, seed), out_dir, format);
    return kExitOk;
  }

  if (name == "toy") {
    ToyConfig cfg;
    if (opt.has("r")) cfg.r = static_cast<int>(opt.uint("r"));
    if (opt.has("depth")) cfg.depth = opt.uint("depth");
    if (opt.has("lr")) cfg.learning_rate = opt.num("lr");
    if (opt.has("w1")) cfg.w1_0 = opt.num("w1");
    if (opt.has("w2")) cfg.w2_0 = opt.num("w2");
    if (opt.has("steps")) cfg.steps = opt.uint("steps");
    if (opt.has("scale")) cfg.target_scale = opt.num("scale");
    if (!opt.has("w1") && !opt.has("w2") && cfg.r == 0) {
      cfg.w1_0 = 1.0;  // non-residual default start
      cfg.w2_0 = 1.0;
    }
    write_report(toy_report(cfg, seed), out_dir, format);
    return kExitOk;
  }

  if (name == "longstem") {
    LongStemConfig cfg;
    if (opt.has("stem-depth")) cfg.stem_depth = opt.uint("stem-depth");
    if (opt.has("epochs")) cfg.epochs = opt.uint("epochs");
    if (opt.has("lr")) cfg.learning_rate = opt.num("lr");
    const InitMethod init = opt.has("init") ? parse_method(opt.str("init"))
                                            : InitMethod::IDI;
    write_report(long_stem_probe(init, cfg, seed), out_dir, format);
    return kExitOk;
  }

  if (name == "mnist") {
    MnistConfig cfg;
    if (opt.has("net")) cfg.net = opt.str("net");
    if (cfg.net != "linear5relu" && cfg.net != "linear5tanh") {
      std::fprintf(stderr, "error: unknown mnist net '%s'\n", cfg.net.c_str());
      return kExitUsage;
    }
    if (opt.has("init")) cfg.init = parse_method(opt.str("init"));
    if (opt.has("epochs")) cfg.epochs = opt.uint("epochs");
    if (opt.has("batch")) cfg.batch_size = opt.uint("batch");
    if (opt.has("lr")) cfg.learning_rate = opt.num("lr");
    if (opt.has("momentum")) cfg.momentum = opt.num("momentum");
    if (opt.has("wd")) cfg.weight_decay = opt.num("wd");
    if (opt.has("limit")) cfg.train_limit = opt.uint("limit");
    if (opt.has("data-dir")) cfg.dir = opt.str("data-dir");
    write_report(mnist_experiment(cfg, seed), out_dir, format);
    return kExitOk;
  }

  if (name == "asymmetry") {
    AsymmetryProbe probe;
    probe.seed = seed;
    if (opt.has("d")) probe.d = opt.uint("d");
    if (opt.has("sigma")) probe.sigma = opt.num("sigma");
    if (opt.has("eta")) probe.eta = opt.num("eta");
    if (opt.has("samples")) probe.n_samples = opt.uint("samples");
    const AsymmetryEstimate est = monte_carlo_asymmetry(probe);
    ExperimentReport rep("asymmetry", seed);
    rep.config()["d"] = probe.d;
    rep.config()["sigma"] = probe.sigma;
    rep.config()["eta"] = probe.eta;
    rep.config()["samples"] = probe.n_samples;
    rep.set_summary("estimate", est.mean);
    rep.set_summary("std_err", est.std_err);
    rep.set_summary("lower_bound", est.lower_bound);
    rep.set_summary("upper_bound", est.upper_bound);
    write_report(rep, out_dir, format);
    return kExitOk;
  }

  std::fprintf(stderr, "error: unknown experiment '%s'\n", name.c_str());
  return kExitUsage;
}

int main(int argc, char** argv) {
  CLI::App app{"IDInit initializers, verification suites, and experiments"};
  app.require_subcommand(1);

  // ---- dump-init ----
  auto* dump = app.add_subcommand("dump-init", "construct an initializer and dump it");
  std::string dump_method;
  dump->add_option("--method", dump_method, "initializer name")->required();
  std::map<std::string, std::uint64_t> dump_uints = {
      {"dout", 0}, {"din", 0}, {"n", 0}, {"k", 3}, {"cin", 1}, {"cout", 1}, {"seed", 0}};
  std::map<std::string, double> dump_nums = {{"tau", 1.0}, {"eps", 1e-6}, {"loose", 0.0}};
  std::map<std::string, CLI::Option*> dump_opts;
  for (auto& [k, v] : dump_uints) dump_opts[k] = dump->add_option("--" + k, v);
  for (auto& [k, v] : dump_nums) dump_opts[k] = dump->add_option("--" + k, v);
  std::string dump_out = "./runs/dump-init";
  std::string dump_format = "both";
  dump->add_option("--out", dump_out, "output directory");
  dump->add_option("--format", dump_format)
      ->check(CLI::IsMember({"csv", "binary", "both"}));

  // ---- verify ----
  auto* verify = app.add_subcommand("verify", "run the invariant suites");
  std::string suite = "all";
  bool list_only = false;
  std::uint64_t verify_seed = 20240101;
  std::string verify_out;
  verify->add_option("suite", suite, "all|initializers|gradients|isometry");
  verify->add_flag("--list", list_only, "list checks without running");
  verify->add_option("--seed", verify_seed);
  verify->add_option("--out", verify_out, "write the JSON verdict to this file");

  // ---- experiment ----
  auto* exp = app.add_subcommand("experiment", "run a named experiment");
  std::string exp_name;
  exp->add_option("name", exp_name,
                  "symmetry|rank|isometry|variance|deadneuron|toy|longstem|mnist|asymmetry")
      ->required();
  std::string config_path, exp_out, exp_format = "both";
  std::uint64_t exp_seed = 0;
  exp->add_option("--config", config_path, "JSON config file");
  exp->add_option("--seed", exp_seed);
  exp->add_option("--out", exp_out, "output directory");
  exp->add_option("--format", exp_format)->check(CLI::IsMember({"csv", "json", "both"}));

  std::map<std::string, std::string> exp_strs = {
      {"mode", ""}, {"init", ""}, {"net", ""}, {"variant", ""}, {"data-dir", ""}};
  std::map<std::string, std::uint64_t> exp_uints = {
      {"epochs", 0}, {"batch", 0},  {"steps", 0},  {"d0", 0},      {"dh", 0},
      {"dl", 0},     {"blocks", 0}, {"width", 0},  {"rounds", 0},  {"r", 0},
      {"depth", 0},  {"limit", 0},  {"d", 0},      {"samples", 0}, {"stem-depth", 0}};
  std::map<std::string, double> exp_nums = {
      {"lr", 0.0},    {"momentum", 0.0}, {"wd", 0.0},    {"noise", 0.0}, {"w1", 0.0},
      {"w2", 0.0},    {"scale", 0.0},    {"sigma", 0.0}, {"eta", 0.0}};
  std::map<std::string, CLI::Option*> exp_opts;
  for (auto& [k, v] : exp_strs) exp_opts[k] = exp->add_option("--" + k, v);
  for (auto& [k, v] : exp_uints) exp_opts[k] = exp->add_option("--" + k, v);
  for (auto& [k, v] : exp_nums) exp_opts[k] = exp->add_option("--" + k, v);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (dump->parsed()) {
      OptionBag bag;
      for (auto& [k, v] : dump_uints)
        if (dump_opts[k]->count() || k == "seed" || k == "k" || k == "cin" || k == "cout")
          bag.values[k] = v;
      for (auto& [k, v] : dump_nums) bag.values[k] = v;
      if (!bag.has("dout") && dump_method != "hadamard" && dump_method != "idic" &&
          dump_method != "idizc" && dump_method != "channel-maintain") {
        std::fprintf(stderr, "error: --dout/--din required for %s\n", dump_method.c_str());
        return kExitUsage;
      }
      if (bag.has("dout") && !bag.has("din")) {
        std::fprintf(stderr, "error: --din required with --dout\n");
        return kExitUsage;
      }
      return run_dump_init(dump_method, bag, dump_out, dump_format);
    }
    if (verify->parsed()) return run_verify(suite, list_only, verify_seed, verify_out);
    if (exp->parsed()) {
      static const std::map<std::string, std::set<std::string>> allowed = {
          {"symmetry", {"mode", "epochs", "lr", "momentum", "batch", "noise"}},
          {"rank", {"init", "d0", "dh", "dl", "steps", "lr"}},
          {"isometry", {"init", "blocks", "width"}},
          {"variance", {"net", "init", "noise", "rounds"}},
          {"deadneuron", {"variant", "steps", "lr"}},
          {"toy", {"r", "depth", "lr", "w1", "w2", "steps", "scale"}},
          {"longstem", {"init", "stem-depth", "epochs", "lr"}},
          {"mnist",
           {"net", "init", "epochs", "batch", "lr", "momentum", "wd", "limit", "data-dir"}},
          {"asymmetry", {"d", "sigma", "eta", "samples"}},
      };
      const auto it = allowed.find(exp_name);
      if (it == allowed.end()) {
        std::fprintf(stderr, "error: unknown experiment '%s'\n", exp_name.c_str());
        return kExitUsage;
      }

      OptionBag bag;
      // config file first
      if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) {
          std::fprintf(stderr, "error: cannot open config %s\n", config_path.c_str());
          return kExitUsage;
        }
        json cfg = json::parse(is, nullptr, false);
        if (cfg.is_discarded()) {
          std::fprintf(stderr, "error: config %s is not valid JSON\n", config_path.c_str());
          return kExitUsage;
        }
        if (cfg.contains(exp_name)) {
          for (const auto& [k, v] : cfg.at(exp_name).items()) {
            if (k == "seed") {
              if (!exp->get_option("--seed")->count()) exp_seed = v.get<std::uint64_t>();
              continue;
            }
            if (!it->second.count(k)) {
              std::fprintf(stderr, "error: unknown config key '%s' for experiment %s\n",
                           k.c_str(), exp_name.c_str());
              return kExitUsage;
            }
            bag.values[k] = v;
          }
        }
      }
      // flags override
      for (auto& [k, v] : exp_strs)
        if (exp_opts[k]->count()) bag.values[k] = v;
      for (auto& [k, v] : exp_uints)
        if (exp_opts[k]->count()) bag.values[k] = v;
      for (auto& [k, v] : exp_nums)
        if (exp_opts[k]->count()) bag.values[k] = v;
      for (const auto& [k, v] : bag.values.items()) {
        if (!it->second.count(k)) {
          std::fprintf(stderr, "error: option --%s does not apply to experiment %s\n",
                       k.c_str(), exp_name.c_str());
          return kExitUsage;
        }
      }
      return run_experiment(exp_name, bag, exp_seed, exp_out, exp_format);
    }
  } catch (const idinit::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {  // shape/unsupported errors
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitOk;
}
