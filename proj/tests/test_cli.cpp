#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "idinit/matrix.hpp"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return IDINIT_CLI_PATH; }

int run_cli(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = std::string(cli_path()) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("idinit-cli-") + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("cli dump-init writes the stacked identity") {
  TempDir tmp("dump");
  REQUIRE(run_cli("dump-init --method idi --dout 4 --din 2 --tau 1 --loose 0 --out " +
                  tmp.str()) == 0);

  const idinit::Matrix csv = idinit::read_csv_file(tmp.file("idi.csv"));
  CHECK(csv == idinit::Matrix{{1, 0}, {0, 1}, {1, 0}, {0, 1}});

  const idinit::Matrix bin = idinit::read_binary_file(tmp.file("idi.bin"));
  CHECK(bin == csv);

  CHECK(fs::exists(tmp.file("idi.json")));
}

TEST_CASE("cli dump-init binary/csv round trip at full precision") {
  TempDir tmp("dump2");
  REQUIRE(run_cli("dump-init --method kaiming --dout 6 --din 5 --seed 3 --out " +
                  tmp.str()) == 0);
  const idinit::Matrix csv = idinit::read_csv_file(tmp.file("kaiming.csv"));
  const idinit::Matrix bin = idinit::read_binary_file(tmp.file("kaiming.bin"));
  REQUIRE(csv.same_shape(bin));
  for (std::size_t i = 0; i < csv.size(); ++i) REQUIRE(csv.data()[i] == bin.data()[i]);
}

TEST_CASE("cli dump-init rejects a non-power-of-two hadamard") {
  TempDir tmp("hada");
  const std::string log = tmp.file("log.txt");
  CHECK(run_cli("dump-init --method hadamard --n 6 --out " + tmp.str(), log) == 2);
  CHECK(slurp(log).find("size must be a power of two") != std::string::npos);
}

TEST_CASE("cli verify --list enumerates checks without running") {
  TempDir tmp("list");
  const std::string log = tmp.file("log.txt");
  REQUIRE(run_cli("verify initializers --list", log) == 0);
  const std::string out = slurp(log);
  CHECK(out.find("initializers/idi_identity_transition") != std::string::npos);
  CHECK(out.find("gradients/") == std::string::npos);
}

TEST_CASE("cli rejects usage errors with exit code 2") {
  CHECK(run_cli("experiment doesnotexist") == 2);
  CHECK(run_cli("experiment toy --blocks 3") == 2);  // option from another experiment
  CHECK(run_cli("dump-init --method idi") == 2);     // missing dims
}

TEST_CASE("cli experiment toy prints the converged product") {
  TempDir tmp("toy");
  const std::string log = tmp.file("log.txt");
  REQUIRE(run_cli("experiment toy --r 1 --steps 150000 --seed 5 --format json --out " +
                      tmp.str(),
                  log) == 0);
  const std::string out = slurp(log);
  const auto pos = out.find("final_product");
  REQUIRE(pos != std::string::npos);
  const double value = std::strtod(out.c_str() + out.find('=', pos) + 1, nullptr);
  CHECK(std::abs(value - 1.1867) < 1e-2);
}

TEST_CASE("cli config file feeds experiments and rejects unknown keys") {
  TempDir tmp("cfg");
  {
    std::ofstream os(tmp.file("good.json"));
    os << R"({"toy": {"r": 0, "steps": 120000, "w1": 1.0, "w2": 1.0}})";
  }
  const std::string log = tmp.file("log.txt");
  REQUIRE(run_cli("experiment toy --config " + tmp.file("good.json") +
                      " --format json --out " + tmp.str(),
                  log) == 0);
  const std::string out = slurp(log);
  const auto pos = out.find("final_product");
  REQUIRE(pos != std::string::npos);
  const double value = std::strtod(out.c_str() + out.find('=', pos) + 1, nullptr);
  CHECK(std::abs(value - std::pow(50.0, 0.2)) < 1e-2);

  {
    std::ofstream os(tmp.file("bad.json"));
    os << R"({"toy": {"r": 0, "bogus_key": 1}})";
  }
  CHECK(run_cli("experiment toy --config " + tmp.file("bad.json")) == 2);
}

TEST_CASE("cli reports are bitwise identical under one seed") {
  TempDir a("det-a"), b("det-b");
  REQUIRE(run_cli("experiment rank --d0 4 --dh 16 --dl 4 --steps 3 --seed 9 --out " +
                  a.str()) == 0);
  REQUIRE(run_cli("experiment rank --d0 4 --dh 16 --dl 4 --steps 3 --seed 9 --out " +
                  b.str()) == 0);
  CHECK(slurp(a.file("rank.json")) == slurp(b.file("rank.json")));
  CHECK(!slurp(a.file("rank.json")).empty());
  CHECK(slurp(a.file("rank-rank.csv")) == slurp(b.file("rank-rank.csv")));
}
