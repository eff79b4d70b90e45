#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "tmm/coperator.hpp"
#include "tmm/io.hpp"
#include "tmm/pool.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int status = -1;
  std::string output;  // stdout and stderr combined
};

CliResult run_cli(const std::string& args) {
  const std::string command = std::string(TMM_CLI_PATH) + " " + args + " 2>&1";
  CliResult result;
  std::FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) result.output += buf;
  const int rc = pclose(pipe);
  result.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return result;
}

// Scoped working directory under the test's CWD, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::path("clitest_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) {
  return text.substr(0, text.find('\n'));
}

const char* kTinyPoolConfig = R"(seed = 5
[model]
d = 3
gamma = 0.1
beta = 1.0
measure = uniform
[basis]
kind = legendre
n = 2
[sim]
dt = 1e-3
[pool]
n_src = 20
n_traj = 3
t = 0.02
)";

const char* kTinyOperatorConfig = R"(seed = 6
[model]
d = 3
gamma = 0.1
beta = 1.0
measure = uniform
[basis]
kind = legendre
n = 2
[sim]
dt = 1e-3
[pool]
n_src = 30
n_traj = 3
t = 0.02
[operator]
r1 = 12
delta = 1
psd = 0
)";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("a missing config flag is rejected by the parser") {
  const CliResult r = run_cli("build-pool");
  CHECK(r.status != 0);
}

TEST_CASE("a nonexistent config file reports an io error") {
  const CliResult r = run_cli("build-pool --config clitest_no_such_file.ini");
  CHECK(r.status == 1);
  CHECK(r.output.find("io error") != std::string::npos);
}

TEST_CASE("an empty config names the first missing key") {
  TempDir dir("empty");
  write_file(dir.file("empty.ini"), "\n");
  const CliResult r =
      run_cli("build-pool --config " + dir.file("empty.ini") + " --out " + dir.file("out"));
  CHECK(r.status == 1);
  CHECK(r.output.find("missing required config key: model.d") != std::string::npos);
}

TEST_CASE("unconsumed keys are reported by name") {
  TempDir dir("unknown");
  write_file(dir.file("bad.ini"),
             std::string(kTinyPoolConfig) + "[pool]\nn_trajectories = 4\n");
  const CliResult r =
      run_cli("build-pool --config " + dir.file("bad.ini") + " --out " + dir.file("out"));
  CHECK(r.status == 1);
  CHECK(r.output.find("unknown config key") != std::string::npos);
  CHECK(r.output.find("pool.n_trajectories") != std::string::npos);
}

TEST_CASE("duplicate keys in one section are rejected") {
  TempDir dir("dup");
  write_file(dir.file("dup.ini"), "[model]\nd = 3\nd = 4\n");
  const CliResult r =
      run_cli("build-pool --config " + dir.file("dup.ini") + " --out " + dir.file("out"));
  CHECK(r.status == 1);
  CHECK(r.output.find("duplicate config key: model.d") != std::string::npos);
}

TEST_CASE("pool builds write a manifest, the pool, and a hashed summary") {
  TempDir dir("pool");
  write_file(dir.file("pool.ini"), kTinyPoolConfig);
  const CliResult r =
      run_cli("build-pool --config " + dir.file("pool.ini") + " --out " + dir.file("out"));
  INFO(r.output);
  REQUIRE(r.status == 0);
  REQUIRE(fs::exists(dir.file("out/manifest.txt")));
  REQUIRE(fs::exists(dir.file("out/pool.bin")));
  REQUIRE(fs::exists(dir.file("out/summary.txt")));

  // The summary header carries the hash of the exact manifest bytes.
  const std::string manifest = read_file(dir.file("out/manifest.txt"));
  const std::string summary = read_file(dir.file("out/summary.txt"));
  CHECK(first_line(summary) == "# manifest " + tmm::fnv1a64_hex(manifest));
  CHECK(summary.find("n_src = 20") != std::string::npos);
  CHECK(summary.find("stopped = 0") != std::string::npos);

  // The manifest records the resolved configuration, defaults included.
  CHECK(manifest.find("subcommand = build-pool") != std::string::npos);
  CHECK(manifest.find("seed = 5") != std::string::npos);
  CHECK(manifest.find("pool.source = mean_field") != std::string::npos);

  // The pool round-trips through the library loader.
  const tmm::SamplePool pool = tmm::load_pool(dir.file("out/pool.bin"));
  CHECK(pool.d == 3);
  CHECK(pool.n_src == 20);
  CHECK(pool.n_traj == 3);
}

TEST_CASE("reruns of the same configuration are byte-identical") {
  TempDir dir("rerun");
  write_file(dir.file("pool.ini"), kTinyPoolConfig);
  const CliResult r1 =
      run_cli("build-pool --config " + dir.file("pool.ini") + " --out " + dir.file("a"));
  const CliResult r2 =
      run_cli("build-pool --config " + dir.file("pool.ini") + " --out " + dir.file("b"));
  REQUIRE(r1.status == 0);
  REQUIRE(r2.status == 0);
  CHECK(read_file(dir.file("a/pool.bin")) == read_file(dir.file("b/pool.bin")));
  CHECK(read_file(dir.file("a/manifest.txt")) == read_file(dir.file("b/manifest.txt")));
  CHECK(read_file(dir.file("a/summary.txt")) == read_file(dir.file("b/summary.txt")));
}

TEST_CASE("the seed flag overrides the config seed") {
  TempDir dir("seed");
  write_file(dir.file("pool.ini"), kTinyPoolConfig);
  const CliResult r = run_cli("build-pool --config " + dir.file("pool.ini") +
                              " --seed 99 --out " + dir.file("out"));
  REQUIRE(r.status == 0);
  const std::string manifest = read_file(dir.file("out/manifest.txt"));
  CHECK(manifest.find("seed = 99") != std::string::npos);
  CHECK(manifest.find("seed = 5") == std::string::npos);
}

TEST_CASE("operator builds produce a loadable compressed operator") {
  TempDir dir("op");
  write_file(dir.file("op.ini"), kTinyOperatorConfig);
  const CliResult r = run_cli("build-operator --config " + dir.file("op.ini") +
                              " --out " + dir.file("out"));
  INFO(r.output);
  REQUIRE(r.status == 0);
  REQUIRE(fs::exists(dir.file("out/operator.bin")));
  const tmm::CompressedOperator op = tmm::load_operator(dir.file("out/operator.bin"));
  CHECK(op.d == 3);
  CHECK(op.n == 2);
  CHECK(op.r1() == 12);
  CHECK_FALSE(op.psd);
  CHECK(tmm::stored_entry_count(op) <= tmm::stored_entry_bound(op));
  const std::string summary = read_file(dir.file("out/summary.txt"));
  CHECK(summary.find("stored_entries = ") != std::string::npos);
  CHECK(summary.find("stored_entry_bound = ") != std::string::npos);
}

TEST_CASE("a quick lattice certification run exits cleanly") {
  TempDir dir("lattice");
  write_file(dir.file("lat.ini"), R"(seed = 6
[lattice]
d = 4
m = 2
j = 1.0
beta = 0.6
n = 2
draws = 20
corr_t = 1.0
t_grid = 0.5
)");
  const CliResult r = run_cli("verify-lattice --config " + dir.file("lat.ini") +
                              " --out " + dir.file("out"));
  INFO(r.output);
  REQUIRE(r.status == 0);
  REQUIRE(fs::exists(dir.file("out/lattice_report.txt")));
  REQUIRE(fs::exists(dir.file("out/correlation.csv")));
  const std::string summary = read_file(dir.file("out/summary.txt"));
  CHECK(summary.find("all_pass = 1") != std::string::npos);
}

}  // TEST_SUITE
