#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "tightline/errors.hpp"
#include "tightline/experiment.hpp"

using namespace tightline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kMinimal = R"(# smoke
[experiment]
name = smoke
seed = 7
replicas = 100

[model shifted_lattice]
n = 4096

[analysis variance]
[analysis phase]
)";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("tightline_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string spec_error(const std::string& text) {
  try {
    parse_spec(text);
  } catch (const SpecError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("spec parsing") {
  const auto s = parse_spec(kMinimal);
  CHECK(s.name == "smoke");
  CHECK(s.seed == 7);
  CHECK(s.replicas == 100);
  REQUIRE(s.models.size() == 1);
  CHECK(s.models[0].kind == ModelKind::shifted_lattice);
  CHECK(s.models[0].n == 4096);
  CHECK(s.models[0].replicas == 100);
  REQUIRE(s.analyses.size() == 2);
  CHECK(s.analyses[0].kind == AnalysisKind::variance);
  CHECK(s.analyses[1].kind == AnalysisKind::phase);
  CHECK(s.hash == sha256_hex(kMinimal));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  const auto j = parse_spec(R"(
[experiment]
name = j
seed = 1
replicas = 2
[model jellium hot]   ; inline comment
beta = 0.5
sweeps = 100
burn_in = 10
[analysis phase]
t_ladder = 8, 16, 32
shifts = 0.1, 0.2
)");
  CHECK(j.models[0].label == "hot");
  CHECK(j.models[0].jellium.beta == 0.5);
  CHECK(j.analyses[0].phase.t_ladder == std::vector<double>{8, 16, 32});
}

TEST_CASE("spec validation") {
  const std::string base = "[experiment]\nname = x\nseed = 1\n";
  const auto betta = spec_error(base + "[model jellium]\nbetta = 2\n");
  CHECK(betta.find("betta") != std::string::npos);
  CHECK(betta.find("line 5") != std::string::npos);
  CHECK(spec_error(base + "[model jellium]\nbeta = two\n").find("beta") != std::string::npos);
  CHECK(spec_error(base + "[model warp_drive]\n").find("warp_drive") != std::string::npos);
  CHECK(spec_error(base + "[model poisson a]\n[model poisson a]\n").find("duplicate") != std::string::npos);
  CHECK(spec_error(base + "[model poisson]\n[analysis phase]\n[analysis phase]\n").find("twice") != std::string::npos);
  CHECK(spec_error(base + "[model jellium]\nsweeps = 10\nburn_in = 10\n").find("burn_in") != std::string::npos);
  CHECK(spec_error(base + "[model cluster_chain]\n[analysis phase]\nshifts = 0.5\n").find("integer") !=
        std::string::npos);
  CHECK(spec_error("[experiment]\nname = x\n[model poisson]\n").find("seed") != std::string::npos);
  CHECK(spec_error(base).find("model") != std::string::npos);
  CHECK_FALSE(spec_error(base + "[model poisson]\nlength = 64\n[bogus]\n").empty());
}

TEST_CASE("minimal run, manifest and report") {
  TempDir tmp;
  auto spec = parse_spec(kMinimal);
  RunOptions opt;
  opt.output_dir = tmp.path / "a";
  const auto res = run_stage(spec, Stage::run, opt);
  REQUIRE(res.ok);
  const auto m = read_json(res.manifest);
  CHECK(m["spec_hash"] == spec.hash);
  CHECK(m["status"] == "complete");
  CHECK(m["verdicts"].size() == 2);
  CHECK(m["models"]["shifted_lattice"]["verdict"] == "cyclic_factor_detected");
  CHECK(m["models"]["shifted_lattice"]["tightness"] == "tight");
  for (const auto& a : m["artifacts"]) CHECK(fs::exists(opt.output_dir.value() / a["path"].get<std::string>()));

  const auto rep = report(res.manifest);
  CHECK(rep.missing.empty());
  CHECK(rep.text.find("cyclic_factor_detected") != std::string::npos);

  // same spec again: identical manifest bytes
  RunOptions again = opt;
  again.output_dir = tmp.path / "b";
  again.jobs = 3;
  const auto res2 = run_stage(spec, Stage::run, again);
  REQUIRE(res2.ok);
  CHECK(slurp(res.manifest) == slurp(res2.manifest));

  // deleting a listed file is noticed
  fs::remove(*opt.output_dir / "shifted_lattice" / "variance.csv");
  const auto broken = report(res.manifest);
  REQUIRE(broken.missing.size() == 1);
  CHECK(broken.missing[0] == "shifted_lattice/variance.csv");
  CHECK(broken.text.find("variance.csv") != std::string::npos);
}

TEST_CASE("staged run reproduces the one-shot run") {
  TempDir tmp;
  const auto spec = parse_spec(R"(
[experiment]
name = staged
seed = 3
replicas = 12

[model cluster_chain]
n_sites = 2048

[model poisson]
length = 256

[analysis variance]
[analysis correlation]
max_lag = 16
[analysis phase]
cesaro_tol = 0.2
)");
  RunOptions one, staged;
  one.output_dir = tmp.path / "one";
  staged.output_dir = tmp.path / "staged";
  REQUIRE(run_stage(spec, Stage::run, one).ok);
  for (auto st : {Stage::generate, Stage::analyze, Stage::phase}) REQUIRE(run_stage(spec, st, staged).ok);
  const auto a = read_json(*one.output_dir / "manifest.json");
  const auto b = read_json(*staged.output_dir / "manifest.json");
  CHECK(a["artifacts"] == b["artifacts"]);
  CHECK(a["verdicts"] == b["verdicts"]);
  CHECK(a["models"] == b["models"]);
  CHECK(b["models"]["poisson"]["verdict"] == "hypotheses_not_met");

  // analysis without configurations is a runtime failure
  RunOptions empty;
  empty.output_dir = tmp.path / "empty";
  CHECK_FALSE(run_stage(spec, Stage::phase, empty).ok);
}

TEST_CASE("output root from the environment") {
  auto spec = parse_spec(std::string(kMinimal) + "");
  spec.output_dir = "rel/out";
  ::setenv("TIGHTLINE_OUTPUT_ROOT", "/tmp/root_here", 1);
  CHECK(resolve_output_dir(spec, {}) == fs::path("/tmp/root_here/rel/out"));
  ::unsetenv("TIGHTLINE_OUTPUT_ROOT");
  CHECK(resolve_output_dir(spec, {}) == fs::path("rel/out"));
  RunOptions o;
  o.output_dir = "/x";
  CHECK(resolve_output_dir(spec, o) == fs::path("/x"));
}

#ifdef TIGHTLINE_CLI
TEST_CASE("command line exit codes") {
  TempDir tmp;
  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(tmp.path / name) << text;
    return (tmp.path / name).string();
  };
  const auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  const std::string cli = TIGHTLINE_CLI;
  const auto bad = write("bad.ini", "[experiment]\nname = x\nseed = 1\n[model jellium]\nbetta = 2\n");
  CHECK(status(cli + " run --spec " + bad) == 2);
  CHECK(status(cli + " run --spec " + (tmp.path / "nope.ini").string()) == 2);
  const auto good = write("good.ini", "[experiment]\nname = g\nseed = 1\nreplicas = 20\n[model poisson]\nlength = 128\n"
                                      "[analysis variance]\n");
  const auto out = (tmp.path / "out").string();
  CHECK(status(cli + " run " + good + " -o " + out) == 0);
  CHECK(status(cli + " report " + out) == 0);
  fs::remove(tmp.path / "out" / "poisson" / "variance.csv");
  CHECK(status(cli + " report --manifest " + out + "/manifest.json") == 3);
  CHECK(status(cli + " phase " + good + " -o " + (tmp.path / "fresh").string()) == 3);
  CHECK(status(cli + " frobnicate") == 2);
}
#endif
