// tightline command line: generate ensembles, analyse them, report.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tightline/errors.hpp"
#include "tightline/experiment.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kSpecError = 2;
constexpr int kRuntimeError = 3;

struct StageArgs {
  std::string spec;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string output_dir;
  bool timing = false;
};

void add_stage_flags(CLI::App* cmd, StageArgs& a) {
  cmd->add_option("--spec,spec", a.spec, "experiment spec file")->required();
  cmd->add_option("--seed", a.seed, "override the spec seed");
  cmd->add_option("--jobs,-j", a.jobs, "parallel replicas")->check(CLI::PositiveNumber);
  cmd->add_option("--output-dir,-o", a.output_dir, "output directory (default: spec output_dir)");
  cmd->add_flag("--timing", a.timing, "record wall-clock time in the manifest");
}

int run_stage(tightline::Stage stage, const StageArgs& a) {
  tightline::ExperimentSpec spec;
  try {
    spec = tightline::load_spec(a.spec);
  } catch (const tightline::SpecError& e) {
    std::cerr << a.spec << ": " << e.what() << "\n";
    return kSpecError;
  }
  tightline::RunOptions opt;
  opt.seed = a.seed;
  opt.jobs = a.jobs;
  opt.record_timing = a.timing;
  if (!a.output_dir.empty()) opt.output_dir = a.output_dir;
  try {
    const auto res = tightline::run_stage(spec, stage, opt);
    if (!res.ok) {
      std::cerr << "tightline " << tightline::to_string(stage) << " failed: " << res.error << "\n"
                << "partial manifest: " << res.manifest.string() << "\n";
      return kRuntimeError;
    }
    std::cout << res.manifest.string() << "\n";
    return kOk;
  } catch (const std::exception& e) {
    std::cerr << "tightline: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tightline: charge fluctuations, tightness and cyclic phases of 1D charge systems"};
  app.require_subcommand(1);

  StageArgs gen, ana, pha, dec, run;
  add_stage_flags(app.add_subcommand("generate", "sample the ensembles and store configurations"), gen);
  add_stage_flags(app.add_subcommand("analyze", "variance, correlation and mixing on stored configurations"), ana);
  add_stage_flags(app.add_subcommand("phase", "cyclic phases, covariance test and verdict on stored configurations"), pha);
  add_stage_flags(app.add_subcommand("decompose", "cyclic-component profiles on stored configurations"), dec);
  add_stage_flags(app.add_subcommand("run", "generate and run every analysis in the spec"), run);

  std::string manifest;
  auto* rep = app.add_subcommand("report", "summarise a run from its manifest");
  rep->add_option("--manifest,manifest", manifest, "manifest.json or its directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kSpecError;
  }

  using tightline::Stage;
  if (app.got_subcommand("generate")) return run_stage(Stage::generate, gen);
  if (app.got_subcommand("analyze")) return run_stage(Stage::analyze, ana);
  if (app.got_subcommand("phase")) return run_stage(Stage::phase, pha);
  if (app.got_subcommand("decompose")) return run_stage(Stage::decompose, dec);
  if (app.got_subcommand("run")) return run_stage(Stage::run, run);

  std::filesystem::path p = manifest;
  if (std::filesystem::is_directory(p)) p /= "manifest.json";
  try {
    const auto r = tightline::report(p);
    std::cout << r.text;
    return r.missing.empty() ? kOk : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "tightline report: " << e.what() << "\n";
    return kRuntimeError;
  }
}
