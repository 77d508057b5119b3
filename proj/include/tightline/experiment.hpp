#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tightline/fluctuations.hpp"
#include "tightline/generators.hpp"

namespace tightline {

// Experiment spec files are sectioned key = value text:
//
//   [experiment]
//   name = jellium_beta2
//   seed = 17
//   replicas = 4
//   output_dir = out/jellium_beta2
//
//   [model jellium]          optional label: [model jellium hot]
//   beta = 2
//
//   [analysis variance]
//   lengths_per_octave = 16
//
// '#' or ';' starts a comment. Lists are comma separated. Unknown sections
// and keys are rejected with their line number.

enum class ModelKind {
  shifted_lattice,
  jittered_lattice,
  poisson,
  jellium,
  two_component,
  cluster_chain,
  rmt_bulk,
  iid_sign_chain
};

const char* to_string(ModelKind k);
bool is_lattice(ModelKind k);

struct ModelSpec {
  ModelKind kind = ModelKind::shifted_lattice;
  std::string label;
  int line = 0;
  std::size_t replicas = 0;  // resolved: section override or the experiment default
  std::size_t n = 4096;      // sites / atoms for the simple generators
  double length = 512.0;     // poisson
  double rho = 1.0;          // poisson
  JelliumParams jellium;
  TwoComponentParams two_component;
  ClusterChainParams cluster;
  /// Canonical key/value echo of every parameter, for provenance.
  std::map<std::string, std::string> params;
};

enum class AnalysisKind { variance, phase, decompose, mixing, correlation };
const char* to_string(AnalysisKind k);

struct VarianceSpec {
  std::vector<double> lengths;  // empty: ladder below
  double length_min = 1.0;
  int per_octave = 1;
  std::optional<bool> integer_lengths;  // default: true for lattice models
  WindowEstimator estimator = WindowEstimator::pooled;
  std::size_t windows_per_replica = 64;
  double knee = 0.0;
};

struct PhaseSpec {
  std::vector<double> t_ladder;  // empty: default_t_ladder(window)
  std::optional<double> cesaro_tol;
  double e_const = 0.0;
  std::vector<double> shifts;  // empty: model default
  double residual_tol = 0.2;
};

struct DecomposeSpec {
  std::size_t bins = 4;
  std::size_t u_bins = 16;
  std::vector<double> t_ladder;
  std::optional<double> cesaro_tol;
  bool cycling = true;
  std::size_t block = 1;
};

struct MixingSpec {
  double probe_scale = 0.0;  // 0: window / 32
  std::vector<double> lags;  // empty: 2, 3, 4, 6, 8 probe widths
  bool bias_correct = true;
  bool cross_replica = false;
  double min_lag = 0.0;  // 0: two probe widths
};

struct CorrelationSpec {
  std::size_t max_lag = 64;
};

struct AnalysisSpec {
  AnalysisKind kind = AnalysisKind::variance;
  int line = 0;
  VarianceSpec variance;
  PhaseSpec phase;
  DecomposeSpec decompose;
  MixingSpec mixing;
  CorrelationSpec correlation;
};

struct ExperimentSpec {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t replicas = 1;
  std::string output_dir;
  std::vector<ModelSpec> models;
  std::vector<AnalysisSpec> analyses;
  std::string text;  // verbatim source
  std::string hash;  // SHA-256 of text
};

/// Throws SpecError (with a line number where one applies).
ExperimentSpec parse_spec(const std::string& text);
ExperimentSpec load_spec(const std::filesystem::path& path);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the spec seed
  std::optional<std::filesystem::path> output_dir;
  unsigned jobs = 1;
  bool record_timing = false;  // wall clock in the manifest (breaks checksum equality)
};

enum class Stage { generate, analyze, phase, decompose, run };
const char* to_string(Stage s);

struct RunResult {
  std::filesystem::path output_dir;
  std::filesystem::path manifest;
  bool ok = true;
  std::string error;
};

/// Resolved output directory: --output-dir, else spec output_dir (relative
/// paths are taken under $TIGHTLINE_OUTPUT_ROOT when set), else ./<name>.
std::filesystem::path resolve_output_dir(const ExperimentSpec& spec, const RunOptions& opt);

/// generate writes configurations; analyze runs variance, correlation and
/// mixing on stored configurations; phase and decompose run those analyses
/// on stored configurations; run does everything. Every stage rewrites
/// manifest.json last. Generator failures leave a manifest flagged "failed"
/// and come back with ok = false.
RunResult run_stage(const ExperimentSpec& spec, Stage stage, const RunOptions& opt = {});

struct ReportResult {
  std::string text;
  std::vector<std::string> missing;   // listed in the manifest but absent
  std::vector<std::string> modified;  // checksum differs
};

ReportResult report(const std::filesystem::path& manifest_path);

}  // namespace tightline
