#include "tightline/experiment.hpp"

#include <openssl/crypto.h>
#include <openssl/opensslv.h>

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <boost/version.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tightline/antiderivative.hpp"
#include "tightline/config_io.hpp"
#include "tightline/cyclic_phase.hpp"
#include "tightline/errors.hpp"
#include "tightline/stats.hpp"

namespace tightline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* to_string(Stage s) {
  switch (s) {
    case Stage::generate: return "generate";
    case Stage::analyze: return "analyze";
    case Stage::phase: return "phase";
    case Stage::decompose: return "decompose";
    case Stage::run: return "run";
  }
  return "?";
}

namespace {

constexpr const char* kVersion = "0.1.0";

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

json fit_json(const stats::LinearFit& f) {
  return {{"intercept", f.intercept}, {"slope", f.slope},       {"intercept_se", f.intercept_se},
          {"slope_se", f.slope_se},   {"r_squared", f.r_squared}, {"bic", f.bic}, {"n", f.n}};
}

// ---------------------------------------------------------------- artifacts

class Artifacts {
 public:
  explicit Artifacts(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  void write(const std::string& rel, const std::string& content) {
    const fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
    out.close();
    if (!out) throw std::runtime_error("write failed for " + p.string());
    written_[rel] = {sha256_hex(content), content.size()};
  }
  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  struct Info {
    std::string sha;
    std::size_t bytes = 0;
  };
  const std::map<std::string, Info>& written() const { return written_; }

 private:
  fs::path root_;
  std::map<std::string, Info> written_;
};

// ---------------------------------------------------------------- ensembles

struct Ensemble {
  bool lattice = false;
  std::vector<PointChargeConfiguration> cont;
  std::vector<LatticeChargeConfiguration> latt;
  std::vector<McDiagnostics> chains;

  std::size_t size() const { return lattice ? latt.size() : cont.size(); }
  double window() const {
    if (lattice) return static_cast<double>(latt.front().size());
    return cont.front().window().length();
  }
  double unit() const { return lattice ? latt.front().unit() : cont.front().unit(); }
};

struct ReplicaOut {
  std::vector<PointChargeConfiguration> cont;
  std::vector<LatticeChargeConfiguration> latt;
  std::vector<McDiagnostics> chains;
};

ReplicaOut generate_replica(const ModelSpec& m, SeededRng& rng) {
  ReplicaOut out;
  switch (m.kind) {
    case ModelKind::shifted_lattice: out.cont.push_back(gen_shifted_lattice(m.n, rng)); break;
    case ModelKind::jittered_lattice: out.cont.push_back(gen_jittered_lattice(m.n, rng)); break;
    case ModelKind::poisson: out.cont.push_back(gen_poisson(m.length, m.rho, rng)); break;
    case ModelKind::rmt_bulk: out.cont.push_back(gen_rmt_bulk(m.n, rng)); break;
    case ModelKind::cluster_chain: out.latt.push_back(gen_cluster_chain(m.cluster, rng)); break;
    case ModelKind::iid_sign_chain: out.latt.push_back(gen_iid_sign_chain(m.n, rng)); break;
    case ModelKind::jellium: {
      auto e = gen_jellium(m.jellium, rng);
      out.cont = std::move(e.configs);
      out.chains = std::move(e.chains);
      break;
    }
    case ModelKind::two_component: {
      auto e = gen_two_component(m.two_component, rng);
      out.cont = std::move(e.configs);
      out.chains = std::move(e.chains);
      break;
    }
  }
  return out;
}

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& f) {
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

Ensemble generate(const ModelSpec& m, std::size_t model_index, std::uint64_t seed, unsigned jobs) {
  std::vector<ReplicaOut> parts(m.replicas);
  parallel_for(m.replicas, jobs, [&](std::size_t r) {
    SeededRng rng(seed, derive_stream(model_index, r));
    parts[r] = generate_replica(m, rng);
  });
  Ensemble ens;
  ens.lattice = is_lattice(m.kind);
  for (auto& p : parts) {
    std::move(p.cont.begin(), p.cont.end(), std::back_inserter(ens.cont));
    std::move(p.latt.begin(), p.latt.end(), std::back_inserter(ens.latt));
    std::move(p.chains.begin(), p.chains.end(), std::back_inserter(ens.chains));
  }
  if (ens.size() == 0) throw GenerationError(std::string(to_string(m.kind)) + ": no configurations produced");
  return ens;
}

std::string config_path(const ModelSpec& m) { return m.label + "/configurations.tsv"; }

Ensemble load(const ModelSpec& m, const fs::path& root) {
  const fs::path p = root / config_path(m);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("missing stored configurations " + p.string() + " (run generate first)");
  Ensemble ens;
  ens.lattice = is_lattice(m.kind);
  if (ens.lattice) ens.latt = read_lattice_ensemble(in);
  else ens.cont = read_continuum_ensemble(in);
  if (ens.size() == 0) throw std::runtime_error("no configurations in " + p.string());
  return ens;
}

json chain_json(const McDiagnostics& d) {
  return {{"acceptance", d.acceptance},          {"proposal_scale", d.proposal_scale},
          {"thin", d.thin},                      {"tau_int", d.tau_int},
          {"tau_int_thinned", d.tau_int_thinned}, {"sweeps_run", d.sweeps_run},
          {"warnings", d.warnings}};
}

void write_ensemble_files(Artifacts& art, const ModelSpec& m, std::size_t index, std::uint64_t seed,
                          const Ensemble& ens) {
  std::ostringstream os;
  if (ens.lattice) write_ensemble(os, ens.latt);
  else write_ensemble(os, ens.cont);
  art.write(config_path(m), os.str());

  json j;
  j["model"] = m.label;
  j["generator"] = to_string(m.kind);
  j["params"] = m.params;
  j["seed"] = seed;
  j["model_index"] = index;
  j["stream_rule"] = "stream = (model_index << 32) | replica";
  j["replicas"] = m.replicas;
  j["configurations"] = ens.size();
  j["window"] = ens.window();
  j["boundary"] = (ens.lattice ? ens.latt.front().periodic() : ens.cont.front().periodic()) ? "periodic" : "open";
  if (!ens.chains.empty()) {
    json chains = json::array();
    for (const auto& d : ens.chains) chains.push_back(chain_json(d));
    j["chains"] = chains;
  }
  art.write_json(m.label + "/ensemble.json", j);
}

// ---------------------------------------------------------------- analyses

DensitySummary density_of(const Ensemble& e) {
  return e.lattice ? estimate_density(e.latt) : estimate_density(e.cont);
}

json density_json(const DensitySummary& d) {
  json j{{"rho", d.rho}, {"rho_stderr", d.rho_stderr}, {"n_configs", d.n_configs}, {"unit", d.unit}};
  if (d.lattice) {
    j["gamma"] = d.gamma;
    j["alpha"] = d.alpha;
    j["alpha_stderr"] = d.alpha_stderr;
    j["alpha_degenerate"] = d.alpha_degenerate;
  }
  return j;
}

std::vector<double> variance_lengths(const VarianceSpec& v, const Ensemble& e) {
  if (!v.lengths.empty()) return v.lengths;
  const bool integer = v.integer_lengths.value_or(e.lattice);
  return geometric_ladder(e.window(), v.length_min, v.per_octave, integer);
}

struct VarianceOut {
  FluctuationCurve curve;
  TightnessVerdict verdict;
};

VarianceOut run_variance(const VarianceSpec& v, const Ensemble& e, double rho) {
  const auto lengths = variance_lengths(v, e);
  VarianceOptions opt;
  opt.estimator = v.estimator;
  opt.windows_per_replica = v.windows_per_replica;
  VarianceOut out;
  out.curve = e.lattice ? variance_growth(e.latt, lengths, rho, opt) : variance_growth(e.cont, lengths, rho, opt);
  GrowthOptions g;
  g.knee = v.knee;
  out.verdict = classify_growth(out.curve, g);
  return out;
}

json tightness_json(const TightnessVerdict& v) {
  return {{"status", to_string(v.status)},
          {"is_tight", v.is_tight},
          {"model", to_string(v.model)},
          {"sup_q95", v.sup_q95},
          {"knee", v.knee},
          {"fits", {{"constant", fit_json(v.constant_fit)}, {"log", fit_json(v.log_fit)}, {"linear", fit_json(v.linear_fit)}}},
          {"log_slope_se", v.log_slope_se},
          {"linear_slope_se", v.linear_slope_se},
          {"q95_log_slope", v.q95_log_slope},
          {"q95_log_slope_se", v.q95_log_slope_se},
          {"note", v.note}};
}

void write_variance(Artifacts& art, const ModelSpec& m, const VarianceOut& v) {
  const auto& c = v.curve;
  std::string csv = "L,mean_F,var_F,q95_absF,stderr_mean,stderr_var,n_windows\n";
  for (std::size_t i = 0; i < c.lengths.size(); ++i)
    csv += num(c.lengths[i]) + "," + num(c.mean_F[i]) + "," + num(c.var_F[i]) + "," + num(c.q95_absF[i]) + "," +
           num(c.stderr_mean[i]) + "," + num(c.stderr_var[i]) + "," + std::to_string(c.n_windows[i]) + "\n";
  art.write(m.label + "/variance.csv", csv);
  json j = tightness_json(v.verdict);
  j["estimator"] = c.estimator;
  j["stderr_method"] = c.stderr_method;
  j["n_replicas"] = c.n_replicas;
  art.write_json(m.label + "/tightness.json", j);
}

void write_correlation(Artifacts& art, const ModelSpec& m, const CorrelationSummary& s) {
  std::string csv = "lag,c,stderr\n";
  for (std::size_t k = 0; k < s.c.size(); ++k) csv += std::to_string(k) + "," + num(s.c[k]) + "," + num(s.c_stderr[k]) + "\n";
  art.write(m.label + "/correlation.csv", csv);
  art.write_json(m.label + "/correlation.json",
                 {{"S0", s.S0},
                  {"S0_stderr", s.S0_stderr},
                  {"S1", s.S1},
                  {"S1_stderr", s.S1_stderr},
                  {"block_spin_bound", 2.0 * s.S1},
                  {"max_lag", s.max_lag},
                  {"stderr_method", s.stderr_method}});
}

struct MixingOut {
  MixingCurve curve;
  MixingBehaviour behaviour = MixingBehaviour::undetermined;
  double min_lag = 0.0;
};

MixingOut run_mixing(const MixingSpec& s, const Ensemble& e, double rho) {
  const double w = e.window();
  const double probe = s.probe_scale > 0.0 ? s.probe_scale : w / 32.0;
  std::vector<double> lags = s.lags;
  if (lags.empty())
    for (double k : {2.0, 3.0, 4.0, 6.0, 8.0})
      if (k * probe <= w / 2.0) lags.push_back(k * probe);
  MixingOptions opt;
  opt.bias_correct = s.bias_correct;
  opt.cross_replica = s.cross_replica;
  MixingOut out;
  out.curve = mixing_correlator(e.cont, rho, probe, lags, opt);
  out.min_lag = s.min_lag > 0.0 ? s.min_lag : 2.0 * probe;
  out.behaviour = classify_mixing(out.curve, out.min_lag);
  return out;
}

void write_mixing(Artifacts& art, const ModelSpec& m, const MixingOut& mo, const MixingSpec& s) {
  const auto& c = mo.curve;
  std::string csv = "lag,re,im,magnitude,stderr,z\n";
  for (std::size_t i = 0; i < c.lags.size(); ++i)
    csv += num(c.lags[i]) + "," + num(c.value[i].real()) + "," + num(c.value[i].imag()) + "," + num(c.magnitude[i]) +
           "," + num(c.stderr[i]) + "," + num(c.stderr[i] > 0.0 ? c.magnitude[i] / c.stderr[i] : 0.0) + "\n";
  art.write(m.label + "/correlator.csv", csv);
  art.write_json(m.label + "/mixing.json", {{"behaviour", to_string(mo.behaviour)},
                                             {"probe_scale", c.probe_scale},
                                             {"min_lag", mo.min_lag},
                                             {"n_replicas", c.n_replicas},
                                             {"bias_correct", s.bias_correct},
                                             {"cross_replica", s.cross_replica}});
}

PhaseSettings settings_for(const std::vector<double>& ladder, std::optional<double> tol, double e_const, const Ensemble& e) {
  PhaseSettings s;
  s.t_ladder = ladder.empty() ? default_t_ladder(e.window()) : ladder;
  s.tol = tol.value_or(-1.0);
  s.e_const = e_const;
  return s;
}

struct PhaseOut {
  DensitySummary density;
  std::optional<PeriodEstimate> period;
  std::string period_failure;
  std::vector<AntiderivativeTrace> traces;
  std::vector<double> phases;  // NaN when unconverged
  std::optional<UniformityResult> uniformity;
  std::optional<CovarianceResult> covariance;
  std::optional<RationalApprox> rational;
  double cycle_p = -1.0;
  VerdictResult verdict;
  PhaseSettings settings;
  std::vector<double> shifts;
};

PhaseOut run_phase(const PhaseSpec& ps, const Ensemble& e, const DensitySummary& density,
                   const TightnessVerdict& tight, const MixingCurve* mixing) {
  PhaseOut out;
  out.density = density;
  out.shifts = ps.shifts;
  if (out.shifts.empty()) out.shifts = e.lattice ? std::vector<double>{1, 2, 5} : std::vector<double>{0.1, 0.37, 1.0};
  out.settings = settings_for(ps.t_ladder, ps.cesaro_tol, ps.e_const, e);
  const bool periodic = e.lattice ? e.latt.front().periodic() : e.cont.front().periodic();
  if (ps.t_ladder.empty() && !periodic)
    out.settings.t_ladder = default_t_ladder(e.window() - *std::max_element(out.shifts.begin(), out.shifts.end()));
  CesaroOptions co;
  co.e_const = ps.e_const;
  co.tol = out.settings.tol;
  const double rho = density.rho;
  std::vector<double> converged;
  for (std::size_t i = 0; i < e.size(); ++i) {
    auto tr = e.lattice ? cesaro_field(e.latt[i], rho, out.settings.t_ladder, co)
                        : cesaro_field(e.cont[i], rho, out.settings.t_ladder, co);
    const double phi = tr.converged ? extract_phase(tr, tr.unit) : std::nan("");
    out.phases.push_back(phi);
    if (tr.converged) converged.push_back(phi);
    out.traces.push_back(std::move(tr));
  }
  if (converged.size() >= 100) out.uniformity = uniformity_test(converged);

  const auto mode = e.lattice ? PeriodMode::lattice : PeriodMode::continuum;
  try {
    out.period = predicted_period(density, e.unit(), mode);
  } catch (const HypothesesNotMet& ex) {
    out.period_failure = ex.what();
  }

  if (out.period) {
    if (e.lattice) {
      std::vector<std::int64_t> sh;
      for (double x : out.shifts) sh.push_back(static_cast<std::int64_t>(x));
      out.covariance = covariance_test(e.latt, rho, out.period->lambda, sh, out.settings);
      const double tol = std::max(3.0 * density.alpha_stderr / density.unit, 1e-9);
      out.rational = detect_rational(density.alpha / density.unit, tol, 64);
      if (out.rational->found && out.rational->q > 1 && converged.size() >= 100)
        out.cycle_p = cycle_test(converged, out.rational->q);
    } else {
      out.covariance = covariance_test(e.cont, rho, out.period->lambda, out.shifts, out.settings);
    }
  }

  VerdictInputs vi;
  vi.tightness = &tight;
  vi.density = density;
  vi.covariance = out.covariance ? &*out.covariance : nullptr;
  vi.mixing = mixing;
  vi.residual_tol = ps.residual_tol;
  out.verdict = assemble_verdict(vi);
  return out;
}

std::string verdict_text(const VerdictResult& v, const std::optional<CovarianceResult>& cov) {
  std::string s = to_string(v.verdict);
  if (v.verdict == Verdict::cyclic_factor_detected && cov) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << ", λ=" << cov->lambda_measured << "±" << cov->lambda_stderr;
    return s + os.str();
  }
  if (!v.reason.empty()) s += " (" + v.reason + ")";
  return s;
}

void write_phase(Artifacts& art, const ModelSpec& m, const PhaseOut& p, const PhaseSpec& ps,
                 const TightnessVerdict& tight) {
  std::string csv = "replica,e0,phi,converged,est_error\n";
  std::string tcsv = "replica,t,I\n";
  for (std::size_t i = 0; i < p.traces.size(); ++i) {
    const auto& tr = p.traces[i];
    csv += std::to_string(i) + "," + num(tr.base_value) + "," + (tr.converged ? num(p.phases[i]) : "") + "," +
           (tr.converged ? "1" : "0") + "," + num(tr.est_error) + "\n";
    for (const auto& r : tr.ladder) tcsv += std::to_string(i) + "," + num(r.t) + "," + num(r.value) + "\n";
  }
  art.write(m.label + "/phases.csv", csv);
  art.write(m.label + "/traces.csv", tcsv);

  json j;
  j["model"] = m.label;
  j["density"] = density_json(p.density);
  j["t_ladder"] = p.settings.t_ladder;
  j["cesaro_tol"] = p.settings.tol >= 0.0 ? p.settings.tol : 1e-3 * p.density.unit;
  j["e_const"] = ps.e_const;
  std::size_t n_conv = 0;
  for (const auto& tr : p.traces) n_conv += tr.converged ? 1 : 0;
  j["n_configs"] = p.traces.size();
  j["n_converged"] = n_conv;
  if (p.period) {
    j["lambda"] = p.period->lambda;
    j["lambda_stderr"] = p.period->stderr;
  } else {
    j["lambda"] = nullptr;
    j["period_failure"] = p.period_failure;
  }
  if (p.density.lattice) j["alpha"] = p.density.alpha;
  if (p.covariance) {
    const auto& c = *p.covariance;
    j["covariance_residual"] = c.residual_q95;
    j["covariance"] = {{"shifts", c.shifts},
                       {"residual_q95", c.residual_q95},
                       {"n_pairs", c.n_pairs},
                       {"n_excluded", c.n_excluded},
                       {"excluded_fraction", c.excluded_fraction},
                       {"inconclusive", c.inconclusive},
                       {"lambda_measured", c.lambda_measured},
                       {"lambda_measured_stderr", c.lambda_stderr}};
  } else {
    j["covariance_residual"] = nullptr;
  }
  j["residual_tol"] = ps.residual_tol;
  j["residual_tol_note"] = "finite-volume tolerance chosen for desk-scale runs, not a derived bound";
  if (p.uniformity) {
    j["uniformity_pvalue"] = p.uniformity->kuiper_p;
    j["rayleigh_pvalue"] = p.uniformity->rayleigh_p;
  } else {
    j["uniformity_pvalue"] = nullptr;
  }
  if (p.rational) {
    j["rational"] = {{"found", p.rational->found}, {"p", p.rational->p}, {"q", p.rational->q}};
    if (p.cycle_p >= 0.0) j["cycle_pvalue"] = p.cycle_p;
  }
  j["tightness"] = to_string(tight.status);
  j["verdict"] = to_string(p.verdict.verdict);
  j["reason"] = p.verdict.reason;
  art.write_json(m.label + "/phase_report.json", j);
}

struct DecomposeOut {
  std::optional<ComponentProfile> profile;
  std::string skipped;
  double lambda = 0.0;
};

DecomposeOut run_decompose(const DecomposeSpec& ds, const Ensemble& e, const DensitySummary& density) {
  DecomposeOut out;
  if (e.lattice) {
    out.skipped = "lattice ensemble";
    return out;
  }
  try {
    out.lambda = predicted_period(density, e.unit(), PeriodMode::continuum).lambda;
  } catch (const HypothesesNotMet& ex) {
    out.skipped = ex.what();
    return out;
  }
  const auto s = settings_for(ds.t_ladder, ds.cesaro_tol, 0.0, e);
  const double rho = density.rho;
  PhaseFn fn = [s, rho](const PointChargeConfiguration& c) { return phase_of(c, rho, s); };
  std::vector<double> phases;
  phases.reserve(e.cont.size());
  for (const auto& c : e.cont) phases.push_back(fn(c).value_or(std::nan("")));
  out.profile = decompose_components(e.cont, phases, out.lambda, ds.bins, ds.u_bins, ds.cycling ? fn : PhaseFn{}, ds.block);
  return out;
}

void write_decompose(Artifacts& art, const ModelSpec& m, const DecomposeOut& d, bool precondition) {
  json j;
  j["model"] = m.label;
  j["precondition_met"] = precondition;
  if (!d.profile) {
    j["skipped"] = d.skipped;
    art.write_json(m.label + "/profile.json", j);
    return;
  }
  const auto& p = *d.profile;
  std::string csv = "theta_bin,u,density,stderr\n";
  const double du = p.lambda / static_cast<double>(p.n_u_bins);
  for (std::size_t b = 0; b < p.n_bins; ++b)
    for (std::size_t u = 0; u < p.n_u_bins; ++u)
      csv += std::to_string(b) + "," + num((static_cast<double>(u) + 0.5) * du) + "," + num(p.density[b][u]) + "," +
             num(p.stderr[b][u]) + "\n";
  art.write(m.label + "/profile.csv", csv);
  j["lambda"] = p.lambda;
  j["n_bins"] = p.n_bins;
  j["n_u_bins"] = p.n_u_bins;
  j["counts"] = p.counts;
  j["n_configs"] = p.n_configs;
  j["flat"] = p.flat;
  j["pooled"] = p.pooled;
  j["pooled_stderr"] = p.pooled_stderr;
  j["flatness_pvalue"] = p.flatness_pvalue;
  j["contrast"] = p.contrast;
  j["contrast_stderr"] = p.contrast_stderr;
  j["pooled_contrast"] = p.pooled_contrast;
  j["pooled_contrast_stderr"] = p.pooled_contrast_stderr;
  j["raw_peak_to_trough"] = p.raw_peak_to_trough;
  if (p.cycling_discrepancy >= 0.0) j["cycling_discrepancy"] = p.cycling_discrepancy;
  j["inconclusive"] = p.inconclusive;
  j["note"] = p.note;
  art.write_json(m.label + "/profile.json", j);
}

// ---------------------------------------------------------------- manifest

json versions() {
  return {{"tightline", kVersion},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"openssl", OPENSSL_VERSION_TEXT}};
}

json load_previous(const fs::path& path, const ExperimentSpec& spec, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) return {};
  try {
    json j = json::parse(in);
    if (j.value("spec_hash", "") == spec.hash && j.value("seed", std::uint64_t{0}) == seed) return j;
  } catch (const std::exception&) {
  }
  return {};
}

struct ManifestState {
  json models = json::object();
  std::map<std::pair<std::string, std::string>, json> verdicts;
  std::map<std::string, Artifacts::Info> artifacts;
  std::vector<std::string> stages;
  std::vector<std::string> errors;
};

ManifestState state_from(const json& prev) {
  ManifestState st;
  if (prev.is_null()) return st;
  if (prev.contains("models")) st.models = prev["models"];
  for (const auto& v : prev.value("verdicts", json::array()))
    st.verdicts[{v["model"].get<std::string>(), v["analysis"].get<std::string>()}] = v;
  for (const auto& a : prev.value("artifacts", json::array()))
    st.artifacts[a["path"].get<std::string>()] = {a["sha256"].get<std::string>(), a["bytes"].get<std::size_t>()};
  for (const auto& s : prev.value("stages", json::array())) st.stages.push_back(s.get<std::string>());
  return st;
}

void write_manifest(const fs::path& root, const ExperimentSpec& spec, std::uint64_t seed, ManifestState& st,
                    const Artifacts& art, bool ok, const std::optional<double>& wall) {
  for (const auto& [p, info] : art.written()) st.artifacts[p] = info;
  json j;
  j["tightline_manifest"] = 1;
  j["experiment"] = spec.name;
  j["spec_hash"] = spec.hash;
  j["seed"] = seed;
  j["status"] = ok ? "complete" : "failed";
  if (!st.errors.empty()) j["errors"] = st.errors;
  std::sort(st.stages.begin(), st.stages.end());
  st.stages.erase(std::unique(st.stages.begin(), st.stages.end()), st.stages.end());
  j["stages"] = st.stages;
  j["versions"] = versions();
  j["models"] = st.models;
  json verdicts = json::array();
  for (const auto& [k, v] : st.verdicts) verdicts.push_back(v);
  j["verdicts"] = verdicts;
  json arts = json::array();
  for (const auto& [p, info] : st.artifacts) arts.push_back({{"path", p}, {"sha256", info.sha}, {"bytes", info.bytes}});
  j["artifacts"] = arts;
  if (wall) j["wall_clock_seconds"] = *wall;
  const std::string text = j.dump(2) + "\n";
  std::ofstream out(root / "manifest.json", std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write manifest");
}

// ---------------------------------------------------------------- per-model driver

bool wants(Stage stage, AnalysisKind k) {
  switch (stage) {
    case Stage::run: return true;
    case Stage::analyze:
      return k == AnalysisKind::variance || k == AnalysisKind::correlation || k == AnalysisKind::mixing;
    case Stage::phase: return k == AnalysisKind::phase;
    case Stage::decompose: return k == AnalysisKind::decompose;
    case Stage::generate: return false;
  }
  return false;
}

const AnalysisSpec* find_analysis(const ExperimentSpec& spec, AnalysisKind k) {
  for (const auto& a : spec.analyses)
    if (a.kind == k) return &a;
  return nullptr;
}

/// Lazily computed shared results for one model.
class ModelRun {
 public:
  ModelRun(const ExperimentSpec& spec, Ensemble ens)
      : spec_(spec), ens_(std::move(ens)), density_(density_of(ens_)) {}

  const Ensemble& ensemble() const { return ens_; }
  const DensitySummary& density() const { return density_; }

  const VarianceOut& variance() {
    if (!variance_) {
      const auto* a = find_analysis(spec_, AnalysisKind::variance);
      variance_ = run_variance(a ? a->variance : VarianceSpec{}, ens_, density_.rho);
    }
    return *variance_;
  }
  const MixingOut* mixing() {
    const auto* a = find_analysis(spec_, AnalysisKind::mixing);
    if (!a || ens_.lattice) return nullptr;
    if (!mixing_) mixing_ = run_mixing(a->mixing, ens_, density_.rho);
    return &*mixing_;
  }
  const PhaseOut& phase() {
    if (!phase_) {
      const auto* a = find_analysis(spec_, AnalysisKind::phase);
      phase_spec_ = a ? a->phase : PhaseSpec{};
      const auto* mx = mixing();
      phase_ = run_phase(phase_spec_, ens_, density_, variance().verdict, mx ? &mx->curve : nullptr);
    }
    return *phase_;
  }
  const PhaseSpec& phase_spec() const { return phase_spec_; }

 private:
  const ExperimentSpec& spec_;
  Ensemble ens_;
  DensitySummary density_;
  std::optional<VarianceOut> variance_;
  std::optional<MixingOut> mixing_;
  std::optional<PhaseOut> phase_;
  PhaseSpec phase_spec_;
};

void record_verdict(ManifestState& st, const std::string& model, const std::string& analysis, json v) {
  json row{{"model", model}, {"analysis", analysis}};
  row.update(v);
  st.verdicts[{model, analysis}] = row;
}

void analyse_model(const ExperimentSpec& spec, const ModelSpec& m, Stage stage, ModelRun& run, Artifacts& art,
                   ManifestState& st) {
  json& summary = st.models[m.label];
  summary["generator"] = to_string(m.kind);
  summary["lattice"] = run.ensemble().lattice;
  summary["configurations"] = run.ensemble().size();
  summary["density"] = density_json(run.density());

  std::vector<AnalysisKind> todo;
  for (const auto& a : spec.analyses)
    if (wants(stage, a.kind)) todo.push_back(a.kind);
  // stage subcommands fall back to their own analysis with defaults
  if (todo.empty()) {
    if (stage == Stage::analyze) todo.push_back(AnalysisKind::variance);
    if (stage == Stage::phase) todo.push_back(AnalysisKind::phase);
    if (stage == Stage::decompose) todo.push_back(AnalysisKind::decompose);
  }

  for (AnalysisKind k : todo) {
    const auto* spec_a = find_analysis(spec, k);
    switch (k) {
      case AnalysisKind::variance: {
        const auto& v = run.variance();
        write_variance(art, m, v);
        summary["tightness"] = to_string(v.verdict.status);
        record_verdict(st, m.label, "variance",
                       {{"verdict", to_string(v.verdict.status)}, {"growth_model", to_string(v.verdict.model)}, {"note", v.verdict.note}});
        break;
      }
      case AnalysisKind::correlation: {
        if (!run.ensemble().lattice) break;
        const std::size_t lag = spec_a ? spec_a->correlation.max_lag : 64;
        write_correlation(art, m, correlation_sum(run.ensemble().latt, lag));
        break;
      }
      case AnalysisKind::mixing: {
        const auto* mx = run.mixing();
        if (!mx) break;
        write_mixing(art, m, *mx, spec_a->mixing);
        record_verdict(st, m.label, "mixing", {{"verdict", to_string(mx->behaviour)}});
        break;
      }
      case AnalysisKind::phase: {
        const auto& p = run.phase();
        const auto& tight = run.variance().verdict;
        write_phase(art, m, p, run.phase_spec(), tight);
        summary["tightness"] = to_string(tight.status);
        summary["lambda"] = p.period ? json(p.period->lambda) : json(nullptr);
        summary["covariance_residual"] = p.covariance ? json(p.covariance->residual_q95) : json(nullptr);
        if (p.covariance) {
          summary["lambda_measured"] = p.covariance->lambda_measured;
          summary["lambda_measured_stderr"] = p.covariance->lambda_stderr;
        }
        summary["verdict"] = to_string(p.verdict.verdict);
        summary["reason"] = p.verdict.reason;
        summary["verdict_text"] = verdict_text(p.verdict, p.covariance);
        record_verdict(st, m.label, "phase", {{"verdict", to_string(p.verdict.verdict)}, {"reason", p.verdict.reason}});
        break;
      }
      case AnalysisKind::decompose: {
        const DecomposeSpec ds = spec_a ? spec_a->decompose : DecomposeSpec{};
        const auto d = run_decompose(ds, run.ensemble(), run.density());
        const bool pre = run.phase().verdict.verdict == Verdict::cyclic_factor_detected;
        write_decompose(art, m, d, pre);
        if (d.profile) {
          summary["contrast"] = d.profile->pooled_contrast;
          summary["contrast_stderr"] = d.profile->pooled_contrast_stderr;
        }
        break;
      }
    }
  }
}

}  // namespace

fs::path resolve_output_dir(const ExperimentSpec& spec, const RunOptions& opt) {
  if (opt.output_dir) return *opt.output_dir;
  fs::path p = spec.output_dir.empty() ? fs::path(spec.name) : fs::path(spec.output_dir);
  if (p.is_relative())
    if (const char* root = std::getenv("TIGHTLINE_OUTPUT_ROOT"); root && *root) p = fs::path(root) / p;
  return p;
}

RunResult run_stage(const ExperimentSpec& spec, Stage stage, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.output_dir = resolve_output_dir(spec, opt);
  res.manifest = res.output_dir / "manifest.json";
  fs::create_directories(res.output_dir);
  const std::uint64_t seed = opt.seed.value_or(spec.seed);

  ManifestState st = state_from(load_previous(res.manifest, spec, seed));
  st.stages.push_back(to_string(stage));
  Artifacts art(res.output_dir);
  art.write("spec.ini", spec.text);

  try {
    for (std::size_t i = 0; i < spec.models.size(); ++i) {
      const auto& m = spec.models[i];
      Ensemble ens;
      if (stage == Stage::generate || stage == Stage::run) {
        try {
          ens = generate(m, i, seed, std::max(1u, opt.jobs));
        } catch (const std::exception& ex) {
          throw GenerationError(m.label + ": " + ex.what());
        }
        write_ensemble_files(art, m, i, seed, ens);
        if (stage == Stage::generate) {
          st.models[m.label]["generator"] = to_string(m.kind);
          st.models[m.label]["configurations"] = ens.size();
          continue;
        }
      } else {
        ens = load(m, res.output_dir);
      }
      ModelRun run(spec, std::move(ens));
      analyse_model(spec, m, stage, run, art, st);
    }
  } catch (const std::exception& ex) {
    res.ok = false;
    res.error = ex.what();
    st.errors.push_back(ex.what());
  }
  std::optional<double> wall;
  if (opt.record_timing) wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(res.output_dir, spec, seed, st, art, res.ok, wall);
  return res;
}

ReportResult report(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read manifest " + manifest_path.string());
  const json j = json::parse(in);
  const fs::path root = manifest_path.parent_path();
  ReportResult r;
  for (const auto& a : j.value("artifacts", json::array())) {
    const auto rel = a["path"].get<std::string>();
    const fs::path p = root / rel;
    if (!fs::exists(p)) r.missing.push_back(rel);
    else if (sha256_file(p) != a["sha256"].get<std::string>()) r.modified.push_back(rel);
  }

  // pad by display width; the table carries UTF-8 plus-minus signs
  auto pad = [](const std::string& t, std::size_t width) {
    std::size_t cols = 0;
    for (unsigned char c : t) cols += (c & 0xC0) != 0x80;
    return t + std::string(cols < width ? width - cols : 1, ' ');
  };
  auto fmt = [](const json& v, int prec) {
    if (!v.is_number()) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(prec) << v.get<double>();
    return s.str();
  };
  std::ostringstream os;
  os << "experiment " << j.value("experiment", "?") << "  seed " << j.value("seed", std::uint64_t{0}) << "  spec "
     << j.value("spec_hash", "").substr(0, 12) << "  status " << j.value("status", "?") << "\n";
  os << pad("model", 18) << pad("tight", 14) << pad("rho / alpha", 20) << pad("lambda", 9) << pad("cov q95", 9)
     << "verdict\n";
  const json models = j.value("models", json::object());
  for (const auto& [label, m] : models.items()) {
    std::string dens = "-";
    if (m.contains("density")) {
      const auto& d = m["density"];
      if (d.contains("alpha")) dens = "α=" + fmt(d["alpha"], 3) + "±" + fmt(d["alpha_stderr"], 3);
      else dens = "ρ=" + fmt(d["rho"], 3) + "±" + fmt(d["rho_stderr"], 3);
    }
    os << pad(label, 18) << pad(m.value("tightness", "-"), 14) << pad(dens, 20) << pad(fmt(m.value("lambda", json()), 3), 9)
       << pad(fmt(m.value("covariance_residual", json()), 3), 9) << m.value("verdict_text", std::string("-")) << "\n";
  }
  for (const auto& e : j.value("errors", json::array())) os << "error: " << e.get<std::string>() << "\n";
  if (!r.missing.empty()) {
    os << "missing files:\n";
    for (const auto& p : r.missing) os << "  " << p << "\n";
  }
  if (!r.modified.empty()) {
    os << "modified files (checksum mismatch):\n";
    for (const auto& p : r.modified) os << "  " << p << "\n";
  }
  r.text = os.str();
  return r;
}

}  // namespace tightline
