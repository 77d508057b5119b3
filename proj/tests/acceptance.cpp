// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [criterion ...] [--out DIR] [--jobs N]
//
// Pipeline criteria run the specs in specs/ into DIR (default
// ./acceptance_out) and read back the manifests and artifacts.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tightline/antiderivative.hpp"
#include "tightline/core.hpp"
#include "tightline/cyclic_phase.hpp"
#include "tightline/experiment.hpp"
#include "tightline/fluctuations.hpp"
#include "tightline/generators.hpp"
#include "tightline/stats.hpp"

using namespace tightline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path g_out = "acceptance_out";
unsigned g_jobs = 1;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "" : "FAILED ") + what);
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// columns of a numeric CSV with a header row
std::map<std::string, std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) names.push_back(c);
  std::map<std::string, std::vector<double>> cols;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::size_t i = 0;
    for (std::string c; std::getline(ls, c, ',') && i < names.size(); ++i) cols[names[i]].push_back(std::stod(c));
  }
  return cols;
}

// runs a spec once per output directory and process
fs::path run_spec(const std::string& name, const std::string& tag = "run1", unsigned jobs = 0) {
  static std::set<std::string> done;
  const fs::path dir = g_out / tag / name;
  if (done.insert(tag + "/" + name).second) {
    const auto spec = load_spec(fs::path(TIGHTLINE_SPEC_DIR) / (name + ".ini"));
    RunOptions opt;
    opt.output_dir = dir;
    opt.jobs = jobs ? jobs : g_jobs;
    fs::remove_all(dir);
    const auto res = run_stage(spec, Stage::run, opt);
    if (!res.ok) throw std::runtime_error(name + ": " + res.error);
  }
  return dir;
}

double frac_var(double L) {
  const double f = L - std::floor(L);
  return f * (1.0 - f);
}

// ---------------------------------------------------------------- 1

Outcome shifted_lattice() {
  Outcome o;
  const auto spec = load_spec(fs::path(TIGHTLINE_SPEC_DIR) / "shifted_lattice.ini");
  const auto& m = spec.models.at(0);
  std::vector<PointChargeConfiguration> ens;
  for (std::size_t r = 0; r < m.replicas; ++r) {
    SeededRng rng(spec.seed, derive_stream(0, r));
    ens.push_back(gen_shifted_lattice(m.n, rng));
  }
  const std::span<const PointChargeConfiguration> es(ens);

  std::vector<double> lengths;
  for (int k = 1; k <= 32; ++k) lengths.push_back(0.5 * k);
  const auto c = variance_growth(es, lengths, 1.0);
  double worst_z = 0;
  bool var_ok = true;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double d = std::abs(c.var_F[i] - frac_var(lengths[i]));
    var_ok = var_ok && d <= 3 * c.stderr_var[i] + 1e-12;
    if (c.stderr_var[i] > 0) worst_z = std::max(worst_z, d / c.stderr_var[i]);
  }
  o.check(var_ok, fmt("var_F = {L}(1-{L}) at L = 0.5..16 (worst %.2f se)", worst_z));

  double worst_e0 = 0;
  for (const auto& cfg : ens) {
    const double u = cfg.positions()[0];
    const auto tr = cesaro_field(cfg, 1.0, default_t_ladder(cfg.window().length()));
    worst_e0 = std::max(worst_e0, std::abs(tr.base_value - (u - 0.5)));
  }
  o.check(worst_e0 < 1e-3, fmt("max |E0 - (u - 1/2)| = %.2e", worst_e0));

  const std::vector<double> shifts{0.1, 0.37, 1.0};
  const auto cov = covariance_test(es, 1.0, 1.0, shifts);
  o.check(cov.residual_q95 < 1e-2 && cov.n_excluded == 0, fmt("covariance residual q95 %.2e rad", cov.residual_q95));
  const auto d = estimate_density(es);
  const double lam = predicted_period(d, 1.0, PeriodMode::continuum).lambda;
  o.check(std::abs(lam - 1) < 1e-3 && std::abs(cov.lambda_measured - 1) < 1e-3,
          fmt("lambda = %.6f, measured %.6f", lam, cov.lambda_measured));
  return o;
}

// ---------------------------------------------------------------- 2

Outcome poisson() {
  Outcome o;
  const auto dir = run_spec("poisson");
  const auto v = read_csv(dir / "poisson/variance.csv");
  std::vector<double> L, var, se;
  for (std::size_t i = 0; i < v.at("L").size(); ++i)
    if (v.at("L")[i] <= 128) {
      L.push_back(v.at("L")[i]);
      var.push_back(v.at("var_F")[i]);
      se.push_back(v.at("stderr_var")[i]);
    }
  const auto fit = stats::fit_line(L, var);
  o.check(std::abs(fit.slope - 1) < 0.05, fmt("slope %.4f +- %.4f over L <= 128", fit.slope, fit.slope_se));
  const auto t = read_json(dir / "poisson/tightness.json");
  o.check(t["model"] == "linear", "growth model " + t["model"].get<std::string>());
  const auto m = read_json(dir / "manifest.json")["models"]["poisson"];
  o.check(m["verdict"] == "hypotheses_not_met" && m["reason"] == "not tight",
          "verdict " + m["verdict_text"].get<std::string>());
  return o;
}

// ---------------------------------------------------------------- 3

double pairwise_line_energy(const std::vector<double>& x, double rho, double L) {
  double u = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) u -= 0.5 * std::abs(x[i] - x[j]);
  for (double xi : x) u += 0.25 * rho * (xi * xi + (L - xi) * (L - xi));
  return u;
}

double pairwise_ring_energy(const std::vector<double>& x, double L) {
  double u = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      double r = std::fmod(x[i] - x[j], L);
      if (r < 0) r += L;
      u += 0.5 * (r * r / L - r);
    }
  return u;
}

double energy_identity_spread() {
  SeededRng rng(20240611);
  double worst = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    const double rho = 1.0;
    const double L = static_cast<double>(n) / rho;
    double lref = 0, rref = 0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> x(n);
      for (auto& v : x) v = rng.uniform() * L;
      std::sort(x.begin(), x.end());
      const double dl = jellium_line_energy(x, rho) - pairwise_line_energy(x, rho, L);
      const double dr = jellium_ring_energy(x, rho) - pairwise_ring_energy(x, L);
      if (trial == 0) {
        lref = dl;
        rref = dr;
      }
      worst = std::max({worst, std::abs(dl - lref), std::abs(dr - rref)});
    }
  }
  return worst;
}

// aligned first-harmonic contrast of the phase-binned profiles, streamed
// straight from the chains
ComponentProfile streamed_profile(double beta, std::size_t chains, std::size_t production, std::uint64_t stream) {
  ComponentAccumulator acc(1.0, 4, 16, 100);
  PhaseSettings ps;
  ps.tol = 0.5;
  for (std::size_t c = 0; c < chains; ++c) {
    JelliumParams p;
    p.n_particles = 256;
    p.beta = beta;
    p.burn_in = 1000;
    p.sweeps = p.burn_in + production;
    SeededRng rng(1729, derive_stream(stream, c));
    gen_jellium(p, rng, [&](const PointChargeConfiguration& cfg) {
      if (const auto phi = phase_of(cfg, 1.0, ps)) acc.add(cfg, *phi);
    });
  }
  return acc.finish();
}

Outcome jellium() {
  Outcome o;
  const double spread = energy_identity_spread();
  o.check(spread < 1e-9, fmt("energy identity spread %.1e on N <= 8", spread));

  const auto dir = run_spec("jellium");
  const auto man = read_json(dir / "manifest.json");
  for (const char* label : {"beta2", "beta1"}) {
    const auto& m = man["models"][label];
    o.check(m["configurations"].get<std::size_t>() >= 200,
            fmt("%s: %zu snapshots", label, m["configurations"].get<std::size_t>()));
    o.check(m["tightness"] == "tight", std::string(label) + ": variance " + m["tightness"].get<std::string>());
    const double lam = m["lambda_measured"].get<double>();
    o.check(m["verdict"] == "cyclic_factor_detected" && std::abs(lam - 1) < 0.02 &&
                std::abs(m["lambda"].get<double>() - 1) < 0.02,
            std::string(label) + ": " + m["verdict_text"].get<std::string>() + fmt(" (measured %.4f)", lam));
    const auto mix = read_json(dir / label / "mixing.json");
    o.check(mix["behaviour"] == "non_decaying", std::string(label) + ": mixing " + mix["behaviour"].get<std::string>());
  }
  std::uint64_t stream = 100;
  for (double beta : {2.0, 1.0}) {
    const auto p = streamed_profile(beta, 4, 75000, stream++);
    const double z = p.pooled_contrast / p.pooled_contrast_stderr;
    o.check(z > 5, fmt("beta %.0f: contrast %.5f +- %.5f (%.1f se, %zu snapshots), flatness p %.2f", beta,
                       p.pooled_contrast, p.pooled_contrast_stderr, z, p.n_configs, p.flatness_pvalue));
  }
  return o;
}

// ---------------------------------------------------------------- 4

Outcome two_component() {
  Outcome o;
  const auto dir = run_spec("two_component");
  const auto m = read_json(dir / "manifest.json")["models"]["two_component"];
  o.check(m["tightness"] == "tight", "variance " + m["tightness"].get<std::string>());
  o.check(m["verdict"] == "no_cyclic_factor", "verdict " + m["verdict_text"].get<std::string>());
  const auto mix = read_json(dir / "two_component/mixing.json");
  o.check(mix["behaviour"] == "decaying", "mixing " + mix["behaviour"].get<std::string>());
  return o;
}

// ---------------------------------------------------------------- 5

Outcome rmt_bulk() {
  Outcome o;
  const auto dir = run_spec("rmt_bulk");
  const auto v = read_csv(dir / "rmt_bulk/variance.csv");
  std::vector<double> lnL, var;
  for (std::size_t i = 0; i < v.at("L").size(); ++i)
    if (v.at("L")[i] >= 2 && v.at("L")[i] <= 512 / 8) {
      lnL.push_back(std::log(v.at("L")[i]));
      var.push_back(v.at("var_F")[i]);
    }
  const auto fit = stats::fit_line(lnL, var);
  o.check(fit.slope > 0 && fit.r_squared > 0.9,
          fmt("a + b ln L on L = 2..64: b = %.4f +- %.4f, R^2 = %.4f", fit.slope, fit.slope_se, fit.r_squared));
  const auto t = read_json(dir / "rmt_bulk/tightness.json");
  o.check(t["model"] == "log", "growth model " + t["model"].get<std::string>());
  o.check(!t["is_tight"].get<bool>(), "tightness " + t["status"].get<std::string>());
  return o;
}

// ---------------------------------------------------------------- 6

Outcome cluster_chain() {
  Outcome o;
  const auto dir = run_spec("cluster_chain");
  const auto cs = read_json(dir / "cluster_chain/correlation.json");
  const double s0 = cs["S0"], s0e = cs["S0_stderr"], s1 = cs["S1"], s1e = cs["S1_stderr"];
  o.check(std::abs(s0) < 3 * s0e, fmt("S0 = %.4f +- %.4f", s0, s0e));
  const auto v = read_csv(dir / "cluster_chain/variance.csv");
  double worst = -1e300;
  bool bound = true;
  for (std::size_t i = 0; i < v.at("L").size(); ++i) {
    const double slack = 2 * s1 + 3 * std::hypot(v.at("stderr_var")[i], 2 * s1e) - v.at("var_F")[i];
    bound = bound && slack >= 0;
    worst = std::max(worst, v.at("var_F")[i]);
  }
  o.check(bound, fmt("Var(S_I) <= 2 S1 = %.3f at all %zu lengths (max %.3f)", 2 * s1, v.at("L").size(), worst));
  const auto m = read_json(dir / "manifest.json")["models"]["cluster_chain"];
  const double lam = m["lambda_measured"].get<double>();
  o.check(m["verdict"] == "cyclic_factor_detected" && std::abs(lam - 2) < 0.04 &&
              std::abs(m["lambda"].get<double>() - 2) < 0.04,
          m["verdict_text"].get<std::string>() + fmt(" (measured %.4f)", lam));
  return o;
}

// ---------------------------------------------------------------- 7

Outcome coboundary() {
  Outcome o;
  const std::size_t n = 100000;
  double worst_dev = 0, worst_res = 0;
  for (const auto& [e, rho] : {std::pair{0.5, 0.25}, std::pair{0.7, 0.3}, std::pair{1.0 / 3.0, 0.1}}) {
    SeededRng rng(7, static_cast<std::uint64_t>(e * 1000));
    // g* i.i.d. bounded multiples of e; q_k = g*_{k+1} - g*_k + rho
    std::vector<std::int64_t> gs(n + 1), m(n);
    for (auto& v : gs) v = static_cast<std::int64_t>(rng.below(9)) - 4;
    for (std::size_t k = 0; k < n; ++k) m[k] = gs[k + 1] - gs[k];
    const LatticeChargeConfiguration cfg(m, rho, e);
    const auto sol = lattice_coboundary(cfg, rho);
    double lo = 1e300, hi = -1e300;
    for (std::size_t j = 0; j <= n; ++j) {
      const double d = sol.g_values[j] - e * static_cast<double>(gs[j]);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    worst_dev = std::max(worst_dev, hi - lo);
    worst_res = std::max(worst_res, sol.residual);
  }
  o.check(worst_res < 1e-12, fmt("residual %.1e (0 for the dyadic chain, rounding otherwise)", worst_res));
  o.check(worst_dev < 1e-12, fmt("max deviation after constant alignment %.1e", worst_dev));
  return o;
}

// ---------------------------------------------------------------- 8

Outcome minimality() {
  Outcome o;
  const std::vector<double> lengths{0.5, 1.5, 2.5, 7.5};
  const std::size_t reps = 2000, n = 256;
  std::vector<PointChargeConfiguration> sh, ji, po;
  for (std::size_t r = 0; r < reps; ++r) {
    SeededRng a(8, derive_stream(0, r)), b(8, derive_stream(1, r)), c(8, derive_stream(2, r));
    sh.push_back(gen_shifted_lattice(n, a));
    ji.push_back(gen_jittered_lattice(n, b));
    po.push_back(gen_poisson(static_cast<double>(n), 1.0, c));
  }
  const auto vs = variance_growth(std::span<const PointChargeConfiguration>(sh), lengths, 1.0);
  const auto vj = variance_growth(std::span<const PointChargeConfiguration>(ji), lengths, 1.0);
  const auto vp = variance_growth(std::span<const PointChargeConfiguration>(po), lengths, 1.0);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    const double z1 = (vj.var_F[i] - vs.var_F[i]) / std::hypot(vj.stderr_var[i], vs.stderr_var[i]);
    const double z2 = (vp.var_F[i] - vj.var_F[i]) / std::hypot(vp.stderr_var[i], vj.stderr_var[i]);
    o.check(z1 > 3 && z2 > 3, fmt("L = %.1f: %.4f < %.4f < %.4f (gaps %.1f, %.1f se)", lengths[i], vs.var_F[i],
                                  vj.var_F[i], vp.var_F[i], z1, z2));
  }
  return o;
}

// ---------------------------------------------------------------- 9

Outcome determinism() {
  Outcome o;
  const unsigned other = g_jobs > 1 ? 1 : 2;
  for (const char* name : {"shifted_lattice", "poisson", "jellium", "two_component", "rmt_bulk", "cluster_chain"}) {
    const auto a = run_spec(name, "run1");
    const auto b = run_spec(name, "run2", other);
    const bool same = slurp(a / "manifest.json") == slurp(b / "manifest.json");
    o.check(same, std::string(name) + (same ? ": manifest identical" : ": manifests differ"));
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  g_jobs = std::max(1u, std::thread::hardware_concurrency());
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) g_out = argv[++i];
    else if (a == "--jobs" && i + 1 < argc) g_jobs = static_cast<unsigned>(std::stoul(argv[++i]));
    else only.insert(std::stoi(a));
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"shifted-lattice exactness", shifted_lattice},
      {"Poisson negative control", poisson},
      {"jellium symmetry breaking", jellium},
      {"neutral two-component gas", two_component},
      {"random-matrix bulk", rmt_bulk},
      {"neutral-cluster chain", cluster_chain},
      {"coboundary recovery", coboundary},
      {"variance minimality", minimality},
      {"determinism", determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.check(false, std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !r.pass;
    std::printf("criterion %d %s  %s (%.0f s)\n", id, r.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), secs);
    for (const auto& n : r.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
