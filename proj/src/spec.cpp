#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "tightline/errors.hpp"
#include "tightline/experiment.hpp"

namespace tightline {

namespace {

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  std::string kind;  // experiment | model | analysis
  std::vector<std::string> args;
  int line = 0;
  std::map<std::string, Entry> entries;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i)
    if (line[i] == '#' || line[i] == ';') return line.substr(0, i);
  return line;
}

std::vector<Section> tokenize(const std::string& text) {
  std::vector<Section> out;
  std::istringstream is(text);
  std::string raw;
  int no = 0;
  while (std::getline(is, raw)) {
    ++no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw SpecError("unterminated section header", no);
      auto words = split_words(line.substr(1, line.size() - 2));
      if (words.empty()) throw SpecError("empty section header", no);
      Section s;
      s.kind = words.front();
      s.args.assign(words.begin() + 1, words.end());
      s.line = no;
      out.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SpecError("expected 'key = value'", no);
    if (out.empty()) throw SpecError("key outside any section", no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw SpecError("missing key", no);
    if (value.empty()) throw SpecError("missing value for '" + key + "'", no);
    auto& entries = out.back().entries;
    if (entries.count(key)) throw SpecError("duplicate key '" + key + "'", no);
    entries[key] = {value, no};
  }
  return out;
}

std::string section_title(const Section& s) {
  std::string t = "[" + s.kind;
  for (const auto& a : s.args) t += " " + a;
  return t + "]";
}

void check_keys(const Section& s, std::initializer_list<const char*> allowed) {
  for (const auto& [key, e] : s.entries) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw SpecError("unknown key '" + key + "' in " + section_title(s), e.line);
  }
}

double parse_real(const Entry& e, const std::string& key) {
  double v = 0.0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v))
    throw SpecError("'" + key + "' expects a number, got '" + e.value + "'", e.line);
  return v;
}

std::uint64_t parse_uint(const Entry& e, const std::string& key) {
  std::uint64_t v = 0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end)
    throw SpecError("'" + key + "' expects a non-negative integer, got '" + e.value + "'", e.line);
  return v;
}

bool parse_bool(const Entry& e, const std::string& key) {
  if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "no" || e.value == "0") return false;
  throw SpecError("'" + key + "' expects true or false, got '" + e.value + "'", e.line);
}

std::vector<double> parse_list(const Entry& e, const std::string& key) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(e.value);
  while (std::getline(is, item, ',')) {
    Entry sub{trim(item), e.line};
    if (sub.value.empty()) throw SpecError("'" + key + "' has an empty list item", e.line);
    out.push_back(parse_real(sub, key));
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const Section& s) : s_(s) {}

  const Entry* find(const std::string& key) const {
    auto it = s_.entries.find(key);
    return it == s_.entries.end() ? nullptr : &it->second;
  }
  int line_of(const std::string& key) const {
    const auto* e = find(key);
    return e ? e->line : s_.line;
  }

  template <class T>
  void real(const std::string& key, T& out, double min_exclusive = -INFINITY) {
    if (const auto* e = find(key)) {
      const double v = parse_real(*e, key);
      if (!(v > min_exclusive)) throw SpecError("'" + key + "' must exceed " + fmt(min_exclusive), e->line);
      out = static_cast<T>(v);
    }
  }
  void count(const std::string& key, std::size_t& out, std::size_t min = 0) {
    if (const auto* e = find(key)) {
      const auto v = parse_uint(*e, key);
      if (v < min) throw SpecError("'" + key + "' must be at least " + std::to_string(min), e->line);
      out = static_cast<std::size_t>(v);
    }
  }
  void flag(const std::string& key, bool& out) {
    if (const auto* e = find(key)) out = parse_bool(*e, key);
  }
  void list(const std::string& key, std::vector<double>& out) {
    if (const auto* e = find(key)) out = parse_list(*e, key);
  }

 private:
  static std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  }
  const Section& s_;
};

ModelKind model_kind(const std::string& name, int line) {
  static const std::pair<const char*, ModelKind> names[] = {
      {"shifted_lattice", ModelKind::shifted_lattice}, {"jittered_lattice", ModelKind::jittered_lattice},
      {"poisson", ModelKind::poisson},                 {"jellium", ModelKind::jellium},
      {"two_component", ModelKind::two_component},     {"cluster_chain", ModelKind::cluster_chain},
      {"rmt_bulk", ModelKind::rmt_bulk},               {"iid_sign_chain", ModelKind::iid_sign_chain}};
  for (const auto& [n, k] : names)
    if (name == n) return k;
  throw SpecError("unknown model '" + name + "'", line);
}

AnalysisKind analysis_kind(const std::string& name, int line) {
  if (name == "variance") return AnalysisKind::variance;
  if (name == "phase") return AnalysisKind::phase;
  if (name == "decompose") return AnalysisKind::decompose;
  if (name == "mixing") return AnalysisKind::mixing;
  if (name == "correlation") return AnalysisKind::correlation;
  throw SpecError("unknown analysis '" + name + "'", line);
}

void check_ladder(const std::vector<double>& v, const std::string& key, const Reader& r) {
  if (v.empty()) return;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw SpecError("'" + key + "' entries must be positive", r.line_of(key));
    if (i > 0 && !(v[i] > v[i - 1])) throw SpecError("'" + key + "' must be strictly increasing", r.line_of(key));
  }
}

ModelSpec read_model(const Section& s, std::size_t default_replicas) {
  if (s.args.empty()) throw SpecError("model section needs a generator name", s.line);
  if (s.args.size() > 2) throw SpecError("model section takes a generator name and an optional label", s.line);
  ModelSpec m;
  m.kind = model_kind(s.args[0], s.line);
  m.label = s.args.size() == 2 ? s.args[1] : s.args[0];
  m.line = s.line;
  m.replicas = default_replicas;
  Reader r(s);
  r.count("replicas", m.replicas, 1);

  auto echo = [&](const std::string& k, const auto& v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    m.params[k] = os.str();
  };

  switch (m.kind) {
    case ModelKind::shifted_lattice:
    case ModelKind::jittered_lattice:
    case ModelKind::rmt_bulk:
    case ModelKind::iid_sign_chain: {
      check_keys(s, {"replicas", "n"});
      if (m.kind == ModelKind::rmt_bulk) m.n = 512;
      if (m.kind == ModelKind::iid_sign_chain) m.n = 16384;
      r.count("n", m.n, 8);
      echo("n", m.n);
      break;
    }
    case ModelKind::poisson:
      check_keys(s, {"replicas", "length", "rho"});
      r.real("length", m.length, 0.0);
      r.real("rho", m.rho, 0.0);
      echo("length", m.length);
      echo("rho", m.rho);
      break;
    case ModelKind::jellium: {
      check_keys(s, {"replicas", "n_particles", "beta", "background_density", "sweeps", "burn_in",
                     "proposal_scale", "thin"});
      auto& p = m.jellium;
      r.count("n_particles", p.n_particles, 2);
      r.real("beta", p.beta, 0.0);
      r.real("background_density", p.background_density, 0.0);
      r.count("sweeps", p.sweeps, 1);
      r.count("burn_in", p.burn_in, 0);
      r.real("proposal_scale", p.proposal_scale, 0.0);
      r.count("thin", p.thin, 0);
      if (p.burn_in >= p.sweeps) throw SpecError("'burn_in' must be below 'sweeps'", r.line_of("burn_in"));
      echo("n_particles", p.n_particles);
      echo("beta", p.beta);
      echo("background_density", p.background_density);
      echo("sweeps", p.sweeps);
      echo("burn_in", p.burn_in);
      echo("proposal_scale", p.proposal_scale);
      echo("thin", p.thin);
      break;
    }
    case ModelKind::two_component: {
      check_keys(s, {"replicas", "n_pairs", "beta", "unit", "length", "sweeps", "burn_in", "proposal_scale", "thin"});
      auto& p = m.two_component;
      r.count("n_pairs", p.n_pairs, 1);
      r.real("beta", p.beta, 0.0);
      r.real("unit", p.unit, 0.0);
      r.real("length", p.length, 0.0);
      r.count("sweeps", p.sweeps, 1);
      r.count("burn_in", p.burn_in, 0);
      r.real("proposal_scale", p.proposal_scale, 0.0);
      r.count("thin", p.thin, 0);
      if (p.burn_in >= p.sweeps) throw SpecError("'burn_in' must be below 'sweeps'", r.line_of("burn_in"));
      echo("n_pairs", p.n_pairs);
      echo("beta", p.beta);
      echo("unit", p.unit);
      echo("length", p.length);
      echo("sweeps", p.sweeps);
      echo("burn_in", p.burn_in);
      echo("proposal_scale", p.proposal_scale);
      echo("thin", p.thin);
      break;
    }
    case ModelKind::cluster_chain:
      check_keys(s, {"replicas", "n_sites", "mean_cluster_size"});
      r.count("n_sites", m.cluster.n_sites, 8);
      r.real("mean_cluster_size", m.cluster.mean_cluster_size, 2.0);
      echo("n_sites", m.cluster.n_sites);
      echo("mean_cluster_size", m.cluster.mean_cluster_size);
      break;
  }
  echo("replicas", m.replicas);
  return m;
}

AnalysisSpec read_analysis(const Section& s) {
  if (s.args.size() != 1) throw SpecError("analysis section needs exactly one analysis name", s.line);
  AnalysisSpec a;
  a.kind = analysis_kind(s.args[0], s.line);
  a.line = s.line;
  Reader r(s);
  switch (a.kind) {
    case AnalysisKind::variance: {
      check_keys(s, {"lengths", "length_min", "lengths_per_octave", "integer_lengths", "estimator",
                     "windows_per_replica", "knee"});
      auto& v = a.variance;
      r.list("lengths", v.lengths);
      check_ladder(v.lengths, "lengths", r);
      r.real("length_min", v.length_min, 0.0);
      std::size_t per = 1;
      r.count("lengths_per_octave", per, 1);
      v.per_octave = static_cast<int>(std::min<std::size_t>(per, 1024));
      if (r.find("integer_lengths")) {
        bool b = false;
        r.flag("integer_lengths", b);
        v.integer_lengths = b;
      }
      if (const auto* e = r.find("estimator")) {
        if (e->value == "pooled") v.estimator = WindowEstimator::pooled;
        else if (e->value == "disjoint") v.estimator = WindowEstimator::disjoint;
        else throw SpecError("'estimator' must be pooled or disjoint", e->line);
      }
      r.count("windows_per_replica", v.windows_per_replica, 1);
      r.real("knee", v.knee, -1e-300);
      break;
    }
    case AnalysisKind::phase: {
      check_keys(s, {"t_ladder", "cesaro_tol", "e_const", "shifts", "residual_tol"});
      auto& p = a.phase;
      r.list("t_ladder", p.t_ladder);
      check_ladder(p.t_ladder, "t_ladder", r);
      if (!p.t_ladder.empty() && p.t_ladder.size() < 3) throw SpecError("'t_ladder' needs at least 3 rungs", r.line_of("t_ladder"));
      if (r.find("cesaro_tol")) {
        double t = 0.0;
        r.real("cesaro_tol", t, 0.0);
        p.cesaro_tol = t;
      }
      r.real("e_const", p.e_const);
      r.list("shifts", p.shifts);
      r.real("residual_tol", p.residual_tol, 0.0);
      break;
    }
    case AnalysisKind::decompose: {
      check_keys(s, {"bins", "u_bins", "t_ladder", "cesaro_tol", "cycling", "block"});
      auto& d = a.decompose;
      r.count("bins", d.bins, 4);
      r.count("u_bins", d.u_bins, 2);
      r.list("t_ladder", d.t_ladder);
      check_ladder(d.t_ladder, "t_ladder", r);
      if (!d.t_ladder.empty() && d.t_ladder.size() < 3) throw SpecError("'t_ladder' needs at least 3 rungs", r.line_of("t_ladder"));
      if (r.find("cesaro_tol")) {
        double t = 0.0;
        r.real("cesaro_tol", t, 0.0);
        d.cesaro_tol = t;
      }
      r.flag("cycling", d.cycling);
      r.count("block", d.block, 1);
      break;
    }
    case AnalysisKind::mixing: {
      check_keys(s, {"probe_scale", "lags", "bias_correct", "cross_replica", "min_lag"});
      auto& m = a.mixing;
      r.real("probe_scale", m.probe_scale, 0.0);
      r.list("lags", m.lags);
      check_ladder(m.lags, "lags", r);
      r.flag("bias_correct", m.bias_correct);
      r.flag("cross_replica", m.cross_replica);
      r.real("min_lag", m.min_lag, 0.0);
      break;
    }
    case AnalysisKind::correlation:
      check_keys(s, {"max_lag"});
      r.count("max_lag", a.correlation.max_lag, 1);
      break;
  }
  return a;
}

}  // namespace

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::shifted_lattice: return "shifted_lattice";
    case ModelKind::jittered_lattice: return "jittered_lattice";
    case ModelKind::poisson: return "poisson";
    case ModelKind::jellium: return "jellium";
    case ModelKind::two_component: return "two_component";
    case ModelKind::cluster_chain: return "cluster_chain";
    case ModelKind::rmt_bulk: return "rmt_bulk";
    case ModelKind::iid_sign_chain: return "iid_sign_chain";
  }
  return "?";
}

bool is_lattice(ModelKind k) { return k == ModelKind::cluster_chain || k == ModelKind::iid_sign_chain; }

const char* to_string(AnalysisKind k) {
  switch (k) {
    case AnalysisKind::variance: return "variance";
    case AnalysisKind::phase: return "phase";
    case AnalysisKind::decompose: return "decompose";
    case AnalysisKind::mixing: return "mixing";
    case AnalysisKind::correlation: return "correlation";
  }
  return "?";
}

ExperimentSpec parse_spec(const std::string& text) {
  const auto sections = tokenize(text);
  ExperimentSpec spec;
  spec.text = text;
  spec.hash = sha256_hex(text);

  const Section* exp = nullptr;
  for (const auto& s : sections) {
    if (s.kind != "experiment") continue;
    if (exp) throw SpecError("second [experiment] section", s.line);
    if (!s.args.empty()) throw SpecError("[experiment] takes no arguments", s.line);
    exp = &s;
  }
  if (!exp) throw SpecError("missing [experiment] section");
  check_keys(*exp, {"name", "seed", "replicas", "output_dir"});
  Reader r(*exp);
  if (!r.find("name")) throw SpecError("[experiment] needs 'name'", exp->line);
  if (!r.find("seed")) throw SpecError("[experiment] needs 'seed'", exp->line);
  spec.name = r.find("name")->value;
  spec.seed = parse_uint(*r.find("seed"), "seed");
  r.count("replicas", spec.replicas, 1);
  if (const auto* e = r.find("output_dir")) spec.output_dir = e->value;

  std::set<std::string> labels;
  std::set<AnalysisKind> seen;
  for (const auto& s : sections) {
    if (s.kind == "experiment") continue;
    if (s.kind == "model") {
      auto m = read_model(s, spec.replicas);
      if (!labels.insert(m.label).second) throw SpecError("duplicate model label '" + m.label + "'", s.line);
      spec.models.push_back(std::move(m));
    } else if (s.kind == "analysis") {
      auto a = read_analysis(s);
      if (!seen.insert(a.kind).second) throw SpecError(std::string("analysis '") + to_string(a.kind) + "' given twice", s.line);
      spec.analyses.push_back(std::move(a));
    } else {
      throw SpecError("unknown section " + section_title(s), s.line);
    }
  }
  if (spec.models.empty()) throw SpecError("no [model ...] section");

  // lattice models need integer shifts and lengths
  const bool any_lattice = std::any_of(spec.models.begin(), spec.models.end(), [](const auto& m) { return is_lattice(m.kind); });
  if (any_lattice) {
    auto integral = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return x == std::floor(x); });
    };
    for (const auto& a : spec.analyses) {
      if (a.kind == AnalysisKind::phase && !integral(a.phase.shifts))
        throw SpecError("lattice models need integer 'shifts'", a.line);
      if (a.kind == AnalysisKind::variance && !integral(a.variance.lengths))
        throw SpecError("lattice models need integer 'lengths'", a.line);
    }
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot read spec file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace tightline
