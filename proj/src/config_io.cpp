#include "tightline/config_io.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "tightline/errors.hpp"

namespace tightline {

namespace {

constexpr const char* kMagic = "#tightline-configuration";

const char* boundary_name(Boundary b) { return b == Boundary::periodic ? "periodic" : "open"; }

[[noreturn]] void fail(int line, const std::string& what) {
  throw ArgumentError("configuration line " + std::to_string(line) + ": " + what);
}

template <class T>
T parse_number(std::string_view text, int line) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(line, "cannot parse number '" + std::string(text) + "'");
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find('\t', start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

void write_header(std::ostream& os, const char* kind) {
  os << kMagic << "\t1\n";
  os << "#kind\t" << kind << '\n';
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw ArgumentError("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_configuration(std::ostream& os, const PointChargeConfiguration& cfg) {
  write_header(os, "continuum");
  os << "#window\t" << format_double(cfg.window().lo) << '\t' << format_double(cfg.window().hi) << '\n';
  os << "#unit\t" << format_double(cfg.unit()) << '\n';
  os << "#gamma\t0\n";
  os << "#boundary\t" << boundary_name(cfg.boundary()) << '\n';
  os << "#seed\t" << cfg.provenance().seed << '\n';
  os << "#stream\t" << cfg.provenance().stream << '\n';
  os << "#count\t" << cfg.size() << '\n';
  for (std::size_t i = 0; i < cfg.size(); ++i)
    os << format_double(cfg.positions()[i]) << '\t' << cfg.multiples()[i] << '\n';
}

void write_configuration(std::ostream& os, const LatticeChargeConfiguration& cfg) {
  write_header(os, "lattice");
  os << "#unit\t" << format_double(cfg.unit()) << '\n';
  os << "#gamma\t" << format_double(cfg.gamma()) << '\n';
  os << "#boundary\t" << boundary_name(cfg.boundary()) << '\n';
  os << "#seed\t" << cfg.provenance().seed << '\n';
  os << "#stream\t" << cfg.provenance().stream << '\n';
  os << "#count\t" << cfg.size() << '\n';
  for (std::size_t k = 0; k < cfg.size(); ++k) os << k << '\t' << cfg.multiples()[k] << '\n';
}

void write_ensemble(std::ostream& os, std::span<const PointChargeConfiguration> ensemble) {
  for (const auto& c : ensemble) write_configuration(os, c);
}

void write_ensemble(std::ostream& os, std::span<const LatticeChargeConfiguration> ensemble) {
  for (const auto& c : ensemble) write_configuration(os, c);
}

std::vector<AnyConfiguration> read_configurations(std::istream& is) {
  std::vector<AnyConfiguration> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields[0] != kMagic) fail(lineno, "expected configuration header");
    if (fields.size() != 2 || fields[1] != "1") fail(lineno, "unsupported format version");

    std::map<std::string, std::vector<std::string>> header;
    while (true) {
      if (!std::getline(is, line)) fail(lineno, "truncated header");
      ++lineno;
      auto f = split_tabs(line);
      if (f[0].empty() || f[0][0] != '#') fail(lineno, "expected header field");
      std::string key(f[0].substr(1));
      if (header.count(key)) fail(lineno, "duplicate header field '" + key + "'");
      header[key] = std::vector<std::string>(f.begin() + 1, f.end());
      if (key == "count") break;
    }
    auto need = [&](const std::string& key, std::size_t n) -> const std::vector<std::string>& {
      auto it = header.find(key);
      if (it == header.end()) fail(lineno, "missing header field '" + key + "'");
      if (it->second.size() != n) fail(lineno, "header field '" + key + "' has wrong arity");
      return it->second;
    };
    const std::string kind = need("kind", 1)[0];
    const double unit = parse_number<double>(need("unit", 1)[0], lineno);
    const double gamma = parse_number<double>(need("gamma", 1)[0], lineno);
    const std::string bname = need("boundary", 1)[0];
    Boundary boundary;
    if (bname == "open") boundary = Boundary::open;
    else if (bname == "periodic") boundary = Boundary::periodic;
    else fail(lineno, "unknown boundary '" + bname + "'");
    Provenance prov{parse_number<std::uint64_t>(need("seed", 1)[0], lineno),
                    parse_number<std::uint64_t>(need("stream", 1)[0], lineno)};
    const auto count = parse_number<std::size_t>(need("count", 1)[0], lineno);

    std::vector<double> pos;
    std::vector<std::int64_t> m;
    if (kind == "continuum") pos.reserve(count);
    m.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(is, line)) fail(lineno, "truncated atom list");
      ++lineno;
      auto f = split_tabs(line);
      if (f.size() != 2) fail(lineno, "expected two tab-separated columns");
      if (kind == "continuum") {
        pos.push_back(parse_number<double>(f[0], lineno));
      } else if (parse_number<std::size_t>(f[0], lineno) != i) {
        fail(lineno, "lattice sites must be listed in order");
      }
      m.push_back(parse_number<std::int64_t>(f[1], lineno));
    }
    try {
      if (kind == "continuum") {
        const auto& w = need("window", 2);
        Window win{parse_number<double>(w[0], lineno), parse_number<double>(w[1], lineno)};
        if (gamma != 0.0) fail(lineno, "continuum configurations carry gamma = 0");
        out.emplace_back(PointChargeConfiguration(std::move(pos), std::move(m), win, unit, boundary, prov));
      } else if (kind == "lattice") {
        out.emplace_back(LatticeChargeConfiguration(std::move(m), gamma, unit, boundary, prov));
      } else {
        fail(lineno, "unknown kind '" + kind + "'");
      }
    } catch (const ArgumentError& e) {
      if (std::string(e.what()).rfind("configuration line", 0) == 0) throw;
      fail(lineno, e.what());
    }
  }
  return out;
}

std::vector<PointChargeConfiguration> read_continuum_ensemble(std::istream& is) {
  std::vector<PointChargeConfiguration> out;
  for (auto& c : read_configurations(is)) {
    if (!std::holds_alternative<PointChargeConfiguration>(c))
      throw ArgumentError("expected continuum configurations, found a lattice block");
    out.push_back(std::move(std::get<PointChargeConfiguration>(c)));
  }
  return out;
}

std::vector<LatticeChargeConfiguration> read_lattice_ensemble(std::istream& is) {
  std::vector<LatticeChargeConfiguration> out;
  for (auto& c : read_configurations(is)) {
    if (!std::holds_alternative<LatticeChargeConfiguration>(c))
      throw ArgumentError("expected lattice configurations, found a continuum block");
    out.push_back(std::move(std::get<LatticeChargeConfiguration>(c)));
  }
  return out;
}

}  // namespace tightline
