#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tightline/core.hpp"

namespace tightline {

// Columnar text format. Every configuration is a header block of
// "#key<TAB>value" lines followed by one atom per line:
//
//   #tightline-configuration<TAB>1
//   #kind<TAB>continuum            (or lattice)
//   #window<TAB>lo<TAB>hi          (continuum only)
//   #unit<TAB>e
//   #gamma<TAB>g
//   #boundary<TAB>open|periodic
//   #seed<TAB>s
//   #stream<TAB>id
//   #count<TAB>n
//   position<TAB>m                 (continuum)   |   k<TAB>m_k   (lattice)
//
// Reals use the shortest representation that round-trips, so writing and
// reading back is bit-exact. Ensemble files are concatenated blocks.

using AnyConfiguration = std::variant<PointChargeConfiguration, LatticeChargeConfiguration>;

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

void write_configuration(std::ostream& os, const PointChargeConfiguration& cfg);
void write_configuration(std::ostream& os, const LatticeChargeConfiguration& cfg);

void write_ensemble(std::ostream& os, std::span<const PointChargeConfiguration> ensemble);
void write_ensemble(std::ostream& os, std::span<const LatticeChargeConfiguration> ensemble);

/// Reads every block in the stream. Throws ArgumentError with a line number
/// on malformed input.
std::vector<AnyConfiguration> read_configurations(std::istream& is);

std::vector<PointChargeConfiguration> read_continuum_ensemble(std::istream& is);
std::vector<LatticeChargeConfiguration> read_lattice_ensemble(std::istream& is);

}  // namespace tightline
