#ifndef NICHOLSON_REPORT_IO_HPP
#define NICHOLSON_REPORT_IO_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "nicholson/attractor.hpp"
#include "nicholson/model.hpp"
#include "nicholson/model_io.hpp"

namespace nicholson {

inline void write_assumption_report(std::ostream& os, const AssumptionReport& rep) {
  os << "hypotheses (" << (rep.exact ? "closed form over the torus" : "sampled orbit, non-rigorous") << "):\n";
  for (const auto& h : rep.items) {
    os << "  (" << h.id << ") " << (h.holds ? "holds" : "FAILS") << ": " << h.detail;
    if (!h.holds && h.witness) os << " [witness " << h.witness->describe() << ']';
    os << '\n';
  }
}

inline void write_zone_report(std::ostream& os, const ZoneReport& rep) {
  os << "invariant zone (zona inv) (" << (rep.exact ? "closed form over the torus" : "sampled orbit, non-rigorous")
     << "):\n";
  char buf[256];
  for (const auto& p : rep.patches) {
    std::snprintf(buf, sizeof buf, "  patch %d: %s; ratio in [%.10g, %.10g], upper bound %.10g, margin %.10g",
                  p.patch, std::string(to_string(p.status)).c_str(), p.min_ratio, p.max_ratio, p.upper, p.margin);
    os << buf;
    if (p.status != ZonePatch::Status::Holds) os << " [witness " << p.witness.describe() << ']';
    os << '\n';
  }
}

/// CSV `i,j,theta1,theta2,y1,...,ym,T_final`, one row per grid node.
inline void write_mesh_csv(std::ostream& os, const AttractorMesh& mesh) {
  os << "i,j,theta1,theta2";
  for (int c = 1; c <= mesh.dim; ++c) os << ",y" << c;
  os << ",T_final\n";
  for (int i = 0; i < mesh.n; ++i)
    for (int j = 0; j < mesh.n; ++j) {
      const std::size_t k = mesh.index(i, j);
      os << i << ',' << j << ',' << format_double(mesh.grid[k].theta1()) << ',' << format_double(mesh.grid[k].theta2());
      for (int c = 0; c < mesh.dim; ++c) os << ',' << format_double(mesh.values[k][c]);
      os << ',' << format_double(mesh.horizons[k]) << '\n';
    }
}

/// Heatmap of one mesh component over the (theta1, theta2) square.
inline void write_mesh_svg(std::ostream& os, const AttractorMesh& mesh, int component) {
  const int cell = std::max(8, 384 / std::max(mesh.n, 1));
  const int margin = 48;
  const int side = cell * mesh.n;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& v : mesh.values)
    if (std::isfinite(v[component])) {
      lo = std::min(lo, v[component]);
      hi = std::max(hi, v[component]);
    }
  if (!(hi > lo)) hi = lo + 1.0;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side + 2 * margin << "\" height=\""
     << side + 2 * margin << "\">\n";
  os << "<text x=\"" << margin << "\" y=\"" << margin / 2 << "\" font-family=\"sans-serif\" font-size=\"14\">y"
     << component + 1 << " on the torus grid, range [" << format_double(lo) << ", " << format_double(hi)
     << "]</text>\n";
  char buf[160];
  for (int i = 0; i < mesh.n; ++i)
    for (int j = 0; j < mesh.n; ++j) {
      const double v = mesh.value(i, j)[component];
      const double u = std::isfinite(v) ? (v - lo) / (hi - lo) : 0.0;
      const int r = static_cast<int>(std::lround(255.0 * u));
      const int b = 255 - r;
      const int g = static_cast<int>(std::lround(255.0 * (1.0 - std::fabs(2.0 * u - 1.0)) * 0.6));
      // theta1 grows to the right, theta2 upwards
      std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"rgb(%d,%d,%d)\"/>\n",
                    margin + i * cell, margin + (mesh.n - 1 - j) * cell, cell, cell, r, g, b);
      os << buf;
    }
  os << "<text x=\"" << margin + side / 2 << "\" y=\"" << side + margin + 30
     << "\" font-family=\"sans-serif\" font-size=\"12\">theta1</text>\n";
  os << "<text x=\"8\" y=\"" << margin + side / 2 << "\" font-family=\"sans-serif\" font-size=\"12\">theta2</text>\n";
  os << "</svg>\n";
}

inline void write_monotonicity_report(std::ostream& os, const StudyReport& rep) {
  os << "axis: " << to_string(rep.axis) << '\n';
  os << "values:";
  for (const auto& e : rep.entries) os << ' ' << format_double(e.value);
  os << '\n';
  os << "slack: " << format_double(rep.slack) << '\n';
  for (const auto& e : rep.entries) {
    os << "value " << format_double(e.value) << ": hypotheses " << (e.assumptions.all_hold() ? "hold" : "FAIL")
       << ", zone " << (e.zone.holds() ? "holds" : "FAILS") << ", mesh "
       << (e.mesh.partial() ? "partial" : "complete") << ", invariants "
       << (e.mesh.invariants_hold() ? "hold" : "VIOLATED") << '\n';
  }
  for (std::size_t k = 0; k < rep.pair_orders.size(); ++k) {
    os << format_double(rep.entries[k].value) << " -> " << format_double(rep.entries[k + 1].value) << ':';
    for (std::size_t c = 0; c < rep.pair_orders[k].size(); ++c)
      os << " y" << c + 1 << ' ' << to_string(rep.pair_orders[k][c]);
    os << '\n';
  }
  for (std::size_t c = 0; c < rep.overall.size(); ++c)
    os << "component y" << c + 1 << ": " << to_string(rep.overall[c]) << '\n';
  os << "verdict: " << (rep.uniformly_ordered() ? "uniformly ordered" : "not uniformly ordered") << '\n';
}

}  // namespace nicholson

#endif  // NICHOLSON_REPORT_IO_HPP
