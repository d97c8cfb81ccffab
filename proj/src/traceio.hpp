#ifndef TOMOTRACE_TRACEIO_HPP
#define TOMOTRACE_TRACEIO_HPP

#include <string>
#include <vector>

#include "common.hpp"

namespace tomo {

// A traced (or ground-truth) filament centerline in physical units.
struct FilamentTrace {
  int id = 0;
  std::vector<Vec3> points;
};

// Plain text trace format: a `#filament <id>` header per filament followed by
// one `x y z` line per point. Blank lines and other `#` comments are skipped.
// min_points lets seed files (one point per filament) reuse the format.
std::vector<FilamentTrace> read_traces(const std::string& path, std::size_t min_points = 2);

void write_traces(const std::string& path, const std::vector<FilamentTrace>& traces);

// Chimera/ChimeraX marker XML: every <marker_set> element becomes one
// filament, markers taken in document order (links are ignored).
std::vector<FilamentTrace> read_cmm(const std::string& path, std::size_t min_points = 2);

// Dispatch on extension: .cmm -> read_cmm, anything else -> read_traces.
std::vector<FilamentTrace> read_traces_any(const std::string& path, std::size_t min_points = 2);

}  // namespace tomo

#endif
