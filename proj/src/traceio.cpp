#include "traceio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace tomo {

namespace {

void finish_filament(std::vector<FilamentTrace>& traces, std::size_t min_points,
                     const std::string& path) {
  if (!traces.empty() && traces.back().points.size() < min_points)
    throw FormatError(path + ": filament " + std::to_string(traces.back().id) + " has " +
                      std::to_string(traces.back().points.size()) + " point(s), need at least " +
                      std::to_string(min_points));
}

}  // namespace

std::vector<FilamentTrace> read_traces(const std::string& path, std::size_t min_points) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open trace file: " + path);

  std::vector<FilamentTrace> traces;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    if (line[start] == '#') {
      std::istringstream ss(line.substr(start + 1));
      std::string tag;
      ss >> tag;
      if (tag == "filament") {
        int id = 0;
        if (!(ss >> id))
          throw FormatError(path + ":" + std::to_string(lineno) + ": missing filament id");
        finish_filament(traces, min_points, path);
        traces.push_back(FilamentTrace{id, {}});
      }
      continue;  // other comments ignored
    }
    if (traces.empty())
      throw FormatError(path + ":" + std::to_string(lineno) +
                        ": coordinate line before any #filament header");
    std::istringstream ss(line);
    Vec3 p;
    if (!(ss >> p.x >> p.y >> p.z))
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected `x y z`");
    traces.back().points.push_back(p);
  }
  finish_filament(traces, min_points, path);
  if (traces.empty()) throw FormatError(path + ": no filaments found");
  return traces;
}

void write_traces(const std::string& path, const std::vector<FilamentTrace>& traces) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot open for writing: " + path);
  char buf[128];
  for (const auto& t : traces) {
    f << "#filament " << t.id << "\n";
    for (const auto& p : t.points) {
      std::snprintf(buf, sizeof(buf), "%.10g %.10g %.10g\n", p.x, p.y, p.z);
      f << buf;
    }
  }
  if (!f) throw FormatError("write failed: " + path);
}

namespace {

// Pulls a numeric attribute like x="1.5" (single or double quotes) out of the
// body of an XML tag. Returns false if absent.
bool xml_attr(const std::string& tag, const std::string& name, double& out) {
  std::size_t pos = 0;
  while ((pos = tag.find(name, pos)) != std::string::npos) {
    // must be a standalone attribute name followed by '='
    bool boundary = pos == 0 || tag[pos - 1] == ' ' || tag[pos - 1] == '\t';
    std::size_t eq = pos + name.size();
    while (eq < tag.size() && (tag[eq] == ' ' || tag[eq] == '\t')) ++eq;
    if (!boundary || eq >= tag.size() || tag[eq] != '=') {
      pos += name.size();
      continue;
    }
    ++eq;
    while (eq < tag.size() && (tag[eq] == ' ' || tag[eq] == '\t')) ++eq;
    if (eq >= tag.size() || (tag[eq] != '"' && tag[eq] != '\'')) return false;
    char quote = tag[eq];
    std::size_t end = tag.find(quote, eq + 1);
    if (end == std::string::npos) return false;
    try {
      out = std::stod(tag.substr(eq + 1, end - eq - 1));
    } catch (...) {
      return false;
    }
    return true;
  }
  return false;
}

}  // namespace

std::vector<FilamentTrace> read_cmm(const std::string& path, std::size_t min_points) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open marker file: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  std::string doc = buf.str();

  std::vector<FilamentTrace> traces;
  std::size_t pos = 0;
  int next_id = 1;
  while ((pos = doc.find("<marker_set", pos)) != std::string::npos) {
    std::size_t set_end = doc.find("</marker_set>", pos);
    if (set_end == std::string::npos) throw FormatError(path + ": unterminated <marker_set>");
    FilamentTrace trace;
    trace.id = next_id++;
    std::size_t mpos = pos;
    while ((mpos = doc.find("<marker", mpos)) != std::string::npos && mpos < set_end) {
      // skip <marker_set itself
      if (doc.compare(mpos, 11, "<marker_set") == 0) {
        mpos += 11;
        continue;
      }
      std::size_t tag_end = doc.find('>', mpos);
      if (tag_end == std::string::npos) throw FormatError(path + ": unterminated <marker> tag");
      std::string tag = doc.substr(mpos, tag_end - mpos);
      Vec3 p;
      if (!xml_attr(tag, "x", p.x) || !xml_attr(tag, "y", p.y) || !xml_attr(tag, "z", p.z))
        throw FormatError(path + ": <marker> without x/y/z attributes");
      trace.points.push_back(p);
      mpos = tag_end + 1;
    }
    if (trace.points.size() < min_points)
      throw FormatError(path + ": marker set " + std::to_string(trace.id) + " has " +
                        std::to_string(trace.points.size()) + " marker(s), need at least " +
                        std::to_string(min_points));
    traces.push_back(std::move(trace));
    pos = set_end + 13;
  }
  if (traces.empty()) throw FormatError(path + ": no <marker_set> elements found");
  return traces;
}

std::vector<FilamentTrace> read_traces_any(const std::string& path, std::size_t min_points) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".cmm") == 0)
    return read_cmm(path, min_points);
  return read_traces(path, min_points);
}

}  // namespace tomo
