#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "json.hpp"

#include "bundletrac.hpp"
#include "dpcore.hpp"
#include "helixfit.hpp"
#include "metrics.hpp"
#include "phantom.hpp"
#include "spaghetti.hpp"
#include "struwwel.hpp"
#include "traceio.hpp"
#include "volgrid.hpp"

namespace tomo::cli {
namespace {

using nlohmann::json;

std::string fmt(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string fmtg(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArgError(what + " expects a number, got '" + s + "'");
  }
}

long parse_long(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArgError(what + " expects an integer, got '" + s + "'");
  }
}

IVec3 parse_triple_int(const std::string& s, const std::string& what) {
  auto parts = split_list(s, ',');
  if (parts.size() != 3) throw ArgError(what + " expects x,y,z, got '" + s + "'");
  IVec3 v;
  for (int i = 0; i < 3; ++i) v[i] = int(parse_long(trimmed(parts[i]), what));
  return v;
}

Vec3 parse_triple(const std::string& s, const std::string& what) {
  auto parts = split_list(s, ',');
  if (parts.size() != 3) throw ArgError(what + " expects x,y,z, got '" + s + "'");
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = parse_double(trimmed(parts[i]), what);
  return v;
}

Axis parse_axis(const std::string& s, const std::string& what) {
  if (s == "x" || s == "X") return Axis::X;
  if (s == "y" || s == "Y") return Axis::Y;
  if (s == "z" || s == "Z") return Axis::Z;
  throw ArgError(what + " expects x, y, or z, got '" + s + "'");
}

BlendMode parse_blend(const std::string& s, const std::string& what) {
  if (s == "multiply") return BlendMode::Multiply;
  if (s == "add") return BlendMode::Add;
  if (s == "geomean") return BlendMode::GeometricMean;
  if (s == "min") return BlendMode::Minimum;
  throw ArgError(what + " expects multiply, add, geomean, or min, got '" + s + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with_any(const std::string& path, std::initializer_list<const char*> exts) {
  std::string lower = path;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  for (const char* e : exts) {
    std::string ext = e;
    if (lower.size() >= ext.size() && lower.compare(lower.size() - ext.size(), ext.size(), ext) == 0)
      return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Flag parsing. Flags are declared per subcommand with a dash count (so the
// traditional single-dash spellings like -thr keep working), an optional
// value, a default, and a help line. A key=value config file may preload any
// flag; command-line values win. Unknown flags and unknown config keys are
// errors.
// ---------------------------------------------------------------------------

class Flags {
 public:
  Flags(std::string usage, std::string blurb) : usage_(std::move(usage)), blurb_(std::move(blurb)) {}

  Flags& add(const std::string& name, int dashes, const std::string& value_name,
             const std::string& def, const std::string& help) {
    specs_.push_back({name, value_name, def, help, dashes, true, false, false});
    return *this;
  }
  Flags& add_required(const std::string& name, int dashes, const std::string& value_name,
                      const std::string& help) {
    specs_.push_back({name, value_name, "", help, dashes, true, true, false});
    return *this;
  }
  Flags& add_multi(const std::string& name, int dashes, const std::string& value_name,
                   const std::string& help) {
    specs_.push_back({name, value_name, "", help, dashes, true, false, true});
    return *this;
  }
  Flags& add_switch(const std::string& name, int dashes, const std::string& help) {
    specs_.push_back({name, "", "", help, dashes, false, false, false});
    return *this;
  }
  Flags& add_common() {
    add("config", 2, "file", "", "key=value file preloading any flag; command-line values win");
    add("threads", 2, "n", "", "cap the OpenMP thread count");
    add("manifest", 2, "file", "", "manifest path (default: <output>.manifest.json)");
    add_switch("json", 2, "print the report as JSON instead of text");
    return *this;
  }

  void parse(const std::vector<std::string>& args) {
    for (const auto& a : args) {
      if (a == "-h" || a == "--help") {
        help_ = true;
        return;
      }
    }
    bool only_pos = false;
    for (std::size_t i = 0; i < args.size(); ++i) {
      const std::string& tok = args[i];
      if (!only_pos && tok == "--") {
        only_pos = true;
        continue;
      }
      bool flagish = !only_pos && tok.size() > 1 && tok[0] == '-' &&
                     !(std::isdigit(static_cast<unsigned char>(tok[1])) || tok[1] == '.');
      if (!flagish) {
        pos_.push_back(tok);
        continue;
      }
      std::size_t strip = (tok.size() > 2 && tok[1] == '-') ? 2 : 1;
      std::string name = tok.substr(strip);
      std::string inline_val;
      bool has_inline = false;
      if (auto eq = name.find('='); eq != std::string::npos) {
        inline_val = name.substr(eq + 1);
        name = name.substr(0, eq);
        has_inline = true;
      }
      const Spec* s = find(name);
      if (!s) throw ArgError("unknown flag '" + tok + "' (see --help)");
      if (!s->takes_value) {
        if (has_inline) throw ArgError("flag " + s->display() + " takes no value");
        switches_.insert(s->name);
        continue;
      }
      if (has_inline) {
        values_[s->name].push_back(inline_val);
      } else {
        if (i + 1 >= args.size()) throw ArgError("flag " + s->display() + " expects a value");
        values_[s->name].push_back(args[++i]);
      }
    }
    if (auto it = values_.find("config"); it != values_.end()) load_config(it->second.back());
  }

  bool help_requested() const { return help_; }

  bool given(const std::string& name) const {
    return values_.count(name) || config_values_.count(name);
  }
  bool on(const std::string& name) const {
    return switches_.count(name) || config_switches_.count(name);
  }
  std::string str(const std::string& name) const {
    const Spec* s = find(name);
    if (auto it = values_.find(name); it != values_.end()) return it->second.back();
    if (auto it = config_values_.find(name); it != config_values_.end()) return it->second;
    if (s->required) throw ArgError("missing required flag " + s->display());
    return s->def;
  }
  double num(const std::string& name) const { return parse_double(str(name), "flag " + display(name)); }
  int integer(const std::string& name) const {
    return int(parse_long(str(name), "flag " + display(name)));
  }
  std::vector<std::string> multi(const std::string& name) const {
    if (auto it = values_.find(name); it != values_.end()) return it->second;
    if (auto it = config_values_.find(name); it != config_values_.end()) return {it->second};
    return {};
  }
  const std::vector<std::string>& positionals() const { return pos_; }

  // Exactly `names.size()` positionals, reported against their names.
  std::vector<std::string> expect_positionals(const std::vector<std::string>& names) const {
    if (pos_.size() < names.size())
      throw ArgError("missing argument <" + names[pos_.size()] + "> (see --help)");
    if (pos_.size() > names.size())
      throw ArgError("unexpected argument '" + pos_[names.size()] + "'");
    return pos_;
  }

  std::string display(const std::string& name) const { return find(name)->display(); }

  // Final flag values for the manifest. Required-but-absent and empty
  // optional flags are omitted.
  json resolved() const {
    json j = json::object();
    for (const auto& s : specs_) {
      if (!s.takes_value) {
        j[s.name] = on(s.name);
        continue;
      }
      if (s.multi) {
        auto vs = multi(s.name);
        if (!vs.empty()) j[s.name] = vs;
        continue;
      }
      if (!given(s.name) && s.def.empty()) continue;
      j[s.name] = str(s.name);
    }
    return j;
  }

  std::string help_text() const {
    std::string out = "usage: " + usage_ + "\n" + blurb_ + "\n\nflags:\n";
    std::vector<std::pair<std::string, std::string>> rows;
    for (const auto& s : specs_) {
      std::string left = s.display();
      if (s.takes_value) left += " <" + s.value_name + ">";
      std::string right = s.help;
      if (s.required) right += " (required)";
      else if (s.takes_value && !s.def.empty()) right += " [default: " + s.def + "]";
      rows.emplace_back(left, right);
    }
    rows.emplace_back("-h, --help", "show this help");
    std::size_t width = 0;
    for (const auto& r : rows) width = std::max(width, r.first.size());
    for (const auto& r : rows) {
      out += "  " + r.first + std::string(width - r.first.size() + 2, ' ') + r.second + "\n";
    }
    return out;
  }

 private:
  struct Spec {
    std::string name, value_name, def, help;
    int dashes = 2;
    bool takes_value = true;
    bool required = false;
    bool multi = false;

    std::string display() const { return std::string(std::size_t(dashes), '-') + name; }
  };

  const Spec* find(const std::string& name) const {
    for (const auto& s : specs_)
      if (s.name == name) return &s;
    return nullptr;
  }

  void load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgError("cannot open config file '" + path + "'");
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      std::string t = trimmed(line);
      if (t.empty() || t[0] == '#') continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw FormatError(path + ":" + std::to_string(ln) + ": expected key=value");
      std::string key = trimmed(t.substr(0, eq));
      std::string val = trimmed(t.substr(eq + 1));
      if (key == "config") throw ArgError(path + ": config files cannot set 'config'");
      const Spec* s = find(key);
      if (!s) throw ArgError(path + ": unknown key '" + key + "'");
      if (s->takes_value) {
        config_values_[key] = val;
      } else {
        if (val == "1" || val == "true" || val == "yes" || val == "on") {
          config_switches_.insert(key);
        } else if (val != "0" && val != "false" && val != "no" && val != "off") {
          throw ArgError(path + ": switch '" + key + "' expects a boolean, got '" + val + "'");
        }
      }
    }
  }

  std::string usage_, blurb_;
  std::vector<Spec> specs_;
  std::map<std::string, std::vector<std::string>> values_;
  std::map<std::string, std::string> config_values_;
  std::set<std::string> switches_, config_switches_;
  std::vector<std::string> pos_;
  bool help_ = false;
};

void apply_threads(const Flags& f) {
  if (!f.given("threads")) return;
  int n = f.integer("threads");
  if (n < 1) throw ArgError("--threads must be at least 1");
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Wall time per pipeline stage, recorded into the manifest.
class StageTimer {
 public:
  template <class F>
  auto run(const std::string& stage, F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<std::invoke_result_t<F>>) {
      fn();
      stop(stage, t0);
    } else {
      auto v = fn();
      stop(stage, t0);
      return v;
    }
  }

  json to_json() const {
    json arr = json::array();
    for (const auto& [name, sec] : stages_) arr.push_back({{"stage", name}, {"seconds", sec}});
    return arr;
  }

 private:
  void stop(const std::string& stage, std::chrono::steady_clock::time_point t0) {
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stages_.emplace_back(stage, dt);
  }

  std::vector<std::pair<std::string, double>> stages_;
};

void write_manifest(const Flags& f, const std::string& subcommand,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    const StageTimer& timer, const json& results,
                    const std::string& default_path) {
  std::string path = f.given("manifest") ? f.str("manifest") : default_path;
  json m;
  m["schema"] = "tomotrace-manifest/1";
  m["version"] = kVersion;
  m["subcommand"] = subcommand;
  m["parameters"] = f.resolved();
  m["positionals"] = f.positionals();
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["timings"] = timer.to_json();
  if (!results.is_null()) m["results"] = results;
  std::ofstream out(path);
  if (!out) throw ArgError("cannot write manifest '" + path + "'");
  out << m.dump(2) << "\n";
}

std::string manifest_default(const std::string& primary_output) {
  return primary_output.empty() ? "tomotrace-manifest.json" : primary_output + ".manifest.json";
}

json eval_to_json(const EvalReport& r) {
  json j;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["precision"] = r.precision_defined ? json(r.precision) : json();
  j["recall"] = r.recall_defined ? json(r.recall) : json();
  j["f1"] = r.f1_defined ? json(r.f1) : json();
  return j;
}

std::string eval_to_text(const EvalReport& r, int neighborhood, bool dilated) {
  std::string out = "voxel F1 (neighborhood " + std::to_string(neighborhood) +
                    (dilated ? ", prediction dilated" : "") + "):\n";
  out += "  tp " + std::to_string(r.tp) + "  fp " + std::to_string(r.fp) + "  fn " +
         std::to_string(r.fn) + "\n";
  out += "  precision " + (r.precision_defined ? fmt(r.precision, 4) : "undefined") + "\n";
  out += "  recall    " + (r.recall_defined ? fmt(r.recall, 4) : "undefined") + "\n";
  out += "  f1        " + (r.f1_defined ? fmt(r.f1, 4) : "undefined") + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

Flags simulate_flags() {
  Flags f("tomotrace simulate --out <map.mrc> [flags]",
          "Synthesizes a phantom tomogram: ground-truth filaments are rasterized,\n"
          "blurred, overlaid with colored noise, and cut by a missing wedge.");
  f.add_required("out", 2, "file", "output MRC volume");
  f.add("truth-out", 2, "file", "", "write the ground-truth traces here");
  f.add("traces", 2, "file", "", "use these traces (text or .cmm) instead of a layout");
  f.add("layout", 2, "name", "parallel", "generated layout: parallel, random, or hex");
  f.add("count", 2, "n", "40", "filament count (parallel and random layouts)");
  f.add("dims", 2, "x,y,z", "200,200,100", "grid dimensions in voxels");
  f.add("spacing", 2, "v", "1", "voxel edge length, physical units");
  f.add("origin", 2, "x,y,z", "0,0,0", "physical position of voxel (0,0,0)");
  f.add("axis", 2, "a", "y", "dominant filament axis (parallel layout)");
  f.add("drift", 2, "v", "2", "lateral drift amplitude in voxels (parallel layout)");
  f.add("min-len", 2, "v", "40", "shortest filament in voxels (random layout)");
  f.add("max-len", 2, "v", "120", "longest filament in voxels (random layout)");
  f.add("rings", 2, "n", "2", "full hexagonal rings around the center (hex layout)");
  f.add("lattice", 2, "v", "12.6", "hexagonal lattice constant in voxels (hex layout)");
  f.add("hex-drift", 2, "v", "2", "shared drift amplitude in voxels (hex layout)");
  f.add("hex-period", 2, "v", "150", "drift period in voxels (hex layout)");
  f.add("seed", 2, "n", "0", "RNG seed for layout and noise");
  f.add("fwhm", 2, "v", "5", "Gaussian blur FWHM, physical units");
  f.add("amplify", 2, "v", "1", "signal amplification before blurring");
  f.add("noise", 2, "v", "0", "noise sd as a fraction of the blurred signal peak");
  f.add("alpha", 2, "v", "1.5", "power-law exponent of the noise spectrum (0 = white)");
  f.add("noise-profile", 2, "file", "",
        "tabulated radial power profile (one value per line), overrides --alpha");
  f.add("wedge", 2, "deg", "90", "tilt half-range in degrees; 90 disables the wedge");
  f.add("wedge-axis", 2, "a", "x", "tilt axis, x or y (beam is z)");
  f.add_common();
  return f;
}

int run_simulate(const std::vector<std::string>& args) {
  Flags f = simulate_flags();
  f.parse(args);
  if (f.help_requested()) {
    std::cout << f.help_text();
    return 0;
  }
  f.expect_positionals({});
  apply_threads(f);

  GridSpec spec;
  spec.dims = parse_triple_int(f.str("dims"), "flag --dims");
  spec.spacing = f.num("spacing");
  spec.origin = parse_triple(f.str("origin"), "flag --origin");
  if (spec.dims.x < 1 || spec.dims.y < 1 || spec.dims.z < 1)
    throw ArgError("--dims components must be positive");
  if (spec.spacing <= 0) throw ArgError("--spacing must be positive");

  std::uint64_t seed = std::uint64_t(parse_long(f.str("seed"), "flag --seed"));
  StageTimer timer;
  std::vector<std::string> inputs;

  std::vector<FilamentTrace> truth;
  if (f.given("traces")) {
    inputs.push_back(f.str("traces"));
    truth = timer.run("load-traces", [&] { return read_traces_any(f.str("traces")); });
  } else {
    std::string layout = f.str("layout");
    truth = timer.run("layout", [&]() -> std::vector<FilamentTrace> {
      if (layout == "parallel")
        return make_parallel_traces(spec, f.integer("count"), seed,
                                    parse_axis(f.str("axis"), "flag --axis"), f.num("drift"));
      if (layout == "random")
        return make_random_traces(spec, f.integer("count"), seed, f.num("min-len"),
                                  f.num("max-len"));
      if (layout == "hex")
        return make_hex_bundle_traces(spec, f.integer("rings"), f.num("lattice"),
                                      f.num("hex-drift"), f.num("hex-period"));
      throw ArgError("flag --layout expects parallel, random, or hex, got '" + layout + "'");
    });
  }

  SimulationConfig sim;
  sim.fwhm = f.num("fwhm");
  sim.signal_amplification = f.num("amplify");
  sim.noise_level = f.num("noise");
  sim.wedge_half_angle = f.num("wedge");
  sim.wedge_axis = parse_axis(f.str("wedge-axis"), "flag --wedge-axis");
  if (sim.wedge_axis == Axis::Z) throw ArgError("--wedge-axis expects x or y (beam is z)");
  sim.rng_seed = seed;
  if (f.given("noise-profile")) {
    inputs.push_back(f.str("noise-profile"));
    std::istringstream in(read_text_file(f.str("noise-profile")));
    std::vector<double> profile;
    std::string line;
    while (std::getline(in, line)) {
      std::string t = trimmed(line);
      if (t.empty() || t[0] == '#') continue;
      profile.push_back(parse_double(t, "noise profile entry"));
    }
    sim.noise_spectrum = NoiseSpectrum::tabulated(std::move(profile));
  } else {
    sim.noise_spectrum = NoiseSpectrum::power_law(f.num("alpha"));
  }

  VoxelGrid map = timer.run("simulate", [&] { return simulate_tomogram(spec, truth, sim); });

  std::string out = f.str("out");
  timer.run("write", [&] {
    write_map(out, map);
    if (f.given("truth-out")) write_traces(f.str("truth-out"), truth);
  });

  std::vector<std::string> outputs{out};
  if (f.given("truth-out")) outputs.push_back(f.str("truth-out"));

  json results;
  results["filaments"] = truth.size();
  results["dims"] = {spec.dims.x, spec.dims.y, spec.dims.z};
  write_manifest(f, "simulate", inputs, outputs, timer, results, manifest_default(out));

  if (f.on("json")) {
    json rep = results;
    rep["out"] = out;
    std::cout << rep.dump(2) << "\n";
  } else {
    std::cout << "wrote " << out << ": " << spec.dims.x << "x" << spec.dims.y << "x" << spec.dims.z
              << " voxels, " << truth.size() << " filaments\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// trace-spaghetti
// ---------------------------------------------------------------------------

Flags spaghetti_flags() {
  Flags f("tomotrace trace-spaghetti [flags] <in.mrc> <out.txt>",
          "Traces dense near-parallel filament bundles via path-density enhancement,\n"
          "per-cube seed segments, occupancy thresholding, and directional fusion.");
  f.add("len", 1, "n", "5", "axial steps per traced segment");
  f.add("axis", 1, "a", "y", "dominant filament axis");
  f.add("blend", 1, "mode", "multiply",
        "forward/backward density blend: multiply, add, geomean, min");
  f.add_switch("no-enhance", 2, "trace on the normalized map without enhancement");
  f.add_switch("line", 2, "trace straight-line segments instead of DP paths");
  f.add("back-ang", 1, "deg", "30", "backward-retrace screen angle");
  f.add("fuse-ang", 1, "deg", "6", "collinear fusion angle");
  f.add("fuse-gap", 1, "vox", "10", "collinear fusion axial gap cap");
  f.add("iso-radius", 1, "vox", "20", "isolation screen radius");
  f.add("iso-min", 1, "n", "3", "neighbors required within the isolation radius");
  f.add("ext-cap", 1, "n", "5", "extension cap, in units of the segment length");
  f.add("overlap", 1, "frac", "0.9", "redundant-trace overlap fraction");
  f.add("occ-cube", 1, "vox", "100", "occupancy screen cube edge");
  f.add("occ-min", 1, "n", "10", "midpoints that make an occupancy cube dense");
  f.add("occ-frac", 1, "frac", "0.15", "sparse-cube share required to pass the screen");
  f.add_common();
  return f;
}

json spaghetti_diag_json(const SpaghettiDiagnostics& d) {
  json j;
  j["seeds"] = d.seeds;
  j["skipped_seeds"] = d.skipped_seeds;
  j["segments"] = d.segments;
  j["threshold_bin"] = d.threshold_bin;
  j["after_threshold"] = d.after_threshold;
  j["after_backward"] = d.after_backward;
  j["after_collinear"] = d.after_collinear;
  j["after_isolation"] = d.after_isolation;
  j["after_extension"] = d.after_extension;
  j["traces_walked"] = d.traces_walked;
  j["traces_kept"] = d.traces_kept;
  return j;
}

int run_spaghetti(const std::vector<std::string>& args) {
  Flags f = spaghetti_flags();
  f.parse(args);
  if (f.help_requested()) {
    std::cout << f.help_text();
    return 0;
  }
  auto pos = f.expect_positionals({"in.mrc", "out.txt"});
  apply_threads(f);

  SpaghettiConfig cfg;
  cfg.length = f.integer("len");
  cfg.axis = parse_axis(f.str("axis"), "flag -axis");
  cfg.blend = parse_blend(f.str("blend"), "flag -blend");
  cfg.enhance = !f.on("no-enhance");
  cfg.line_segments = f.on("line");
  cfg.backward_angle = f.num("back-ang");
  cfg.collinear_angle = f.num("fuse-ang");
  cfg.collinear_gap = f.num("fuse-gap");
  cfg.isolation_radius = f.num("iso-radius");
  cfg.isolation_min_neighbors = f.integer("iso-min");
  cfg.extension_cap = f.integer("ext-cap");
  cfg.overlap_fraction = f.num("overlap");
  cfg.occupancy_cube = f.integer("occ-cube");
  cfg.occupancy_min_count = f.integer("occ-min");
  cfg.occupancy_fraction = f.num("occ-frac");

  StageTimer timer;
  VoxelGrid raw = timer.run("read", [&] { return read_map(pos[0]); });
  SpaghettiResult res = timer.run("trace", [&] { return trace_spaghetti(raw, cfg); });
  timer.run("write", [&] { write_traces(pos[1], res.traces); });

  json results = spaghetti_diag_json(res.diagnostics);
  write_manifest(f, "trace-spaghetti", {pos[0]}, {pos[1]}, timer, results,
                 manifest_default(pos[1]));

  if (f.on("json")) {
    std::cout << results.dump(2) << "\n";
  } else {
    std::cout << "traced " << res.traces.size() << " filaments -> " << pos[1] << " (threshold bin "
              << res.diagnostics.threshold_bin << ", " << res.diagnostics.segments
              << " seed segments)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// trace-struwwel
// ---------------------------------------------------------------------------

Flags struwwel_flags() {
  Flags f("tomotrace trace-struwwel [flags] -thr <v> <in.mrc> <out.txt>",
          "Traces arbitrarily oriented filaments: best-of-three-axes segments per\n"
          "seed, a fixed density threshold, then proximity and extension fusion.");
  f.add("thr", 1, "v", "",
        "density threshold in [0, 1]; segments below are dropped (required "
        "unless only reporting)");
  f.add("len", 1, "n", "10", "axial steps per traced segment");
  f.add("seed-spacing", 1, "n", "0", "seed cube edge in voxels; 0 picks len/2");
  f.add("back-ang", 1, "deg", "20", "backward-retrace screen angle");
  f.add("ang", 1, "deg", "30", "fusion angle, both passes");
  f.add("gap", 1, "vox", "10", "fusion endpoint distance cap");
  f.add("pruning-out", 2, "file", "", "write the per-voxel density (pruning) map here");
  f.add_switch("report-percentiles", 2,
               "print the segment NPD histogram and percentiles to help pick -thr");
  f.add_common();
  return f;
}

int run_struwwel(const std::vector<std::string>& args) {
  Flags f = struwwel_flags();
  f.parse(args);
  if (f.help_requested()) {
    std::cout << f.help_text();
    return 0;
  }
  apply_threads(f);

  bool report = f.on("report-percentiles");
  bool have_thr = f.given("thr");
  if (!have_thr && !report)
    throw ArgError("missing required flag -thr (use --report-percentiles to pick a value)");

  std::vector<std::string> pos;
  if (have_thr) {
    pos = f.expect_positionals({"in.mrc", "out.txt"});
  } else {
    pos = f.expect_positionals({"in.mrc"});
  }

  StruwwelConfig cfg;
  cfg.length = f.integer("len");
  cfg.seed_spacing = f.integer("seed-spacing");
  cfg.backward_angle = f.num("back-ang");
  cfg.fuse_angle = f.num("ang");
  cfg.fuse_gap = f.num("gap");
  if (have_thr) cfg.threshold = f.num("thr");

  StageTimer timer;
  VoxelGrid raw = timer.run("read", [&] { return read_map(pos[0]); });
  json results;

  if (report) {
    int spacing = cfg.seed_spacing > 0 ? cfg.seed_spacing : std::max(1, cfg.length / 2);
    auto npds = timer.run("report", [&] {
      VoxelGrid norm = normalize_unit(raw);
      auto seeds = select_seeds(norm, spacing);
      auto segs = generate_cfs_multiaxis(norm, seeds, cfg.length);
      segs = refine_backward(norm, std::move(segs), cfg.backward_angle, cfg.length);
      std::vector<float> v;
      v.reserve(segs.size());
      for (const auto& c : segs) v.push_back(float(c.npd));
      return v;
    });
    std::vector<std::size_t> hist(10, 0);
    for (float n : npds) hist[std::size_t(npd_bin(n) - 1)]++;
    json jper = json::object();
    std::string text = "segment NPD after the backward screen (" + std::to_string(npds.size()) +
                       " segments):\n";
    for (int b = 0; b < 10; ++b) {
      char line[64];
      std::snprintf(line, sizeof(line), "  decile %2d [%.1f,%.1f%c  %zu\n", b + 1, b / 10.0,
                    (b + 1) / 10.0, b == 9 ? ']' : ')', hist[std::size_t(b)]);
      text += line;
    }
    std::string ptext = " ";
    for (double p : {5.0, 25.0, 50.0, 75.0, 95.0}) {
      double v = npds.empty() ? 0.0 : percentile_nearest_rank(npds, p);
      jper["p" + std::to_string(int(p))] = v;
      ptext += " p" + std::to_string(int(p)) + " " + fmt(v, 3);
    }
    results["npd_histogram"] = hist;
    results["npd_percentiles"] = jper;
    results["screened_segments"] = npds.size();
    if (f.on("json")) {
      if (!have_thr) std::cout << results.dump(2) << "\n";
    } else {
      std::cout << text << ptext << "\n";
    }
  }

  std::vector<std::string> outputs;
  if (have_thr) {
    StruwwelResult res = timer.run("trace", [&] { return trace_struwwel(raw, cfg); });
    timer.run("write", [&] {
      write_traces(pos[1], res.traces);
      if (f.given("pruning-out")) write_map(f.str("pruning-out"), res.density_map);
    });
    outputs.push_back(pos[1]);
    if (f.given("pruning-out")) outputs.push_back(f.str("pruning-out"));

    const auto& d = res.diagnostics;
    json diag;
    diag["seeds"] = d.seeds;
    diag["skipped_seeds"] = d.skipped_seeds;
    diag["segments"] = d.segments;
    diag["after_backward"] = d.after_backward;
    diag["after_threshold"] = d.after_threshold;
    diag["after_proximity"] = d.after_proximity;
    diag["traces"] = d.traces;
    results["diagnostics"] = diag;
    results["traces"] = res.traces.size();
    if (f.on("json")) {
      std::cout << results.dump(2) << "\n";
    } else {
      std::cout << "traced " << res.traces.size() << " filaments -> " << pos[1] << " ("
                << d.after_threshold << " of " << d.after_backward
                << " segments above threshold)\n";
    }
  }

  write_manifest(f, "trace-struwwel", {pos[0]}, outputs, timer, results,
                 manifest_default(outputs.empty() ? "" : outputs.front()));
  return 0;
}

// ---------------------------------------------------------------------------
// trace-bundle
// ---------------------------------------------------------------------------

Flags bundle_flags() {
  Flags f("tomotrace trace-bundle [flags] --seeds <file> <in.mrc> <out.txt>",
          "Traces a parallel filament bundle from user seeds: estimates the bundle\n"
          "axis by cross-section correlation, averages the map along it, and\n"
          "marches hexagonal-kernel markers up and down from every seed.");
  f.add_required("seeds", 2, "file", "seed points, every point of a trace text or .cmm file");
  f.add("stride", 2, "n", "55", "Y distance between correlated cross-sections");
  f.add("slab", 2, "n", "2", "cross-sections average 2n+1 slices");
  f.add("axis-shift", 2, "vox", "-1",
        "correlation shift cap per stride; -1 derives from --radius and --interval, 0 searches "
        "all shifts");
  f.add("window", 2, "n", "15", "longitudinal averaging reach in unit steps");
  f.add_switch("no-longitudinal", 2, "skip longitudinal averaging");
  f.add("spacing-nm", 2, "v", "12.6", "filament-to-filament distance in nanometers");
  f.add("sigma", 2, "vox", "0", "kernel Gaussian width in voxels; 0 picks spacing/3");
  f.add("mode", 2, "name", "seven", "kernel peaks: seven or one");
  f.add("pre-gauss", 2, "fwhm", "0", "Gaussian pre-blur FWHM, physical units; 0 disables");
  f.add("orientation", 2, "deg", "0", "hexagon rotation fallback when seeds cannot vote");
  f.add("interval", 2, "n", "15", "Y slices between consecutive markers");
  f.add("radius", 2, "vox", "2", "allowed lateral drift per marker step");
  f.add("refine", 2, "vox", "0.25", "search grid pitch inside the drift disc");
  f.add_common();
  return f;
}

int run_bundle(const std::vector<std::string>& args) {
  Flags f = bundle_flags();
  f.parse(args);
  if (f.help_requested()) {
    std::cout << f.help_text();
    return 0;
  }
  auto pos = f.expect_positionals({"in.mrc", "out.txt"});
  apply_threads(f);

  BundleConfig cfg;
  cfg.slice_stride = f.integer("stride");
  cfg.slab_half_span = f.integer("slab");
  cfg.max_axis_shift = f.num("axis-shift");
  cfg.average_half_window = f.integer("window");
  cfg.longitudinal = !f.on("no-longitudinal");
  cfg.spacing_nm = f.num("spacing-nm");
  cfg.sigma_vox = f.num("sigma");
  std::string mode = f.str("mode");
  if (mode == "seven") {
    cfg.mode = PeakMode::Seven;
  } else if (mode == "one") {
    cfg.mode = PeakMode::One;
  } else {
    throw ArgError("flag --mode expects seven or one, got '" + mode + "'");
  }
  cfg.pre_blur_fwhm = f.num("pre-gauss");
  cfg.orientation_deg = f.num("orientation");
  cfg.marker_interval = f.integer("interval");
  cfg.search_radius = f.num("radius");
  cfg.refine_step = f.num("refine");

  StageTimer timer;
  VoxelGrid raw = timer.run("read", [&] { return read_map(pos[0]); });
  auto seed_traces = read_traces_any(f.str("seeds"), 1);
  std::vector<Vec3> seeds;
  for (const auto& t : seed_traces)
    for (const auto& p : t.points) seeds.push_back(p);
  if (seeds.empty()) throw ArgError("seed file '" + f.str("seeds") + "' holds no points");

  BundleResult res = timer.run("trace", [&] { return run_bundletrac(raw, seeds, cfg); });
  for (const auto& e : res.seed_errors) std::cerr << "warning: " << e << "\n";
  if (res.traces.empty()) throw ArgError("no seed produced a trace");
  timer.run("write", [&] { write_traces(pos[1], res.traces); });

  json results;
  results["seeds"] = seeds.size();
  results["traces"] = res.traces.size();
  results["seed_errors"] = res.seed_errors;
  json axis = json::array();
  for (const auto& [y, dir] : res.axis.samples) axis.push_back({y, dir.x, dir.y, dir.z});
  results["axis_samples"] = axis;
  write_manifest(f, "trace-bundle", {pos[0], f.str("seeds")}, {pos[1]}, timer, results,
                 manifest_default(pos[1]));

  if (f.on("json")) {
    std::cout << results.dump(2) << "\n";
  } else {
    std::cout << "traced " << res.traces.size() << " of " << seeds.size() << " seeds -> " << pos[1]
              << " (" << res.axis.samples.size() << " axis samples)\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

Flags eval_flags() {
  Flags f("tomotrace eval --pred <file> --truth <file> [flags]",
          "Scores predicted filaments against ground truth. Inputs are trace files\n"
          "(text or .cmm) or binary masks (.mrc/.map/.rec, voxels > 0.5 are set).");
  f.add_required("pred", 2, "file", "predicted traces or mask");
  f.add_required("truth", 2, "file", "ground-truth traces or mask");
  f.add("map", 2, "file", "", "take the evaluation grid geometry from this volume");
  f.add("dims", 2, "x,y,z", "", "evaluation grid dimensions (when no volume is given)");
  f.add("spacing", 2, "v", "1", "voxel edge length for --dims");
  f.add("origin", 2, "x,y,z", "0,0,0", "grid origin for --dims");
  f.add("metric", 2, "name", "f1", "f1, crossdist, or both");
  f.add("neighborhood", 2, "vox", "3", "Chebyshev match distance for voxel F1");
  f.add_switch("no-dilate", 2, "score prediction voxels without one-voxel dilation");
  f.add("axis", 2, "a", "y", "axial coordinate for cross-distance matching");
  f.add("axial-tol", 2, "vox", "0.5", "axial matching tolerance for cross-distance");
  f.add("out", 2, "file", "", "also write the JSON report here");
  f.add_common();
  return f;
}

struct EvalInput {
  bool is_mask = false;
  std::vector<FilamentTrace> traces;
  VoxelGrid grid;
};

EvalInput load_eval_input(const std::string& path) {
  EvalInput in;
  if (ends_with_any(path, {".mrc", ".map", ".rec"})) {
    in.is_mask = true;
    in.grid = read_map(path);
  } else {
    in.traces = read_traces_any(path, 1);
  }
  return in;
}

std::vector<std::uint8_t> eval_mask(const EvalInput& in, const GridSpec& spec,
                                    const std::string& which) {
  if (in.is_mask) {
    if (!(in.grid.dims() == spec.dims))
      throw ArgError(which + " mask dimensions differ from the evaluation grid");
    std::vector<std::uint8_t> m(in.grid.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = in.grid.data()[i] > 0.5f ? 1 : 0;
    return m;
  }
  VoxelGrid r = rasterize_traces(spec, in.traces);
  std::vector<std::uint8_t> m(r.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = r.data()[i] > 0.5f ? 1 : 0;
  return m;
}

int run_eval(const std::vector<std::string>& args) {
  Flags f = eval_flags();
  f.parse(args);
  if (f.help_requested()) {
    std::cout << f.help_text();
    return 0;
  }
  f.expect_positionals({});
  apply_threads(f);

  StageTimer timer;
  EvalInput pred = timer.run("load-pred", [&] { return load_eval_input(f.str("pred")); });
  EvalInput truth = timer.run("load-truth", [&] { return load_eval_input(f.str("truth")); });

  GridSpec spec;
  if (f.given("map")) {
    spec = read_map(f.str("map")).spec();
  } else if (pred.is_mask) {
    spec = pred.grid.spec();
  } else if (truth.is_mask) {
    spec = truth.grid.spec();
  } else if (f.given("dims")) {
    spec.dims = parse_triple_int(f.str("dims"), "flag --dims");
    spec.spacing = f.num("spacing");
    spec.origin = parse_triple(f.str("origin"), "flag --origin");
    if (spec.dims.x < 1 || spec.dims.y < 1 || spec.dims.z < 1)
      throw ArgError("--dims components must be positive");
    if (spec.spacing <= 0) throw ArgError("--spacing must be positive");
  } else {
    throw ArgError("no grid geometry: pass --map or --dims (with --spacing/--origin)");
  }

  std::string metric = f.str("metric");
  bool want_f1 = metric == "f1" || metric == "both";
  bool want_cd = metric == "crossdist" || metric == "both";
  if (!want_f1 && !want_cd)
    throw ArgError("flag --metric expects f1, crossdist, or both, got '" + metric + "'");

  json results;
  std::string text;

  if (want_f1) {
    int nb = f.integer("neighborhood");
    bool dilate = !f.on("no-dilate");
    EvalReport rep = timer.run("voxel-f1", [&] {
      auto pm = eval_mask(pred, spec, "prediction");
      auto tm = eval_mask(truth, spec, "truth");
      return voxel_f1_masks(pm, tm, spec.dims, nb, dilate);
    });
    results["f1"] = eval_to_json(rep);
    text += eval_to_text(rep, nb, dilate);
  }

  if (want_cd) {
    if (pred.is_mask || truth.is_mask)
      throw ArgError("cross-distance needs trace files on both sides");
    Axis axis = parse_axis(f.str("axis"), "flag --axis");
    CrossDistanceSetReport rep = timer.run("cross-distance", [&] {
      return cross_distance_set(pred.traces, truth.traces, spec, axis, f.num("axial-tol"));
    });
    json jcd;
    jcd["mean_distance"] = rep.defined ? json(rep.mean_distance) : json();
    jcd["defined_pairs"] = rep.defined_pairs;
    jcd["pairs"] = rep.per_filament.size();
    json per = json::array();
    for (const auto& r : rep.per_filament) {
      per.push_back({{"mean_distance", r.defined ? json(r.mean_distance) : json()},
                     {"matched", r.matched},
                     {"truth_points", r.truth_points}});
    }
    jcd["per_filament"] = per;
    results["cross_distance"] = jcd;
    if (rep.defined) {
      text += "cross-distance: mean " + fmt(rep.mean_distance, 3) + " voxels over " +
              std::to_string(rep.defined_pairs) + " matched filaments (of " +
              std::to_string(rep.per_filament.size()) + ")\n";
    } else {
      text += "cross-distance: undefined (no overlapping filament pair)\n";
    }
  }

  std::vector<std::string> outputs;
  if (f.given("out")) {
    std::ofstream out(f.str("out"));
    if (!out) throw ArgError("cannot write '" + f.str("out") + "'");
    out << results.dump(2) << "\n";
    outputs.push_back(f.str("out"));
  }

  std::vector<std::string> inputs{f.str("pred"), f.str("truth")};
  if (f.given("map")) inputs.push_back(f.str("map"));
  write_manifest(f, "eval", inputs, outputs, timer, results,
                 manifest_default(outputs.empty() ? "" : outputs.front()));

  if (f.on("json")) {
    std::cout << results.dump(2) << "\n";
  } else {
    std::cout << text;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// helixfit
// ---------------------------------------------------------------------------

Flags helixfit_flags() {
  Flags f("tomotrace helixfit --map <map.mrc> --model <model.pdb> [flags]",
          "Scores helix placements against density: each helix's central axis\n"
          "defines nested cylinders and the density threshold maximizing the\n"
          "precision/recall harmonic mean is swept per helix.");
  f.add_required("map", 2, "file", "density map (MRC)");
  f.add_required("model", 2, "file", "atomic model (PDB)");
  f.add("chain", 2, "id", "", "chain of the --helix ranges, one character");
  f.add_multi("helix", 2, "a-b", "inclusive residue range; repeat per helix");
  f.add("all-helices-from", 2, "file", "", "one 'chain,first,last' line per helix");
  f.add("mask-radius", 2, "A", "0",
        "keep only density within this radius of the helix atoms; 0 scores the map as is");
  f.add("out", 2, "file", "", "write the report here (.json or .csv by extension, else text)");
  f.add_common();
  return f;
}

struct HelixRange {
  char chain = ' ';
  int first = 0, last = 0;
};

std::vector<HelixRange> helix_ranges(const Flags& f) {
  bool from_file = f.given("all-helices-from");
  auto ranges = f.multi("helix");
  if (from_file == !ranges.empty())
    throw ArgError("pass either --chain with --helix ranges or --all-helices-from, not both");
  std::vector<HelixRange> out;
  if (from_file) {
    std::istringstream in(read_text_file(f.str("all-helices-from")));
    std::string line;
    int ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      std::string t = trimmed(line);
      if (t.empty() || t[0] == '#') continue;
      auto parts = split_list(t, ',');
      if (parts.size() != 3)
        throw FormatError(f.str("all-helices-from") + ":" + std::to_string(ln) +
                          ": expected chain,first,last");
      std::string chain = trimmed(parts[0]);
      if (chain.size() != 1)
        throw FormatError(f.str("all-helices-from") + ":" + std::to_string(ln) +
                          ": chain must be one character");
      out.push_back({chain[0], int(parse_long(trimmed(parts[1]), "helix first residue")),
                     int(parse_long(trimmed(parts[2]), "helix last residue"))});
    }
    if (out.empty()) throw ArgError("'" + f.str("all-helices-from") + "' lists no helices");
    return out;
  }
  std::string chain = f.str("chain");
  if (chain.size() != 1) throw ArgError("--chain expects one character, got '" + chain + "'");
  for (const auto& r : ranges) {
    auto dash = r.find('-', 1);
    if (dash == std::string::npos)
      throw ArgError("flag --helix expects first-last, got '" + r + "'");
    out.push_back({chain[0], int(parse_long(r.substr(0, dash), "flag --helix")),
                   int(parse_long(r.substr(dash + 1), "flag --helix"))});
  }
  return out;
}

int run_helixfit(const std::vector<std::string>& args) {
  Flags f = helixfit_flags();
  f.parse(args);
  if (f.help_requested()) {
    std::cout << f.help_text();
    return 0;
  }
  f.expect_positionals({});
  apply_threads(f);

  auto ranges = helix_ranges(f);
  double mask_radius = f.num("mask-radius");

  StageTimer timer;
  VoxelGrid grid = timer.run("read", [&] { return read_map(f.str("map")); });
  std::string model_text = read_text_file(f.str("model"));

  struct Row {
    HelixRange range;
    std::size_t calphas = 0;
    CylinderFitReport rep;
  };
  std::vector<Row> rows;
  timer.run("score", [&] {
    for (const auto& hr : ranges) {
      HelixModel model = parse_calpha(model_text, hr.chain, hr.first, hr.last);
      auto axis = central_axis(model);
      CylinderFitReport rep;
      if (mask_radius > 0) {
        VoxelGrid masked = masked_by_atoms(grid, model.calphas, mask_radius);
        rep = helix_f1(masked, axis);
      } else {
        rep = helix_f1(grid, axis);
      }
      rows.push_back({hr, model.calphas.size(), rep});
    }
  });

  // Length-weighted score per chain, helices weighted by their atom count.
  std::map<char, std::vector<std::pair<double, CylinderFitReport>>> by_chain;
  for (const auto& r : rows) by_chain[r.range.chain].emplace_back(double(r.calphas), r.rep);
  std::map<char, double> scores;
  for (const auto& [chain, reps] : by_chain) scores[chain] = chain_score(reps);

  json results;
  json jhelices = json::array();
  std::string text;
  for (const auto& r : rows) {
    if (r.rep.degenerate)
      std::cerr << "warning: chain " << r.range.chain << " " << r.range.first << "-" << r.range.last
                << " lies outside the map\n";
    json j;
    j["chain"] = std::string(1, r.range.chain);
    j["res_first"] = r.range.first;
    j["res_last"] = r.range.last;
    j["calphas"] = r.calphas;
    j["f1"] = r.rep.f1;
    j["pden"] = r.rep.pden;
    j["rmod"] = r.rep.rmod;
    j["threshold"] = r.rep.best_threshold;
    j["vx_inner"] = r.rep.vx_inner;
    j["vx_out"] = r.rep.vx_out;
    j["ex_mod"] = r.rep.ex_mod;
    j["degenerate"] = r.rep.degenerate;
    jhelices.push_back(j);
    text += "chain " + std::string(1, r.range.chain) + " " + std::to_string(r.range.first) + "-" +
            std::to_string(r.range.last) + ": f1 " + fmt(r.rep.f1, 3) + "  pden " +
            fmt(r.rep.pden, 3) + "  rmod " + fmt(r.rep.rmod, 3) + "  thr " +
            fmtg(r.rep.best_threshold) + "  (inner " + std::to_string(r.rep.vx_inner) +
            ", annulus " + std::to_string(r.rep.vx_out) + ", missed " +
            std::to_string(r.rep.ex_mod) + ")\n";
  }
  json jscores = json::object();
  for (const auto& [chain, score] : scores) {
    jscores[std::string(1, chain)] = score;
    text += "chain " + std::string(1, chain) + " score (length-weighted): " + fmt(score, 3) + "\n";
  }
  results["helices"] = jhelices;
  results["chain_scores"] = jscores;

  std::vector<std::string> outputs;
  if (f.given("out")) {
    std::string out = f.str("out");
    std::ofstream os(out);
    if (!os) throw ArgError("cannot write '" + out + "'");
    if (ends_with_any(out, {".json"})) {
      os << results.dump(2) << "\n";
    } else if (ends_with_any(out, {".csv"})) {
      os << "chain,res_first,res_last,calphas,f1,pden,rmod,threshold,vx_inner,vx_out,ex_mod,"
            "degenerate\n";
      for (const auto& r : rows) {
        os << r.range.chain << "," << r.range.first << "," << r.range.last << "," << r.calphas
           << "," << fmt(r.rep.f1, 6) << "," << fmt(r.rep.pden, 6) << "," << fmt(r.rep.rmod, 6)
           << "," << fmtg(r.rep.best_threshold) << "," << r.rep.vx_inner << "," << r.rep.vx_out
           << "," << r.rep.ex_mod << "," << (r.rep.degenerate ? 1 : 0) << "\n";
      }
    } else {
      os << text;
    }
    outputs.push_back(out);
  }

  write_manifest(f, "helixfit", {f.str("map"), f.str("model")}, outputs, timer, results,
                 manifest_default(outputs.empty() ? "" : outputs.front()));

  if (f.on("json")) {
    std::cout << results.dump(2) << "\n";
  } else {
    std::cout << text;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

Flags bench_flags() {
  Flags f("tomotrace bench [flags]",
          "Runs the tracers over phantoms at increasing noise and tabulates voxel\n"
          "precision/recall/F1. Rerunning with the same seed reproduces the table.");
  f.add("levels", 2, "list", "0.2,0.4,0.6,0.8,1.0", "comma-separated noise levels");
  f.add("tracer", 2, "name", "both", "spaghetti, struwwel, or both");
  f.add("blends", 2, "list", "multiply", "blend modes benchmarked for the spaghetti tracer");
  f.add("thr", 2, "v", "0.5", "struwwel density threshold");
  f.add("dims", 2, "x,y,z", "160,160,80", "phantom dimensions");
  f.add("count", 2, "n", "30", "filaments per phantom");
  f.add("seed", 2, "n", "0", "base RNG seed; each noise level offsets it");
  f.add("fwhm", 2, "v", "5", "phantom blur FWHM");
  f.add("alpha", 2, "v", "1.5", "phantom noise spectrum exponent");
  f.add("axis", 2, "a", "y", "dominant axis of the parallel phantom");
  f.add("out", 2, "file", "", "write the table as CSV here");
  f.add_common();
  return f;
}

int run_bench(const std::vector<std::string>& args) {
  Flags f = bench_flags();
  f.parse(args);
  if (f.help_requested()) {
    std::cout << f.help_text();
    return 0;
  }
  f.expect_positionals({});
  apply_threads(f);

  std::vector<double> levels;
  for (const auto& s : split_list(f.str("levels"), ','))
    levels.push_back(parse_double(trimmed(s), "flag --levels"));
  if (levels.empty()) throw ArgError("--levels lists no noise levels");

  std::string tracer = f.str("tracer");
  bool want_spaghetti = tracer == "spaghetti" || tracer == "both";
  bool want_struwwel = tracer == "struwwel" || tracer == "both";
  if (!want_spaghetti && !want_struwwel)
    throw ArgError("flag --tracer expects spaghetti, struwwel, or both, got '" + tracer + "'");

  std::vector<BlendMode> blends;
  std::vector<std::string> blend_names;
  for (const auto& s : split_list(f.str("blends"), ',')) {
    std::string name = trimmed(s);
    blends.push_back(parse_blend(name, "flag --blends"));
    blend_names.push_back(name);
  }

  GridSpec spec;
  spec.dims = parse_triple_int(f.str("dims"), "flag --dims");
  spec.spacing = 1.0;
  int count = f.integer("count");
  std::uint64_t seed = std::uint64_t(parse_long(f.str("seed"), "flag --seed"));
  Axis axis = parse_axis(f.str("axis"), "flag --axis");

  SimulationConfig sim;
  sim.fwhm = f.num("fwhm");
  sim.noise_spectrum = NoiseSpectrum::power_law(f.num("alpha"));

  struct Row {
    std::string tracer, blend;
    double noise = 0;
    EvalReport rep;
  };
  std::vector<Row> rows;

  StageTimer timer;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    sim.noise_level = levels[li];
    sim.rng_seed = seed + li;
    std::string stage_suffix = " noise " + fmtg(levels[li]);

    if (want_spaghetti) {
      auto truth = make_parallel_traces(spec, count, seed + li, axis);
      VoxelGrid map = timer.run("simulate parallel" + stage_suffix,
                                [&] { return simulate_tomogram(spec, truth, sim); });
      for (std::size_t bi = 0; bi < blends.size(); ++bi) {
        SpaghettiConfig cfg;
        cfg.axis = axis;
        cfg.blend = blends[bi];
        auto res = timer.run("spaghetti " + blend_names[bi] + stage_suffix,
                             [&] { return trace_spaghetti(map, cfg); });
        rows.push_back(
            {"spaghetti", blend_names[bi], levels[li], voxel_f1(res.traces, truth, spec)});
      }
    }
    if (want_struwwel) {
      auto truth = make_random_traces(spec, count, seed + li);
      VoxelGrid map = timer.run("simulate random" + stage_suffix,
                                [&] { return simulate_tomogram(spec, truth, sim); });
      StruwwelConfig cfg;
      cfg.threshold = f.num("thr");
      auto res =
          timer.run("struwwel" + stage_suffix, [&] { return trace_struwwel(map, cfg); });
      rows.push_back({"struwwel", "-", levels[li], voxel_f1(res.traces, truth, spec)});
    }
  }

  auto cell = [](const EvalReport& r, int which) -> std::string {
    switch (which) {
      case 0: return r.precision_defined ? fmt(r.precision, 4) : "-";
      case 1: return r.recall_defined ? fmt(r.recall, 4) : "-";
      default: return r.f1_defined ? fmt(r.f1, 4) : "-";
    }
  };

  json jrows = json::array();
  for (const auto& r : rows) {
    json j;
    j["tracer"] = r.tracer;
    j["blend"] = r.blend;
    j["noise"] = r.noise;
    j["scores"] = eval_to_json(r.rep);
    jrows.push_back(j);
  }
  json results;
  results["rows"] = jrows;

  std::vector<std::string> outputs;
  if (f.given("out")) {
    std::string out = f.str("out");
    std::ofstream os(out);
    if (!os) throw ArgError("cannot write '" + out + "'");
    os << "tracer,blend,noise,precision,recall,f1\n";
    for (const auto& r : rows) {
      os << r.tracer << "," << r.blend << "," << fmtg(r.noise) << ","
         << (r.rep.precision_defined ? fmt(r.rep.precision, 6) : "") << ","
         << (r.rep.recall_defined ? fmt(r.rep.recall, 6) : "") << ","
         << (r.rep.f1_defined ? fmt(r.rep.f1, 6) : "") << "\n";
    }
    outputs.push_back(out);
  }

  write_manifest(f, "bench", {}, outputs, timer, results,
                 manifest_default(outputs.empty() ? "" : outputs.front()));

  if (f.on("json")) {
    std::cout << results.dump(2) << "\n";
  } else {
    char header[128];
    std::snprintf(header, sizeof(header), "%-10s %-9s %-6s %-10s %-8s %-8s\n", "tracer", "blend",
                  "noise", "precision", "recall", "f1");
    std::cout << header;
    for (const auto& r : rows) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-10s %-9s %-6s %-10s %-8s %-8s\n", r.tracer.c_str(),
                    r.blend.c_str(), fmtg(r.noise).c_str(), cell(r.rep, 0).c_str(),
                    cell(r.rep, 1).c_str(), cell(r.rep, 2).c_str());
      std::cout << line;
    }
  }
  return 0;
}

struct SubEntry {
  const char* name;
  const char* blurb;
  Flags (*flags)();
  int (*run)(const std::vector<std::string>&);
};

constexpr SubEntry kSubcommands[] = {
    {"simulate", "synthesize a phantom tomogram and ground-truth traces", simulate_flags,
     run_simulate},
    {"trace-spaghetti", "trace dense parallel filament bundles", spaghetti_flags, run_spaghetti},
    {"trace-struwwel", "trace arbitrarily oriented filaments", struwwel_flags, run_struwwel},
    {"trace-bundle", "trace a hexagonally packed bundle from seed markers", bundle_flags,
     run_bundle},
    {"eval", "score predicted filaments against ground truth", eval_flags, run_eval},
    {"helixfit", "score helix model placements against a density map", helixfit_flags,
     run_helixfit},
    {"bench", "tabulate tracer scores across phantom noise levels", bench_flags, run_bench},
};

}  // namespace

std::string usage_text() {
  std::string out = "usage: tomotrace <subcommand> [flags]\n\nsubcommands:\n";
  std::size_t width = 0;
  for (const auto& s : kSubcommands) width = std::max(width, std::string(s.name).size());
  for (const auto& s : kSubcommands) {
    out += "  " + std::string(s.name) + std::string(width - std::string(s.name).size() + 2, ' ') +
           s.blurb + "\n";
  }
  out += "\nrun 'tomotrace <subcommand> --help' for flags; --version prints the version\n";
  return out;
}

std::string usage_text(const std::string& subcommand) {
  for (const auto& s : kSubcommands) {
    if (subcommand == s.name) return s.flags().help_text();
  }
  throw ArgError("unknown subcommand '" + subcommand + "'");
}

int run(const std::vector<std::string>& args) {
  if (args.empty()) {
    std::cerr << usage_text();
    return 1;
  }
  const std::string& cmd = args[0];
  if (cmd == "-h" || cmd == "--help" || cmd == "help") {
    std::cout << usage_text();
    return 0;
  }
  if (cmd == "--version") {
    std::cout << "tomotrace " << kVersion << "\n";
    return 0;
  }
  std::vector<std::string> rest(args.begin() + 1, args.end());
  try {
    for (const auto& s : kSubcommands) {
      if (cmd == s.name) return s.run(rest);
    }
    std::cerr << "error: unknown subcommand '" << cmd << "'\n\n" << usage_text();
    return 1;
  } catch (const TomoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace tomo::cli
