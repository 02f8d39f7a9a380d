#pragma once

// JSON run configuration. Every object rejects keys it does not know; table
// paths are resolved against the config file's directory.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hamflow/counterexample.hpp"
#include "hamflow/fields.hpp"
#include "hamflow/geometry.hpp"
#include "hamflow/weakcheck.hpp"

namespace hamflow::config {

using json = nlohmann::json;

namespace detail {

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": wrong type");
  }
}

inline Vec2 vec2(const json& j, const std::string& where) {
  const auto v = as<std::vector<double>>(j, where);
  if (v.size() != 2) throw ConfigError(where + ": expected [x, y]");
  return {v[0], v[1]};
}

inline std::vector<Vec2> vec2_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a list of points");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(vec2(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace detail

struct NamedSpec {
  std::string name;
  std::vector<double> params;
  std::string table;  // resolved path, for "table" specs
};

struct ChartConfig {
  Vec2 center{0.0, 0.0};
  double eta{0.25};
  std::optional<Vec2> direction;  // default: the check_px witness
  std::vector<double> levels;     // fibers to dump
  std::vector<std::size_t> cov_schedule{8, 16, 32, 64};
};

struct WeakConfig {
  std::vector<std::size_t> schedule{8, 16, 32, 64};
  double t0{0.2};
  double rt{0.15};
  std::vector<Vec2> centers{{0.0, 0.0}};
  std::vector<double> radii{0.4};
  std::vector<Profile> profiles{Profile::Tensor, Profile::Radial, Profile::Modulated};
  double exclusion{0.0};
  std::optional<Vec2> polar_center;
};

struct Tolerances {
  double residual{1e-8};    // constraint checks (masscons, moments)
  double min_order{1.0};    // weak residual ladders
  double floor{1e-10};
  double energy{1e-9};      // classical energy conservation
  double period{1e-6};      // classical periodicity / reversibility
  double roundtrip{1e-10};  // chart inversion
};

struct RunConfig {
  std::string scenario;
  std::optional<NamedSpec> field;
  std::optional<NamedSpec> potential;
  std::optional<NamedSpec> datum;
  std::optional<std::vector<double>> window;  // [lo, hi] or [x_min, x_max, y_min, y_max]
  std::vector<Vec2> points;
  std::size_t resolution{32};
  std::vector<double> times;
  std::optional<counterexample::MeasurePreservingMap> psi;
  std::string u_tilde{"rearranged"};  // datum | rearranged | averaged
  std::vector<NamedSpec> betas;
  int degree{3};
  std::vector<double> levels;
  std::vector<double> energies;
  PxParams px;
  ChartConfig chart;
  WeakConfig weak;
  Tolerances tol;
  std::string out_dir;

  Window window2d() const {
    if (!window) return {};
    if (window->size() != 4) throw ConfigError("window: expected [x_min, x_max, y_min, y_max]");
    return {(*window)[0], (*window)[1], (*window)[2], (*window)[3]};
  }
  Interval window1d() const {
    // With four numbers the first pair is the position range.
    if (!window || (window->size() != 2 && window->size() != 4)) throw ConfigError("window: expected [lo, hi]");
    return {(*window)[0], (*window)[1]};
  }
};

inline NamedSpec parse_named(const json& j, const std::string& where, const std::filesystem::path& base) {
  NamedSpec s;
  if (j.is_string()) {
    s.name = j.get<std::string>();
    return s;
  }
  detail::only_keys(j, where, {"name", "params", "table"});
  if (j.contains("table")) {
    s.name = "table";
    const std::filesystem::path p = detail::as<std::string>(j["table"], where + ".table");
    s.table = (p.is_absolute() ? p : base / p).lexically_normal().string();
    if (!std::ifstream(s.table)) throw ConfigError(where + ".table: cannot read " + s.table);
  }
  if (j.contains("name")) s.name = detail::as<std::string>(j["name"], where + ".name");
  if (s.name.empty()) throw ConfigError(where + ": needs a name or a table");
  if (j.contains("params")) s.params = detail::as<std::vector<double>>(j["params"], where + ".params");
  return s;
}

/// Psi as a name (identity, reflection, swap_halves) or
/// {"pieces": [[[src_lo, src_hi], [tgt_lo, tgt_hi], orientation], ...], "domain": [lo, hi]}.
inline counterexample::MeasurePreservingMap parse_psi(const json& j) {
  using counterexample::MeasurePreservingMap;
  if (j.is_string()) {
    const auto n = j.get<std::string>();
    if (n == "identity") return MeasurePreservingMap::identity();
    if (n == "reflection") return MeasurePreservingMap::reflection();
    if (n == "swap_halves") return MeasurePreservingMap::swap_halves();
    throw ConfigError("psi: unknown map '" + n + "'");
  }
  detail::only_keys(j, "psi", {"pieces", "domain"});
  Interval dom{-1.0, 1.0};
  if (j.contains("domain")) {
    const auto d = detail::as<std::vector<double>>(j["domain"], "psi.domain");
    if (d.size() != 2) throw ConfigError("psi.domain: expected [lo, hi]");
    dom = {d[0], d[1]};
  }
  if (!j.contains("pieces") || !j["pieces"].is_array()) throw ConfigError("psi: needs a list of pieces");
  std::vector<MeasurePreservingMap::Piece> pieces;
  for (const auto& p : j["pieces"]) {
    if (!p.is_array() || p.size() != 3) throw ConfigError("psi.pieces: expected [source, target, orientation]");
    const auto s = detail::as<std::vector<double>>(p[0], "psi.pieces.source");
    const auto t = detail::as<std::vector<double>>(p[1], "psi.pieces.target");
    const int o = detail::as<int>(p[2], "psi.pieces.orientation");
    if (s.size() != 2 || t.size() != 2) throw ConfigError("psi.pieces: intervals are [lo, hi]");
    pieces.push_back({{s[0], s[1]}, {t[0], t[1]}, o});
  }
  return MeasurePreservingMap(std::move(pieces), dom);
}

inline Profile parse_profile(const std::string& s) {
  if (s == "tensor") return Profile::Tensor;
  if (s == "radial") return Profile::Radial;
  if (s == "modulated") return Profile::Modulated;
  throw ConfigError("weak.profiles: unknown profile '" + s + "'");
}

inline RunConfig parse(const json& j, const std::filesystem::path& base = ".") {
  using detail::as;
  detail::only_keys(j, "config",
                    {"scenario", "field", "potential", "datum", "window", "points", "resolution", "times", "psi",
                     "u_tilde", "betas", "degree", "levels", "energies", "px", "chart", "weak", "tolerances", "out"});
  RunConfig c;
  if (j.contains("scenario")) c.scenario = as<std::string>(j["scenario"], "scenario");
  if (j.contains("field")) c.field = parse_named(j["field"], "field", base);
  if (j.contains("potential")) c.potential = parse_named(j["potential"], "potential", base);
  if (j.contains("datum")) c.datum = parse_named(j["datum"], "datum", base);
  if (j.contains("window")) {
    c.window = as<std::vector<double>>(j["window"], "window");
    if (c.window->size() != 2 && c.window->size() != 4) throw ConfigError("window: expected 2 or 4 numbers");
  }
  if (j.contains("points")) c.points = detail::vec2_list(j["points"], "points");
  if (j.contains("resolution")) c.resolution = as<std::size_t>(j["resolution"], "resolution");
  if (j.contains("times")) c.times = as<std::vector<double>>(j["times"], "times");
  if (j.contains("psi")) c.psi = parse_psi(j["psi"]);
  if (j.contains("u_tilde")) {
    c.u_tilde = as<std::string>(j["u_tilde"], "u_tilde");
    if (c.u_tilde != "datum" && c.u_tilde != "rearranged" && c.u_tilde != "averaged")
      throw ConfigError("u_tilde: expected datum, rearranged or averaged");
  }
  if (j.contains("betas")) {
    if (!j["betas"].is_array()) throw ConfigError("betas: expected a list");
    for (const auto& b : j["betas"]) c.betas.push_back(parse_named(b, "betas", base));
  }
  if (j.contains("degree")) c.degree = as<int>(j["degree"], "degree");
  if (j.contains("levels")) c.levels = as<std::vector<double>>(j["levels"], "levels");
  if (j.contains("energies")) c.energies = as<std::vector<double>>(j["energies"], "energies");
  if (j.contains("px")) {
    const auto& p = j["px"];
    detail::only_keys(p, "px", {"radius", "n_dirs", "n_samples", "vanish_threshold"});
    if (p.contains("radius")) c.px.radius = as<double>(p["radius"], "px.radius");
    if (p.contains("n_dirs")) c.px.n_dirs = as<std::size_t>(p["n_dirs"], "px.n_dirs");
    if (p.contains("n_samples")) c.px.n_samples = as<std::size_t>(p["n_samples"], "px.n_samples");
    if (p.contains("vanish_threshold")) c.px.vanish_threshold = as<double>(p["vanish_threshold"], "px.vanish_threshold");
  }
  if (j.contains("chart")) {
    const auto& p = j["chart"];
    detail::only_keys(p, "chart", {"center", "eta", "direction", "levels", "cov_schedule"});
    if (p.contains("center")) c.chart.center = detail::vec2(p["center"], "chart.center");
    if (p.contains("eta")) c.chart.eta = as<double>(p["eta"], "chart.eta");
    if (p.contains("direction")) c.chart.direction = detail::vec2(p["direction"], "chart.direction");
    if (p.contains("levels")) c.chart.levels = as<std::vector<double>>(p["levels"], "chart.levels");
    if (p.contains("cov_schedule")) c.chart.cov_schedule = as<std::vector<std::size_t>>(p["cov_schedule"], "chart.cov_schedule");
  }
  if (j.contains("weak")) {
    const auto& p = j["weak"];
    detail::only_keys(p, "weak", {"schedule", "t0", "rt", "centers", "radii", "profiles", "exclusion", "polar_center"});
    if (p.contains("schedule")) c.weak.schedule = as<std::vector<std::size_t>>(p["schedule"], "weak.schedule");
    if (p.contains("t0")) c.weak.t0 = as<double>(p["t0"], "weak.t0");
    if (p.contains("rt")) c.weak.rt = as<double>(p["rt"], "weak.rt");
    if (p.contains("centers")) c.weak.centers = detail::vec2_list(p["centers"], "weak.centers");
    if (p.contains("radii")) c.weak.radii = as<std::vector<double>>(p["radii"], "weak.radii");
    if (p.contains("profiles")) {
      c.weak.profiles.clear();
      for (const auto& s : as<std::vector<std::string>>(p["profiles"], "weak.profiles"))
        c.weak.profiles.push_back(parse_profile(s));
    }
    if (p.contains("exclusion")) c.weak.exclusion = as<double>(p["exclusion"], "weak.exclusion");
    if (p.contains("polar_center")) c.weak.polar_center = detail::vec2(p["polar_center"], "weak.polar_center");
  }
  if (j.contains("tolerances")) {
    const auto& p = j["tolerances"];
    detail::only_keys(p, "tolerances", {"residual", "min_order", "floor", "energy", "period", "roundtrip"});
    if (p.contains("residual")) c.tol.residual = as<double>(p["residual"], "tolerances.residual");
    if (p.contains("min_order")) c.tol.min_order = as<double>(p["min_order"], "tolerances.min_order");
    if (p.contains("floor")) c.tol.floor = as<double>(p["floor"], "tolerances.floor");
    if (p.contains("energy")) c.tol.energy = as<double>(p["energy"], "tolerances.energy");
    if (p.contains("period")) c.tol.period = as<double>(p["period"], "tolerances.period");
    if (p.contains("roundtrip")) c.tol.roundtrip = as<double>(p["roundtrip"], "tolerances.roundtrip");
  }
  if (j.contains("out")) {
    const std::filesystem::path p = as<std::string>(j["out"], "out");
    c.out_dir = (p.is_absolute() ? p : base / p).lexically_normal().string();
  }
  return c;
}

inline RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse(j, std::filesystem::path(path).parent_path());
}

/// Creates `dir` if needed and checks that a file can be written there.
inline void ensure_writable(const std::string& dir) {
  if (dir.empty()) throw ConfigError("no output directory (use --out or \"out\")");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  const auto probe = std::filesystem::path(dir) / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw ConfigError("output directory not writable: " + dir);
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace hamflow::config
