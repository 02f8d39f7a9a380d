// hamflow: command-line front end.
//
//   hamflow <subcommand> --config run.json --out dir [--threads n] [--seed-free]
//
// Exit status: 0 all verdicts pass, 2 some verdict failed, 1 usage or config error.
// Diagnostics go to stderr; results go to files in the output directory only.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hamflow/config.hpp"
#include "hamflow/hamflow.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace hamflow;

namespace {

struct Options {
  std::string config;
  std::string out;
  unsigned threads{1};
  bool seed_free{false};
};

/// Collects named checks and writes `<out>/<name>.json`.
class Report {
 public:
  explicit Report(std::string name) : name_(std::move(name)) {}

  void check(const std::string& what, double value, double threshold, bool ok) {
    checks_.push_back({{"name", what}, {"value", value}, {"threshold", threshold}, {"pass", ok}});
    if (!ok) {
      pass_ = false;
      std::cerr << "FAIL " << name_ << ": " << what << " = " << value << " (threshold " << threshold << ")\n";
    }
  }
  json& data() { return data_; }
  bool pass() const { return pass_; }

  void write(const std::string& dir, const Options& opt) const {
    json j;
    j["subcommand"] = name_;
    j["verdict"] = pass_ ? "PASS" : "FAIL";
    j["checks"] = checks_;
    j["data"] = data_;
    j["seed_free"] = true;  // no pseudorandom generator is used anywhere
    j["threads"] = opt.threads;
    std::ofstream f(fs::path(dir) / (file_stem() + ".json"));
    f << j.dump(2) << '\n';
  }

 private:
  std::string file_stem() const {
    std::string s = name_;
    std::replace(s.begin(), s.end(), ' ', '_');
    return s;
  }

  std::string name_;
  json checks_ = json::array();
  json data_ = json::object();
  bool pass_{true};
};

std::string out_path(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

ScalarField2D load_field(const config::RunConfig& c) {
  if (!c.field) throw ConfigError("this subcommand needs a \"field\"");
  if (c.field->name == "table") return ScalarField2D::from_csv(c.field->table);
  return scenarios::field(c.field->name, c.field->params, c.window2d());
}

PlanarVectorField load_vector_field(const config::RunConfig& c, const ScalarField2D& H) {
  return scenarios::vector_field(c.field->name, H, c.window2d());
}

Potential1D load_potential(const config::RunConfig& c) {
  if (!c.potential) throw ConfigError("this subcommand needs a \"potential\"");
  if (c.potential->name == "table") return Potential1D::from_csv(c.potential->table);
  return scenarios::potential(c.potential->name, c.potential->params, c.window1d());
}

scenarios::Datum load_datum(const config::RunConfig& c, const std::string& fallback) {
  if (!c.datum) return scenarios::datum(fallback);
  if (c.datum->name == "table") {
    const auto f = ScalarField2D::from_csv(c.datum->table);
    return [f](const Vec2& x) { return f(x); };
  }
  return scenarios::datum(c.datum->name, c.datum->params);
}

RenormalizationFamily load_betas(const config::RunConfig& c, const std::vector<std::string>& fallback) {
  std::vector<Beta> out;
  if (c.betas.empty())
    for (const auto& n : fallback) out.push_back(beta::by_name(n));
  for (const auto& b : c.betas) out.push_back(beta::by_name(b.name, b.params));
  return RenormalizationFamily(std::move(out));
}

/// Config points, or a resolution x resolution midpoint grid over the window.
std::vector<Vec2> eval_points(const config::RunConfig& c, Window fallback) {
  if (!c.points.empty()) return c.points;
  Window w = c.window && c.window->size() == 4 ? c.window2d() : fallback;
  if (!std::isfinite(w.x_min) || !std::isfinite(w.x_max) || !std::isfinite(w.y_min) || !std::isfinite(w.y_max))
    throw ConfigError("need \"points\" or a bounded 4-number \"window\"");
  std::vector<Vec2> pts;
  const std::size_t n = std::max<std::size_t>(c.resolution, 1);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      pts.push_back({w.x_min + (w.x_max - w.x_min) * (i + 0.5) / n, w.y_min + (w.y_max - w.y_min) * (j + 0.5) / n});
  return pts;
}

counterexample::Datum make_u_tilde(const config::RunConfig& c, const counterexample::Datum& u0) {
  if (c.u_tilde == "datum") return u0;
  if (c.u_tilde == "averaged") return counterexample::averaged_datum(u0);
  return counterexample::rearranged_datum(u0, c.psi.value_or(counterexample::MeasurePreservingMap::identity()));
}

int px_check(const config::RunConfig& c, const Options& opt) {
  const ScalarField2D H = load_field(c);
  const PlanarVectorField b = load_vector_field(c, H);
  const auto pts = eval_points(c, H.window());
  csv::Table t{{"x1", "x2", "class", "xi1", "xi2", "alpha"}, {}};
  t.rows.resize(pts.size());
  std::vector<int> errors(pts.size(), 0);
  parallel_for(pts.size(), opt.threads, [&](std::size_t i) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    try {
      const PointClass cls = classify_point(b, pts[i], c.px);
      std::optional<PxWitness> w;
      if (cls == PointClass::P) w = check_px(b, pts[i], c.px.radius, c.px.n_dirs, c.px.n_samples);
      t.rows[i] = {pts[i].x, pts[i].y, static_cast<double>(cls), w ? w->direction.x : nan, w ? w->direction.y : nan,
                   w ? w->alpha : nan};
    } catch (const EvaluationError&) {
      errors[i] = 1;
      t.rows[i] = {pts[i].x, pts[i].y, nan, nan, nan, nan};
    }
  });
  csv::write(out_path(c.out_dir, "px.csv"), t);
  Report rep("px-check");
  std::size_t counts[3] = {0, 0, 0}, n_err = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (errors[i]) {
      ++n_err;
      std::cerr << "px-check: field evaluation failed near (" << pts[i].x << ", " << pts[i].y << ")\n";
      continue;
    }
    ++counts[static_cast<int>(t.rows[i][2])];
  }
  rep.data()["counts"] = {{"P", counts[0]}, {"O", counts[1]}, {"Z", counts[2]}};
  rep.data()["class_codes"] = {{"0", "P"}, {"1", "O"}, {"2", "Z"}};
  rep.check("evaluation_failures", static_cast<double>(n_err), 0.0, n_err == 0);
  rep.write(c.out_dir, opt);
  return rep.pass() ? 0 : 2;
}

int chart_cmd(const config::RunConfig& c, const Options& opt) {
  const ScalarField2D H = load_field(c);
  const PlanarVectorField b = load_vector_field(c, H);
  PxWitness w;
  if (c.chart.direction) {
    const Vec2 xi = *c.chart.direction * (1.0 / norm(*c.chart.direction));
    w = {xi, sampled_min_along(b, c.chart.center, c.px.radius, xi, c.px.n_samples), c.px.radius};
    if (!(w.alpha > 0.0)) throw ChartError("chart: given direction is not a witness at the center", 0.0);
  } else {
    const auto found = check_px(b, c.chart.center, c.px.radius, c.px.n_dirs, c.px.n_samples);
    if (!found) throw ChartError("chart: no direction witness at the center", 0.0);
    w = *found;
  }
  const Chart chart = build_chart(H, b, c.chart.center, w, c.chart.eta);
  csv::write(out_path(c.out_dir, "chart.csv"), chart.dump());
  Report rep("chart");
  rep.data()["direction"] = {w.direction.x, w.direction.y};
  rep.data()["alpha"] = w.alpha;
  rep.data()["min_jacobian"] = chart.min_jacobian();

  for (std::size_t k = 0; k < c.chart.levels.size(); ++k) {
    const auto reds = reduce_fiber_all(chart, c.chart.levels[k]);
    if (reds.empty()) {
      std::cerr << "chart: empty fiber at level " << c.chart.levels[k] << "\n";
      continue;
    }
    csv::write(out_path(c.out_dir, "fiber_" + std::to_string(k) + ".csv"), reds.front().dump());
  }

  // Round trip on a lattice of U.
  const sampling::FibonacciLattice lat(std::max<std::size_t>(c.resolution * c.resolution, 64));
  std::vector<double> err(lat.size(), 0.0);
  const double eta = chart.half_width();
  parallel_for(lat.size(), opt.threads, [&](std::size_t i) {
    const Vec2 u = lat[i];
    const Vec2 x = chart.point(eta * (2.0 * u.x - 1.0) * 0.999, eta * (2.0 * u.y - 1.0) * 0.999);
    const auto back = chart.inverse(chart.forward(x));
    err[i] = back ? norm(*back - x) : std::numeric_limits<double>::infinity();
  });
  const double max_err = *std::max_element(err.begin(), err.end());
  rep.check("roundtrip_max_error", max_err, c.tol.roundtrip, max_err <= c.tol.roundtrip);

  csv::Table cov{{"n", "lhs", "rhs", "difference"}, {}};
  std::vector<double> diffs;
  for (std::size_t n : c.chart.cov_schedule) {
    const auto [l, r] = detail::cov_sides(chart, [](const Vec2& x) { return std::exp(x.x) * std::cos(x.y); }, n);
    cov.rows.push_back({static_cast<double>(n), l, r, std::abs(l - r)});
    diffs.push_back(std::abs(l - r));
  }
  csv::write(out_path(c.out_dir, "cov.csv"), cov);
  Thresholds th{c.tol.min_order, c.tol.floor};
  rep.data()["cov_differences"] = diffs;
  rep.check("cov_order", overall_order(diffs, th.floor), th.min_order, ladder_passes(diffs, th));
  rep.write(c.out_dir, opt);
  return rep.pass() ? 0 : 2;
}

int classical_cmd(const config::RunConfig& c, const Options& opt) {
  const Potential1D V = load_potential(c);
  const Interval win = c.window1d();
  Report rep("classical");
  rep.data()["confined"] = V.confined();

  json slices = json::array();
  for (std::size_t k = 0; k < c.energies.size(); ++k) {
    const EnergySlice s = energy_slice(V, c.energies[k], win);
    csv::write(out_path(c.out_dir, "slice_" + std::to_string(k) + ".csv"), s.dump());
    json js;
    js["energy"] = c.energies[k];
    json ivs = json::array();
    for (const auto& iv : s.intervals) {
      json ji{{"a", iv.a}, {"b", iv.b}, {"left", to_string(iv.left)}, {"right", to_string(iv.right)}};
      if (iv.time) {
        ji["half_period"] = iv.time->half_period();
        if (iv.closed()) ji["period"] = 2.0 * iv.time->half_period();
      } else {
        ji["diagnostic"] = iv.diagnostic;
      }
      ivs.push_back(ji);
    }
    js["intervals"] = ivs;
    slices.push_back(js);
  }
  rep.data()["slices"] = slices;

  // Orbit samples: every point at every time, with conservation checks.
  csv::Table orbits{{"point", "t", "x", "y", "energy_error"}, {}};
  SliceCache cache(V, win);
  double worst_energy = 0.0, worst_period = 0.0, worst_reverse = 0.0;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const PhasePoint p{c.points[i].x, c.points[i].y};
    const EnergySlice& s = cache.at(energy(V, p));
    try {
      for (double t : c.times) {
        const auto q = orbit_flow(s, p, t);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (!q) {
          orbits.rows.push_back({static_cast<double>(i), t, nan, nan, nan});
          continue;
        }
        const double de = std::abs(energy(V, *q) - energy(V, p));
        worst_energy = std::max(worst_energy, de);
        orbits.rows.push_back({static_cast<double>(i), t, q->x, q->y, de});
        if (const auto r = orbit_flow(s, *q, -t))
          worst_reverse = std::max(worst_reverse, std::hypot(r->x - p.x, r->y - p.y));
      }
      const auto idx = s.locate(p.x);
      if (idx && s.intervals[*idx].closed() && s.intervals[*idx].time) {
        const auto q = orbit_flow(s, p, 2.0 * s.intervals[*idx].time->half_period());
        worst_period = std::max(worst_period, std::hypot(q->x - p.x, q->y - p.y));
      }
    } catch (const OrbitError& e) {
      ++failed;
      std::cerr << "classical: point " << i << ": " << e.what() << "\n";
    }
  }
  csv::write(out_path(c.out_dir, "orbits.csv"), orbits);
  rep.check("energy_conservation", worst_energy, c.tol.energy, worst_energy <= c.tol.energy);
  rep.check("periodicity", worst_period, c.tol.period, worst_period <= c.tol.period);
  rep.check("time_reversal", worst_reverse, c.tol.period, worst_reverse <= c.tol.period);
  rep.data()["failed_points"] = failed;

  if (c.datum && c.window && c.window->size() == 4) {
    const auto u0 = load_datum(c, "x1");
    const auto sol = classical_solution(V, u0, win);
    const auto pts = eval_points(c, {});
    csv::Table out{{"t", "x", "y", "u"}, {}};
    for (double t : c.times) {
      std::vector<std::optional<double>> vals(pts.size());
      parallel_for(pts.size(), opt.threads, [&](std::size_t i) { vals[i] = sol(t, pts[i]); });
      for (std::size_t i = 0; i < pts.size(); ++i)
        out.rows.push_back({t, pts[i].x, pts[i].y, vals[i] ? *vals[i] : std::numeric_limits<double>::quiet_NaN()});
    }
    csv::write(out_path(c.out_dir, "solution.csv"), out);
  }
  rep.write(c.out_dir, opt);
  return rep.pass() ? 0 : 2;
}

int ce_flow(const config::RunConfig& c, const Options& opt) {
  using namespace counterexample;
  const MeasurePreservingMap psi = c.psi.value_or(MeasurePreservingMap::identity());
  const auto pts = eval_points(c, {-1.0, 1.0, -1.0, 1.0});
  csv::Table t{{"t", "x1", "x2", "X1", "X2", "region"}, {}};
  double semigroup = 0.0, h_drift = 0.0;
  for (double s : c.times)
    for (const Vec2& x : pts) {
      const Vec2 y = flow_X_psi(psi, s, x);
      t.rows.push_back({s, x.x, x.y, y.x, y.y, static_cast<double>(region(y))});
      for (double r : c.times) {
        const Vec2 a = flow_X_psi(psi, s + r, x), b = flow_X_psi(psi, r, y);
        semigroup = std::max(semigroup, norm(a - b));
      }
      if (psi.is_identity()) {
        const auto h0 = h_example(x), h1 = h_example(y);
        if (h0 && h1) h_drift = std::max(h_drift, std::abs(*h0 - *h1));
      }
    }
  csv::write(out_path(c.out_dir, "flow.csv"), t);
  Report rep("counterexample flow");
  rep.data()["region_codes"] = {"origin", "J", "I", "upper-wedge", "lower-wedge", "upper-wedge-mirror",
                                "lower-wedge-mirror"};
  rep.check("semigroup_defect", semigroup, 1e-9, semigroup <= 1e-9);
  if (psi.is_identity()) rep.check("hamiltonian_drift", h_drift, 1e-12, h_drift <= 1e-12);
  rep.write(c.out_dir, opt);
  return rep.pass() ? 0 : 2;
}

int ce_family(const config::RunConfig& c, const Options& opt) {
  using namespace counterexample;
  const auto u0 = load_datum(c, "x1_box");
  const auto u = solution_family(u0, make_u_tilde(c, u0));
  const auto ubar = solution_family(u0, u0);
  const auto pts = eval_points(c, {-1.0, 1.0, -1.0, 1.0});
  csv::Table t{{"t", "x1", "x2", "u"}, {}};
  Report rep("counterexample family");
  json l1 = json::array();
  for (double s : c.times) {
    std::vector<double> vals(pts.size());
    parallel_for(pts.size(), opt.threads, [&](std::size_t i) { vals[i] = u(s, pts[i]).value(); });
    for (std::size_t i = 0; i < pts.size(); ++i) t.rows.push_back({s, pts[i].x, pts[i].y, vals[i]});
    const double d = l1_difference(u, ubar, s, {0.0, -1.0}, {1.0, 0.0},
                                   [](const Vec2& x) { return region(x) == RegionTag::LowerCone; }, 400);
    l1.push_back({{"t", s}, {"l1_to_distinguished", d}});
  }
  csv::write(out_path(c.out_dir, "family.csv"), t);
  rep.data()["l1_on_I_unit_box"] = l1;
  rep.write(c.out_dir, opt);
  return 0;
}

std::vector<double> levels_or_default(const config::RunConfig& c) {
  return c.levels.empty() ? std::vector<double>{0.25, 0.5, 1.0} : c.levels;
}

int ce_verify(const config::RunConfig& c, const Options& opt) {
  using namespace counterexample;
  const auto u0 = load_datum(c, "x1_box");
  const auto ut = make_u_tilde(c, u0);
  const auto levels = levels_or_default(c);
  const auto betas = load_betas(c, {"square"});
  Report rep("counterexample verify");
  csv::Table t{{"level", "check", "member", "residual"}, {}};
  auto worst = [&](const std::vector<LevelResidual>& rs, int code) {
    double m = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      m = std::max(m, rs[i].residual);
      const double member = code == 0 ? 0.0 : static_cast<double>(code == 1 ? i % betas.size() : i % (c.degree + 1));
      t.rows.push_back({rs[i].level, static_cast<double>(code), member, rs[i].residual});
    }
    return m;
  };
  const double m0 = worst(check_masscons(ut, u0, levels), 0);
  const double m1 = worst(check_masscons2(ut, u0, betas, levels), 1);
  const double m2 = worst(hamiltonian_moment_residual(ut, u0, c.degree, levels), 2);
  csv::write(out_path(c.out_dir, "constraints.csv"), t);
  rep.data()["check_codes"] = {"masscons", "masscons2", "hamiltonian_moments"};
  rep.check("masscons", m0, c.tol.residual, m0 <= c.tol.residual);
  rep.check("masscons2", m1, c.tol.residual, m1 <= c.tol.residual);
  rep.check("hamiltonian_moments", m2, c.tol.residual, m2 <= c.tol.residual);
  rep.write(c.out_dir, opt);
  return rep.pass() ? 0 : 2;
}

int weak_verify(const config::RunConfig& c, const Options& opt) {
  std::optional<TransportSolution> sol;
  PlanarVectorField b;
  Report rep("weak-verify");
  WeakGrid base;
  base.threads = opt.threads;
  base.exclusion = c.weak.exclusion;
  base.polar_center = c.weak.polar_center;

  if (c.field && c.field->name == "counterexample") {
    using namespace counterexample;
    const auto u0 = load_datum(c, "x1_box");
    const auto ut = make_u_tilde(c, u0);
    sol = solution_family(u0, ut);
    b = counterexample::vector_field();
    if (!base.polar_center) base.polar_center = Vec2{0.0, 0.0};
    // The segment constraints explain the verdicts, so they go in the same report.
    const auto betas = load_betas(c, {"id"});
    double m0 = 0.0, m1 = 0.0;
    for (const auto& r : check_masscons(ut, u0, levels_or_default(c))) m0 = std::max(m0, r.residual);
    for (const auto& r : check_masscons2(ut, u0, betas, levels_or_default(c))) m1 = std::max(m1, r.residual);
    rep.check("masscons", m0, c.tol.residual, m0 <= c.tol.residual);
    rep.check("masscons2", m1, c.tol.residual, m1 <= c.tol.residual);
  } else if (c.field) {
    const ScalarField2D H = load_field(c);
    b = load_vector_field(c, H);
    PxWitness w;
    if (c.chart.direction) {
      const Vec2 xi = *c.chart.direction * (1.0 / norm(*c.chart.direction));
      w = {xi, sampled_min_along(b, c.chart.center, c.px.radius, xi, c.px.n_samples), c.px.radius};
    } else {
      const auto found = check_px(b, c.chart.center, c.px.radius, c.px.n_dirs, c.px.n_samples);
      if (!found) throw ChartError("weak-verify: no direction witness at the chart center", 0.0);
      w = *found;
    }
    auto cache = std::make_shared<const FiberCache>(build_chart(H, b, c.chart.center, w, c.chart.eta));
    sol = chart_pullback_solution(cache, load_datum(c, "sin"));
  } else if (c.potential) {
    const Potential1D V = load_potential(c);
    sol = classical_solution(V, load_datum(c, "x1"), c.window1d());
    b = PlanarVectorField([V](const Vec2& p) { return Vec2{p.y, -V.derivative(p.x)}; });
  } else {
    throw ConfigError("weak-verify needs a field or a potential");
  }

  const auto betas = load_betas(c, {"id"});
  const auto phis = test_family(c.weak.t0, c.weak.rt, c.weak.centers, c.weak.radii, c.weak.profiles);
  const Thresholds th{c.tol.min_order, c.tol.floor};
  ResidualReport rr;
  try {
    rr = check_R(*sol, b, betas, phis, c.weak.schedule, base, th);
  } catch (const EvaluationError& e) {
    std::cerr << "weak-verify: refused: " << e.what() << "\n";
    rep.check("refused", 1.0, 0.0, false);
    rep.write(c.out_dir, opt);
    return 2;
  }
  csv::Table t{{"beta", "phi", "n", "residual"}, {}};
  json ladders = json::array();
  for (std::size_t r = 0; r < rr.rows.size(); ++r) {
    const auto& row = rr.rows[r];
    for (std::size_t k = 0; k < row.grid.size(); ++k)
      t.rows.push_back({static_cast<double>(r / phis.size()), static_cast<double>(r % phis.size()),
                        static_cast<double>(row.grid[k]), row.residuals[k]});
    ladders.push_back({{"beta", row.beta}, {"test_function", row.test_function}, {"grid", row.grid},
                       {"residuals", row.residuals}, {"orders", row.orders}, {"order", row.order},
                       {"pass", row.pass}});
    rep.check(row.beta + " " + row.test_function, row.order, th.min_order, row.pass);
  }
  csv::write(out_path(c.out_dir, "weak.csv"), t);
  rep.data()["ladders"] = ladders;
  rep.data()["thresholds"] = {{"min_order", th.min_order}, {"floor", th.floor}};
  rep.write(c.out_dir, opt);
  return rep.pass() ? 0 : 2;
}

int report_cmd(const config::RunConfig& c, const Options& opt) {
  json summary = json::object();
  bool pass = true;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(c.out_dir))
    if (e.path().extension() == ".json" && e.path().filename() != "report.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("report: no subcommand results in " + c.out_dir);
  for (const auto& p : files) {
    std::ifstream in(p);
    json j;
    try {
      in >> j;
    } catch (const json::exception&) {
      throw ConfigError("report: cannot parse " + p.string());
    }
    if (!j.contains("subcommand") || !j.contains("verdict")) continue;
    summary[j["subcommand"].get<std::string>()] = j["verdict"];
    if (j["verdict"] != "PASS") pass = false;
  }
  json out{{"subcommand", "report"}, {"verdict", pass ? "PASS" : "FAIL"}, {"results", summary}, {"seed_free", true},
           {"threads", opt.threads}};
  std::ofstream f(fs::path(c.out_dir) / "report.json");
  f << out.dump(2) << '\n';
  return pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hamflow: transport along Hamiltonian level sets"};
  app.require_subcommand(1);
  Options opt;
  auto common = [&](CLI::App* s, bool config_required = true) {
    auto* o = s->add_option("--config", opt.config, "JSON run configuration");
    if (config_required) o->required()->check(CLI::ExistingFile);
    s->add_option("--out", opt.out, "output directory (overrides \"out\")");
    s->add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1u, 1024u));
    s->add_flag("--seed-free", opt.seed_free, "assert that no randomness is used");
  };
  auto* px = app.add_subcommand("px-check", "direction condition and P/O/Z classification");
  auto* ch = app.add_subcommand("chart", "local energy chart, inversion and change of variables");
  auto* cl = app.add_subcommand("classical", "energy slices and orbits for y^2/2 + V(x)");
  auto* ce = app.add_subcommand("counterexample", "the non-uniqueness example");
  ce->require_subcommand(1);
  auto* ce_f = ce->add_subcommand("flow", "X_Psi samples");
  auto* ce_fam = ce->add_subcommand("family", "solution family samples");
  auto* ce_v = ce->add_subcommand("verify", "segment constraints");
  auto* wv = app.add_subcommand("weak-verify", "weak residual ladders and renormalization");
  auto* rp = app.add_subcommand("report", "aggregate verdicts in the output directory");
  for (auto* s : {px, ch, cl, ce_f, ce_fam, ce_v, wv}) common(s);
  common(rp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    config::RunConfig c;
    if (!opt.config.empty()) c = config::load(opt.config);
    if (!opt.out.empty()) c.out_dir = opt.out;
    config::ensure_writable(c.out_dir);
    if (*px) return px_check(c, opt);
    if (*ch) return chart_cmd(c, opt);
    if (*cl) return classical_cmd(c, opt);
    if (*ce_f) return ce_flow(c, opt);
    if (*ce_fam) return ce_family(c, opt);
    if (*ce_v) return ce_verify(c, opt);
    if (*wv) return weak_verify(c, opt);
    if (*rp) return report_cmd(c, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ChartError& e) {
    std::cerr << "chart error: " << e.what() << " (fiber level " << e.fiber_level() << ")\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
