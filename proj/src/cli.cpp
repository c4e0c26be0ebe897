#include "tflim/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "tflim/domains.hpp"
#include "tflim/error.hpp"
#include "tflim/format.hpp"
#include "tflim/limiting_operator.hpp"
#include "tflim/local_sine.hpp"
#include "tflim/packings.hpp"
#include "tflim/tensor_packets.hpp"

namespace tflim::cli {
namespace {

using Json = nlohmann::ordered_json;
constexpr double kPi = std::numbers::pi;
constexpr int kSchemaVersion = 1;

// Accepts plain reals and multiples of pi: "3.5", "pi", "20pi", "20*pi".
double parse_real(const std::string& text) {
  std::string s = text;
  double factor = 1.0;
  if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
    factor = kPi;
    s.resize(s.size() - 2);
    if (!s.empty() && s.back() == '*') s.pop_back();
    if (s.empty()) return kPi;
  }
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ValidationError("not a number: '" + text + "'");
  return v * factor;
}

std::vector<double> parse_reals(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const std::string& t : items) out.push_back(parse_real(t));
  return out;
}

std::string canonical_domain(const std::string& literal, int d) {
  return parse_domain(literal, d).to_literal();
}

Json number_list(const std::vector<double>& v) {
  Json j = Json::array();
  for (double x : v) j.push_back(x);
  return j;
}

std::string join_numbers(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

void check_eps(const std::vector<double>& eps) {
  if (eps.empty()) throw ValidationError("--eps needs at least one value");
  for (double e : eps)
    if (!(e > 0.0 && e < 0.5)) throw ValidationError("--eps values must lie in (0, 1/2)");
}

void check_r(const std::vector<double>& r) {
  if (r.empty()) throw ValidationError("--r needs at least one value");
  for (double x : r)
    if (!(x >= 1.0)) throw ValidationError("--r values must be >= 1");
}

void validate(RunConfig& cfg) {
  if (cfg.d < 1 || cfg.d > 3) throw ValidationError("--d must be 1, 2 or 3");
  if (cfg.n < 0) throw ValidationError("--n must be >= 1");
  const std::string& c = cfg.command;
  if (c == "spectrum") {
    if (cfg.f.empty() || cfg.s.empty()) throw ValidationError("spectrum needs --F and --S");
    if (cfg.n == 0) cfg.n = 128;
    if (!(cfg.tol >= 0.0)) throw ValidationError("--tol must be >= 0");
    check_eps(cfg.eps);
  } else if (c == "crossing") {
    if (cfg.c.empty()) cfg.c = {10 * kPi, 20 * kPi, 40 * kPi};
    for (double x : cfg.c)
      if (!(x > 0.0)) throw ValidationError("--c values must be > 0");
    if (cfg.n == 0) cfg.n = 600;
    if (!(cfg.tol >= 0.0)) throw ValidationError("--tol must be >= 0");
    check_eps(cfg.eps);
  } else if (c == "plunge-scan") {
    if (cfg.c.empty() == cfg.r.empty()) throw ValidationError("plunge-scan needs exactly one of --c and --r");
    for (double x : cfg.c)
      if (!(x > 0.0)) throw ValidationError("--c values must be > 0");
    if (!cfg.r.empty()) {
      check_r(cfg.r);
      if (cfg.s.empty()) throw ValidationError("plunge-scan --r needs --S");
    }
    if (cfg.f.empty()) cfg.f = cfg.d == 1 ? "interval:0,1" : cfg.d == 2 ? "box:0,1;0,1" : "box:0,1;0,1;0,1";
    check_eps(cfg.eps);
  } else if (c == "basis-check") {
    if (cfg.j_max < 1 || cfg.j_max > 12) throw ValidationError("--j-max must be in [1, 12]");
    if (cfg.k_count < 1) throw ValidationError("--k-count must be >= 1");
    if (!(cfg.reach > 0.0)) throw ValidationError("--reach must be > 0");
    if (cfg.bump != "3/2" && cfg.bump != "2") throw ValidationError("--bump must be 3/2 or 2");
  } else if (c == "classify") {
    if (cfg.s.empty()) throw ValidationError("classify needs --S");
    if (cfg.r.size() != 1) throw ValidationError("classify takes a single --r");
    if (cfg.eps.size() != 1) throw ValidationError("classify takes a single --eps");
    check_r(cfg.r);
    check_eps(cfg.eps);
    if ((cfg.j_max == 0) != (cfg.k_max == 0) || cfg.j_max < 0 || cfg.k_max < 0)
      throw ValidationError("give both --j-max and --k-max, or neither");
  } else if (c == "theorem1") {
    if (cfg.s.empty()) throw ValidationError("theorem1 needs --S");
    check_r(cfg.r);
    if (cfg.eps.size() != 1) throw ValidationError("theorem1 takes a single --eps");
    check_eps(cfg.eps);
  } else if (c == "packing") {
    if (cfg.s.empty()) throw ValidationError("packing needs --J");
    if (cfg.f.empty()) cfg.f = "interval:0,1";
    if (cfg.n == 0) cfg.n = 300;
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ValidationError("--delta must lie in (0, 1)");
    if (!(cfg.width_scale > 0.0)) throw ValidationError("--width-scale must be > 0");
    if (cfg.trials < 1) throw ValidationError("--trials must be >= 1");
  }
  if (!cfg.f.empty()) cfg.f = canonical_domain(cfg.f, cfg.d);
  if (!cfg.s.empty()) cfg.s = canonical_domain(cfg.s, cfg.d);
}

// Nodes per axis resolving a band of half-width `band` over a side `side`.
int auto_nodes(double band, double side, int d) {
  const int cap = d == 1 ? 2000 : d == 2 ? 70 : 17;
  return std::clamp(static_cast<int>(std::ceil(0.6 * band * side)) + 32, 32, cap);
}

double max_side(const Domain& f) {
  double m = 0.0;
  for (int i = 0; i < f.dim(); ++i) m = std::max(m, f.upper()[i] - f.lower()[i]);
  return m;
}

double max_band(const Domain& s) {
  double m = 0.0;
  for (int i = 0; i < s.dim(); ++i) m = std::max(m, s.extent(i));
  return m;
}

Json optional_int(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

struct Artifacts {
  Json json;
  std::string csv;
  std::string svg;
  std::vector<std::pair<std::string, std::string>> extra;  // file name, content
};

std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
  return s + "\n";
}

std::string num(double x) { return format_number(x); }

Json header(const RunConfig& cfg) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = cfg.command;
  j["config"] = Json::parse(config_json(cfg));
  return j;
}

Artifacts run_spectrum(const RunConfig& cfg) {
  const Domain f = parse_domain(cfg.f, cfg.d), s = parse_domain(cfg.s, cfg.d);
  // With --tol the grid is refined up to n per axis and the last level is reported.
  std::optional<Refinement> ref;
  SpectrumReport rep;
  if (cfg.tol > 0.0) {
    DiscretizeOptions opts;
    opts.size_cap = static_cast<std::size_t>(std::pow(cfg.n, f.dim()));
    const int top = std::max(1, std::min(static_cast<int>(opts.size_cap), 16));
    ref = refine_until(f, s, cfg.tol, top, opts);
    if (!ref->converged)
      throw ConvergenceError("eigenvalues still move by " + num(ref->last_change) + " at n = " +
                             std::to_string(ref->report.n_per_axis) + "; raise --n or --tol");
    rep = ref->report;
  } else {
    rep = spectrum(discretize(f, s, cfg.n));
  }
  Artifacts a;
  a.json = header(cfg);
  a.json["c"] = rep.bandwidth_product ? Json(*rep.bandwidth_product) : Json(nullptr);
  a.json["n"] = rep.n_per_axis;
  a.json["size"] = rep.size();
  a.json["converged"] = ref ? Json(ref->converged) : Json(nullptr);
  if (ref) a.json["last_change"] = ref->last_change;
  a.json["crossing_index"] = optional_int(crossing_index(rep));
  Json plunge = Json::object(), near = Json::object();
  for (double e : cfg.eps) {
    plunge[Json(e).dump()] = plunge_count(rep, e);
    near[Json(e).dump()] = near_one_count(rep, e);
  }
  a.json["plunge"] = plunge;
  a.json["near_one"] = near;
  std::vector<double> all(rep.eigenvalues.data(), rep.eigenvalues.data() + rep.size());
  a.json["eigenvalues"] = number_list(all);
  a.csv = "index,eigenvalue\n";
  Series ser{"lambda_k", {}, {}};
  for (int k = 0; k < rep.size(); ++k) {
    a.csv += csv_line({std::to_string(k + 1), num(rep.eigenvalues(k))});
    ser.x.push_back(k + 1);
    ser.y.push_back(rep.eigenvalues(k));
  }
  a.svg = svg_line_chart("Eigenvalues", "k", "lambda_k", {ser});
  return a;
}

Artifacts run_crossing(const RunConfig& cfg) {
  struct Row {
    std::optional<int> crossing;
    int near_one = 0, plunge = 0;
    bool converged = false;
    double change = 0.0;
  };
  std::vector<Row> rows(cfg.c.size());
  const Domain f = Domain::interval(0.0, 1.0);
  parallel_for(static_cast<int>(cfg.c.size()), worker_count(), [&](int i) {
    const double c = cfg.c[i];
    const Domain s = Domain::interval(-c / 2.0, c / 2.0);
    const SpectrumReport rep = spectrum(discretize(f, s, cfg.n));
    Row& row = rows[i];
    row.crossing = crossing_index(rep);
    row.near_one = near_one_count(rep, cfg.eps[0]);
    row.plunge = plunge_count(rep, cfg.eps[0]);
    if (cfg.tol > 0.0) {
      DiscretizeOptions opts;
      opts.size_cap = static_cast<std::size_t>(cfg.n);
      const int top = static_cast<int>(std::ceil(c / (2 * kPi))) + 5;
      const Refinement ref = refine_until(f, s, cfg.tol, top, opts);
      if (!ref.converged)
        throw ConvergenceError("c = " + num(c) + ": eigenvalues still move by " + num(ref.last_change) +
                               " at n = " + std::to_string(cfg.n) + "; raise --n or --tol");
      row.converged = true;
      row.change = ref.last_change;
    }
  });
  Artifacts a;
  a.json = header(cfg);
  a.csv = "c,c_over_2pi,crossing_index,window_lo,window_hi,in_window,near_one,plunge,converged,last_change\n";
  Json list = Json::array();
  bool all = true;
  Series ser{"crossing_index", {}, {}}, ref{"c/2pi", {}, {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double c = cfg.c[i], q = c / (2 * kPi);
    const int lo = static_cast<int>(std::floor(q)) - 1, hi = static_cast<int>(std::ceil(q)) + 1;
    const Row& r = rows[i];
    const bool in = r.crossing && *r.crossing >= lo && *r.crossing <= hi;
    all = all && in;
    list.push_back({{"c", c}, {"c_over_2pi", q}, {"crossing_index", optional_int(r.crossing)},
                    {"window", {lo, hi}}, {"in_window", in}, {"near_one", r.near_one},
                    {"plunge", r.plunge}, {"converged", r.converged}, {"last_change", r.change}});
    a.csv += csv_line({num(c), num(q), r.crossing ? std::to_string(*r.crossing) : "", std::to_string(lo),
                       std::to_string(hi), in ? "true" : "false", std::to_string(r.near_one),
                       std::to_string(r.plunge), r.converged ? "true" : "false", num(r.change)});
    ser.x.push_back(c);
    ser.y.push_back(r.crossing ? *r.crossing : 0.0);
    ref.x.push_back(c);
    ref.y.push_back(q);
  }
  a.json["rows"] = list;
  a.json["pass"] = all;
  a.svg = svg_line_chart("Crossing index", "c", "k", {ser, ref});
  return a;
}

Artifacts run_plunge_scan(const RunConfig& cfg) {
  const bool by_c = !cfg.c.empty();
  const std::vector<double>& grid = by_c ? cfg.c : cfg.r;
  const Domain f = parse_domain(cfg.f, cfg.d);
  const int d = f.dim();
  struct Row {
    int n = 0;
    std::vector<int> near, plunge;
  };
  std::vector<Row> rows(grid.size());
  parallel_for(static_cast<int>(grid.size()), worker_count(), [&](int i) {
    std::optional<Domain> s;
    if (by_c) {
      if (f.kind() != DomainKind::interval) throw ValidationError("plunge-scan --c needs an interval F");
      const double half = grid[i] / (2.0 * max_side(f));
      s = Domain::interval(-half, half);
    } else {
      s = parse_domain(cfg.s, d).dilated(grid[i]);
    }
    const int n = cfg.n > 0 ? cfg.n : auto_nodes(max_band(*s), max_side(f), d);
    const SpectrumReport rep = spectrum(discretize(f, *s, n));
    rows[i].n = n;
    for (double e : cfg.eps) {
      rows[i].near.push_back(near_one_count(rep, e));
      rows[i].plunge.push_back(plunge_count(rep, e));
    }
  });
  Artifacts a;
  a.json = header(cfg);
  const std::string pname = by_c ? "c" : "r";
  a.csv = csv_line({pname, "eps", "near_one_count", "plunge_count", "n_per_axis"});
  Json list = Json::array();
  std::vector<Series> series;
  for (double e : cfg.eps) series.push_back({"eps=" + num(e), {}, {}});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t k = 0; k < cfg.eps.size(); ++k) {
      list.push_back({{pname, grid[i]}, {"eps", cfg.eps[k]}, {"near_one", rows[i].near[k]},
                      {"plunge", rows[i].plunge[k]}, {"plunge_over_param", rows[i].plunge[k] / grid[i]},
                      {"n_per_axis", rows[i].n}});
      a.csv += csv_line({num(grid[i]), num(cfg.eps[k]), std::to_string(rows[i].near[k]),
                         std::to_string(rows[i].plunge[k]), std::to_string(rows[i].n)});
      series[k].x.push_back(grid[i]);
      series[k].y.push_back(rows[i].plunge[k]);
    }
  }
  a.json["rows"] = list;
  a.svg = svg_line_chart("Plunge count", pname, "#{eps < lambda < 1 - eps}", series);
  return a;
}

Artifacts run_basis_check(const RunConfig& cfg) {
  const GevreyBump bump = cfg.bump == "2" ? GevreyBump::two : GevreyBump::three_halves;
  const LocalSineSystem sys(cfg.j_max + 1, bump);
  const auto atoms = sys.atoms(cfg.j_max, cfg.k_count);
  const double defect = gram_defect(sys, atoms);
  Artifacts a;
  a.json = header(cfg);
  a.csv = "side,j,k,a,C,satisfied\n";
  double min_a = std::numeric_limits<double>::infinity(), max_c = 0.0;
  bool all = true;
  Series ser{"a", {}, {}};
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const LocalSineAtom& at = atoms[i];
    const EnvelopeFit fit = envelope_fit(sys, at, envelope_grid(at, cfg.reach));
    all = all && fit.satisfied;
    min_a = std::min(min_a, fit.a);
    max_c = std::max(max_c, fit.C);
    a.csv += csv_line({at.interval().side == Side::left ? "left" : "right", std::to_string(at.interval().j),
                       std::to_string(at.k), num(fit.a), num(fit.C), fit.satisfied ? "true" : "false"});
    ser.x.push_back(static_cast<double>(i));
    ser.y.push_back(fit.a);
  }
  a.json["atoms"] = atoms.size();
  a.json["gram_defect"] = defect;
  a.json["min_a"] = min_a;
  a.json["max_C"] = max_c;
  a.json["all_satisfied"] = all;
  a.svg = svg_line_chart("Fitted envelope exponent", "atom", "a", {ser});
  return a;
}

Artifacts run_classify(const RunConfig& cfg) {
  const Domain s = parse_domain(cfg.s, cfg.d);
  const double r = cfg.r[0], eps = cfg.eps[0];
  Truncation t{cfg.j_max, cfg.k_max};
  if (t.j_max == 0) t = suggest_truncation(cfg.d, s, r, eps);
  const Partition p = partition_basis(cfg.d, s, r, eps, t.j_max, t.k_max);
  Artifacts a;
  a.json = header(cfg);
  a.json["j_max"] = t.j_max;
  a.json["k_max"] = t.k_max;
  a.json["low"] = p.low_count;
  a.json["res"] = p.res_count;
  a.json["hi"] = p.hi_count;
  a.json["total"] = p.total();
  const double e = bound_E_d(cfg.d, eps, r);
  a.json["E_d"] = e;
  a.json["res_over_E_d"] = p.res_count / e;
  a.csv = "class,count\n";
  a.csv += csv_line({"low", std::to_string(p.low_count)});
  a.csv += csv_line({"res", std::to_string(p.res_count)});
  a.csv += csv_line({"hi", std::to_string(p.hi_count)});
  if (cfg.energy) {
    const EnergyEstimate est = energy_estimate(p);
    a.json["energy"] = {{"hi_leak", est.hi_leak},           {"low_leak", est.low_leak},
                        {"total", est.total()},             {"limit", eps * eps / 4.0},
                        {"pass", est.total() <= eps * eps / 4.0},
                        {"hi_quadrature", est.hi_quadrature}, {"hi_envelope", est.hi_envelope},
                        {"hi_truncated", est.hi_truncated},   {"hi_deep", est.hi_deep},
                        {"low_quadrature", est.low_quadrature}, {"low_envelope", est.low_envelope},
                        {"hi_integrated", est.hi_integrated}, {"low_integrated", est.low_integrated}};
  }
  if (cfg.partition_csv) a.extra.emplace_back("partition.csv", partition_csv(p));
  return a;
}

Artifacts run_theorem1(const RunConfig& cfg) {
  const Domain s = parse_domain(cfg.s, cfg.d);
  const double eps = cfg.eps[0];
  const int d = cfg.d;
  const Domain f = d == 1 ? Domain::interval(0.0, 1.0)
                          : Domain::box(std::vector<double>(d, 0.0), std::vector<double>(d, 1.0));
  struct Row {
    Truncation t;
    std::uint64_t low = 0, res = 0, hi = 0;
    int plunge = 0, n = 0;
    bool lemma2 = false;
  };
  std::vector<Row> rows(cfg.r.size());
  parallel_for(static_cast<int>(cfg.r.size()), worker_count(), [&](int i) {
    const double r = cfg.r[i];
    Row& row = rows[i];
    row.t = suggest_truncation(d, s, r, eps);
    const Partition p = partition_basis(d, s, r, eps, row.t.j_max, row.t.k_max);
    const Domain sr = s.dilated(r);
    row.n = cfg.n > 0 ? cfg.n : auto_nodes(max_band(sr), 1.0, d);
    const SpectrumReport rep = spectrum(discretize(f, sr, row.n));
    const Lemma2Check chk = verify_lemma2(p, rep, eps);
    row.low = p.low_count;
    row.res = p.res_count;
    row.hi = p.hi_count;
    row.plunge = chk.plunge;
    row.lemma2 = chk.pass;
  });
  Artifacts a;
  a.json = header(cfg);
  a.csv = "r,j_max,k_max,low,res,hi,E_d,res_over_E_d,plunge,n_per_axis,lemma2\n";
  Json list = Json::array();
  bool all = true, bounded = true;
  double fitted = 0.0, prev = 0.0;
  Series ser{"#res / E_d", {}, {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& row = rows[i];
    const double r = cfg.r[i], e = bound_E_d(d, eps, r), ratio = row.res / e;
    all = all && row.lemma2;
    if (i > 0 && ratio > 1.1 * prev) bounded = false;
    prev = ratio;
    fitted = std::max(fitted, ratio);
    list.push_back({{"r", r}, {"j_max", row.t.j_max}, {"k_max", row.t.k_max}, {"low", row.low},
                    {"res", row.res}, {"hi", row.hi}, {"E_d", e}, {"res_over_E_d", ratio},
                    {"plunge", row.plunge}, {"n_per_axis", row.n}, {"lemma2", row.lemma2}});
    a.csv += csv_line({num(r), std::to_string(row.t.j_max), std::to_string(row.t.k_max),
                       std::to_string(row.low), std::to_string(row.res), std::to_string(row.hi), num(e),
                       num(ratio), std::to_string(row.plunge), std::to_string(row.n),
                       row.lemma2 ? "true" : "false"});
    ser.x.push_back(r);
    ser.y.push_back(ratio);
  }
  a.json["rows"] = list;
  a.json["fitted_C"] = fitted;
  a.json["ratio_bounded"] = bounded;
  a.json["pass"] = all;
  a.svg = svg_line_chart("Residual count over E_d", "r", "#res / E_d", {ser});
  return a;
}

Artifacts run_packing(const RunConfig& cfg) {
  const Domain i = parse_domain(cfg.f, 1), j = parse_domain(cfg.s, 1);
  HermitePackingOptions opts;
  opts.width_scale = cfg.width_scale;
  const PackingFamily fam = build_hermite_packing(i, j, cfg.delta, opts);
  const DiscretizedOperator op = discretize(i, j, cfg.n);
  const Lemma1Report rep = verify_lemma1(fam, op);
  const auto residuals = atom_residuals(fam, op);
  const double margin = norm_lower_bound_margin(fam, cfg.trials, cfg.seed);
  Artifacts a;
  a.json = header(cfg);
  const Json lemma = Json::parse(lemma1_json(rep));
  for (auto it = lemma.begin(); it != lemma.end(); ++it) a.json[it.key()] = it.value();
  a.json["untrimmed"] = fam.untrimmed;
  a.json["concentration"] = fam.concentration;
  a.json["gram_gap"] = gram_frobenius_gap(fam);
  bool res_ok = true;
  a.csv = "index,label,spatial_tail,frequency_tail,residual,defect\n";
  Series lhs{"residual", {}, {}}, rhs{"3 defect", {}, {}};
  for (std::size_t k = 0; k < fam.size(); ++k) {
    res_ok = res_ok && residuals[k].residual <= 3.0 * residuals[k].defect + 1e-6;
    a.csv += csv_line({std::to_string(k), fam.atoms[k].label, num(fam.spatial_tails[k]),
                       num(fam.frequency_tails[k]), num(residuals[k].residual), num(residuals[k].defect)});
    lhs.x.push_back(k);
    lhs.y.push_back(residuals[k].residual);
    rhs.x.push_back(k);
    rhs.y.push_back(3.0 * residuals[k].defect);
  }
  a.json["residuals_pass"] = res_ok;
  a.json["norm_margin"] = margin;
  a.json["norm_pass"] = margin >= -1e-6;
  a.svg = svg_line_chart("Atom residuals", "atom", "norm", {lhs, rhs});
  return a;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

void emit_error(std::ostream& err, bool as_json, const char* kind, int code, const std::string& msg) {
  if (as_json) {
    Json j;
    j["error"] = kind;
    j["message"] = msg;
    j["exit_code"] = code;
    err << j.dump() << "\n";
  } else {
    err << "error: " << msg << "\n";
  }
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args, std::string* help) {
  CLI::App app{"Time-frequency limiting toolkit", "tflim"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string f, s;
  std::vector<std::string> c, r, eps;
  std::string tol, delta, width, reach;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_flag("--svg", cfg.svg, "Also write an SVG chart");
    sub->add_flag("--error-json", cfg.error_json, "Report errors as JSON on stderr");
  };
  auto eps_opt = [&](CLI::App* sub, const char* def) {
    sub->add_option("--eps", eps, "Epsilon values")->delimiter(',')->default_str(def);
  };

  CLI::App* sp = app.add_subcommand("spectrum", "Discretize and diagonalize one operator");
  sp->add_option("--F", f, "Spatial domain")->required();
  sp->add_option("--S", s, "Frequency domain")->required();
  sp->add_option("--d", cfg.d, "Dimension for ball literals");
  sp->add_option("--n", cfg.n, "Nodes per axis, the cap with --tol (default 128)");
  sp->add_option("--tol", tol, "Refine until the top eigenvalues settle (default 0, no refinement)");
  eps_opt(sp, "0.01");
  common(sp);

  CLI::App* cr = app.add_subcommand("crossing", "Crossing index over a c grid on F=[0,1]");
  cr->add_option("--c", c, "Bandwidth products")->delimiter(',');
  cr->add_option("--n", cfg.n, "Nodes (default 600)");
  cr->add_option("--tol", tol, "refine_until tolerance, 0 to skip (default 1e-6)");
  eps_opt(cr, "0.01");
  common(cr);

  CLI::App* ps = app.add_subcommand("plunge-scan", "Plunge counts over a c or r grid");
  ps->add_option("--c", c, "Bandwidth products (F must be an interval)")->delimiter(',');
  ps->add_option("--r", r, "Dilations of S")->delimiter(',');
  ps->add_option("--F", f, "Spatial domain (default unit cube)");
  ps->add_option("--S", s, "Frequency domain for --r");
  ps->add_option("--d", cfg.d, "Dimension");
  ps->add_option("--n", cfg.n, "Nodes per axis (default from the band)");
  eps_opt(ps, "0.01");
  common(ps);

  CLI::App* bc = app.add_subcommand("basis-check", "Local sine Gram defect and envelope fits");
  bc->add_option("--j-max", cfg.j_max, "Deepest interval level (default 4)");
  bc->add_option("--k-count", cfg.k_count, "Frequencies per interval (default 8)");
  bc->add_option("--reach", reach, "Scaled distance past each peak (default 50)");
  bc->add_option("--bump", cfg.bump, "Gevrey class of the bump: 3/2 or 2");
  common(bc);

  CLI::App* cl = app.add_subcommand("classify", "Partition the tensor basis");
  cl->add_option("--d", cfg.d, "Dimension");
  cl->add_option("--S", s, "Frequency domain")->required();
  cl->add_option("--r", r, "Dilation")->required();
  eps_opt(cl, "0.1");
  cl->add_option("--j-max", cfg.j_max, "Depth truncation (default suggested)");
  cl->add_option("--k-max", cfg.k_max, "Frequency truncation (default suggested)");
  cl->add_flag("--energy", cfg.energy, "Estimate the leakage of the low and hi classes");
  cl->add_flag("--partition-csv", cfg.partition_csv, "Write one CSV line per atom");
  common(cl);

  CLI::App* th = app.add_subcommand("theorem1", "Residual count against the plunge count");
  th->add_option("--d", cfg.d, "Dimension");
  th->add_option("--S", s, "Frequency domain")->required();
  th->add_option("--r", r, "Dilations")->delimiter(',')->required();
  eps_opt(th, "0.1");
  th->add_option("--n", cfg.n, "Nodes per axis (default from the band)");
  common(th);

  CLI::App* pk = app.add_subcommand("packing", "Hermite packing and the eigenvalue lower bound");
  pk->add_option("--I", f, "Spatial interval (default interval:0,1)");
  pk->add_option("--J", s, "Frequency interval")->required();
  pk->add_option("--delta", delta, "Fraction of c/2pi left out (default 0.5)");
  pk->add_option("--n", cfg.n, "Nodes of the operator (default 300)");
  pk->add_option("--width-scale", width, "Hermite width over sqrt(|I|/|J|) (default 1)");
  pk->add_option("--trials", cfg.trials, "Random coefficient vectors (default 100)");
  pk->add_option("--seed", cfg.seed, "Seed for the coefficient vectors");
  common(pk);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    if (help) {
      std::ostringstream o, ignored;
      app.exit(e, o, ignored);
      *help = o.str();
    }
    return RunConfig{};
  } catch (const CLI::CallForAllHelp& e) {
    if (help) {
      std::ostringstream o, ignored;
      app.exit(e, o, ignored);
      *help = o.str();
    }
    return RunConfig{};
  } catch (const CLI::ParseError& e) {
    throw ValidationError(e.what());
  }
  for (CLI::App* sub : app.get_subcommands()) cfg.command = sub->get_name();

  const bool classify = cfg.command == "classify" || cfg.command == "theorem1";
  cfg.f = f;
  cfg.s = s;
  cfg.c = parse_reals(c);
  cfg.r = parse_reals(r);
  cfg.eps = eps.empty() ? std::vector<double>{classify ? 0.1 : 0.01} : parse_reals(eps);
  if (cfg.command == "crossing") cfg.tol = tol.empty() ? 1e-6 : parse_real(tol);
  if (cfg.command == "spectrum" && !tol.empty()) cfg.tol = parse_real(tol);
  if (cfg.command == "basis-check") {
    if (cfg.j_max == 0) cfg.j_max = 4;
    if (!reach.empty()) cfg.reach = parse_real(reach);
  }
  if (!delta.empty()) cfg.delta = parse_real(delta);
  if (!width.empty()) cfg.width_scale = parse_real(width);
  validate(cfg);
  return cfg;
}

std::vector<std::string> to_args(const RunConfig& cfg) {
  std::vector<std::string> a = {cfg.command};
  auto add = [&](const std::string& k, const std::string& v) {
    a.push_back(k);
    a.push_back(v);
  };
  const std::string& c = cfg.command;
  if (c == "spectrum") {
    add("--F", cfg.f);
    add("--S", cfg.s);
    add("--d", std::to_string(cfg.d));
    add("--n", std::to_string(cfg.n));
    add("--tol", format_number(cfg.tol));
    add("--eps", join_numbers(cfg.eps));
  } else if (c == "crossing") {
    add("--c", join_numbers(cfg.c));
    add("--n", std::to_string(cfg.n));
    add("--tol", format_number(cfg.tol));
    add("--eps", join_numbers(cfg.eps));
  } else if (c == "plunge-scan") {
    if (!cfg.c.empty()) add("--c", join_numbers(cfg.c));
    if (!cfg.r.empty()) add("--r", join_numbers(cfg.r));
    add("--F", cfg.f);
    if (!cfg.s.empty()) add("--S", cfg.s);
    add("--d", std::to_string(cfg.d));
    add("--n", std::to_string(cfg.n));
    add("--eps", join_numbers(cfg.eps));
  } else if (c == "basis-check") {
    add("--j-max", std::to_string(cfg.j_max));
    add("--k-count", std::to_string(cfg.k_count));
    add("--reach", format_number(cfg.reach));
    add("--bump", cfg.bump);
  } else if (c == "classify") {
    add("--d", std::to_string(cfg.d));
    add("--S", cfg.s);
    add("--r", join_numbers(cfg.r));
    add("--eps", join_numbers(cfg.eps));
    add("--j-max", std::to_string(cfg.j_max));
    add("--k-max", std::to_string(cfg.k_max));
    if (cfg.energy) a.push_back("--energy");
    if (cfg.partition_csv) a.push_back("--partition-csv");
  } else if (c == "theorem1") {
    add("--d", std::to_string(cfg.d));
    add("--S", cfg.s);
    add("--r", join_numbers(cfg.r));
    add("--eps", join_numbers(cfg.eps));
    add("--n", std::to_string(cfg.n));
  } else if (c == "packing") {
    add("--I", cfg.f);
    add("--J", cfg.s);
    add("--delta", format_number(cfg.delta));
    add("--n", std::to_string(cfg.n));
    add("--width-scale", format_number(cfg.width_scale));
    add("--trials", std::to_string(cfg.trials));
    add("--seed", std::to_string(cfg.seed));
  }
  if (!cfg.out.empty()) add("--out", cfg.out);
  if (cfg.svg) a.push_back("--svg");
  if (cfg.error_json) a.push_back("--error-json");
  return a;
}

std::string config_json(const RunConfig& cfg) {
  // The canonical argument list doubles as the field list of the command.
  const std::vector<std::string> a = to_args(cfg);
  Json j;
  j["command"] = cfg.command;
  for (std::size_t i = 1; i < a.size(); ++i) {
    const std::string key = a[i].substr(2);
    if (key == "out" || key == "svg" || key == "error-json") {
      if (key == "out") ++i;
      continue;
    }
    const bool flag = i + 1 >= a.size() || a[i + 1].rfind("--", 0) == 0;
    if (flag) {
      j[key] = true;
      continue;
    }
    const std::string& v = a[++i];
    if (key == "c" || key == "r" || key == "eps") {
      std::vector<std::string> items;
      std::stringstream in(v);
      for (std::string t; std::getline(in, t, ',');) items.push_back(t);
      j[key] = number_list(parse_reals(items));
    } else if (key == "F" || key == "S" || key == "I" || key == "J" || key == "bump") {
      j[key] = v;
    } else if (key == "seed") {
      j[key] = std::stoull(v);
    } else if (key == "d" || key == "n" || key == "j-max" || key == "k-max" || key == "k-count" ||
               key == "trials") {
      j[key] = std::stoi(v);
    } else {
      j[key] = parse_real(v);
    }
  }
  return j.dump();
}

int worker_count() {
  if (const char* env = std::getenv("TFLIM_WORKERS")) {
    int v = 0;
    const std::string s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1)
      throw ValidationError("TFLIM_WORKERS must be a positive integer");
    return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int workers, const std::function<void(int)>& task) {
  std::vector<std::exception_ptr> errors(std::max(count, 0));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::clamp(workers, 1, std::max(count, 1));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string svg_line_chart(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<Series>& series) {
  const double width = 640, height = 420, left = 70, right = 20, top = 40, bottom = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (width - left - right); };
  auto py = [&](double y) { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
    << height - bottom << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
    << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << left << "\" y=\"" << height - bottom + 16 << "\">" << format_number(x0) << "</text>\n";
  o << "<text x=\"" << width - right << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"end\">"
    << format_number(x1) << "</text>\n";
  o << "<text x=\"" << left - 4 << "\" y=\"" << height - bottom << "\" text-anchor=\"end\">"
    << format_number(y0) << "</text>\n";
  o << "<text x=\"" << left - 4 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << format_number(y1)
    << "</text>\n";
  o << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
    << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (top + height - bottom) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (top + height - bottom) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = colors[k % 5];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      o << (i ? " " : "") << px(s.x[i]) << "," << py(s.y[i]);
    o << "\"/>\n";
    o << "<text x=\"" << width - right - 4 << "\" y=\"" << top + 14 * (k + 1) << "\" text-anchor=\"end\" fill=\""
      << color << "\">" << xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw Error("cannot write " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const bool error_json = std::find(args.begin(), args.end(), "--error-json") != args.end();
  try {
    std::string help;
    const RunConfig cfg = parse_args(args, &help);
    if (cfg.command.empty()) {
      out << help;
      return 0;
    }
    Artifacts a;
    const std::string& c = cfg.command;
    if (c == "spectrum") a = run_spectrum(cfg);
    else if (c == "crossing") a = run_crossing(cfg);
    else if (c == "plunge-scan") a = run_plunge_scan(cfg);
    else if (c == "basis-check") a = run_basis_check(cfg);
    else if (c == "classify") a = run_classify(cfg);
    else if (c == "theorem1") a = run_theorem1(cfg);
    else a = run_packing(cfg);
    const std::string json = a.json.dump(2) + "\n";
    if (!cfg.out.empty()) {
      const std::filesystem::path dir(cfg.out);
      std::filesystem::create_directories(dir);
      write_atomic(dir / (c + ".json"), json);
      if (!a.csv.empty()) write_atomic(dir / (c + ".csv"), a.csv);
      if (cfg.svg && !a.svg.empty()) write_atomic(dir / (c + ".svg"), a.svg);
      for (const auto& [name, content] : a.extra) write_atomic(dir / name, content);
    }
    out << json;
    return 0;
  } catch (const ValidationError& e) {
    emit_error(err, error_json, "validation", 2, e.what());
    return 2;
  } catch (const ConvergenceError& e) {
    emit_error(err, error_json, "convergence", 3, e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error(err, error_json, "internal", 1, e.what());
    return 1;
  }
}

}  // namespace tflim::cli
