#include "tflim/local_sine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "tflim/error.hpp"
#include "tflim/format.hpp"
#include "tflim/quadrature.hpp"

namespace tflim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kStepPanels = 400;  // on [-1, 0]
constexpr int kStepOrder = 20;
constexpr double kTransformCap = 1e4;  // times 1/delta

double pow2(int e) { return std::ldexp(1.0, e); }

bool same_point(double a, double b) { return std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(a)); }

std::vector<double> merged_breaks(std::vector<double> pts, double lo, double hi) {
  pts.push_back(lo);
  pts.push_back(hi);
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  for (double p : pts) {
    if (p < lo || p > hi) continue;
    if (!out.empty() && same_point(out.back(), p)) continue;
    out.push_back(p);
  }
  return out;
}

// Sum of adaptive integrals over consecutive break points.
double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& pts,
                        double rel_tol, double abs_tol) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i + 1] <= pts[i]) continue;
    total += integrate_adaptive(f, pts[i], pts[i + 1], rel_tol, abs_tol).value;
  }
  return total;
}

}  // namespace

std::vector<WhitneyInterval> whitney_intervals(int j_max) {
  if (j_max < 1) throw ValidationError("whitney_intervals: J_max must be >= 1");
  if (j_max > 50) throw ValidationError("whitney_intervals: J_max must be <= 50");
  std::vector<WhitneyInterval> out;
  out.reserve(2 * j_max);
  for (int j = j_max; j >= 1; --j) out.push_back({Side::left, j, pow2(-j - 1), pow2(-j - 1)});
  for (int j = 1; j <= j_max; ++j) out.push_back({Side::right, j, 1.0 - pow2(-j), pow2(-j - 1)});
  return out;
}

SmoothStep::SmoothStep(GevreyBump bump) : bump_(bump) {
  const QuadratureRule& rule = gauss_legendre(kStepOrder);
  const double h = 1.0 / kStepPanels;
  cumulative_.assign(kStepPanels + 1, 0.0);
  for (int p = 0; p < kStepPanels; ++p) {
    const double a = -1.0 + p * h;
    double s = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i)
      s += rule.weights[i] * bump_value(a + 0.5 * h * (rule.nodes[i] + 1.0));
    cumulative_[p + 1] = cumulative_[p] + 0.5 * h * s;
  }
  // The bump is even, so its integral over [-1, 1] is twice the half.
  scale_ = 1.0 / (2.0 * cumulative_.back());
  for (double& c : cumulative_) c *= scale_;
}

double SmoothStep::bump_value(double t) const {
  const double q = 1.0 - t * t;
  if (q <= 0.0) return 0.0;
  return bump_ == GevreyBump::three_halves ? std::exp(-1.0 / (q * q)) : std::exp(-1.0 / q);
}

double SmoothStep::primitive(double t) const {
  if (t <= -1.0) return 0.0;
  const double h = 1.0 / kStepPanels;
  const int p = std::min(kStepPanels - 1, static_cast<int>((t + 1.0) / h));
  const double a = -1.0 + p * h;
  const double len = t - a;
  if (len <= 0.0) return cumulative_[p];
  const QuadratureRule& rule = gauss_legendre(kStepOrder);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i)
    s += rule.weights[i] * bump_value(a + 0.5 * len * (rule.nodes[i] + 1.0));
  return cumulative_[p] + 0.5 * len * s * scale_;
}

double SmoothStep::operator()(double t) const {
  if (t <= -1.0) return 0.0;
  if (t >= 1.0) return 1.0;
  // H(t) = 1 - H(-t) makes s(t)^2 + s(-t)^2 = 1 hold to rounding.
  const double h = t <= 0.0 ? primitive(t) : 1.0 - primitive(-t);
  return std::sin(0.5 * kPi * h);
}

double smooth_step(double t) {
  static const SmoothStep step;
  return step(t);
}

BellWindow build_bell(const WhitneyInterval& l,
                      const std::optional<WhitneyInterval>& left_neighbor,
                      const std::optional<WhitneyInterval>& right_neighbor) {
  BellWindow bell{l, 0.0, 0.0};
  if (left_neighbor) {
    if (!same_point(left_neighbor->end(), l.x))
      throw ValidationError("build_bell: left neighbour does not end at x_L");
    bell.left_overlap = std::min(l.delta, left_neighbor->delta) / 3.0;
  }
  if (right_neighbor) {
    if (!same_point(right_neighbor->x, l.end()))
      throw ValidationError("build_bell: right neighbour does not start at x_L + delta_L");
    bell.right_overlap = std::min(l.delta, right_neighbor->delta) / 3.0;
  }
  return bell;
}

double bell_value(const BellWindow& bell, const SmoothStep& step, double x) {
  if (x < bell.support_lo() || x > bell.support_hi()) return 0.0;
  const WhitneyInterval& l = bell.interval;
  const double rise = bell.left_overlap > 0.0 ? step((x - l.x) / bell.left_overlap)
                                              : (x >= l.x ? 1.0 : 0.0);
  const double fall = bell.right_overlap > 0.0 ? step((l.end() - x) / bell.right_overlap)
                                               : (x <= l.end() ? 1.0 : 0.0);
  return rise * fall;
}

double LocalSineAtom::frequency() const { return kPi * (k + 0.5) / bell.interval.delta; }

LocalSineSystem::LocalSineSystem(int j_max, GevreyBump bump) : j_max_(j_max), step_(bump) {
  const auto intervals = whitney_intervals(j_max);
  bells_.reserve(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    std::optional<WhitneyInterval> left, right;
    if (i > 0) left = intervals[i - 1];
    if (i + 1 < intervals.size()) right = intervals[i + 1];
    bells_.push_back(build_bell(intervals[i], left, right));
  }
}

double LocalSineSystem::covered_lo() const { return pow2(-j_max_ - 1); }
double LocalSineSystem::covered_hi() const { return 1.0 - pow2(-j_max_ - 1); }

LocalSineAtom LocalSineSystem::atom(std::size_t index, int k) const {
  if (index >= bells_.size()) throw ValidationError("atom: interval index out of range");
  if (k < 0) throw ValidationError("atom: k must be >= 0");
  const BellWindow& b = bells_[index];
  const double delta = b.interval.delta;
  const auto key = std::make_tuple(b.left_overlap / delta, b.right_overlap / delta, k);
  double scaled = 0.0;
  {
    std::lock_guard lock(norm_mutex_);
    if (auto it = norm_cache_.find(key); it != norm_cache_.end()) scaled = it->second;
  }
  if (scaled == 0.0) {
    scaled = normalization_constant(*this, index, k) * std::sqrt(delta);
    std::lock_guard lock(norm_mutex_);
    norm_cache_.emplace(key, scaled);
  }
  return {index, b, k, scaled / std::sqrt(delta)};
}

LocalSineAtom LocalSineSystem::atom(Side side, int j, int k) const {
  for (std::size_t i = 0; i < bells_.size(); ++i) {
    const WhitneyInterval& l = bells_[i].interval;
    if (l.side == side && l.j == j) return atom(i, k);
  }
  throw ValidationError("atom: no Whitney interval with this side and j");
}

std::vector<LocalSineAtom> LocalSineSystem::atoms(int max_j, int k_count) const {
  if (k_count < 1) throw ValidationError("atoms: k_count must be >= 1");
  std::vector<LocalSineAtom> out;
  for (std::size_t i = 0; i < bells_.size(); ++i) {
    if (bells_[i].interval.j > max_j) continue;
    for (int k = 0; k < k_count; ++k) out.push_back(atom(i, k));
  }
  return out;
}

double LocalSineSystem::eval(const LocalSineAtom& a, double x) const {
  const WhitneyInterval& l = a.bell.interval;
  const double theta = bell_value(a.bell, step_, x);
  if (theta == 0.0) return 0.0;
  return a.c * theta * std::sin(kPi * (a.k + 0.5) * (x - l.x) / l.delta);
}

std::vector<double> LocalSineSystem::break_points(const LocalSineAtom& a) const {
  const BellWindow& b = a.bell;
  return merged_breaks({b.interval.x + b.left_overlap, b.interval.end() - b.right_overlap},
                       b.support_lo(), b.support_hi());
}

namespace {

double theta_sin_squared(const LocalSineSystem& sys, const BellWindow& bell, int k, double x) {
  const WhitneyInterval& l = bell.interval;
  const double v = bell_value(bell, sys.step(), x) *
                   std::sin(kPi * (k + 0.5) * (x - l.x) / l.delta);
  return v * v;
}

}  // namespace

double normalization_constant(const LocalSineSystem& sys, std::size_t index, int k) {
  const BellWindow& bell = sys.bells().at(index);
  LocalSineAtom probe{index, bell, k, 1.0};
  auto f = [&](double x) { return theta_sin_squared(sys, bell, k, x); };
  const double energy =
      integrate_pieces(f, sys.break_points(probe), 1e-14, 1e-16 * bell.interval.delta);
  return 1.0 / std::sqrt(energy);
}

double normalization_constant_simpson(const LocalSineSystem& sys, std::size_t index, int k) {
  const BellWindow& bell = sys.bells().at(index);
  LocalSineAtom probe{index, bell, k, 1.0};
  auto f = [&](double x) { return theta_sin_squared(sys, bell, k, x); };
  const auto pts = sys.break_points(probe);
  double energy = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    energy += integrate_simpson(f, pts[i], pts[i + 1], 1e-15 * bell.interval.delta);
  return 1.0 / std::sqrt(energy);
}

FourierSampler::FourierSampler(const LocalSineSystem& sys, const LocalSineAtom& a, double xi_max)
    : xi_max_(xi_max) {
  const double delta = a.interval().delta;
  if (!(xi_max >= 0.0) || xi_max > kTransformCap / delta * (1.0 + 1e-12))
    throw ValidationError("phi_hat: |xi| above the transform cap 1e4/delta");
  // Panels resolve both the bell transitions and one radian of phase.
  double panel = delta / 32.0;
  if (xi_max > 0.0) panel = std::min(panel, 2.0 / xi_max);
  auto pts = sys.break_points(a);
  pts.push_back(a.interval().x);
  pts = merged_breaks(pts, a.bell.support_lo(), a.bell.support_hi());
  const QuadratureRule rule =
      composite_gauss_legendre(pts.front(), pts.back(), panel, 10, pts);
  nodes_ = rule.nodes;
  weighted_.resize(rule.size());
  for (std::size_t i = 0; i < rule.size(); ++i) weighted_[i] = rule.weights[i] * sys.eval(a, rule.nodes[i]);
}

std::complex<double> FourierSampler::operator()(double xi) const {
  if (std::abs(xi) > xi_max_ * (1.0 + 1e-12))
    throw ValidationError("FourierSampler: |xi| beyond the precomputed range");
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double ph = nodes_[i] * xi;
    re += weighted_[i] * std::cos(ph);
    im -= weighted_[i] * std::sin(ph);
  }
  return {re, im};
}

std::complex<double> phi_hat(const LocalSineSystem& sys, const LocalSineAtom& a, double xi) {
  return FourierSampler(sys, a, std::max(std::abs(xi), 1.0 / a.interval().delta))(xi);
}

double envelope_psi(double a, double xi) { return std::exp(-a * std::cbrt(xi * xi)); }

std::vector<double> envelope_grid(const LocalSineAtom& a, double reach, double step) {
  if (!(reach > 0.0) || !(step > 0.0)) throw ValidationError("envelope_grid: reach and step must be > 0");
  const double omega = kPi * (a.k + 0.5);
  const double delta = a.interval().delta;
  const long half = static_cast<long>(std::ceil((omega + reach) / step));
  std::vector<double> grid;
  grid.reserve(2 * half + 1);
  for (long i = -half; i <= half; ++i) grid.push_back(static_cast<double>(i) * step / delta);
  return grid;
}

std::vector<double> envelope_exponents() {
  std::vector<double> out;
  for (int i = 0; i <= 98; ++i) out.push_back(0.1 + 0.05 * i);
  return out;
}

std::vector<double> envelope_constants(const LocalSineSystem& sys, const LocalSineAtom& a,
                                       std::span<const double> xi_grid) {
  if (xi_grid.empty()) throw ValidationError("envelope_fit: empty grid");
  double xi_max = 0.0;
  for (double xi : xi_grid) xi_max = std::max(xi_max, std::abs(xi));
  const FourierSampler sampler(sys, a, xi_max);
  const double delta = a.interval().delta;
  const double omega = kPi * (a.k + 0.5);
  const double root = std::sqrt(delta);

  std::vector<double> mag(xi_grid.size());
  for (std::size_t i = 0; i < xi_grid.size(); ++i) mag[i] = std::abs(sampler(xi_grid[i]));

  const auto exps = envelope_exponents();
  std::vector<double> cs(exps.size(), 0.0);
  for (std::size_t e = 0; e < exps.size(); ++e) {
    double c = 0.0;
    for (std::size_t i = 0; i < xi_grid.size(); ++i) {
      const double u = delta * xi_grid[i];
      const double env = root * (envelope_psi(exps[e], u - omega) + envelope_psi(exps[e], u + omega));
      c = std::max(c, env > 0.0 ? mag[i] / env : std::numeric_limits<double>::infinity());
    }
    cs[e] = c;
  }
  return cs;
}

namespace {

EnvelopeFit pick_exponent(const std::vector<double>& cs) {
  const auto exps = envelope_exponents();
  EnvelopeFit fit;
  for (std::size_t e = 0; e < exps.size(); ++e) {
    if (cs[e] <= kEnvelopeCMax) fit = {exps[e], cs[e], true};
  }
  return fit;
}

}  // namespace

EnvelopeFit envelope_fit(const LocalSineSystem& sys, const LocalSineAtom& a,
                         std::span<const double> xi_grid) {
  return pick_exponent(envelope_constants(sys, a, xi_grid));
}

EnvelopeFit uniform_envelope_fit(const LocalSineSystem& sys, std::span<const LocalSineAtom> atoms,
                                 double reach) {
  if (atoms.empty()) throw ValidationError("uniform_envelope_fit: no atoms");
  std::vector<double> worst(envelope_exponents().size(), 0.0);
  for (const LocalSineAtom& a : atoms) {
    const auto grid = envelope_grid(a, reach);
    const auto cs = envelope_constants(sys, a, grid);
    for (std::size_t e = 0; e < cs.size(); ++e) worst[e] = std::max(worst[e], cs[e]);
  }
  return pick_exponent(worst);
}

double inner_product(const LocalSineSystem& sys, const LocalSineAtom& a, const LocalSineAtom& b) {
  const double lo = std::max(a.bell.support_lo(), b.bell.support_lo());
  const double hi = std::min(a.bell.support_hi(), b.bell.support_hi());
  if (!(hi > lo)) return 0.0;
  auto pts = sys.break_points(a);
  const auto pb = sys.break_points(b);
  pts.insert(pts.end(), pb.begin(), pb.end());
  pts = merged_breaks(pts, lo, hi);
  auto f = [&](double x) { return sys.eval(a, x) * sys.eval(b, x); };
  return integrate_pieces(f, pts, 1e-13, 1e-15);
}

double gram_defect(const LocalSineSystem& sys, std::span<const LocalSineAtom> atoms) {
  if (atoms.empty()) throw ValidationError("gram_defect: no atoms");
  double worst = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    for (std::size_t j = i; j < atoms.size(); ++j) {
      const double g = inner_product(sys, atoms[i], atoms[j]);
      worst = std::max(worst, std::abs(g - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double reconstruction_error(const LocalSineSystem& sys, int k_count,
                            const std::function<double(double)>& f) {
  const auto atoms = sys.atoms(sys.depth(), k_count);
  std::vector<double> coeff(atoms.size());
  std::vector<double> pts;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto bp = sys.break_points(atoms[i]);
    pts.insert(pts.end(), bp.begin(), bp.end());
    auto g = [&](double x) { return f(x) * sys.eval(atoms[i], x); };
    coeff[i] = integrate_pieces(g, bp, 1e-13, 1e-16);
  }
  pts = merged_breaks(pts, sys.covered_lo(), sys.covered_hi());

  // Each segment between break points meets at most two bells.
  double err2 = 0.0;
  const QuadratureRule& rule = gauss_legendre(24);
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const double a = pts[s], b = pts[s + 1];
    const double mid = 0.5 * (a + b);
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (atoms[i].bell.support_lo() <= mid && mid <= atoms[i].bell.support_hi()) live.push_back(i);
    const int panels = 32;
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
      const double pa = a + p * h;
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const double x = pa + 0.5 * h * (rule.nodes[q] + 1.0);
        double v = f(x);
        for (std::size_t i : live) v -= coeff[i] * sys.eval(atoms[i], x);
        err2 += 0.5 * h * rule.weights[q] * v * v;
      }
    }
  }
  return std::sqrt(err2);
}

std::string atoms_csv(std::span<const LocalSineAtom> atoms) {
  std::ostringstream out;
  out << "side,j,k,x_L,delta_L,c_L\n";
  for (const LocalSineAtom& a : atoms) {
    const WhitneyInterval& l = a.interval();
    out << (l.side == Side::left ? "left" : "right") << ',' << l.j << ',' << a.k << ','
        << format_number(l.x) << ',' << format_number(l.delta) << ',' << format_number(a.c) << '\n';
  }
  return out.str();
}

std::string transform_csv(const LocalSineSystem& sys, const LocalSineAtom& a,
                          std::span<const double> xi_grid) {
  double xi_max = 0.0;
  for (double xi : xi_grid) xi_max = std::max(xi_max, std::abs(xi));
  const FourierSampler sampler(sys, a, xi_max);
  std::ostringstream out;
  out << "xi,re,im,abs\n";
  for (double xi : xi_grid) {
    const auto v = sampler(xi);
    out << format_number(xi) << ',' << format_number(v.real()) << ',' << format_number(v.imag())
        << ',' << format_number(std::abs(v)) << '\n';
  }
  return out.str();
}

}  // namespace tflim
