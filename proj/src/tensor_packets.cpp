#include "tflim/tensor_packets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "tflim/error.hpp"
#include "tflim/quadrature.hpp"

namespace tflim {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kRowCap = 20'000'000;

double nominal(int k) { return kPi * (k + 0.5); }

void check_common(int d, double r, double eps) {
  if (d < 1 || d > 3) throw ValidationError("tensor packets: d must be 1, 2 or 3");
  if (!(eps > 0.0 && eps < 0.5)) throw ValidationError("tensor packets: eps must lie in (0, 1/2)");
  if (!(r >= 1.0)) throw ValidationError("tensor packets: r must be >= 1");
}

// Classification against an already dilated S(r); g is the scaled margin.
AtomClass classify_scaled(std::span<const double> deltas, std::span<const int> ks,
                          const Domain& sr, double g) {
  const int d = static_cast<int>(deltas.size());
  std::array<double, 3> lo{}, hi{};
  bool all_inside = true, all_disjoint = true;
  for (int mask = 0; mask < (1 << d); ++mask) {
    for (int i = 0; i < d; ++i) {
      const double sign = (mask >> i) & 1 ? -1.0 : 1.0;
      const double c = sign * nominal(ks[i]) / deltas[i];
      const double m = g / deltas[i];
      lo[i] = c - m;
      hi[i] = c + m;
    }
    const std::span<const double> l(lo.data(), d), h(hi.data(), d);
    if (all_inside && !sr.box_inside(l, h)) all_inside = false;
    if (all_disjoint && !sr.box_disjoint(l, h)) all_disjoint = false;
    if (!all_inside && !all_disjoint) return AtomClass::res;
  }
  if (all_inside) return AtomClass::low;
  return all_disjoint ? AtomClass::hi : AtomClass::res;
}

double max_extent(const Domain& s) {
  double e = 0.0;
  for (int i = 0; i < s.dim(); ++i) e = std::max(e, s.extent(i));
  return e;
}

int smallest_depth_for(double target, const std::function<double(int)>& value) {
  for (int j = 1; j <= 50; ++j)
    if (value(j) <= target) return j;
  throw ValidationError("tensor packets: no depth up to 50 meets the truncation bound");
}

// Mixed-radix odometer; returns false after the last tuple.
bool advance(std::vector<int>& digits, int base) {
  for (int i = static_cast<int>(digits.size()) - 1; i >= 0; --i) {
    if (++digits[i] < base) return true;
    digits[i] = 0;
  }
  return false;
}

std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t v = 1;
  for (int i = 0; i < e; ++i) v *= b;
  return v;
}

}  // namespace

std::uint64_t tensor_index_count(int d, int j_max, int k_max) {
  return ipow(static_cast<std::uint64_t>(2 * j_max) * static_cast<std::uint64_t>(k_max), d);
}

std::vector<TensorIndex> tensor_index_set(int d, int j_max, int k_max, std::size_t cap) {
  if (d < 1 || d > 3) throw ValidationError("tensor_index_set: d must be 1, 2 or 3");
  if (j_max < 1 || k_max < 1) throw ValidationError("tensor_index_set: J_max and K_max must be >= 1");
  const std::uint64_t count = tensor_index_count(d, j_max, k_max);
  if (count > cap) throw SizeError("tensor_index_set: index count exceeds the cap");
  std::vector<TensorIndex> out;
  out.reserve(count);
  std::vector<int> iv(d, 0);
  do {
    std::vector<int> ks(d, 0);
    do {
      out.push_back({iv, ks});
    } while (advance(ks, k_max));
  } while (advance(iv, 2 * j_max));
  return out;
}

const char* to_string(AtomClass c) {
  switch (c) {
    case AtomClass::low: return "low";
    case AtomClass::res: return "res";
    case AtomClass::hi: return "hi";
  }
  return "?";
}

double margin_scale(double r, double eps, double delta_min, const ClassifyConfig& cfg) {
  if (!(cfg.a > 0.0) || !(cfg.kappa > 0.0)) throw ValidationError("margin: a and kappa must be > 0");
  const double l = std::log(cfg.kappa * r / (eps * delta_min));
  if (!(l > 0.0)) throw ValidationError("margin: logarithm argument must exceed 1");
  return std::pow(l / cfg.a, 1.5);
}

AtomClass classify(std::span<const double> deltas, std::span<const int> ks, const Domain& s,
                   double r, double eps, const ClassifyConfig& cfg) {
  const int d = static_cast<int>(deltas.size());
  check_common(d, r, eps);
  if (static_cast<int>(ks.size()) != d || s.dim() != d)
    throw ValidationError("classify: dimension mismatch");
  const double dmin = *std::min_element(deltas.begin(), deltas.end());
  return classify_scaled(deltas, ks, s.dilated(r), margin_scale(r, eps, dmin, cfg));
}

double deep_tail_bound(int d, const Domain& s, double r, int j_max) {
  return std::pow(2.0 * kPi, -d) * s.measure() * std::pow(r, d) * d * (7.0 / 6.0) *
         std::ldexp(1.0, -j_max);
}

Truncation suggest_truncation(int d, const Domain& s, double r, double eps,
                              const ClassifyConfig& cfg) {
  check_common(d, r, eps);
  const int j1 = smallest_depth_for(eps * eps / std::pow(r, d),
                                    [](int j) { return std::ldexp(1.0, -j); });
  const int j2 = smallest_depth_for(eps * eps / 100.0,
                                    [&](int j) { return deep_tail_bound(d, s, r, j); });
  Truncation t;
  t.j_max = std::max(j1, j2);
  const double g = margin_scale(r, eps, std::ldexp(1.0, -t.j_max - 1), cfg);
  const double need = g + r * max_extent(s) / 4.0;
  int k = static_cast<int>(std::ceil(r / kPi));
  while (nominal(k) - need <= 0.0) ++k;
  t.k_max = std::max(k, 1);
  return t;
}

void check_truncation(int d, const Domain& s, double r, double eps, int j_max, int k_max,
                      const ClassifyConfig& cfg) {
  check_common(d, r, eps);
  if (j_max < 1 || k_max < 1) throw ValidationError("truncation: J_max and K_max must be >= 1");
  if (std::ldexp(1.0, -j_max) > eps * eps / std::pow(r, d))
    throw ValidationError("truncation: 2^-J_max must not exceed eps^2 / r^d");
  if (deep_tail_bound(d, s, r, j_max) > eps * eps / 100.0)
    throw ValidationError("truncation: atoms deeper than J_max may leak more than eps^2/100");
  if (kPi * k_max / 0.25 < 4.0 * r)
    throw ValidationError("truncation: pi K_max / delta_max must be at least 4 r");
  const double g = margin_scale(r, eps, std::ldexp(1.0, -j_max - 1), cfg);
  if (nominal(k_max) - g <= r * max_extent(s) / 4.0)
    throw ValidationError("truncation: atoms with k >= K_max would not all be hi");
}

Partition partition_basis(int d, const Domain& s, double r, double eps, int j_max, int k_max,
                          const ClassifyConfig& cfg) {
  check_common(d, r, eps);
  if (s.dim() != d) throw ValidationError("partition_basis: dim(S) must equal d");
  require_coordinate_symmetric(s);
  check_truncation(d, s, r, eps, j_max, k_max, cfg);

  Partition part{.d = d, .s = s, .r = r, .eps = eps, .j_max = j_max, .k_max = k_max,
                 .cfg = cfg, .intervals = whitney_intervals(j_max), .rows = {}};
  const int n_iv = static_cast<int>(part.intervals.size());
  const std::uint64_t n_rows = ipow(n_iv, d) * ipow(k_max, d - 1);
  if (n_rows > kRowCap) throw SizeError("partition_basis: too many rows for this truncation");
  part.rows.reserve(n_rows);

  const Domain sr = s.dilated(r);
  std::vector<int> iv(d, 0);
  std::vector<double> deltas(d);
  std::vector<int> ks(d, 0);
  do {
    double dmin = 1.0;
    for (int i = 0; i < d; ++i) {
      deltas[i] = part.intervals[iv[i]].delta;
      dmin = std::min(dmin, deltas[i]);
    }
    const double g = margin_scale(r, eps, dmin, cfg);
    std::vector<int> lead(d - 1, 0);
    do {
      std::copy(lead.begin(), lead.end(), ks.begin());
      PartitionRow row{iv, lead, 0, 0};
      int stage = 0;  // 0 low, 1 res, 2 hi
      for (int k = 0; k < k_max; ++k) {
        ks[d - 1] = k;
        const int c = static_cast<int>(classify_scaled(deltas, ks, sr, g));
        if (c < stage)
          throw Error("partition_basis: classes are not ordered low, res, hi along a row; "
                      "S must be convex and coordinate-wise symmetric");
        stage = c;
        if (stage == 0) row.low_end = k + 1;
        if (stage <= 1) row.res_end = k + 1;
      }
      part.low_count += row.low_end;
      part.res_count += row.res_end - row.low_end;
      part.hi_count += k_max - row.res_end;
      part.rows.push_back(std::move(row));
    } while (advance(lead, k_max));
  } while (advance(iv, n_iv));
  return part;
}

AtomClass Partition::class_of(const TensorIndex& idx) const {
  if (static_cast<int>(idx.interval.size()) != d || static_cast<int>(idx.k.size()) != d)
    throw ValidationError("class_of: index dimension mismatch");
  const int n_iv = static_cast<int>(intervals.size());
  std::uint64_t row = 0;
  for (int i = 0; i < d; ++i) {
    if (idx.interval[i] < 0 || idx.interval[i] >= n_iv) throw ValidationError("class_of: interval out of range");
    row = row * n_iv + idx.interval[i];
  }
  for (int i = 0; i + 1 < d; ++i) {
    if (idx.k[i] < 0) throw ValidationError("class_of: k must be >= 0");
    if (idx.k[i] >= k_max) return AtomClass::hi;
    row = row * k_max + idx.k[i];
  }
  const int k = idx.k[d - 1];
  if (k < 0) throw ValidationError("class_of: k must be >= 0");
  const PartitionRow& pr = rows[row];
  if (k < pr.low_end) return AtomClass::low;
  if (k < pr.res_end) return AtomClass::res;
  return AtomClass::hi;
}

std::vector<TensorIndex> Partition::members(AtomClass c, std::size_t cap) const {
  const std::uint64_t n = c == AtomClass::low ? low_count : c == AtomClass::res ? res_count : hi_count;
  if (n > cap) throw SizeError("members: class size exceeds the cap");
  std::vector<TensorIndex> out;
  out.reserve(n);
  for (const PartitionRow& row : rows) {
    int a = 0, b = row.low_end;
    if (c == AtomClass::res) a = row.low_end, b = row.res_end;
    if (c == AtomClass::hi) a = row.res_end, b = k_max;
    for (int k = a; k < b; ++k) {
      TensorIndex t{row.interval, row.k};
      t.k.push_back(k);
      out.push_back(std::move(t));
    }
  }
  return out;
}

double bound_E_d(int d, double eps, double r) {
  check_common(d, r, eps);
  const double l = std::log(r / eps);
  return std::max(std::pow(r, d - 1) * std::pow(l, 2.5), std::pow(l, 2.5 * d));
}

// ---- envelope bounds -------------------------------------------------------

namespace {

// \int_x^inf exp(-2 a v^{2/3}) dv for x >= 0.
double psi2_tail(double x, double a) {
  const double scale = 1.5 * std::pow(2.0 * a, -1.5);
  if (x <= 0.0) return scale * std::tgamma(1.5);
  return scale * boost::math::tgamma(1.5, 2.0 * a * std::cbrt(x * x));
}

// \int_lo^hi exp(-2 a |v|^{2/3}) dv
double psi2_integral(double lo, double hi, double a) {
  if (!(hi > lo)) return 0.0;
  if (lo >= 0.0) return psi2_tail(lo, a) - psi2_tail(hi, a);
  if (hi <= 0.0) return psi2_tail(-hi, a) - psi2_tail(-lo, a);
  return 2.0 * psi2_tail(0.0, a) - psi2_tail(-lo, a) - psi2_tail(hi, a);
}

}  // namespace

double envelope_energy_inside(double delta, int k, double p, double a, double C) {
  const double u = delta * p;
  if (!(u > 0.0)) return 0.0;
  const double w = nominal(k);
  return std::min(1.0, 2.0 * C * C / kPi * psi2_integral(-u - w, u - w, a));
}

double envelope_energy_outside(double delta, int k, double q, double a, double C) {
  const double u = std::max(0.0, delta * q);
  const double w = nominal(k);
  const double right = u - w >= 0.0 ? psi2_tail(u - w, a) : 2.0 * psi2_tail(0.0, a) - psi2_tail(w - u, a);
  const double left = psi2_tail(u + w, a);
  return std::min(1.0, 2.0 * C * C / kPi * (right + left));
}

// ---- quadrature of in-band energies ----------------------------------------

namespace {

struct AxisEnergy {
  std::unique_ptr<FourierSampler> sampler;
  double support = 0.0;
  double rmax = 0.0;
  double h = 0.0;
  std::vector<double> cum;    // (1/pi) \int_0^{x_m} |phi^|^2
  std::vector<double> slope;  // |phi^(x_m)|^2 / pi

  double power(double xi) const { return std::norm((*sampler)(xi)); }

  // (2 pi)^{-1} \int_{-x}^{x} |phi^|^2 by cubic Hermite interpolation.
  double inside(double x) const {
    if (x <= 0.0) return 0.0;
    x = std::min(x, rmax);
    const std::size_t m = std::min(cum.size() - 2, static_cast<std::size_t>(x / h));
    const double t = (x - m * h) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * cum[m] + (t3 - 2 * t2 + t) * h * slope[m] +
           (-2 * t3 + 3 * t2) * cum[m + 1] + (t3 - t2) * h * slope[m + 1];
  }
};

class EnergyCache {
 public:
  EnergyCache(const LocalSineSystem& sys, double rmax) : sys_(sys), rmax_(rmax) {}

  const AxisEnergy& get(int interval, int k) {
    auto key = std::make_pair(interval, k);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    AxisEnergy e;
    const LocalSineAtom atom = sys_.atom(static_cast<std::size_t>(interval) + 1, k);
    e.support = atom.bell.support_hi() - atom.bell.support_lo();
    e.rmax = rmax_;
    e.sampler = std::make_unique<FourierSampler>(sys_, atom, std::max(rmax_, 1.0 / atom.interval().delta));
    const int cells = std::max(4, static_cast<int>(std::ceil(rmax_ * e.support * 4.0)));
    e.h = rmax_ / cells;
    // Cells are a small fraction of the pi / support oscillation scale.
    const QuadratureRule& rule = gauss_legendre(4);
    e.cum.assign(cells + 1, 0.0);
    e.slope.assign(cells + 1, 0.0);
    for (int m = 0; m < cells; ++m) {
      double s = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q)
        s += rule.weights[q] * e.power(m * e.h + 0.5 * e.h * (rule.nodes[q] + 1.0));
      e.cum[m + 1] = e.cum[m] + 0.5 * e.h * s / kPi;
    }
    for (int m = 0; m <= cells; ++m) e.slope[m] = e.power(m * e.h) / kPi;
    return cache_.emplace(key, std::move(e)).first->second;
  }

 private:
  const LocalSineSystem& sys_;
  double rmax_;
  std::map<std::pair<int, int>, AxisEnergy> cache_;
};

void check_energy_domain(const Partition& part) {
  if (part.d > 2) throw ValidationError("energy estimate: d must be 1 or 2");
  const DomainKind kind = part.s.kind();
  if (kind == DomainKind::generic)
    throw ValidationError("energy estimate: S must be an interval, box or ball");
}

double in_band_cached(EnergyCache& cache, const Partition& part, const TensorIndex& idx) {
  const Domain& s = part.s;
  if (s.kind() != DomainKind::ball || part.d == 1) {
    double v = 1.0;
    for (int i = 0; i < part.d; ++i)
      v *= cache.get(idx.interval[i], idx.k[i]).inside(part.r * s.extent(i));
    return v;
  }
  // Disk of radius R: (1/pi) \int_0^{pi/2} |phi1^(R sin t)|^2 E2(R cos t) R cos t dt.
  const double rad = part.r * s.radius();
  const AxisEnergy& e1 = cache.get(idx.interval[0], idx.k[0]);
  const AxisEnergy& e2 = cache.get(idx.interval[1], idx.k[1]);
  const int panels = 4 + static_cast<int>(std::ceil(rad * e1.support * 2.0));
  const QuadratureRule rule = composite_gauss_legendre(0.0, kPi / 2.0, kPi / 2.0 / panels, 20);
  double sum = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double t = rule.nodes[q];
    sum += rule.weights[q] * e1.power(rad * std::sin(t)) * e2.inside(rad * std::cos(t)) *
           rad * std::cos(t);
  }
  return sum / kPi;
}

double rmax_of(const Partition& part) {
  double m = 0.0;
  for (int i = 0; i < part.d; ++i) m = std::max(m, part.r * part.s.extent(i));
  return m;
}

}  // namespace

double in_band_energy(const LocalSineSystem& sys, const Partition& part, const TensorIndex& idx) {
  check_energy_domain(part);
  if (sys.depth() < part.j_max + 1)
    throw ValidationError("in_band_energy: the system must be one level deeper than J_max");
  EnergyCache cache(sys, rmax_of(part));
  return in_band_cached(cache, part, idx);
}

EnergyEstimate energy_estimate(const Partition& part, const EnergyOptions& opts) {
  check_energy_domain(part);
  const int d = part.d;
  const double a = opts.envelope_a, C = opts.envelope_C;
  const int n_iv = static_cast<int>(part.intervals.size());

  // Per-axis envelope terms, indexed by (depth of delta_min, interval, k).
  const int levels = part.j_max;
  auto slot = [&](int level, int iv, int k) {
    return (static_cast<std::size_t>(level) * n_iv + iv) * part.k_max + k;
  };
  std::vector<double> in_term(static_cast<std::size_t>(levels) * n_iv * part.k_max);
  std::vector<double> out_term(in_term.size());
  for (int lv = 0; lv < levels; ++lv) {
    const double g = margin_scale(part.r, part.eps, std::ldexp(1.0, -(lv + 1) - 1), part.cfg);
    for (int iv = 0; iv < n_iv; ++iv) {
      const double delta = part.intervals[iv].delta;
      for (int k = 0; k < part.k_max; ++k) {
        const double p = (nominal(k) - g) / delta;
        const double q = (nominal(k) + g) / delta;
        in_term[slot(lv, iv, k)] = envelope_energy_inside(delta, k, p, a, C);
        out_term[slot(lv, iv, k)] = envelope_energy_outside(delta, k, q, a, C);
      }
    }
  }

  struct Ranked {
    double bound;
    std::uint64_t row;
    int k;
  };
  std::vector<Ranked> hi_ranked, low_ranked;
  for (std::uint64_t ri = 0; ri < part.rows.size(); ++ri) {
    const PartitionRow& row = part.rows[ri];
    int jmin = 0;
    for (int i = 0; i < d; ++i) jmin = std::max(jmin, part.intervals[row.interval[i]].j);
    const int lv = jmin - 1;
    double lead_in = 0.0, lead_out = 0.0;
    for (int i = 0; i + 1 < d; ++i) {
      lead_in += in_term[slot(lv, row.interval[i], row.k[i])];
      lead_out += out_term[slot(lv, row.interval[i], row.k[i])];
    }
    const int last = row.interval[d - 1];
    for (int k = 0; k < row.low_end; ++k)
      low_ranked.push_back({std::min(1.0, lead_out + out_term[slot(lv, last, k)]), ri, k});
    for (int k = row.res_end; k < part.k_max; ++k)
      hi_ranked.push_back({std::min(1.0, lead_in + in_term[slot(lv, last, k)]), ri, k});
  }

  EnergyEstimate est;
  const LocalSineSystem sys(part.j_max + 1);
  EnergyCache cache(sys, rmax_of(part));
  // Returns the bound left over after integrating the heaviest atoms.
  auto drain = [&](std::vector<Ranked>& ranked, bool low, double& quad, std::size_t& count) {
    std::sort(ranked.begin(), ranked.end(),
              [](const Ranked& x, const Ranked& y) { return x.bound > y.bound; });
    long double rest = 0.0L, q = 0.0L;
    for (const Ranked& r : ranked) rest += r.bound;
    for (const Ranked& r : ranked) {
      if (rest <= opts.budget || count >= opts.max_integrated) break;
      const PartitionRow& row = part.rows[r.row];
      TensorIndex idx{row.interval, row.k};
      idx.k.push_back(r.k);
      const double e = in_band_cached(cache, part, idx);
      q += low ? std::max(0.0, 1.0 - e) : e;
      rest -= r.bound;
      ++count;
    }
    quad = static_cast<double>(q);
    return static_cast<double>(std::max(0.0L, rest));
  };
  est.hi_envelope = drain(hi_ranked, false, est.hi_quadrature, est.hi_integrated);
  est.low_envelope = drain(low_ranked, true, est.low_quadrature, est.low_integrated);

  // Atoms with k_i >= K_max on axis i, via Bessel's inequality on the other axes.
  for (int i = 0; i < d; ++i) {
    double others = 1.0;
    for (int j = 0; j < d; ++j)
      if (j != i) others *= 2.0 * part.r * part.s.extent(j) / (2.0 * kPi);
    const double rad = part.r * part.s.extent(i);
    double axis = 0.0;
    for (const WhitneyInterval& l : part.intervals) {
      for (int k = part.k_max;; ++k) {
        const double t = envelope_energy_inside(l.delta, k, rad, a, C);
        axis += t;
        if (t <= 1e-18 * axis || t == 0.0) break;
      }
    }
    est.hi_truncated += others * axis;
  }
  est.hi_deep = deep_tail_bound(d, part.s, part.r, part.j_max);

  est.hi_leak = est.hi_quadrature + est.hi_envelope + est.hi_truncated + est.hi_deep;
  est.low_leak = est.low_quadrature + est.low_envelope;
  return est;
}

Lemma2Check verify_lemma2(const Partition& part, const SpectrumReport& spectrum, double eps) {
  Lemma2Check c;
  c.plunge = plunge_count(spectrum, eps);
  c.res = part.res_count;
  c.pass = static_cast<std::uint64_t>(c.plunge) <= 2 * c.res;
  return c;
}

std::string partition_csv(const Partition& part, std::size_t cap) {
  if (part.total() > cap) throw SizeError("partition_csv: atom count exceeds the cap");
  std::ostringstream out;
  for (int i = 0; i < part.d; ++i) out << 'j' << i + 1 << ',';
  for (int i = 0; i < part.d; ++i) out << "side" << i + 1 << ',';
  for (int i = 0; i < part.d; ++i) out << 'k' << i + 1 << ',';
  out << "class\n";
  for (const PartitionRow& row : part.rows) {
    for (int k = 0; k < part.k_max; ++k) {
      for (int i = 0; i < part.d; ++i) out << part.intervals[row.interval[i]].j << ',';
      for (int i = 0; i < part.d; ++i)
        out << (part.intervals[row.interval[i]].side == Side::left ? "left" : "right") << ',';
      for (int i = 0; i + 1 < part.d; ++i) out << row.k[i] << ',';
      out << k << ',';
      const AtomClass c = k < row.low_end ? AtomClass::low : k < row.res_end ? AtomClass::res : AtomClass::hi;
      out << to_string(c) << '\n';
    }
  }
  return out.str();
}

}  // namespace tflim
