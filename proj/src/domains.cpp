#include "tflim/domains.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "tflim/error.hpp"
#include "tflim/quadrature.hpp"

namespace tflim {

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_dim(const Domain& s, std::size_t n) {
  if (static_cast<int>(n) != s.dim())
    throw ValidationError("dimension mismatch: domain has dim " +
                          std::to_string(s.dim()) + ", point has " +
                          std::to_string(n));
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

}  // namespace

Domain Domain::interval(double a, double b) {
  if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b))
    throw ValidationError("interval requires finite a <= b");
  Domain d;
  d.kind_ = DomainKind::interval;
  d.lower_ = {a};
  d.upper_ = {b};
  return d;
}

Domain Domain::box(std::vector<double> lower, std::vector<double> upper) {
  if (lower.empty() || lower.size() != upper.size())
    throw ValidationError("box requires matching, non-empty bounds");
  for (std::size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
      throw ValidationError("box requires finite lower <= upper on every axis");
  if (lower.size() == 1) return interval(lower[0], upper[0]);
  Domain d;
  d.kind_ = DomainKind::box;
  d.lower_ = std::move(lower);
  d.upper_ = std::move(upper);
  return d;
}

Domain Domain::ball(std::vector<double> center, double radius) {
  if (center.empty()) throw ValidationError("ball requires a center");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ValidationError("ball requires a finite radius > 0");
  Domain d;
  d.kind_ = DomainKind::ball;
  d.center_ = std::move(center);
  d.radius_ = radius;
  d.lower_.resize(d.center_.size());
  d.upper_.resize(d.center_.size());
  for (std::size_t i = 0; i < d.center_.size(); ++i) {
    d.lower_[i] = d.center_[i] - radius;
    d.upper_[i] = d.center_[i] + radius;
  }
  return d;
}

Domain Domain::generic(MembershipRule rule, std::vector<double> lower,
                       std::vector<double> upper) {
  if (!rule) throw ValidationError("generic domain requires a membership rule");
  Domain d = box(lower, upper);
  d.kind_ = DomainKind::generic;
  d.lower_ = std::move(lower);
  d.upper_ = std::move(upper);
  d.rule_ = std::make_shared<const MembershipRule>(std::move(rule));
  return d;
}

bool Domain::contains(std::span<const double> p) const {
  require_dim(*this, p.size());
  switch (kind_) {
    case DomainKind::interval:
    case DomainKind::box:
      for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] < lower_[i] || p[i] > upper_[i]) return false;
      return true;
    case DomainKind::ball: {
      double r2 = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double dx = p[i] - center_[i];
        r2 += dx * dx;
      }
      return r2 <= radius_ * radius_;
    }
    case DomainKind::generic:
      return (*rule_)(p);
  }
  return false;
}

double Domain::measure() const {
  switch (kind_) {
    case DomainKind::interval:
    case DomainKind::box: {
      double m = 1.0;
      for (int i = 0; i < dim(); ++i) m *= upper_[i] - lower_[i];
      return m;
    }
    case DomainKind::ball: {
      // Unit-ball volume pi^{d/2} / Gamma(d/2 + 1).
      const double d = dim();
      return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0) *
             std::pow(radius_, d);
    }
    case DomainKind::generic: {
      try {
        return integrate_over_domain(
            *this, [](std::span<const double>, double a, double b) { return b - a; },
            1e-9, 0.0);
      } catch (const ConvergenceError& e) {
        throw ConvergenceError(std::string("measure estimation failed: ") + e.what());
      }
    }
  }
  return 0.0;
}

Domain Domain::dilated(double r) const {
  if (!(r > 0.0) || !std::isfinite(r))
    throw ValidationError("dilation factor must be a finite r > 0");
  std::vector<double> lo(lower_), hi(upper_);
  for (auto& v : lo) v *= r;
  for (auto& v : hi) v *= r;
  switch (kind_) {
    case DomainKind::interval:
      return interval(lo[0], hi[0]);
    case DomainKind::box:
      return box(lo, hi);
    case DomainKind::ball: {
      std::vector<double> c(center_);
      for (auto& v : c) v *= r;
      return ball(c, radius_ * r);
    }
    case DomainKind::generic: {
      auto base = rule_;
      MembershipRule rule = [base, r](std::span<const double> p) {
        std::vector<double> q(p.begin(), p.end());
        for (auto& v : q) v /= r;
        return (*base)(q);
      };
      return generic(std::move(rule), lo, hi);
    }
  }
  return *this;
}

bool Domain::box_inside(std::span<const double> lo, std::span<const double> hi) const {
  require_dim(*this, lo.size());
  require_dim(*this, hi.size());
  const int d = dim();
  switch (kind_) {
    case DomainKind::interval:
    case DomainKind::box:
      for (int i = 0; i < d; ++i)
        if (lo[i] < lower_[i] || hi[i] > upper_[i]) return false;
      return true;
    case DomainKind::ball: {
      double far2 = 0.0;
      for (int i = 0; i < d; ++i) {
        const double f = std::max(std::abs(lo[i] - center_[i]), std::abs(hi[i] - center_[i]));
        far2 += f * f;
      }
      return far2 <= radius_ * radius_;
    }
    case DomainKind::generic: {
      std::vector<double> v(d);
      for (int mask = 0; mask < (1 << d); ++mask) {
        for (int i = 0; i < d; ++i) v[i] = (mask >> i & 1) ? hi[i] : lo[i];
        if (!contains(v)) return false;
      }
      return true;
    }
  }
  return false;
}

bool Domain::box_disjoint(std::span<const double> lo, std::span<const double> hi) const {
  require_dim(*this, lo.size());
  require_dim(*this, hi.size());
  const int d = dim();
  switch (kind_) {
    case DomainKind::interval:
    case DomainKind::box:
      for (int i = 0; i < d; ++i)
        if (hi[i] < lower_[i] || lo[i] > upper_[i]) return true;
      return false;
    case DomainKind::ball: {
      double near2 = 0.0;
      for (int i = 0; i < d; ++i) {
        const double c = std::clamp(center_[i], lo[i], hi[i]);
        near2 += (c - center_[i]) * (c - center_[i]);
      }
      return near2 > radius_ * radius_;
    }
    case DomainKind::generic: {
      for (int i = 0; i < d; ++i)
        if (hi[i] < lower_[i] || lo[i] > upper_[i]) return true;
      constexpr int kPerAxis = 9;
      std::vector<double> v(d);
      long total = 1;
      for (int i = 0; i < d; ++i) total *= kPerAxis;
      for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        for (int i = 0; i < d; ++i) {
          v[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(rem % kPerAxis) / (kPerAxis - 1);
          rem /= kPerAxis;
        }
        if (contains(v)) return false;
      }
      return true;
    }
  }
  return false;
}

bool Domain::symmetric_by_construction() const {
  switch (kind_) {
    case DomainKind::interval:
    case DomainKind::box:
      for (int i = 0; i < dim(); ++i)
        if (lower_[i] != -upper_[i]) return false;
      return true;
    case DomainKind::ball:
      return std::all_of(center_.begin(), center_.end(), [](double c) { return c == 0.0; });
    case DomainKind::generic:
      return false;
  }
  return false;
}

double Domain::extent(int axis) const {
  return std::max(std::abs(lower_.at(axis)), std::abs(upper_.at(axis)));
}

std::string Domain::to_literal() const {
  std::string out;
  switch (kind_) {
    case DomainKind::interval:
      return "interval:" + format_number(lower_[0]) + "," + format_number(upper_[0]);
    case DomainKind::box:
      out = "box:";
      for (int i = 0; i < dim(); ++i) {
        if (i) out += ";";
        out += format_number(lower_[i]) + "," + format_number(upper_[i]);
      }
      return out;
    case DomainKind::ball:
      out = "ball:" + format_number(radius_) + "@";
      for (int i = 0; i < dim(); ++i) {
        if (i) out += ",";
        out += format_number(center_[i]);
      }
      return out;
    case DomainKind::generic:
      throw ValidationError("generic domains have no literal form");
  }
  return out;
}

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_number(const std::string& token, std::string_view literal) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (token.empty() || used != token.size() || !std::isfinite(v))
    throw ValidationError("bad number '" + token + "' in domain literal '" +
                          std::string(literal) + "'");
  return v;
}

std::vector<double> parse_list(const std::string& s, std::string_view literal) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) out.push_back(parse_number(tok, literal));
  return out;
}

}  // namespace

Domain parse_domain(std::string_view literal, int dim_hint) {
  const std::size_t colon = literal.find(':');
  if (colon == std::string_view::npos)
    throw ValidationError("domain literal '" + std::string(literal) + "' has no kind prefix");
  const std::string kind(literal.substr(0, colon));
  const std::string body(literal.substr(colon + 1));
  if (kind == "interval") {
    const auto v = parse_list(body, literal);
    if (v.size() != 2) throw ValidationError("interval literal needs exactly a,b");
    return Domain::interval(v[0], v[1]);
  }
  if (kind == "box") {
    std::vector<double> lo, hi;
    for (const auto& axis : split(body, ';')) {
      const auto v = parse_list(axis, literal);
      if (v.size() != 2) throw ValidationError("box literal axes need exactly a,b");
      lo.push_back(v[0]);
      hi.push_back(v[1]);
    }
    return Domain::box(lo, hi);
  }
  if (kind == "ball") {
    const auto parts = split(body, '@');
    if (parts.size() > 2) throw ValidationError("ball literal has more than one '@'");
    const double radius = parse_number(parts[0], literal);
    std::vector<double> center;
    if (parts.size() == 2) {
      center = parse_list(parts[1], literal);
    } else {
      if (dim_hint <= 0)
        throw ValidationError("ball literal without center needs a dimension");
      center.assign(dim_hint, 0.0);
    }
    return Domain::ball(center, radius);
  }
  throw ValidationError("unknown domain kind '" + kind + "'");
}

std::vector<double> halton_point(long index, int dim) {
  if (dim < 1 || dim > static_cast<int>(std::size(kPrimes)))
    throw ValidationError("halton_point: unsupported dimension");
  std::vector<double> p(dim);
  for (int k = 0; k < dim; ++k) {
    const int base = kPrimes[k];
    double f = 1.0;
    double r = 0.0;
    long i = index + 1;
    while (i > 0) {
      f /= base;
      r += f * static_cast<double>(i % base);
      i /= base;
    }
    p[k] = r;
  }
  return p;
}

double symmetry_defect(const Domain& s, int n_samples) {
  if (n_samples < 1) throw ValidationError("symmetry_defect: n_samples must be >= 1");
  const int d = s.dim();
  const long max_draws = static_cast<long>(n_samples) * 1000;
  long accepted = 0;
  long violations = 0;
  std::vector<double> x(d), flipped(d);
  for (long idx = 0; idx < max_draws && accepted < n_samples; ++idx) {
    const auto u = halton_point(idx, d);
    for (int i = 0; i < d; ++i) x[i] = s.lower()[i] + (s.upper()[i] - s.lower()[i]) * u[i];
    if (!s.contains(x)) continue;
    ++accepted;
    for (int j = 0; j < d; ++j) {
      flipped = x;
      flipped[j] = -flipped[j];
      if (!s.contains(flipped)) {
        ++violations;
        break;
      }
    }
  }
  return accepted == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(accepted);
}

void require_coordinate_symmetric(const Domain& s) {
  if (s.symmetric_by_construction()) return;
  if (s.kind() == DomainKind::generic && symmetry_defect(s, 10000) == 0.0) return;
  throw ValidationError("frequency domain must be coordinate-wise symmetric");
}

namespace {

// Inside segments of the line through `prefix` along the last axis.
std::vector<std::pair<double, double>> line_segments(const Domain& s,
                                                     std::vector<double>& point,
                                                     int samples) {
  const int last = s.dim() - 1;
  const double lo = s.lower()[last];
  const double hi = s.upper()[last];
  auto inside = [&](double t) {
    point[last] = t;
    return s.contains(point);
  };
  auto boundary = [&](double t_in, double t_out) {
    for (int it = 0; it < 60 && std::abs(t_out - t_in) > 1e-16 * (hi - lo); ++it) {
      const double mid = 0.5 * (t_in + t_out);
      if (inside(mid)) t_in = mid;
      else t_out = mid;
    }
    return t_in;
  };
  std::vector<std::pair<double, double>> segs;
  for (int m = samples; m <= 4096; m *= 2) {
    bool prev = inside(lo);
    double start = lo;
    double t_prev = lo;
    for (int i = 1; i <= m; ++i) {
      const double t = (i == m) ? hi : lo + (hi - lo) * i / m;
      const bool cur = inside(t);
      if (cur != prev) {
        if (cur) {
          start = boundary(t, t_prev);
        } else {
          segs.emplace_back(start, boundary(t_prev, t));
        }
        prev = cur;
      }
      t_prev = t;
    }
    if (prev) segs.emplace_back(start, hi);
    if (!segs.empty()) break;
  }
  return segs;
}

double integrate_axis(const Domain& s, const SegmentIntegral& segment,
                      std::vector<double>& point, int axis, double rel_tol,
                      double abs_tol, int samples) {
  const int d = s.dim();
  if (axis == d - 1) {
    double total = 0.0;
    const auto segs = line_segments(s, point, samples);
    std::span<const double> prefix(point.data(), d - 1);
    for (const auto& [a, b] : segs) total += segment(prefix, a, b);
    return total;
  }
  auto inner = [&, axis](double x) {
    std::vector<double> p = point;
    p[axis] = x;
    return integrate_axis(s, segment, p, axis + 1, rel_tol * 0.1, abs_tol * 0.1, samples);
  };
  return integrate_adaptive(inner, s.lower()[axis], s.upper()[axis], rel_tol, abs_tol, 24)
      .value;
}

}  // namespace

double integrate_over_domain(const Domain& s, const SegmentIntegral& segment,
                             double rel_tol, double abs_tol, int line_samples) {
  std::vector<double> point(s.dim(), 0.0);
  return integrate_axis(s, segment, point, 0, rel_tol, abs_tol, line_samples);
}

}  // namespace tflim
