#include "tflim/kernels.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "tflim/error.hpp"

namespace tflim {

namespace {

constexpr double kPi = std::numbers::pi;

// Below this scaled argument the closed forms switch to Taylor polynomials.
constexpr double kTaylorCut = 1e-4;
// (sin u - u cos u) / u^3 loses ~log10(1/u^2) digits, so it switches earlier.
constexpr double kTaylorCutBall3 = 5e-2;

// J1(u)/u
double j1_over_x(double u) {
  if (std::abs(u) < kTaylorCut) {
    const double u2 = u * u;
    return 0.5 - u2 / 16.0 + u2 * u2 / 384.0 - u2 * u2 * u2 / 18432.0;
  }
  return bessel_j1(u) / u;
}

// (sin u - u cos u) / u^3
double ball3_profile(double u) {
  if (std::abs(u) < kTaylorCutBall3) {
    const double u2 = u * u;
    return 1.0 / 3.0 - u2 / 30.0 + u2 * u2 / 840.0 - u2 * u2 * u2 / 45360.0;
  }
  return (std::sin(u) - u * std::cos(u)) / (u * u * u);
}

double closed_form(const Domain& s, std::span<const double> t) {
  const int d = s.dim();
  switch (s.kind()) {
    case DomainKind::interval:
    case DomainKind::box: {
      double v = 1.0;
      for (int i = 0; i < d; ++i) {
        const double w = s.upper()[i];
        v *= w / kPi * sinc(w * t[i]);
      }
      return v;
    }
    case DomainKind::ball: {
      const double rho = s.radius();
      double r2 = 0.0;
      for (double ti : t) r2 += ti * ti;
      const double u = rho * std::sqrt(r2);
      if (d == 1) return rho / kPi * sinc(u);
      if (d == 2) return rho * rho / (2.0 * kPi) * j1_over_x(u);
      return rho * rho * rho / (2.0 * kPi * kPi) * ball3_profile(u);
    }
    case DomainKind::generic:
      break;
  }
  throw ValidationError("no closed-form kernel for this domain");
}

double quadrature_value(const KernelSpec& spec, std::span<const double> t) {
  const Domain& s = spec.domain();
  const int d = s.dim();
  std::vector<double> tv(t.begin(), t.end());
  // \int_a^b cos(c + xi t_d) d xi, written without cancellation.
  auto segment = [&tv, d](std::span<const double> prefix, double a, double b) {
    double c = 0.0;
    for (int k = 0; k + 1 < d; ++k) c += prefix[k] * tv[k];
    const double td = tv[d - 1];
    const double len = b - a;
    return len * std::cos(c + 0.5 * (a + b) * td) * sinc(0.5 * len * td);
  };
  double box_measure = 1.0;
  for (int i = 0; i < d; ++i) box_measure *= s.upper()[i] - s.lower()[i];
  const double integral =
      integrate_over_domain(s, segment, 1e-11, 1e-12 * box_measure, spec.line_samples());
  return integral / std::pow(2.0 * kPi, d);
}

}  // namespace

double sinc(double x) {
  if (std::abs(x) < kTaylorCut) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0;
  }
  return std::sin(x) / x;
}

KernelSpec::KernelSpec(Domain s, KernelMode mode, int line_samples)
    : s_(std::move(s)), mode_(mode), line_samples_(line_samples), origin_value_(0.0) {
  require_coordinate_symmetric(s_);
  if (s_.kind() == DomainKind::generic) mode_ = KernelMode::quadrature;
  if (mode_ == KernelMode::closed_form && s_.kind() == DomainKind::ball && s_.dim() > 3)
    throw ValidationError("closed-form ball kernel is only available for d <= 3");
  if (mode_ == KernelMode::quadrature && s_.dim() > 3)
    throw ValidationError("quadrature kernels are limited to d <= 3");
  if (line_samples_ < 8) throw ValidationError("line_samples must be >= 8");
  origin_value_ = s_.measure() / std::pow(2.0 * kPi, s_.dim());
}

double kernel_value(const KernelSpec& spec, std::span<const double> t) {
  if (static_cast<int>(t.size()) != spec.domain().dim())
    throw ValidationError("kernel_value: dimension mismatch");
  if (spec.mode() == KernelMode::closed_form) return closed_form(spec.domain(), t);
  return quadrature_value(spec, t);
}

double bessel_j1(double x) {
  if (x < 0.0) return -bessel_j1(-x);
  if (x == 0.0) return 0.0;
  if (x <= 12.0) {
    const double half = 0.5 * x;
    const double q = -half * half;
    double term = half;
    double sum = term;
    for (int m = 1; m < 200; ++m) {
      term *= q / (static_cast<double>(m) * (m + 1));
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum) && m > 2) break;
    }
    return sum;
  }
  // Hankel expansion with mu = 4 nu^2 = 4: a_k = prod_{j<=k} (mu - (2j-1)^2) / (k! 8^k).
  constexpr double mu = 4.0;
  double p = 1.0;
  double q = 0.0;
  double term = 1.0;
  double last = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * 8.0 * x);
    if (std::abs(term) > last) break;  // asymptotic series started to diverge
    last = std::abs(term);
    // Terms alternate P, Q, P, Q with signs +,-,-,+ per pair.
    switch (k % 4) {
      case 1: q += term; break;
      case 2: p -= term; break;
      case 3: q -= term; break;
      case 0: p += term; break;
    }
    if (last < 1e-17) break;
  }
  const double chi = x - 0.75 * kPi;
  return std::sqrt(2.0 / (kPi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

std::complex<double> indicator_transform(const Domain& f, std::span<const double> u) {
  if (f.kind() != DomainKind::interval && f.kind() != DomainKind::box)
    throw ValidationError("indicator_transform needs an interval or box");
  if (static_cast<int>(u.size()) != f.dim())
    throw ValidationError("indicator_transform: dimension mismatch");
  std::complex<double> v(1.0, 0.0);
  for (int i = 0; i < f.dim(); ++i) {
    const double len = f.upper()[i] - f.lower()[i];
    const double mid = 0.5 * (f.upper()[i] + f.lower()[i]);
    v *= std::polar(len * sinc(0.5 * len * u[i]), -mid * u[i]);
  }
  return v;
}

}  // namespace tflim
