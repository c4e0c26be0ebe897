#pragma once

#include <complex>
#include <span>

#include "tflim/domains.hpp"

namespace tflim {

enum class KernelMode { closed_form, quadrature };

// Reproducing kernel of the bandlimiting projection onto PW(S):
//   K_S(t) = (2 pi)^{-d} \int_S e^{i xi.t} d xi,
// under the transform convention f^(xi) = \int f(x) e^{-i x.xi} dx.
// S must be coordinate-wise symmetric, so K_S is real and even.
class KernelSpec {
 public:
  // Closed form is available for intervals, boxes and balls with d <= 3;
  // generic domains always use quadrature. Quadrature mode rejects d > 3.
  explicit KernelSpec(Domain s, KernelMode mode = KernelMode::closed_form,
                      int line_samples = 64);

  const Domain& domain() const { return s_; }
  KernelMode mode() const { return mode_; }
  int line_samples() const { return line_samples_; }

  // K_S(0) = measure(S) / (2 pi)^d.
  double value_at_origin() const { return origin_value_; }

 private:
  Domain s_;
  KernelMode mode_;
  int line_samples_;
  double origin_value_;
};

double kernel_value(const KernelSpec& spec, std::span<const double> t);

// Bessel function of the first kind, order one. Power series for |x| <= 12,
// Hankel asymptotic expansion beyond; absolute error below 1e-10.
double bessel_j1(double x);

// Fourier transform of the indicator of F:  \int_F e^{-i x.u} dx.
// Closed form; F must be an interval or box.
std::complex<double> indicator_transform(const Domain& f, std::span<const double> u);

// sin(x)/x with the removable singularity filled in.
double sinc(double x);

}  // namespace tflim
