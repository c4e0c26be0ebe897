#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace tflim {

// Nodes and weights of a one-dimensional quadrature rule.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

// n-point Gauss-Legendre rule on [-1, 1]. Nodes are ascending.
// Computed by Newton iteration on the three-term Legendre recurrence; cached.
const QuadratureRule& gauss_legendre(int n);

// Gauss-Legendre rule affinely mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

// Composite rule: split [a, b] into panels no longer than max_panel (and at
// every break point inside (a, b)), then apply an `order`-point
// Gauss-Legendre rule on each panel.
QuadratureRule composite_gauss_legendre(double a, double b, double max_panel,
                                        int order,
                                        const std::vector<double>& breaks = {});

struct IntegrationResult {
  double value = 0.0;
  double error = 0.0;
};

// Globally adaptive Gauss-Kronrod (G7/K15) integration of f over [a, b].
// Throws ConvergenceError when the estimated error still exceeds
// 10 * max(abs_tol, rel_tol * |value|) once panels reach (b-a)/2^max_depth.
IntegrationResult integrate_adaptive(const std::function<double(double)>& f,
                                     double a, double b, double rel_tol,
                                     double abs_tol = 0.0, int max_depth = 30);

// Adaptive Simpson quadrature. Independent of the Gauss-Kronrod path so that
// tests and normalization checks can cross-validate.
double integrate_simpson(const std::function<double(double)>& f, double a,
                         double b, double tol, int max_depth = 40);

}  // namespace tflim
