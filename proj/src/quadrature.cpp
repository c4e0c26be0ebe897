#include "tflim/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <queue>
#include <string>

#include "tflim/error.hpp"

namespace tflim {

namespace {

QuadratureRule compute_gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (n == 1) {
      x = 0.0;
      dp = 1.0;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[n - 1 - i] = x;
    rule.nodes[i] = -x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
  if (n < 1) throw ValidationError("gauss_legendre: n must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<QuadratureRule>(compute_gauss_legendre(n));
  return *slot;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
  const QuadratureRule& ref = gauss_legendre(n);
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * ref.nodes[i];
    rule.weights[i] = half * ref.weights[i];
  }
  return rule;
}

QuadratureRule composite_gauss_legendre(double a, double b, double max_panel,
                                        int order,
                                        const std::vector<double>& breaks) {
  if (!(b > a)) return {};
  if (!(max_panel > 0.0))
    throw ValidationError("composite_gauss_legendre: max_panel must be > 0");
  std::vector<double> cuts{a};
  for (double p : breaks)
    if (p > a && p < b) cuts.push_back(p);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const QuadratureRule& ref = gauss_legendre(order);
  QuadratureRule rule;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double lo = cuts[s];
    const double hi = cuts[s + 1];
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_panel)));
    const double h = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double pa = lo + p * h;
      const double mid = pa + 0.5 * h;
      for (int i = 0; i < order; ++i) {
        rule.nodes.push_back(mid + 0.5 * h * ref.nodes[i]);
        rule.weights.push_back(0.5 * h * ref.weights[i]);
      }
    }
  }
  return rule;
}

namespace {

// Kronrod 15-point nodes (non-negative half) and weights; the embedded 7-point
// Gauss rule uses the odd-indexed nodes.
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

Panel kronrod15(const std::function<double(double)>& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(mid);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kXgk[i];
    const double pair = f(mid - dx) + f(mid + dx);
    kronrod += kWgk[i] * pair;
    if (i % 2 == 1) gauss += kWg[i / 2] * pair;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace

IntegrationResult integrate_adaptive(const std::function<double(double)>& f,
                                     double a, double b, double rel_tol,
                                     double abs_tol, int max_depth) {
  if (a == b) return {};
  std::priority_queue<Panel> heap;
  // Seed panels keep narrow features from being skipped by the first estimate.
  constexpr int kSeed = 8;
  double value = 0.0;
  double error = 0.0;
  for (int i = 0; i < kSeed; ++i) {
    const double pa = a + (b - a) * i / kSeed;
    const double pb = (i + 1 == kSeed) ? b : a + (b - a) * (i + 1) / kSeed;
    Panel p = kronrod15(f, pa, pb);
    value += p.value;
    error += p.error;
    heap.push(p);
  }
  const double min_width = std::abs(b - a) * std::ldexp(1.0, -max_depth);
  const std::size_t max_panels = static_cast<std::size_t>(kSeed) << std::min(max_depth, 14);
  while (error > std::max(abs_tol, rel_tol * std::abs(value))) {
    if (heap.size() >= max_panels) break;
    Panel worst = heap.top();
    if (std::abs(worst.b - worst.a) < min_width) break;
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Panel left = kronrod15(f, worst.a, mid);
    Panel right = kronrod15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum to shed accumulated update round-off.
  value = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  if (!std::isfinite(value) || error > std::max(abs_tol, rel_tol * std::abs(value)) * 10.0)
    throw ConvergenceError("integrate_adaptive: tolerance not reached (estimated error " +
                           std::to_string(error) + ")");
  return {value, error};
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b,
                    double fa, double fm, double fb, double whole, double tol,
                    int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) {
    if (std::abs(delta) > 15.0 * tol)
      throw ConvergenceError("integrate_simpson: maximum depth reached");
    return left + right + delta / 15.0;
  }
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_simpson(const std::function<double(double)>& f, double a,
                         double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  // Seed with a few panels so that narrow features are not skipped.
  constexpr int kSeed = 16;
  const double h = (b - a) / kSeed;
  double total = 0.0;
  for (int p = 0; p < kSeed; ++p) {
    const double pa = a + p * h;
    const double pb = pa + h;
    const double fa = f(pa);
    const double fb = f(pb);
    const double fm = f(0.5 * (pa + pb));
    const double whole = h / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson_step(f, pa, pb, fa, fm, fb, whole, tol / kSeed, max_depth);
  }
  return total;
}

}  // namespace tflim
