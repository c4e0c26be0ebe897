#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace tflim {

enum class Side { left, right };

// [x, x + delta) with delta = 2^{-j-1}; x = 2^{-j-1} on the left side and
// 1 - 2^{-j} on the right side.
struct WhitneyInterval {
  Side side = Side::left;
  int j = 1;
  double x = 0.0;
  double delta = 0.0;

  double end() const { return x + delta; }
};

// The 2 j_max intervals with j = 1..j_max, sorted by left endpoint.
std::vector<WhitneyInterval> whitney_intervals(int j_max);

// Bump used to build the smooth step: exp(-1/(1-t^2)^2) gives a Gevrey-3/2
// step, exp(-1/(1-t^2)) the weaker Gevrey-2 one.
enum class GevreyBump { three_halves, two };

// s(t) = sin(pi/2 H(t)) with H the normalized primitive of the bump.
// s = 0 for t <= -1, s = 1 for t >= 1 and s(t)^2 + s(-t)^2 = 1 exactly.
class SmoothStep {
 public:
  explicit SmoothStep(GevreyBump bump = GevreyBump::three_halves);

  double operator()(double t) const;
  GevreyBump bump() const { return bump_; }

 private:
  double primitive(double t) const;  // H(t) for t <= 0
  double bump_value(double t) const;

  GevreyBump bump_;
  std::vector<double> cumulative_;  // H at the panel edges on [-1, 0]
  double scale_ = 1.0;              // 1 / integral of the bump
};

double smooth_step(double t);

// Overlap radius 0 is a hard edge.
struct BellWindow {
  WhitneyInterval interval;
  double left_overlap = 0.0;
  double right_overlap = 0.0;

  double support_lo() const { return interval.x - left_overlap; }
  double support_hi() const { return interval.end() + right_overlap; }
};

// Overlap radius at a shared endpoint is min(delta, delta')/3. A missing
// neighbour gives a hard edge. Throws ValidationError if a neighbour does
// not share the corresponding endpoint.
BellWindow build_bell(const WhitneyInterval& l,
                      const std::optional<WhitneyInterval>& left_neighbor,
                      const std::optional<WhitneyInterval>& right_neighbor);

double bell_value(const BellWindow& bell, const SmoothStep& step, double x);

struct LocalSineAtom {
  std::size_t index = 0;  // position of the interval in the system
  BellWindow bell;
  int k = 0;
  double c = 0.0;  // normalization c_L

  const WhitneyInterval& interval() const { return bell.interval; }
  // pi (k + 1/2) / delta, the nominal frequency.
  double frequency() const;
};

// Local sine system over the Whitney intervals of depth j_max. The two
// outermost ends (at 2^{-j_max-1} and 1 - 2^{-j_max-1}) are hard edges, so
// the finite system is exactly orthonormal on the covered region.
class LocalSineSystem {
 public:
  explicit LocalSineSystem(int j_max, GevreyBump bump = GevreyBump::three_halves);

  int depth() const { return j_max_; }
  const SmoothStep& step() const { return step_; }
  const std::vector<BellWindow>& bells() const { return bells_; }

  // Covered region [2^{-j_max-1}, 1 - 2^{-j_max-1}].
  double covered_lo() const;
  double covered_hi() const;

  // c_L from adaptive quadrature of theta^2 sin^2, cached by bell shape.
  // Requires k >= 0.
  LocalSineAtom atom(std::size_t index, int k) const;
  LocalSineAtom atom(Side side, int j, int k) const;

  // All atoms with j <= max_j and k < k_count, ordered by interval then k.
  std::vector<LocalSineAtom> atoms(int max_j, int k_count) const;

  double eval(const LocalSineAtom& a, double x) const;

  // Points where the atom is not analytic (support ends and bell plateau
  // edges), ascending.
  std::vector<double> break_points(const LocalSineAtom& a) const;

 private:
  int j_max_;
  SmoothStep step_;
  std::vector<BellWindow> bells_;
  // c_L^2 delta_L depends only on k and the overlaps relative to delta_L,
  // and the bells repeat the same few shapes at every depth.
  mutable std::mutex norm_mutex_;
  mutable std::map<std::tuple<double, double, int>, double> norm_cache_;
};

double normalization_constant(const LocalSineSystem& sys, std::size_t index, int k);
// Same constant by adaptive Simpson; an independent check on the above.
double normalization_constant_simpson(const LocalSineSystem& sys, std::size_t index, int k);

// Precomputed quadrature samples of one atom for evaluating
// \int phi(x) e^{-i x xi} dx at any |xi| <= xi_max.
class FourierSampler {
 public:
  // Throws ValidationError if xi_max exceeds 10^4 / delta.
  FourierSampler(const LocalSineSystem& sys, const LocalSineAtom& a, double xi_max);

  std::complex<double> operator()(double xi) const;
  double xi_max() const { return xi_max_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  double xi_max_;
  std::vector<double> nodes_;
  std::vector<double> weighted_;  // weight * phi(node)
};

std::complex<double> phi_hat(const LocalSineSystem& sys, const LocalSineAtom& a, double xi);

// Psi_a(xi) = exp(-a |xi|^{2/3}).
double envelope_psi(double a, double xi);

struct EnvelopeFit {
  double a = 0.0;
  double C = 0.0;
  bool satisfied = false;
};

inline constexpr double kEnvelopeCMax = 100.0;

// Grid of xi values whose scaled distance |delta xi -/+ pi (k+1/2)| reaches
// `reach` past each peak, step `step` in the scaled variable delta xi.
std::vector<double> envelope_grid(const LocalSineAtom& a, double reach = 50.0,
                                  double step = 0.1);

// Candidate exponents a = 0.1, 0.15, ..., 5.
std::vector<double> envelope_exponents();

// Smallest C with |phi^(xi)| <= C sqrt(delta) sum_sigma Psi_a(delta xi - sigma pi(k+1/2))
// on the grid, one entry per candidate exponent.
std::vector<double> envelope_constants(const LocalSineSystem& sys, const LocalSineAtom& a,
                                       std::span<const double> xi_grid);

// Largest candidate a whose C does not exceed 100.
EnvelopeFit envelope_fit(const LocalSineSystem& sys, const LocalSineAtom& a,
                         std::span<const double> xi_grid);

// One (a, C) valid for every atom simultaneously, each on its own
// envelope_grid(atom, reach).
EnvelopeFit uniform_envelope_fit(const LocalSineSystem& sys,
                                 std::span<const LocalSineAtom> atoms, double reach = 50.0);

// max |<phi_i, phi_j> - delta_ij| by adaptive quadrature on the overlaps.
double gram_defect(const LocalSineSystem& sys, std::span<const LocalSineAtom> atoms);

double inner_product(const LocalSineSystem& sys, const LocalSineAtom& a, const LocalSineAtom& b);

// L^2 error over the covered region of the expansion of f in the atoms with
// j <= sys.depth() and k < k_count.
double reconstruction_error(const LocalSineSystem& sys, int k_count,
                            const std::function<double(double)>& f);

std::string atoms_csv(std::span<const LocalSineAtom> atoms);
std::string transform_csv(const LocalSineSystem& sys, const LocalSineAtom& a,
                          std::span<const double> xi_grid);

}  // namespace tflim
