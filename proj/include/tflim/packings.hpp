#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tflim/domains.hpp"
#include "tflim/limiting_operator.hpp"

namespace tflim {

using ComplexFn = std::function<std::complex<double>(double)>;

// g(x) = |det A|^{1/2} e^{i T(x).xi} theta(T(x)), T(x) = A (x - x0), d <= 2.
// `a` is row-major d x d.
struct WavePacket {
  std::function<double(std::span<const double>)> window;
  std::vector<double> a;
  std::vector<double> x0;
  std::vector<double> xi;

  int dim() const { return static_cast<int>(x0.size()); }
  // Throws ValidationError for a singular A or mismatched dimensions.
  std::complex<double> operator()(std::span<const double> x) const;
};

WavePacket gabor_packet(std::function<double(std::span<const double>)> window,
                        std::vector<double> x0, std::vector<double> xi);
// 2^{-jd/2} theta(2^{-j} x - k): A = 2^{-j} I, x0 = 2^j k, no modulation.
WavePacket wavelet_packet(std::function<double(std::span<const double>)> window, int j,
                          std::vector<double> k);

// L^2-normalized Hermite function h_n by the three-term recurrence. n <= 60.
double hermite_function(int n, double x);

// h_n((x - x0)/w) e^{i x xi0} / sqrt(w).
struct HermiteAtom {
  int n = 0;
  double x0 = 0.0;
  double xi0 = 0.0;
  double w = 1.0;

  std::complex<double> operator()(double x) const;
  // Closed form: sqrt(2 pi w) (-i)^n e^{-i (xi - xi0) x0} h_n(w (xi - xi0)).
  std::complex<double> transform(double xi) const;
};

// Throws ValidationError for n outside [0, 60] or w <= 0.
HermiteAtom hermite_atom(int n, double x0, double xi0, double w);

// A unit-norm function on the line, integrated with a composite
// Gauss-Legendre rule over [breaks.front(), breaks.back()] (taken as its
// essential support) with panels no longer than `panel`.
struct PackingAtom {
  ComplexFn value;
  ComplexFn transform;  // empty when no closed form is known
  std::vector<double> breaks;
  double panel = 0.0;
  // Essential support of the transform, used with `transform`.
  double xi_lo = 0.0;
  double xi_hi = 0.0;
  std::string label;
};

PackingAtom packing_atom(const HermiteAtom& h);

struct PackingFamily {
  std::vector<PackingAtom> atoms;
  Domain f;  // intervals
  Domain s;
  // Per-atom ||psi||^2 off F and (2 pi)^{-1} ||psi^||^2 off S.
  std::vector<double> spatial_tails;
  std::vector<double> frequency_tails;
  double concentration = 0.0;  // sqrt of the summed tails
  double coherence = 0.0;      // max off-diagonal |<psi, psi'>|
  std::size_t untrimmed = 0;   // size before greedy trimming

  std::size_t size() const { return atoms.size(); }
  // Smallest eps for which the family is an eps-packing.
  double epsilon() const { return std::max(concentration, coherence); }
  double atom_defect(std::size_t i) const;
};

// Fills tails, concentration and coherence. F and S must be intervals.
// Atoms without a closed-form transform get their frequency tail from
// ||psi||^2 - <K_S psi, psi> by double quadrature. Throws SizeError when a
// quadrature grid would exceed 200000 nodes.
PackingFamily make_family(std::vector<PackingAtom> atoms, const Domain& f, const Domain& s);

double concentration_defect(const PackingFamily& family);

struct QuadGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Common grid over the union of the atoms' supports.
QuadGrid common_grid(std::span<const PackingAtom> atoms);

// Columns are atom values at the grid nodes.
Eigen::MatrixXcd sample_atoms(std::span<const PackingAtom> atoms, const QuadGrid& grid);

Eigen::MatrixXcd gram_matrix(std::span<const PackingAtom> atoms, const QuadGrid& grid);
Eigen::MatrixXcd gram_matrix(const PackingFamily& family);
// Frobenius norm of I - G.
double gram_frobenius_gap(const Eigen::MatrixXcd& gram);
double gram_frobenius_gap(const PackingFamily& family);

struct FrameBounds {
  double A = 0.0;
  double B = 0.0;
  // Gram condition number above 1e8: the atoms are numerically dependent
  // and A is reported as 0.
  bool rank_deficient = false;
};

// Extreme eigenvalues of the Gram matrix, which are the frame bounds of the
// finite family on its span.
FrameBounds frame_bounds_estimate(std::span<const PackingAtom> atoms, const QuadGrid& grid);

struct HermitePackingOptions {
  // Width w = width_scale * sqrt(|I| / |J|).
  double width_scale = 1.0;
};

// Hermite atoms n = 0..N-1 centred at the centres of I and J,
// N = floor((1 - delta) |I| |J| / 2 pi), then the atom with the largest
// individual tail is dropped while eps >= 1/(2 n). Requires |I| |J| >= 4 pi
// and delta in (0, 1); throws ValidationError if trimming empties the family.
PackingFamily build_hermite_packing(const Domain& i, const Domain& j, double delta,
                                    const HermitePackingOptions& opts = {});

// Normalized restricted eigenfunctions u_1..u_n of the discretized operator,
// as atoms supported on F (Nystrom interpolation between nodes).
std::vector<PackingAtom> eigenvector_atoms(const DiscretizedOperator& op,
                                           const SpectrumReport& rep, int n);

struct Lemma1Report {
  std::size_t n = 0;
  double epsilon = 0.0;
  double coherence = 0.0;
  double bound = 0.0;  // 1 - 5 eps n^{1/2}
  double lambda_n = 0.0;
  double rayleigh = 0.0;
  bool applicable = false;  // eps < 1/(2n)
  bool pass = false;
};

// op must be one-dimensional and built on the family's F and S.
Lemma1Report verify_lemma1(const PackingFamily& family, const DiscretizedOperator& op);
Lemma1Report verify_lemma1(const PackingFamily& family, const DiscretizedOperator& op,
                           const SpectrumReport& rep);

std::string lemma1_json(const Lemma1Report& report);

struct AtomResidual {
  double residual = 0.0;  // ||(Id - P_F B_S P_F) psi||
  double defect = 0.0;    // sqrt(spatial tail + frequency tail)
};

// Residual of each atom under the discretized operator; the part of psi
// outside F is taken from the spatial tail.
std::vector<AtomResidual> atom_residuals(const PackingFamily& family,
                                         const DiscretizedOperator& op);

// min over `trials` random complex coefficient vectors of
// ||sum a psi||^2 - (1 - n coherence) sum |a|^2.
double norm_lower_bound_margin(const PackingFamily& family, int trials, std::uint64_t seed);

}  // namespace tflim
