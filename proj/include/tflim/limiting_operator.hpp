#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tflim/domains.hpp"
#include "tflim/kernels.hpp"

namespace tflim {

struct DiscretizeOptions {
  // Largest admissible n_per_axis^d.
  std::size_t size_cap = 5000;
  KernelMode kernel_mode = KernelMode::closed_form;
};

// Symmetrized Nystrom discretization of P_F B_S P_F:
//   matrix(i, j) = sqrt(w_i) K_S(x_i - x_j) sqrt(w_j)
// with tensor Gauss-Legendre nodes x_i on the bounding box of F (nodes
// outside a ball-shaped F are dropped together with their weights).
// A vector v in these coordinates represents the function v_i / sqrt(w_i)
// on the nodes, so the Euclidean norm of v is the L^2(F) norm.
struct DiscretizedOperator {
  Domain f;
  Domain s;
  int n_per_axis = 0;
  Eigen::MatrixXd nodes;    // one row per node, dim() columns
  Eigen::VectorXd weights;  // quadrature weights, units of Lebesgue measure
  Eigen::MatrixXd matrix;

  int size() const { return static_cast<int>(weights.size()); }
  int dim() const { return f.dim(); }
};

DiscretizedOperator discretize(const Domain& f, const Domain& s, int n_per_axis,
                               const DiscretizeOptions& options = {});

// Eigenvalues are stored descending and 1-based in all accessor names below.
struct SpectrumReport {
  Eigen::VectorXd eigenvalues;   // raw (unclipped), descending
  Eigen::MatrixXd eigenvectors;  // column k pairs with eigenvalues(k)
  std::optional<double> bandwidth_product;  // |F| |S|, one-dimensional only
  int n_per_axis = 0;
  bool converged = true;

  int size() const { return static_cast<int>(eigenvalues.size()); }
  double lambda(int k) const { return eigenvalues(k - 1); }
};

// Full dense symmetric eigendecomposition. Throws ConvergenceError if the
// eigensolver fails.
SpectrumReport spectrum(const DiscretizedOperator& op);

// Number of eigenvalues strictly inside (eps, 1 - eps). Requires 0 < eps < 1/2.
int plunge_count(const SpectrumReport& rep, double eps);

// Number of eigenvalues >= 1 - eps.
int near_one_count(const SpectrumReport& rep, double eps);

// Smallest 1-based k with lambda_k < 1/2; empty if no eigenvalue is below 1/2.
std::optional<int> crossing_index(const SpectrumReport& rep);

struct DoubleOrthogonality {
  // max_{j != k} |<Psi_j, Psi_k>_{L^2(F)}| for the L^2(R^d)-normalized
  // bandlimited eigenfunctions, evaluated on an independent finer grid.
  double defect = 0.0;
  // <Psi_k, Psi_k>_{L^2(F)}, expected to reproduce lambda_k.
  Eigen::VectorXd restricted_norms;
  // max_{j,k} |<Psi_j, Psi_k>_{L^2(R^d)} - delta_jk|.
  double global_defect = 0.0;
};

// Reconstructs Psi_k(x) = lambda_k^{-1} \int_F K_S(x - y) u_k(y) dy by Nystrom
// interpolation and measures both orthogonality relations. Requires
// 1 <= top_k <= n and lambda_top_k > 1e-6.
DoubleOrthogonality double_orthogonality(const SpectrumReport& rep,
                                         const DiscretizedOperator& op, int top_k);

double double_orthogonality_defect(const SpectrumReport& rep,
                                   const DiscretizedOperator& op, int top_k);

// Eigenvalues of the frequency-side discretization of B_S P_F B_S: Nystrom on
// S with the Hermitian kernel (2 pi)^{-d} \hat{1_F}(xi - eta). F must be an
// interval or box.
Eigen::VectorXd frequency_side_eigenvalues(const Domain& f, const Domain& s,
                                           int n_per_axis,
                                           const DiscretizeOptions& options = {});

// max_{k <= top_k} |lambda_k(spatial) - lambda_k(frequency)|.
double spectra_identity_defect(const Domain& f, const Domain& s, int n_per_axis,
                               int top_k, const DiscretizeOptions& options = {});

// min over nonzero psi in span(columns) of ||T psi|| / ||psi||, with T the
// discretized operator. `values` holds function values at op's nodes, one
// column per function. The norm of psi is taken from `gram` (the Gram matrix
// of the columns in L^2(R^d)) when given, otherwise from the discrete L^2(F)
// inner product. Throws ValidationError when the Gram condition number
// exceeds 1e8.
double rayleigh_min_over_span(const DiscretizedOperator& op,
                              const Eigen::MatrixXcd& values);
double rayleigh_min_over_span(const DiscretizedOperator& op,
                              const Eigen::MatrixXcd& values,
                              const Eigen::MatrixXcd& gram);

struct Refinement {
  DiscretizedOperator op;
  SpectrumReport report;
  bool converged = false;
  // Largest change of the top_k eigenvalues between the last two levels.
  double last_change = 0.0;
};

// Doubles n_per_axis from 32 until the top_k eigenvalues move by less than
// tol between successive levels or the size cap is hit. A tol below the
// rounding floor (matrix size times machine epsilon times lambda_1) is never
// reported as converged.
Refinement refine_until(const Domain& f, const Domain& s, double tol, int top_k,
                        const DiscretizeOptions& options = {});

}  // namespace tflim
