#include "tflim/limiting_operator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "tflim/error.hpp"
#include "tflim/quadrature.hpp"

namespace tflim {

namespace {

struct NodeSet {
  Eigen::MatrixXd nodes;
  Eigen::VectorXd weights;
};

std::size_t tensor_count(int n, int d) {
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(n);
  return total;
}

// Tensor Gauss-Legendre nodes on the bounding box of `region`, masked to the
// region for balls.
NodeSet tensor_nodes(const Domain& region, int n) {
  const int d = region.dim();
  std::vector<QuadratureRule> axes;
  for (int i = 0; i < d; ++i)
    axes.push_back(gauss_legendre(n, region.lower()[i], region.upper()[i]));
  const std::size_t total = tensor_count(n, d);
  std::vector<double> flat;
  std::vector<double> w;
  flat.reserve(total * d);
  w.reserve(total);
  std::vector<double> x(d);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    double weight = 1.0;
    // Last axis varies fastest.
    for (int i = d - 1; i >= 0; --i) {
      const std::size_t a = rem % n;
      rem /= n;
      x[i] = axes[i].nodes[a];
      weight *= axes[i].weights[a];
    }
    if (region.kind() == DomainKind::ball && !region.contains(x)) continue;
    flat.insert(flat.end(), x.begin(), x.end());
    w.push_back(weight);
  }
  NodeSet set;
  const Eigen::Index m = static_cast<Eigen::Index>(w.size());
  set.nodes.resize(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) set.nodes(i, k) = flat[i * d + k];
  set.weights = Eigen::Map<Eigen::VectorXd>(w.data(), m);
  return set;
}

void check_size(int n, int d, const DiscretizeOptions& options) {
  if (n < 8) throw ValidationError("n_per_axis must be >= 8");
  const std::size_t total = tensor_count(n, d);
  if (total > options.size_cap)
    throw SizeError("discretization size " + std::to_string(total) +
                    " exceeds the cap " + std::to_string(options.size_cap));
}

}  // namespace

DiscretizedOperator discretize(const Domain& f, const Domain& s, int n_per_axis,
                               const DiscretizeOptions& options) {
  if (f.kind() == DomainKind::generic)
    throw ValidationError("discretize: generic spatial domains are not supported");
  if (f.dim() != s.dim()) throw ValidationError("discretize: F and S dimensions differ");
  check_size(n_per_axis, f.dim(), options);
  const KernelSpec spec(s, options.kernel_mode);

  NodeSet set = tensor_nodes(f, n_per_axis);
  const Eigen::Index n = set.weights.size();
  const int d = f.dim();
  DiscretizedOperator op{f, s, n_per_axis, std::move(set.nodes), std::move(set.weights),
                         Eigen::MatrixXd(n, n)};
  const Eigen::VectorXd sqrt_w = op.weights.cwiseSqrt();
  std::vector<double> t(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    op.matrix(i, i) = op.weights(i) * spec.value_at_origin();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      for (int k = 0; k < d; ++k) t[k] = op.nodes(i, k) - op.nodes(j, k);
      const double v = sqrt_w(i) * kernel_value(spec, t) * sqrt_w(j);
      op.matrix(i, j) = v;
      op.matrix(j, i) = v;
    }
  }
  return op;
}

SpectrumReport spectrum(const DiscretizedOperator& op) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.matrix);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("eigensolver did not converge (n = " + std::to_string(op.size()) +
                           ", Frobenius norm = " + std::to_string(op.matrix.norm()) + ")");
  }
  SpectrumReport rep;
  rep.eigenvalues = solver.eigenvalues().reverse();
  rep.eigenvectors = solver.eigenvectors().rowwise().reverse();
  rep.n_per_axis = op.n_per_axis;
  if (op.dim() == 1) rep.bandwidth_product = op.f.measure() * op.s.measure();
  return rep;
}

int plunge_count(const SpectrumReport& rep, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw ValidationError("plunge_count: eps must lie in (0, 1/2)");
  int count = 0;
  for (Eigen::Index k = 0; k < rep.eigenvalues.size(); ++k) {
    const double l = rep.eigenvalues(k);
    if (l > eps && l < 1.0 - eps) ++count;
  }
  return count;
}

int near_one_count(const SpectrumReport& rep, double eps) {
  int count = 0;
  for (Eigen::Index k = 0; k < rep.eigenvalues.size(); ++k)
    if (rep.eigenvalues(k) >= 1.0 - eps) ++count;
  return count;
}

std::optional<int> crossing_index(const SpectrumReport& rep) {
  for (Eigen::Index k = 0; k < rep.eigenvalues.size(); ++k)
    if (rep.eigenvalues(k) < 0.5) return static_cast<int>(k) + 1;
  return std::nullopt;
}

DoubleOrthogonality double_orthogonality(const SpectrumReport& rep,
                                         const DiscretizedOperator& op, int top_k) {
  if (top_k < 1 || top_k > rep.size())
    throw ValidationError("double_orthogonality: top_k out of range");
  if (!(rep.lambda(top_k) > 1e-6))
    throw ValidationError("double_orthogonality: top_k reaches numerically null eigenvalues");
  const KernelSpec spec(op.s, KernelMode::closed_form);
  const int d = op.dim();
  const Eigen::VectorXd sqrt_w = op.weights.cwiseSqrt();
  const Eigen::MatrixXd v = rep.eigenvectors.leftCols(top_k);
  const Eigen::VectorXd lambda = rep.eigenvalues.head(top_k);

  // Independent grid: about twice as many nodes per axis.
  const NodeSet fine = tensor_nodes(op.f, 2 * op.n_per_axis + 1);
  const Eigen::Index m = fine.weights.size();
  Eigen::MatrixXd kernel(m, op.size());
  std::vector<double> t(d);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index i = 0; i < op.size(); ++i) {
      for (int k = 0; k < d; ++k) t[k] = fine.nodes(a, k) - op.nodes(i, k);
      kernel(a, i) = kernel_value(spec, t) * sqrt_w(i);
    }
  // Psi_k = lambda_k^{-1} sum_i sqrt(w_i) K(. - x_i) v_ik has L^2(R^d) norm
  // lambda_k^{-1/2}; rescale by sqrt(lambda_k) to make it unit.
  Eigen::MatrixXd psi = kernel * v;
  for (int k = 0; k < top_k; ++k) psi.col(k) /= std::sqrt(lambda(k));
  const Eigen::MatrixXd gram_f = psi.transpose() * fine.weights.asDiagonal() * psi;

  DoubleOrthogonality out;
  out.restricted_norms = gram_f.diagonal();
  for (int j = 0; j < top_k; ++j)
    for (int k = 0; k < top_k; ++k)
      if (j != k) out.defect = std::max(out.defect, std::abs(gram_f(j, k)));

  // <Psi_j, Psi_k>_{R^d} = (lambda_j lambda_k)^{-1/2} v_j^T M v_k.
  const Eigen::MatrixXd gram_r = v.transpose() * op.matrix * v;
  for (int j = 0; j < top_k; ++j)
    for (int k = 0; k < top_k; ++k) {
      const double g = gram_r(j, k) / std::sqrt(lambda(j) * lambda(k));
      out.global_defect = std::max(out.global_defect, std::abs(g - (j == k ? 1.0 : 0.0)));
    }
  return out;
}

double double_orthogonality_defect(const SpectrumReport& rep,
                                   const DiscretizedOperator& op, int top_k) {
  return double_orthogonality(rep, op, top_k).defect;
}

Eigen::VectorXd frequency_side_eigenvalues(const Domain& f, const Domain& s,
                                           int n_per_axis,
                                           const DiscretizeOptions& options) {
  if (f.kind() != DomainKind::interval && f.kind() != DomainKind::box)
    throw ValidationError("frequency-side discretization needs an interval or box F");
  if (s.kind() == DomainKind::generic)
    throw ValidationError("frequency-side discretization needs an interval, box or ball S");
  if (f.dim() != s.dim()) throw ValidationError("F and S dimensions differ");
  check_size(n_per_axis, s.dim(), options);
  const int d = s.dim();
  const NodeSet set = tensor_nodes(s, n_per_axis);
  const Eigen::Index n = set.weights.size();
  const double scale = 1.0 / std::pow(2.0 * std::numbers::pi, d);
  const Eigen::VectorXd sqrt_w = set.weights.cwiseSqrt();
  Eigen::MatrixXcd h(n, n);
  std::vector<double> u(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      for (int k = 0; k < d; ++k) u[k] = set.nodes(i, k) - set.nodes(j, k);
      const std::complex<double> v = sqrt_w(i) * scale * indicator_transform(f, u) * sqrt_w(j);
      h(i, j) = v;
      h(j, i) = std::conj(v);
    }
    h(i, i) = h(i, i).real();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("frequency-side eigensolver did not converge");
  return solver.eigenvalues().reverse();
}

double spectra_identity_defect(const Domain& f, const Domain& s, int n_per_axis,
                               int top_k, const DiscretizeOptions& options) {
  if (f.kind() == DomainKind::generic)
    throw ValidationError("spectra_identity_defect: generic F has no closed-form transform");
  const SpectrumReport spatial = spectrum(discretize(f, s, n_per_axis, options));
  const Eigen::VectorXd freq = frequency_side_eigenvalues(f, s, n_per_axis, options);
  const int k_max = std::min<int>({top_k, spatial.size(), static_cast<int>(freq.size())});
  double defect = 0.0;
  for (int k = 0; k < k_max; ++k)
    defect = std::max(defect, std::abs(spatial.eigenvalues(k) - freq(k)));
  return defect;
}

double rayleigh_min_over_span(const DiscretizedOperator& op,
                              const Eigen::MatrixXcd& values,
                              const Eigen::MatrixXcd& gram) {
  if (values.rows() != op.size())
    throw ValidationError("rayleigh_min_over_span: values must have one row per node");
  if (gram.rows() != values.cols() || gram.cols() != values.cols())
    throw ValidationError("rayleigh_min_over_span: Gram matrix has the wrong shape");
  if (values.cols() == 0) throw ValidationError("rayleigh_min_over_span: empty span");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> g_solver(gram);
  const Eigen::VectorXd g_eval = g_solver.eigenvalues();
  const double g_max = g_eval.maxCoeff();
  const double g_min = g_eval.minCoeff();
  if (!(g_min > 0.0) || g_max / g_min > 1e8)
    throw ValidationError("rayleigh_min_over_span: span is rank deficient (Gram condition > 1e8)");
  // Whitening: psi = V G^{-1/2} b has ||psi|| = ||b||.
  const Eigen::MatrixXcd inv_sqrt = g_solver.eigenvectors() *
                                    g_eval.cwiseSqrt().cwiseInverse().asDiagonal() *
                                    g_solver.eigenvectors().adjoint();
  const Eigen::MatrixXcd v = op.weights.cwiseSqrt().asDiagonal() * values;
  const Eigen::MatrixXcd compressed = op.matrix.cast<std::complex<double>>() * v * inv_sqrt;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(compressed);
  return svd.singularValues().minCoeff();
}

double rayleigh_min_over_span(const DiscretizedOperator& op,
                              const Eigen::MatrixXcd& values) {
  const Eigen::MatrixXcd v = op.weights.cwiseSqrt().asDiagonal() * values;
  return rayleigh_min_over_span(op, values, v.adjoint() * v);
}

Refinement refine_until(const Domain& f, const Domain& s, double tol, int top_k,
                        const DiscretizeOptions& options) {
  if (!(tol > 0.0)) throw ValidationError("refine_until: tol must be > 0");
  if (top_k < 1) throw ValidationError("refine_until: top_k must be >= 1");
  const int d = f.dim();
  int n = 32;
  if (tensor_count(n, d) > options.size_cap)
    throw SizeError("refine_until: the first level already exceeds the size cap");

  DiscretizedOperator first = discretize(f, s, n, options);
  SpectrumReport first_report = spectrum(first);
  Refinement out{std::move(first), std::move(first_report)};
  if (out.report.eigenvalues.cwiseAbs().maxCoeff() == 0.0) {
    out.converged = true;
    return out;
  }
  while (true) {
    const int next = 2 * n;
    if (tensor_count(next, d) > options.size_cap) break;
    DiscretizedOperator op = discretize(f, s, next, options);
    SpectrumReport rep = spectrum(op);
    const int k = std::min({top_k, rep.size(), out.report.size()});
    out.last_change =
        (rep.eigenvalues.head(k) - out.report.eigenvalues.head(k)).cwiseAbs().maxCoeff();
    out.op = std::move(op);
    out.report = std::move(rep);
    n = next;
    // Eigenvalue changes below the eigensolver's rounding floor carry no
    // information, so a tolerance under that floor can never be certified.
    const double floor = out.op.size() * std::numeric_limits<double>::epsilon() *
                         out.report.eigenvalues.cwiseAbs().maxCoeff();
    if (out.last_change < tol && tol >= floor) {
      out.converged = true;
      break;
    }
  }
  out.report.converged = out.converged;
  return out;
}

}  // namespace tflim
