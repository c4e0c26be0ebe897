#include "tflim/packings.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <random>

#include "json.hpp"
#include "tflim/error.hpp"
#include "tflim/kernels.hpp"
#include "tflim/quadrature.hpp"

namespace tflim {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kOrder = 20;
constexpr std::size_t kGridCap = 200'000;
constexpr std::size_t kDoubleQuadratureCap = 6'000;

double det(const std::vector<double>& a, int d) {
  if (d == 1) return a[0];
  return a[0] * a[3] - a[1] * a[2];
}

QuadratureRule checked_rule(double a, double b, double panel, const std::vector<double>& breaks) {
  if (!(panel > 0.0)) throw ValidationError("packings: quadrature panel must be > 0");
  if ((b - a) / panel * kOrder > static_cast<double>(kGridCap))
    throw SizeError("packings: quadrature grid exceeds 200000 nodes");
  return composite_gauss_legendre(a, b, panel, kOrder, breaks);
}

// \int over [lo, hi] minus [cut_lo, cut_hi] of |f|^2.
double tail_energy(const ComplexFn& f, double lo, double hi, double panel, double cut_lo,
                   double cut_hi) {
  double sum = 0.0;
  auto piece = [&](double a, double b) {
    if (b <= a) return;
    const QuadratureRule rule = checked_rule(a, b, panel, {});
    for (std::size_t q = 0; q < rule.size(); ++q) sum += rule.weights[q] * std::norm(f(rule.nodes[q]));
  };
  piece(lo, std::min(hi, cut_lo));
  piece(std::max(lo, cut_hi), hi);
  return sum;
}

void require_interval(const Domain& d, const char* what) {
  if (d.kind() != DomainKind::interval)
    throw ValidationError(std::string("packings: ") + what + " must be an interval");
}

double length(const Domain& d) { return d.upper()[0] - d.lower()[0]; }

}  // namespace

std::complex<double> WavePacket::operator()(std::span<const double> x) const {
  const int d = dim();
  if (d < 1 || d > 2) throw ValidationError("WavePacket: dimension must be 1 or 2");
  if (static_cast<int>(x.size()) != d || static_cast<int>(a.size()) != d * d ||
      static_cast<int>(xi.size()) != d)
    throw ValidationError("WavePacket: dimension mismatch");
  const double da = det(a, d);
  if (da == 0.0) throw ValidationError("WavePacket: A must be invertible");
  double y[2] = {0.0, 0.0};
  double phase = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) y[i] += a[i * d + j] * (x[j] - x0[j]);
    phase += y[i] * xi[i];
  }
  return std::sqrt(std::abs(da)) * std::polar(1.0, phase) *
         window(std::span<const double>(y, d));
}

WavePacket gabor_packet(std::function<double(std::span<const double>)> window,
                        std::vector<double> x0, std::vector<double> xi) {
  const std::size_t d = x0.size();
  std::vector<double> a(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) a[i * d + i] = 1.0;
  return {std::move(window), std::move(a), std::move(x0), std::move(xi)};
}

WavePacket wavelet_packet(std::function<double(std::span<const double>)> window, int j,
                          std::vector<double> k) {
  const std::size_t d = k.size();
  std::vector<double> a(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) a[i * d + i] = std::ldexp(1.0, -j);
  std::vector<double> x0(d);
  for (std::size_t i = 0; i < d; ++i) x0[i] = std::ldexp(k[i], j);
  return {std::move(window), std::move(a), std::move(x0), std::vector<double>(d, 0.0)};
}

double hermite_function(int n, double x) {
  if (n < 0 || n > 60) throw ValidationError("hermite_function: n must be in [0, 60]");
  double prev = 0.0;
  double cur = std::pow(kPi, -0.25) * std::exp(-0.5 * x * x);
  for (int m = 0; m < n; ++m) {
    const double next = std::sqrt(2.0 / (m + 1)) * x * cur - std::sqrt(double(m) / (m + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::complex<double> HermiteAtom::operator()(double x) const {
  return hermite_function(n, (x - x0) / w) / std::sqrt(w) * std::polar(1.0, x * xi0);
}

std::complex<double> HermiteAtom::transform(double xi) const {
  static const std::complex<double> minus_i_pow[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
  return std::sqrt(2.0 * kPi * w) * minus_i_pow[n % 4] * std::polar(1.0, -(xi - xi0) * x0) *
         hermite_function(n, w * (xi - xi0));
}

HermiteAtom hermite_atom(int n, double x0, double xi0, double w) {
  if (n < 0 || n > 60) throw ValidationError("hermite_atom: n must be in [0, 60]");
  if (!(w > 0.0)) throw ValidationError("hermite_atom: width must be > 0");
  return {n, x0, xi0, w};
}

PackingAtom packing_atom(const HermiteAtom& h) {
  // |h_n(u)| is below 1e-14 past the turning point sqrt(2n+1) plus 8.
  const double reach = std::sqrt(2.0 * h.n + 1.0) + 8.0;
  const double feature = 2.0 / std::sqrt(2.0 * h.n + 2.0);
  PackingAtom a;
  a.value = [h](double x) { return h(x); };
  a.transform = [h](double xi) { return h.transform(xi); };
  a.breaks = {h.x0 - reach * h.w, h.x0 + reach * h.w};
  a.panel = h.w * feature;
  if (h.xi0 != 0.0) a.panel = std::min(a.panel, 2.0 / std::abs(h.xi0));
  a.xi_lo = h.xi0 - reach / h.w;
  a.xi_hi = h.xi0 + reach / h.w;
  a.label = "hermite:" + std::to_string(h.n);
  return a;
}

double PackingFamily::atom_defect(std::size_t i) const {
  return std::sqrt(spatial_tails.at(i) + frequency_tails.at(i));
}

QuadGrid common_grid(std::span<const PackingAtom> atoms) {
  if (atoms.empty()) throw ValidationError("common_grid: no atoms");
  double lo = atoms[0].breaks.front(), hi = atoms[0].breaks.back(), panel = atoms[0].panel;
  std::vector<double> breaks;
  for (const PackingAtom& a : atoms) {
    if (a.breaks.size() < 2) throw ValidationError("common_grid: an atom has no support");
    lo = std::min(lo, a.breaks.front());
    hi = std::max(hi, a.breaks.back());
    panel = std::min(panel, a.panel);
    breaks.insert(breaks.end(), a.breaks.begin(), a.breaks.end());
  }
  QuadratureRule rule = checked_rule(lo, hi, panel, breaks);
  return {std::move(rule.nodes), std::move(rule.weights)};
}

Eigen::MatrixXcd sample_atoms(std::span<const PackingAtom> atoms, const QuadGrid& grid) {
  Eigen::MatrixXcd v(grid.nodes.size(), atoms.size());
  for (std::size_t k = 0; k < atoms.size(); ++k)
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) v(i, k) = atoms[k].value(grid.nodes[i]);
  return v;
}

Eigen::MatrixXcd gram_matrix(std::span<const PackingAtom> atoms, const QuadGrid& grid) {
  const Eigen::MatrixXcd v = sample_atoms(atoms, grid);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(grid.weights.data(), grid.weights.size());
  // G(m, k) = <psi_m, psi_k> = \int psi_m conj(psi_k).
  return (v.adjoint() * w.asDiagonal() * v).transpose();
}

Eigen::MatrixXcd gram_matrix(const PackingFamily& family) {
  return gram_matrix(family.atoms, common_grid(family.atoms));
}

double gram_frobenius_gap(const Eigen::MatrixXcd& gram) {
  return (Eigen::MatrixXcd::Identity(gram.rows(), gram.cols()) - gram).norm();
}

double gram_frobenius_gap(const PackingFamily& family) {
  return gram_frobenius_gap(gram_matrix(family));
}

FrameBounds frame_bounds_estimate(std::span<const PackingAtom> atoms, const QuadGrid& grid) {
  const Eigen::MatrixXcd g = gram_matrix(atoms, grid);
  const Eigen::MatrixXcd h = 0.5 * (g + g.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  FrameBounds fb;
  fb.B = solver.eigenvalues().maxCoeff();
  const double lo = solver.eigenvalues().minCoeff();
  fb.rank_deficient = !(lo > 0.0) || fb.B / lo > 1e8;
  fb.A = fb.rank_deficient ? 0.0 : lo;
  return fb;
}

PackingFamily make_family(std::vector<PackingAtom> atoms, const Domain& f, const Domain& s) {
  require_interval(f, "F");
  require_interval(s, "S");
  PackingFamily fam{.atoms = std::move(atoms), .f = f, .s = s, .spatial_tails = {},
                    .frequency_tails = {}};
  const double f0 = f.lower()[0], f1 = f.upper()[0];
  const double s0 = s.lower()[0], s1 = s.upper()[0];
  const KernelSpec kernel(s);
  for (const PackingAtom& a : fam.atoms) {
    const double lo = a.breaks.front(), hi = a.breaks.back();
    fam.spatial_tails.push_back(tail_energy(a.value, lo, hi, a.panel, f0, f1));
    if (a.transform) {
      const double xi_panel = std::min(2.0 / (hi - lo), (a.xi_hi - a.xi_lo) / 64.0);
      fam.frequency_tails.push_back(
          tail_energy(a.transform, a.xi_lo, a.xi_hi, xi_panel, s0, s1) / (2.0 * kPi));
      continue;
    }
    // (2 pi)^{-1} ||psi^||^2 on S = \int\int psi(x) K_S(x - y) conj(psi(y)).
    const QuadratureRule rule = checked_rule(lo, hi, a.panel, a.breaks);
    if (rule.size() > kDoubleQuadratureCap)
      throw SizeError("packings: frequency tail quadrature exceeds its node cap");
    Eigen::VectorXcd v(rule.size());
    for (std::size_t i = 0; i < rule.size(); ++i) v(i) = rule.weights[i] * a.value(rule.nodes[i]);
    double norm = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) norm += std::norm(v(i)) / rule.weights[i];
    std::complex<double> inside = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      std::complex<double> row = 0.0;
      for (std::size_t j = 0; j < rule.size(); ++j) {
        const double t = rule.nodes[i] - rule.nodes[j];
        row += kernel_value(kernel, std::span<const double>(&t, 1)) * v(j);
      }
      inside += std::conj(v(i)) * row;
    }
    fam.frequency_tails.push_back(std::max(0.0, norm - inside.real()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < fam.size(); ++i) total += fam.spatial_tails[i] + fam.frequency_tails[i];
  fam.concentration = std::sqrt(total);
  if (fam.size() > 1) {
    const Eigen::MatrixXcd g = gram_matrix(fam);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        if (i != j) fam.coherence = std::max(fam.coherence, std::abs(g(i, j)));
  }
  fam.untrimmed = fam.size();
  return fam;
}

double concentration_defect(const PackingFamily& family) { return family.concentration; }

PackingFamily build_hermite_packing(const Domain& i, const Domain& j, double delta,
                                    const HermitePackingOptions& opts) {
  require_interval(i, "I");
  require_interval(j, "J");
  const double c = length(i) * length(j);
  if (!(c >= 4.0 * kPi)) throw ValidationError("build_hermite_packing: |I| |J| must be >= 4 pi");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("build_hermite_packing: delta must be in (0, 1)");
  if (!(opts.width_scale > 0.0)) throw ValidationError("build_hermite_packing: width scale must be > 0");
  const double w = opts.width_scale * std::sqrt(length(i) / length(j));
  const double x0 = 0.5 * (i.lower()[0] + i.upper()[0]);
  const double xi0 = 0.5 * (j.lower()[0] + j.upper()[0]);
  // The tolerance keeps exact quotients such as 5 from rounding down to 4.
  const int count = static_cast<int>(std::floor((1.0 - delta) * c / (2.0 * kPi) + 1e-9));
  if (count > 61) throw ValidationError("build_hermite_packing: more than 61 atoms requested");
  std::vector<PackingAtom> atoms;
  for (int n = 0; n < count; ++n) atoms.push_back(packing_atom(hermite_atom(n, x0, xi0, w)));
  PackingFamily fam = make_family(std::move(atoms), i, j);
  const std::size_t untrimmed = fam.size();
  while (fam.size() > 0 && fam.epsilon() >= 1.0 / (2.0 * fam.size())) {
    std::size_t worst = 0;
    for (std::size_t k = 1; k < fam.size(); ++k)
      if (fam.atom_defect(k) > fam.atom_defect(worst)) worst = k;
    fam.atoms.erase(fam.atoms.begin() + worst);
    fam = make_family(std::move(fam.atoms), i, j);
  }
  if (fam.size() == 0) throw ValidationError("build_hermite_packing: trimming left no atoms");
  fam.untrimmed = untrimmed;
  return fam;
}

std::vector<PackingAtom> eigenvector_atoms(const DiscretizedOperator& op,
                                           const SpectrumReport& rep, int n) {
  if (op.dim() != 1) throw ValidationError("eigenvector_atoms: operator must be one-dimensional");
  if (n < 1 || n > rep.size()) throw ValidationError("eigenvector_atoms: n out of range");
  const double f0 = op.f.lower()[0], f1 = op.f.upper()[0];
  auto kernel = std::make_shared<const KernelSpec>(op.s);
  const double band = std::max(op.s.extent(0), 1.0);
  std::vector<PackingAtom> out;
  for (int k = 0; k < n; ++k) {
    const double lambda = rep.eigenvalues(k);
    if (!(lambda > 1e-6)) throw ValidationError("eigenvector_atoms: eigenvalue too small to interpolate");
    // u(x) = lambda^{-1} \int_F K_S(x - y) u(y) dy with u(y_j) = V(j, k) / sqrt(w_j).
    auto coef = std::make_shared<Eigen::VectorXd>(
        op.weights.cwiseSqrt().cwiseProduct(rep.eigenvectors.col(k)) / lambda);
    auto nodes = std::make_shared<Eigen::VectorXd>(op.nodes.col(0));
    PackingAtom a;
    a.value = [kernel, coef, nodes, f0, f1](double x) -> std::complex<double> {
      if (x < f0 || x > f1) return 0.0;
      double s = 0.0;
      for (Eigen::Index j = 0; j < nodes->size(); ++j) {
        const double t = x - (*nodes)(j);
        s += kernel_value(*kernel, std::span<const double>(&t, 1)) * (*coef)(j);
      }
      return s;
    };
    a.breaks = {f0, f1};
    a.panel = std::min((f1 - f0) / 16.0, 2.0 / band);
    a.label = "eigenvector:" + std::to_string(k + 1);
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

Eigen::MatrixXcd values_at_nodes(const PackingFamily& family, const DiscretizedOperator& op) {
  Eigen::MatrixXcd v(op.size(), family.size());
  for (std::size_t k = 0; k < family.size(); ++k)
    for (int i = 0; i < op.size(); ++i) v(i, k) = family.atoms[k].value(op.nodes(i, 0));
  return v;
}

void check_operator(const PackingFamily& family, const DiscretizedOperator& op) {
  if (op.dim() != 1) throw ValidationError("packings: operator must be one-dimensional");
  if (op.f.to_literal() != family.f.to_literal() || op.s.to_literal() != family.s.to_literal())
    throw ValidationError("packings: operator and family use different F or S");
}

}  // namespace

Lemma1Report verify_lemma1(const PackingFamily& family, const DiscretizedOperator& op) {
  return verify_lemma1(family, op, spectrum(op));
}

Lemma1Report verify_lemma1(const PackingFamily& family, const DiscretizedOperator& op,
                           const SpectrumReport& rep) {
  check_operator(family, op);
  if (family.size() == 0) throw ValidationError("verify_lemma1: empty family");
  Lemma1Report r;
  r.n = family.size();
  r.epsilon = family.epsilon();
  r.coherence = family.coherence;
  r.bound = 1.0 - 5.0 * r.epsilon * std::sqrt(double(r.n));
  if (static_cast<int>(r.n) > rep.size()) throw ValidationError("verify_lemma1: family larger than the discretization");
  r.lambda_n = rep.lambda(static_cast<int>(r.n));
  r.applicable = r.epsilon < 1.0 / (2.0 * r.n);
  // The span routine takes the Gram matrix as V^* V, the transpose of ours.
  r.rayleigh = rayleigh_min_over_span(op, values_at_nodes(family, op),
                                      gram_matrix(family).transpose());
  r.pass = r.applicable && r.lambda_n > r.bound && r.rayleigh >= r.bound;
  return r;
}

std::string lemma1_json(const Lemma1Report& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["epsilon"] = r.epsilon;
  j["coherence"] = r.coherence;
  j["bound"] = r.bound;
  j["lambda_n"] = r.lambda_n;
  j["rayleigh"] = r.rayleigh;
  j["applicable"] = r.applicable;
  j["pass"] = r.pass;
  return j.dump();
}

std::vector<AtomResidual> atom_residuals(const PackingFamily& family,
                                         const DiscretizedOperator& op) {
  check_operator(family, op);
  const Eigen::VectorXd sw = op.weights.cwiseSqrt();
  const Eigen::MatrixXcd v = sw.asDiagonal() * values_at_nodes(family, op);
  const Eigen::MatrixXcd diff = v - op.matrix.cast<std::complex<double>>() * v;
  std::vector<AtomResidual> out;
  for (std::size_t k = 0; k < family.size(); ++k) {
    const double inside = diff.col(k).squaredNorm();
    out.push_back({std::sqrt(family.spatial_tails[k] + inside), family.atom_defect(k)});
  }
  return out;
}

double norm_lower_bound_margin(const PackingFamily& family, int trials, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("norm_lower_bound_margin: trials must be >= 1");
  const Eigen::MatrixXcd g = gram_matrix(family);
  const double n = static_cast<double>(family.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double worst = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXcd a(family.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = {normal(rng), normal(rng)};
    // ||sum a_k psi_k||^2 = sum_{m,k} a_m conj(a_k) <psi_m, psi_k>.
    const double lhs = (a.transpose() * g * a.conjugate())(0).real();
    worst = std::min(worst, lhs - (1.0 - n * family.coherence) * a.squaredNorm());
  }
  return worst;
}

}  // namespace tflim
