#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "json.hpp"
#include "tflim/error.hpp"
#include "tflim/packings.hpp"
#include "tflim/quadrature.hpp"

using namespace tflim;
using std::numbers::pi;

namespace {

double gaussian_window(std::span<const double> y) {
  double r2 = 0.0;
  for (double v : y) r2 += v * v;
  return std::pow(pi, -0.25 * y.size()) * std::exp(-0.5 * r2);
}

// \int psi(x) e^{-i x xi} dx by adaptive quadrature over the atom's support.
std::complex<double> numeric_transform(const HermiteAtom& h, double xi) {
  const PackingAtom a = packing_atom(h);
  auto re = [&](double x) { return (h(x) * std::polar(1.0, -x * xi)).real(); };
  auto im = [&](double x) { return (h(x) * std::polar(1.0, -x * xi)).imag(); };
  const double lo = a.breaks.front(), hi = a.breaks.back();
  return {integrate_adaptive(re, lo, hi, 1e-13, 1e-14).value,
          integrate_adaptive(im, lo, hi, 1e-13, 1e-14).value};
}

PackingFamily gaussian_family(double f_half, double s_half) {
  return make_family({packing_atom(hermite_atom(0, 0.0, 0.0, 1.0))},
                     Domain::interval(-f_half, f_half), Domain::interval(-s_half, s_half));
}

}  // namespace

TEST_CASE("hermite functions") {
  CHECK(hermite_function(0, 0.0) == doctest::Approx(std::pow(pi, -0.25)).epsilon(1e-15));
  CHECK(hermite_function(0, 1.3) == doctest::Approx(std::pow(pi, -0.25) * std::exp(-0.845)));
  // h_1 = sqrt(2) x h_0, h_2 = (2x^2 - 1) h_0 / sqrt(2).
  for (double x : {-2.0, 0.3, 1.7}) {
    CHECK(hermite_function(1, x) == doctest::Approx(std::sqrt(2.0) * x * hermite_function(0, x)));
    CHECK(hermite_function(2, x) ==
          doctest::Approx((2 * x * x - 1) * hermite_function(0, x) / std::sqrt(2.0)));
  }
  CHECK_THROWS_AS(hermite_function(61, 0.0), ValidationError);
  CHECK_THROWS_AS(hermite_atom(61, 0.0, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(hermite_atom(-1, 0.0, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(hermite_atom(0, 0.0, 0.0, 0.0), ValidationError);
}

TEST_CASE("hermite atoms: norms and orthogonality") {
  std::vector<PackingAtom> atoms;
  for (int n : {0, 1, 5, 20, 60}) atoms.push_back(packing_atom(hermite_atom(n, 0.4, 0.0, 0.7)));
  const Eigen::MatrixXcd g = gram_matrix(atoms, common_grid(atoms));
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    CHECK(std::abs(g(i, i) - 1.0) < 1e-12);
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      if (i != j) CHECK(std::abs(g(i, j)) < 1e-12);
  }
  // Modulation keeps the norm.
  const std::vector<PackingAtom> one = {packing_atom(hermite_atom(3, -1.0, 25.0, 0.3))};
  CHECK(std::abs(gram_matrix(one, common_grid(one))(0, 0) - 1.0) < 1e-12);
}

TEST_CASE("hermite transform") {
  for (int n : {0, 1, 2, 7}) {
    const HermiteAtom h = hermite_atom(n, 0.0, 0.0, 1.0);
    for (double xi = -6.0; xi <= 6.0; xi += 0.75) {
      CHECK(std::abs(std::abs(h.transform(xi)) - std::sqrt(2.0 * pi) * std::abs(hermite_function(n, xi))) < 1e-12);
      CHECK(std::abs(numeric_transform(h, xi) - h.transform(xi)) < 1e-8);
    }
  }
  const HermiteAtom shifted = hermite_atom(3, 0.7, -4.0, 0.4);
  for (double xi : {-12.0, -4.0, 0.0, 3.5})
    CHECK(std::abs(numeric_transform(shifted, xi) - shifted.transform(xi)) < 1e-8);
}

TEST_CASE("frame bounds") {
  const std::vector<PackingAtom> pair = {packing_atom(hermite_atom(0, 0.0, 0.0, 1.0)),
                                         packing_atom(hermite_atom(1, 0.0, 0.0, 1.0))};
  const FrameBounds ortho = frame_bounds_estimate(pair, common_grid(pair));
  CHECK(std::abs(ortho.A - 1.0) < 1e-8);
  CHECK(std::abs(ortho.B - 1.0) < 1e-8);
  CHECK_FALSE(ortho.rank_deficient);

  const std::vector<PackingAtom> twice = {pair[0], pair[0]};
  const FrameBounds dup = frame_bounds_estimate(twice, common_grid(twice));
  CHECK(dup.rank_deficient);
  CHECK(dup.A == 0.0);
  CHECK(std::abs(dup.B - 2.0) < 1e-8);

  // Gaussians on the lattice {0, 1} x {0, 2}.
  const std::vector<PackingAtom> gabor = {packing_atom(hermite_atom(0, 0.0, 0.0, 1.0)),
                                          packing_atom(hermite_atom(0, 1.0, 0.0, 1.0)),
                                          packing_atom(hermite_atom(0, 0.0, 2.0, 1.0))};
  const FrameBounds fb = frame_bounds_estimate(gabor, common_grid(gabor));
  CHECK(fb.A <= fb.B);
  CHECK(fb.A > 0.0);
  CHECK(fb.B <= 3.0);
  CHECK_FALSE(fb.rank_deficient);
}

TEST_CASE("concentration defect") {
  // Both tails of a unit Gaussian beyond 3 are erfc(3).
  const PackingFamily g3 = gaussian_family(3.0, 3.0);
  CHECK(g3.spatial_tails[0] == doctest::Approx(std::erfc(3.0)).epsilon(1e-10));
  CHECK(g3.frequency_tails[0] == doctest::Approx(std::erfc(3.0)).epsilon(1e-10));
  CHECK(concentration_defect(g3) > 0.0);
  CHECK(concentration_defect(g3) < 0.01);
  CHECK(concentration_defect(g3) == doctest::Approx(std::sqrt(2.0 * std::erfc(3.0))).epsilon(1e-10));

  // Essentially supported in both F and S.
  CHECK(concentration_defect(gaussian_family(12.0, 12.0)) <= 1e-6);

  double prev = 1.0;
  for (double t = 0.5; t <= 6.0; t += 0.5) {
    const double tail = gaussian_family(t, 100.0).spatial_tails[0];
    CHECK(tail < prev);
    prev = tail;
  }

  CHECK_THROWS_AS(make_family({packing_atom(hermite_atom(0, 0.0, 0.0, 1.0))},
                              Domain::ball({0.0}, 1.0), Domain::interval(-1.0, 1.0)),
                  ValidationError);
}

TEST_CASE("gram gap") {
  CHECK(gram_frobenius_gap(Eigen::MatrixXcd::Identity(4, 4)) == 0.0);
  const int n = 5;
  const double e = 0.01;
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Constant(n, n, e);
  g.diagonal().setOnes();
  CHECK(gram_frobenius_gap(g) == doctest::Approx(e * std::sqrt(double(n * n - n))));
}

TEST_CASE("hermite packing") {
  const Domain i = Domain::interval(0.0, 1.0), j = Domain::interval(-10.0 * pi, 10.0 * pi);
  const PackingFamily fam = build_hermite_packing(i, j, 0.5);
  CHECK(fam.untrimmed == 5);
  CHECK(fam.size() == 5);
  CHECK(fam.epsilon() < 1.0 / (2.0 * 5));
  CHECK(fam.coherence <= 1e-8);
  CHECK(gram_frobenius_gap(fam) < 0.5);
  // Symmetric width balances the two tails.
  for (std::size_t k = 0; k < fam.size(); ++k)
    CHECK(fam.spatial_tails[k] == doctest::Approx(fam.frequency_tails[k]).epsilon(1e-6));

  // Trimming keeps the hypothesis of the eigenvalue bound.
  const PackingFamily tight = build_hermite_packing(i, Domain::interval(-2.5 * pi, 2.5 * pi), 0.05);
  CHECK(tight.untrimmed == 2);
  CHECK(tight.size() <= tight.untrimmed);
  CHECK(tight.epsilon() < 1.0 / (2.0 * tight.size()));

  CHECK_THROWS_AS(build_hermite_packing(i, Domain::interval(-1.0, 1.0), 0.5), ValidationError);
  CHECK_THROWS_AS(build_hermite_packing(i, j, 1.0), ValidationError);
  CHECK_THROWS_AS(build_hermite_packing(i, j, 0.0), ValidationError);
}

TEST_CASE("eigenvalue lower bound for packings") {
  const Domain i = Domain::interval(0.0, 1.0), j = Domain::interval(-10.0 * pi, 10.0 * pi);
  const DiscretizedOperator op = discretize(i, j, 300);
  const SpectrumReport rep = spectrum(op);

  SUBCASE("hermite packing") {
    const PackingFamily fam = build_hermite_packing(i, j, 0.5);
    const Lemma1Report r = verify_lemma1(fam, op, rep);
    CHECK(r.n == 5);
    CHECK(r.applicable);
    CHECK(r.pass);
    CHECK(r.lambda_n > r.bound);
    CHECK(r.rayleigh >= r.bound);
    // The Rayleigh bound is a max-min lower bound.
    CHECK(r.rayleigh <= r.lambda_n + 1e-10);

    const auto json = nlohmann::json::parse(lemma1_json(r));
    for (const char* key : {"n", "epsilon", "coherence", "bound", "lambda_n", "rayleigh", "pass"})
      CHECK(json.contains(key));
    CHECK(json["pass"].get<bool>());
    CHECK(json["n"].get<int>() == 5);
  }

  SUBCASE("top eigenvectors") {
    const PackingFamily fam = make_family(eigenvector_atoms(op, rep, 5), i, j);
    CHECK(fam.coherence < 1e-9);
    for (int k = 0; k < 5; ++k) {
      CHECK(fam.spatial_tails[k] == 0.0);
      CHECK(std::abs(fam.frequency_tails[k] - (1.0 - rep.lambda(k + 1))) < 1e-9);
    }
    const Lemma1Report r = verify_lemma1(fam, op, rep);
    CHECK(r.pass);
    CHECK(std::abs(r.lambda_n - r.rayleigh) < 1e-8);
  }

  SUBCASE("hypothesis gate") {
    PackingFamily fam = build_hermite_packing(i, j, 0.5);
    fam.concentration = 0.2;
    const Lemma1Report r = verify_lemma1(fam, op, rep);
    CHECK_FALSE(r.applicable);
    CHECK_FALSE(r.pass);
  }

  SUBCASE("operator must match") {
    const PackingFamily fam = build_hermite_packing(i, Domain::interval(-12.0 * pi, 12.0 * pi), 0.5);
    CHECK_THROWS_AS(verify_lemma1(fam, op, rep), ValidationError);
  }
}

TEST_CASE("proof mechanics") {
  const Domain i = Domain::interval(0.0, 1.0), j = Domain::interval(-10.0 * pi, 10.0 * pi);
  const DiscretizedOperator op = discretize(i, j, 300);
  const PackingFamily fam = build_hermite_packing(i, j, 0.5);
  for (const AtomResidual& a : atom_residuals(fam, op)) {
    CHECK(a.residual > 0.0);
    CHECK(a.residual <= 3.0 * a.defect + 1e-6);
  }
  CHECK(norm_lower_bound_margin(fam, 100, 11) >= -1e-6);

  // A family with visible overlaps: shifted Gaussians.
  const PackingFamily shifted = make_family({packing_atom(hermite_atom(0, 0.4, 0.0, 0.15)),
                                             packing_atom(hermite_atom(0, 0.6, 0.0, 0.15))},
                                            i, j);
  CHECK(shifted.coherence > 0.1);
  CHECK(norm_lower_bound_margin(shifted, 100, 3) >= -1e-6);
}

TEST_CASE("wave packets") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);

  // A = I is a Gabor atom e^{i (x - x0).xi} theta(x - x0).
  for (int d : {1, 2}) {
    std::vector<double> x0(d), xi(d);
    for (int i = 0; i < d; ++i) {
      x0[i] = u(rng);
      xi[i] = 3.0 * u(rng);
    }
    const WavePacket g = gabor_packet(gaussian_window, x0, xi);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> x(d), y(d);
      double phase = 0.0;
      for (int i = 0; i < d; ++i) {
        x[i] = 2.0 * u(rng);
        y[i] = x[i] - x0[i];
        phase += y[i] * xi[i];
      }
      const std::complex<double> expect = std::polar(1.0, phase) * gaussian_window(y);
      CHECK(std::abs(g(x) - expect) < 1e-12);
    }
  }

  // A = 2^{-j} I, no modulation: 2^{-jd/2} theta(2^{-j} x - k).
  for (int d : {1, 2}) {
    for (int j : {-2, 0, 3}) {
      std::vector<double> k(d);
      for (int i = 0; i < d; ++i) k[i] = std::round(u(rng));
      const WavePacket w = wavelet_packet(gaussian_window, j, k);
      for (int t = 0; t < 20; ++t) {
        std::vector<double> x(d), y(d);
        for (int i = 0; i < d; ++i) {
          x[i] = std::ldexp(u(rng), j);
          y[i] = std::ldexp(x[i], -j) - k[i];
        }
        const std::complex<double> expect = std::pow(2.0, -j * d / 2.0) * gaussian_window(y);
        CHECK(std::abs(w(x) - expect) < 1e-12);
      }
    }
  }

  // |det A|^{1/2} keeps the norm for random invertible A in the plane.
  for (int t = 0; t < 5; ++t) {
    std::vector<double> a(4);
    double det = 0.0;
    do {
      for (double& v : a) v = u(rng);
      det = a[0] * a[3] - a[1] * a[2];
    } while (std::abs(det) < 0.3);
    const WavePacket g{gaussian_window, a, {u(rng), u(rng)}, {u(rng), u(rng)}};
    // x - x0 = A^{-1} y with |y| <= 9 covers all but e^{-81} of the energy.
    const double inv[4] = {a[3] / det, -a[1] / det, -a[2] / det, a[0] / det};
    double amax = 0.0;
    for (double v : a) amax = std::max(amax, std::abs(v));
    double sum = 0.0;
    QuadratureRule rx, ry;
    for (int axis = 0; axis < 2; ++axis) {
      const double half = 9.0 * std::hypot(inv[2 * axis], inv[2 * axis + 1]);
      QuadratureRule r = composite_gauss_legendre(g.x0[axis] - half, g.x0[axis] + half,
                                                  0.25 / amax, 20);
      (axis == 0 ? rx : ry) = std::move(r);
    }
    for (std::size_t p = 0; p < rx.size(); ++p)
      for (std::size_t q = 0; q < ry.size(); ++q) {
        const double x[2] = {rx.nodes[p], ry.nodes[q]};
        sum += rx.weights[p] * ry.weights[q] * std::norm(g(x));
      }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }

  const WavePacket singular{gaussian_window, {1.0, 2.0, 2.0, 4.0}, {0.0, 0.0}, {0.0, 0.0}};
  const double x[2] = {0.0, 0.0};
  CHECK_THROWS_AS(singular(x), ValidationError);
  const double x1[1] = {0.0};
  CHECK_THROWS_AS(singular(x1), ValidationError);
}
