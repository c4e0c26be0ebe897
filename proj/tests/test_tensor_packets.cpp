#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <set>

#include "tflim/error.hpp"
#include "tflim/limiting_operator.hpp"
#include "tflim/tensor_packets.hpp"

using namespace tflim;
using std::numbers::pi;

namespace {

Partition small_partition(int d, const Domain& s, double r, double eps) {
  const Truncation t = suggest_truncation(d, s, r, eps);
  return partition_basis(d, s, r, eps, t.j_max, t.k_max);
}

}  // namespace

TEST_CASE("index set counts") {
  CHECK(tensor_index_set(1, 1, 2).size() == 4);
  CHECK(tensor_index_set(2, 2, 4).size() == 256);
  CHECK(tensor_index_count(2, 3, 5) == tensor_index_count(1, 3, 5) * tensor_index_count(1, 3, 5));
  const auto set = tensor_index_set(2, 1, 2);
  std::set<std::vector<int>> seen;
  for (const auto& idx : set) {
    std::vector<int> key = idx.interval;
    key.insert(key.end(), idx.k.begin(), idx.k.end());
    seen.insert(key);
  }
  CHECK(seen.size() == set.size());
  CHECK_THROWS_AS(tensor_index_set(3, 10, 10, 1000), SizeError);
  CHECK_THROWS_AS(tensor_index_set(4, 1, 1), ValidationError);
}

TEST_CASE("classify examples") {
  const Domain ball2 = Domain::ball({0.0, 0.0}, 1.0);
  const std::vector<double> quarter2 = {0.25, 0.25};
  const std::vector<int> zero2 = {0, 0};
  CHECK(classify(quarter2, zero2, ball2, 1e3, 0.1) == AtomClass::low);

  // Nominal frequency pi (k + 1/2) / delta = 10 r.
  const Domain ball1 = Domain::ball({0.0}, 1.0);
  const std::vector<double> quarter = {0.25};
  const std::vector<int> k40 = {40};
  const double r = pi * 40.5 / (10.0 * 0.25);
  CHECK(classify(quarter, k40, ball1, r, 0.1) == AtomClass::hi);

  // A corner centred on the boundary of S(r).
  const std::vector<int> k5 = {5};
  CHECK(classify(quarter, k5, Domain::interval(-1.0, 1.0), pi * 5.5 / 0.25, 0.1) == AtomClass::res);

  CHECK_THROWS_AS(classify(quarter, k5, ball1, 0.5, 0.1), ValidationError);
  CHECK_THROWS_AS(classify(quarter, k5, ball1, 10.0, 0.5), ValidationError);
  CHECK_THROWS_AS(classify(quarter2, k5, ball2, 10.0, 0.1), ValidationError);
}

TEST_CASE("margin") {
  const double g = margin_scale(10.0, 0.1, 0.25);
  CHECK(g == doctest::Approx(std::pow(std::log(16.0 * 10.0 / 0.025) / 0.8, 1.5)));
  CHECK(margin_scale(20.0, 0.1, 0.25) > g);
  CHECK(margin_scale(10.0, 0.05, 0.25) > g);
  ClassifyConfig cfg;
  cfg.kappa = 32.0;
  CHECK(margin_scale(10.0, 0.1, 0.25, cfg) > g);
}

TEST_CASE("bound E_d") {
  for (double r : {2.0, 10.0, 100.0})
    CHECK(bound_E_d(1, 0.1, r) == doctest::Approx(std::pow(std::log(r / 0.1), 2.5)));
  CHECK(bound_E_d(2, 1.0 / std::numbers::e, std::numbers::e) == doctest::Approx(32.0));
  double prev = 0.0;
  for (double r = 1.0; r < 200.0; r *= 1.3) {
    const double v = bound_E_d(2, 0.1, r);
    CHECK(v >= prev);
    CHECK(bound_E_d(2, 0.05, r) >= v);
    prev = v;
  }
}

TEST_CASE("truncation") {
  const Domain s = Domain::interval(-1.0, 1.0);
  const Truncation t = suggest_truncation(1, s, 10.0 * pi, 0.1);
  CHECK_NOTHROW(check_truncation(1, s, 10.0 * pi, 0.1, t.j_max, t.k_max));
  CHECK(std::ldexp(1.0, -t.j_max) <= 0.01 / (10.0 * pi));
  CHECK(deep_tail_bound(1, s, 10.0 * pi, t.j_max) <= 1e-4);
  CHECK_THROWS_AS(check_truncation(1, s, 10.0 * pi, 0.1, t.j_max - 1, t.k_max), ValidationError);
  CHECK_THROWS_AS(check_truncation(1, s, 10.0 * pi, 0.1, t.j_max, t.k_max - 1), ValidationError);
  CHECK_THROWS_AS(partition_basis(1, s, 10.0 * pi, 0.1, 3, 5), ValidationError);
  CHECK_THROWS_AS(partition_basis(1, Domain::interval(0.0, 1.0), 10.0, 0.1, 20, 60),
                  ValidationError);
}

TEST_CASE("partition matches brute-force classification") {
  for (int d : {1, 2}) {
    const Domain s = d == 1 ? Domain::interval(-1.0, 1.0) : Domain::ball({0.0, 0.0}, 1.0);
    const Partition p = small_partition(d, s, d == 1 ? 300.0 : 3.0, 0.45);
    const auto all = tensor_index_set(d, p.j_max, p.k_max, 10'000'000);
    std::uint64_t counts[3] = {0, 0, 0};
    std::vector<double> deltas(d);
    for (const TensorIndex& idx : all) {
      for (int i = 0; i < d; ++i) deltas[i] = p.intervals[idx.interval[i]].delta;
      const AtomClass c = classify(deltas, idx.k, s, p.r, p.eps);
      CHECK(p.class_of(idx) == c);
      ++counts[static_cast<int>(c)];
    }
    CHECK(counts[0] == p.low_count);
    CHECK(counts[1] == p.res_count);
    CHECK(counts[2] == p.hi_count);
    CHECK(p.total() == all.size());
    CHECK(p.members(AtomClass::res).size() == p.res_count);
    if (d == 1) CHECK(p.low_count > 0);
  }
}

TEST_CASE("low class empty when r is below every nominal frequency") {
  // Smallest nominal frequency is pi/2 / (1/4) = 2 pi.
  const Partition p = small_partition(1, Domain::interval(-1.0, 1.0), 6.0, 0.1);
  CHECK(p.low_count == 0);
  CHECK(p.total() == p.low_count + p.res_count + p.hi_count);
}

TEST_CASE("partition csv") {
  const Partition p = small_partition(1, Domain::interval(-1.0, 1.0), 2.0, 0.45);
  const std::string csv = partition_csv(p);
  CHECK(csv.rfind("j1,side1,k1,class\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == p.total() + 1);
  CHECK(csv.find("1,left,0,") != std::string::npos);
  CHECK_THROWS_AS(partition_csv(p, 3), SizeError);
}

TEST_CASE("energy estimate, d = 1") {
  const Partition p = small_partition(1, Domain::interval(-1.0, 1.0), 10.0 * pi, 0.1);
  const EnergyEstimate e = energy_estimate(p);
  CHECK(e.total() <= 0.01 / 4.0);
  CHECK(e.hi_leak == doctest::Approx(e.hi_quadrature + e.hi_envelope + e.hi_truncated + e.hi_deep));
  CHECK(e.hi_envelope <= EnergyOptions{}.budget);
  CHECK(e.hi_integrated > 0);
  CHECK(e.hi_quadrature > 0.0);

  // Without low atoms the low leak vanishes.
  CHECK(p.low_count == 0);
  CHECK(e.low_leak == 0.0);
}

TEST_CASE("hi class contributions") {
  const Partition p = small_partition(1, Domain::interval(-1.0, 1.0), 4.0, 0.45);
  REQUIRE(p.hi_count > 0);

  // With no integration every hi atom falls back to its bound.
  EnergyOptions none;
  none.max_integrated = 0;
  const EnergyEstimate bound_only = energy_estimate(p, none);
  CHECK(bound_only.hi_integrated == 0);
  CHECK(bound_only.hi_quadrature == 0.0);
  CHECK(bound_only.hi_envelope > 0.0);
  CHECK(energy_estimate(p).hi_leak <= bound_only.hi_leak);

  // An empty hi class leaves only the atoms outside the truncation.
  Partition no_hi = p;
  for (PartitionRow& row : no_hi.rows) row.res_end = no_hi.k_max;
  no_hi.res_count += no_hi.hi_count;
  no_hi.hi_count = 0;
  const EnergyEstimate e = energy_estimate(no_hi);
  CHECK(e.hi_quadrature == 0.0);
  CHECK(e.hi_envelope == 0.0);
  CHECK(e.hi_leak == doctest::Approx(e.hi_truncated + e.hi_deep));
}

TEST_CASE("single atom quadrature against envelope bounds") {
  const Domain s = Domain::interval(-1.0, 1.0);
  const double r = 300.0, eps = 0.45;
  const Partition p = small_partition(1, s, r, eps);
  REQUIRE(p.low_count > 0);
  const LocalSineSystem sys(p.j_max + 1);
  const EnergyOptions opts;
  int checked = 0;
  for (const TensorIndex& idx : p.members(AtomClass::low)) {
    if (idx.k[0] > 8 || p.intervals[idx.interval[0]].j > 3) continue;
    const double delta = p.intervals[idx.interval[0]].delta;
    const double inside = in_band_energy(sys, p, idx);
    CHECK(inside <= 1.0 + 1e-6);
    const double leak = std::max(0.0, 1.0 - inside);
    CHECK(leak <= envelope_energy_outside(delta, idx.k[0], r, opts.envelope_a, opts.envelope_C));
    ++checked;
  }
  CHECK(checked > 0);

  // A high atom's energy inside a small band is below its envelope bound.
  const TensorIndex hi{{0}, {p.k_max - 1}};
  const double delta = p.intervals[0].delta;
  const double in = in_band_energy(sys, p, hi);
  CHECK(in <= envelope_energy_inside(delta, p.k_max - 1, r, opts.envelope_a, opts.envelope_C));
}

TEST_CASE("envelope energy bounds") {
  // Whole line: at least the unit energy (up to the constant).
  CHECK(envelope_energy_outside(0.25, 3, 0.0, 0.3, 1.25) >= 1.0);
  CHECK(envelope_energy_inside(0.25, 3, 1e6, 0.3, 1.25) >= 1.0);
  CHECK(envelope_energy_inside(0.25, 3, 0.0, 0.3, 1.25) == 0.0);
  double prev = 1e300;
  for (double q = 0.0; q < 2000.0; q += 50.0) {
    const double v = envelope_energy_outside(0.25, 3, q, 0.3, 1.25);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("tail envelope constants dominate the transforms") {
  // The default pair must bound |phi^| well beyond the fitting reach.
  const LocalSineSystem sys(5);
  const EnergyOptions opts;
  const auto exps = envelope_exponents();
  std::size_t ai = 0;
  while (std::abs(exps[ai] - opts.envelope_a) > 1e-12) ++ai;
  for (int k : {0, 8, 30}) {
    const LocalSineAtom a = sys.atom(Side::left, 1, k);
    const auto grid = envelope_grid(a, 200.0, 0.25);
    CHECK(envelope_constants(sys, a, grid)[ai] <= opts.envelope_C);
  }
}

TEST_CASE("lemma 2") {
  SUBCASE("everything residual") {
    const Partition p = small_partition(1, Domain::interval(-1.0, 1.0), 2.0, 0.45);
    Partition all = p;
    all.res_count = all.total();
    const auto rep = spectrum(discretize(Domain::interval(0.0, 1.0), Domain::interval(-2.0, 2.0), 48));
    CHECK(verify_lemma2(all, rep, 0.45).pass);
  }
  SUBCASE("d = 1") {
    const double r = 10.0 * pi;
    const Partition p = small_partition(1, Domain::interval(-1.0, 1.0), r, 0.1);
    const auto rep = spectrum(discretize(Domain::interval(0.0, 1.0), Domain::interval(-r, r), 200));
    const Lemma2Check c = verify_lemma2(p, rep, 0.1);
    CHECK(c.pass);
    CHECK(c.plunge > 0);
    CHECK(c.res == p.res_count);
  }
  SUBCASE("d = 2") {
    const double r = 8.0;
    const Domain s = Domain::ball({0.0, 0.0}, 1.0);
    const Partition p = small_partition(2, s, r, 0.1);
    const auto rep = spectrum(discretize(Domain::box({0.0, 0.0}, {1.0, 1.0}), s.dilated(r), 24));
    CHECK(verify_lemma2(p, rep, 0.1).pass);
  }
}

TEST_CASE("residual count scaling, d = 2") {
  const Domain s = Domain::ball({0.0, 0.0}, 1.0);
  double prev_ratio = 0.0;
  for (double r : {4.0, 8.0, 16.0}) {
    const Partition p = small_partition(2, s, r, 0.1);
    const double ratio = static_cast<double>(p.res_count) / bound_E_d(2, 0.1, r);
    if (prev_ratio > 0.0) CHECK(ratio <= 1.1 * prev_ratio);
    prev_ratio = ratio;
  }
}
