#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tflim/domains.hpp"
#include "tflim/limiting_operator.hpp"
#include "tflim/local_sine.hpp"

namespace tflim {

// One tensor atom psi = phi_{L_1,k_1} x ... x phi_{L_d,k_d}. `interval`
// holds positions in whitney_intervals(J_max).
struct TensorIndex {
  std::vector<int> interval;
  std::vector<int> k;
};

// All (2 J_max)^d K_max^d indices, lexicographic in (intervals, k).
// Throws SizeError above `cap`.
std::vector<TensorIndex> tensor_index_set(int d, int j_max, int k_max,
                                          std::size_t cap = 1'000'000);
std::uint64_t tensor_index_count(int d, int j_max, int k_max);

enum class AtomClass : std::uint8_t { low, res, hi };
const char* to_string(AtomClass c);

// Fitted envelope exponent of the local sine atoms (see envelope_fit) and the
// constant inside the margin logarithm.
struct ClassifyConfig {
  double a = 0.8;
  double kappa = 16.0;
};

// Scaled margin (log(kappa r / (eps delta_min)) / a)^{3/2}; the margin on
// axis i is this divided by delta_i.
double margin_scale(double r, double eps, double delta_min, const ClassifyConfig& cfg = {});

// low if every corner box (+-pi(k_i+1/2)/delta_i +- m_i) lies inside S(r),
// hi if every one misses S(r), res otherwise. Requires eps in (0, 1/2), r >= 1.
AtomClass classify(std::span<const double> deltas, std::span<const int> ks, const Domain& s,
                   double r, double eps, const ClassifyConfig& cfg = {});

// Upper bound on the in-band energy of all atoms deeper than j_max:
// (2 pi)^{-d} |S(r)| d (7/6) 2^{-j_max}.
double deep_tail_bound(int d, const Domain& s, double r, int j_max);

struct Truncation {
  int j_max = 0;
  int k_max = 0;
};

// Smallest (J_max, K_max) accepted by partition_basis.
Truncation suggest_truncation(int d, const Domain& s, double r, double eps,
                              const ClassifyConfig& cfg = {});

// Throws ValidationError unless 2^{-J_max} <= eps^2 / r^d, the deep tail is
// at most eps^2 / 100, pi K_max / delta_max >= 4 r, and every atom with
// k_i >= K_max on some axis is hi.
void check_truncation(int d, const Domain& s, double r, double eps, int j_max, int k_max,
                      const ClassifyConfig& cfg = {});

// Classes along the last k axis are a run of low, then res, then hi (S is
// convex and coordinate-wise symmetric), so each row stores two cut points.
struct PartitionRow {
  std::vector<int> interval;  // d entries
  std::vector<int> k;         // leading d - 1 entries
  int low_end = 0;            // k_d < low_end is low
  int res_end = 0;            // low_end <= k_d < res_end is res
};

struct Partition {
  int d = 0;
  Domain s;
  double r = 0.0;
  double eps = 0.0;
  int j_max = 0;
  int k_max = 0;
  ClassifyConfig cfg;
  std::vector<WhitneyInterval> intervals;
  std::vector<PartitionRow> rows;
  std::uint64_t low_count = 0;
  std::uint64_t res_count = 0;
  std::uint64_t hi_count = 0;

  std::uint64_t total() const { return low_count + res_count + hi_count; }
  AtomClass class_of(const TensorIndex& idx) const;
  // Members of one class in row order; throws SizeError above `cap`.
  std::vector<TensorIndex> members(AtomClass c, std::size_t cap = 1'000'000) const;
};

// Classifies every index of the truncated set. Requires a coordinate-wise
// symmetric S, d in {1, 2, 3} and the truncation check above.
Partition partition_basis(int d, const Domain& s, double r, double eps, int j_max, int k_max,
                          const ClassifyConfig& cfg = {});

// max{ r^{d-1} log(r/eps)^{5/2}, log(r/eps)^{5d/2} }
double bound_E_d(int d, double eps, double r);

struct EnergyOptions {
  // Atoms are integrated heaviest first (by envelope bound) until the
  // bounds left over in a class sum to at most `budget`, or `max_integrated`
  // atoms of that class have been integrated.
  double budget = 1e-4;
  std::size_t max_integrated = 5000;
  // Envelope constants for the analytic tail bounds. The classification
  // exponent 0.8 only holds near the peaks; this pair dominates |phi^| for
  // k <= 100 out to scaled distance 300.
  double envelope_a = 0.3;
  double envelope_C = 1.25;
};

struct EnergyEstimate {
  double hi_leak = 0.0;   // (2 pi)^{-d} sum over hi of ||psi^||^2 on S(r)
  double low_leak = 0.0;  // (2 pi)^{-d} sum over low of ||psi^||^2 off S(r)
  double hi_quadrature = 0.0;
  double hi_envelope = 0.0;     // hi atoms not integrated
  double hi_truncated = 0.0;    // atoms with some k_i >= K_max
  double hi_deep = 0.0;         // atoms deeper than J_max
  double low_quadrature = 0.0;
  double low_envelope = 0.0;
  std::size_t hi_integrated = 0;
  std::size_t low_integrated = 0;

  double total() const { return hi_leak + low_leak; }
};

// Envelope bound on (2 pi)^{-1} \int_{|xi| < p} |phi^|^2 for one atom.
double envelope_energy_inside(double delta, int k, double p, double a, double C);
// Envelope bound on (2 pi)^{-1} \int_{|xi| > q} |phi^|^2 for one atom.
double envelope_energy_outside(double delta, int k, double q, double a, double C);

// Quadrature of (2 pi)^{-d} \int_{S(r)} |psi^|^2 for one atom. S must be an
// interval, box or ball and d <= 2.
double in_band_energy(const LocalSineSystem& sys, const Partition& part, const TensorIndex& idx);

// Leakage of the hi class into S(r) and of the low class out of it. The
// heaviest atoms are integrated; the rest, the truncated atoms and the deep
// atoms contribute upper bounds.
EnergyEstimate energy_estimate(const Partition& part, const EnergyOptions& opts = {});

struct Lemma2Check {
  int plunge = 0;
  std::uint64_t res = 0;
  bool pass = false;
};

// plunge_count(spectrum, eps) <= 2 #res (frame bounds A = B = 1).
Lemma2Check verify_lemma2(const Partition& part, const SpectrumReport& spectrum, double eps);

// One line per atom: j1..jd, side1..sided, k1..kd, class.
std::string partition_csv(const Partition& part, std::size_t cap = 1'000'000);

}  // namespace tflim
