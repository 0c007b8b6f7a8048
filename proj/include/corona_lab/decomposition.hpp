#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corona_lab/corona.hpp"
#include "corona_lab/lattice.hpp"
#include "corona_lab/martingale.hpp"
#include "corona_lab/operator.hpp"
#include "corona_lab/weight.hpp"

namespace corona_lab {

enum class PairClass {
  Diagonal,
  LongRange1,
  LongRange2,
  MidRange1,
  MidRange2,
  ShortRangeTau,
  ShortRangeRho,
  DiscardedBad,
};
constexpr int kPairClassCount = 8;

const char* to_string(PairClass cls);

// Matrix A with B(phi, psi) = psi^T A phi = (T(phi dmu), psi)_nu for cell values phi, psi.
Eigen::MatrixXd bilinear_matrix(const DiscretizedOperator& T, const Measure& mu, const Measure& nu);

// (T(f dmu), g)_nu. Both functions must vanish outside [1/4, 3/4)^d unless check_support is off.
double bilinear_form(const DiscretizedOperator& T, const GridFunction& f, const GridFunction& g, const Measure& mu,
                     const Measure& nu, bool check_support = true);

// Class of one pair: I from the mu-lattice, J from the nu-lattice.
PairClass classify_pair(const Cube& I, bool I_bad, const Cube& J, bool J_bad, int r);

struct ClassifiedPair {
  std::size_t i = 0;  // index into the f coefficients
  std::size_t j = 0;  // index into the g coefficients
  PairClass cls = PairClass::Diagonal;
};

struct PairClassification {
  std::vector<ClassifiedPair> pairs;
  std::vector<bool> f_bad;  // essential badness per f coefficient
  std::vector<bool> g_bad;
  std::array<std::int64_t, kPairClassCount> counts{};
};

// Classifies every pair of nonzero coefficients. f_dec lives on pair.mu, g_dec on pair.nu.
// With discard_bad = false every cube counts as good; only valid when both lattices coincide.
PairClassification classify_pairs(const LatticePair& pair, const MartingaleDecomposition& f_dec,
                                  const MartingaleDecomposition& g_dec, bool discard_bad = true);

struct ShortRangeTerms {
  double neighbor = 0.0;
  double difficult = 0.0;
  double stopping = 0.0;
  int stopping_node = -1;
  double total() const { return neighbor + difficult + stopping; }
};

// Three-term split of B(Delta_I f, Delta_J g) for J strictly inside a son of I. The tree lives
// on the lattice of I; inner_z = A^T (Delta_J g) so that B(phi, Delta_J g) = inner_z . phi.
ShortRangeTerms short_range_split(const Coefficient& outer, const Eigen::VectorXd& inner_z, const Cube& inner,
                                  const StoppingTree& tree, const Grid& grid);

// Sum of the stopping-term majorants and its slice decomposition.
struct SliceValue {
  int n = 0;  // level gap
  int k = 0;  // level of the outer cube
  int son = 0;
  double value = 0.0;
  double bound = 0.0;
};

struct StoppingSumReport {
  double T_value = 0.0;        // sum with the (l(J)/l(I))^(eps/2) factor
  double bound = 0.0;          // sqrt(mult K) 2^(d/2) sum_n 2^(-n eps/2) ||f|| ||g||
  double max_slice_ratio = 0.0;
  bool slice_ok = true;
  bool total_ok = true;
  std::vector<SliceValue> slices;
};

struct AuditSummary {
  std::string name;
  double constant = 0.0;
  std::int64_t checked = 0;
  std::int64_t skipped = 0;  // pairs outside the hypothesis of the termwise estimate
  double worst_ratio = 0.0;
  bool passed() const { return worst_ratio <= 1.0 + 1e-9; }
};

struct ClassSum {
  PairClass cls = PairClass::Diagonal;
  std::int64_t pairs = 0;
  double signed_sum = 0.0;
  double abs_sum = 0.0;
  double bound = 0.0;         // rigorous bound from measured constants
  double paper_value = 0.0;   // the measured constant the class is compared against, times ||f|| ||g||
  double paper_ratio = 0.0;   // abs_sum / paper_value
};

struct TelescopingReport {
  double difficult = 0.0;   // direct sum of the difficult terms
  double shells = 0.0;      // sum over stopping cubes of the shell paraproduct pairings
  double rho_outer = 0.0;   // <f>_S pairings against P_{O_S} g
  double rho_parent = 0.0;  // <f>_{F(S)} pairings against P_{Q_S} g
  double residual = 0.0;
};

struct ParaproductReport {
  double max_first_norm = 0.0;         // max over stopping cubes of ||pi_{T chi_S}||
  double max_first_carleson = 0.0;     // matching Carleson constant of a_I
  bool first_ok = true;                // norm^2 <= 4 C for every S
  double outer_norm = 0.0;             // ||pi^O||
  double b_carleson = 0.0;
  double max_b_ratio = 0.0;            // max b_S / (K_chi mu(S))
  bool outer_ok = true;
  double parent_norm = 0.0;            // ||pi^Q||
  double parent_f_sq = 0.0;            // ||pi^Q f||^2 for the given f
  double DP = 0.0;
  double ODP = 0.0;
  double ODP_bound = 0.0;              // sum_j (1+eps0)^j F_j + F_0 / eps0
  double eps0 = 0.0;
  bool second_ok = true;               // ||pi^Q f||^2 <= DP + ODP <= DP + ODP_bound
  std::vector<double> F;               // F_j, j = 0..
  std::vector<double> a_j_carleson;    // Carleson constants of a_S^j
  double F_fit_constant = 0.0;         // max_j F_j 2^(j eps/2) / ||f||^2
  double F_slope = 0.0;                // least-squares slope of log2 F_j over j >= 0 with F_j > 0
  int stopping_cubes = 0;
};

// One side of the short-range analysis: the larger cube lives on `outer`.
struct ShortRangeReport {
  std::int64_t pairs = 0;
  double neighbor = 0.0;
  double difficult = 0.0;
  double stopping = 0.0;
  double neighbor_abs = 0.0;
  double stopping_abs = 0.0;
  double split_residual = 0.0;  // max relative three-term residual
  double K = 0.0;
  double neighbor_bound = 0.0;
  double stopping_bound = 0.0;
  double difficult_bound = 0.0;
  AuditSummary neighbor_audit;
  AuditSummary stopping_audit;
  StoppingSumReport stopping_sum;
  TelescopingReport telescoping;
  ParaproductReport paraproducts;
};

struct DecompositionOptions {
  double threshold_multiplier = 100.0;
  double c0 = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double reassembly_tol = 1e-8;
  double telescoping_tol = 1e-9;
  bool paraproducts = true;
  // Diagnostic: keep bad cubes. Requires identical lattice shifts so that nested cubes sit inside sons.
  bool discard_bad = true;
};

struct DecompositionReport {
  double total = 0.0;
  double lambda_f = 0.0;  // B(Lambda f, g)
  double lambda_g = 0.0;  // B(f - Lambda f, Lambda g)
  double discarded_bad = 0.0;
  std::array<ClassSum, kPairClassCount> classes{};
  double reassembled = 0.0;
  double reassembly_residual = 0.0;
  double reassembly_scale = 0.0;
  double f_norm = 0.0;
  double g_norm = 0.0;
  double F_norm = 0.0;  // good part without the top average
  double G_norm = 0.0;
  double joint_a2 = 0.0;
  double K_chi = 0.0;   // over every cube of both lattices
  double K_mu = 0.0;
  double K_nu = 0.0;
  double operator_proxy = 0.0;
  ShortRangeReport tau;
  ShortRangeReport rho;
  AuditSummary diagonal_audit;
  AuditSummary long_audit;
  AuditSummary mid_audit;
  double bound_value = 0.0;  // (c0 sqrt(a2) + c1 sqrt(K) + c2 sqrt(K_chi)) ||f|| ||g||
  double bound_ratio = 0.0;
  std::array<double, 3> constants{1.0, 1.0, 1.0};
  std::array<std::int64_t, kPairClassCount> counts{};
};

struct DecompositionTrees {
  StoppingTree mu_tree;  // on pair.mu, criterion with (mu, nu)
  StoppingTree nu_tree;  // on pair.nu, criterion with (nu, mu)
};

// Pivotal constants of both lattices from the full-depth search, then both trees.
DecompositionTrees build_decomposition_trees(const Measure& mu, const Measure& nu, const LatticePair& pair,
                                             double threshold_multiplier = 100.0);

StoppingSumReport stopping_sum_bound(const StoppingTree& tree, const MartingaleDecomposition& outer_good,
                                     const MartingaleDecomposition& inner_good, const Measure& outer_measure,
                                     const Measure& inner_measure, int r);

DecompositionReport full_report(const DiscretizedOperator& T, const Weight& w, const GridFunction& f,
                                const GridFunction& g, const LatticePair& pair, const DecompositionTrees& trees,
                                const DecompositionOptions& options = {});

// Per-term constants of the termwise audits for a kernel with Hoelder constant C and exponent eps.
double long_range_constant(int dim, double epsilon, double smooth_constant);
double neighbor_constant(int dim, double epsilon, double smooth_constant);
double stopping_constant(int dim, double epsilon, double smooth_constant);

}  // namespace corona_lab
