#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corona_lab/lattice.hpp"
#include "corona_lab/weight.hpp"

namespace corona_lab {

struct KernelSpec {
  std::string name;
  int dim = 1;
  double epsilon = 1.0;
  double size_constant = 1.0;
  double smooth_constant = 2.0;  // infinity when the kernel is not Hoelder (dyadic kernel)
  std::function<double(const Point&, const Point&)> evaluate;
};

KernelSpec hilbert_kernel();
KernelSpec zero_kernel(int dim = 1);
// sign(x - y) (-1)^k / side of the smallest standard dyadic interval of level k holding x and y.
KernelSpec dyadic_kernel();
KernelSpec kernel_by_name(const std::string& name, int dim = 1);

struct RegularityReport {
  bool passed = true;
  double worst_size_ratio = 0.0;    // |K| |x-y|^d / size_constant
  double worst_smooth_ratio = 0.0;  // smoothness lhs / (smooth_constant |x-x'|^eps / |x-y|^(d+eps))
  Point x{}, y{}, x_prime{};        // triple attaining the worst smoothness ratio
  std::int64_t samples = 0;
};

RegularityReport kernel_regularity_check(const KernelSpec& kernel, std::int64_t samples, std::uint64_t seed);

class DiscretizedOperator {
 public:
  static DiscretizedOperator from_kernel(const KernelSpec& kernel, const Grid& grid);
  // Arbitrary matrix acting on cell values (diagonal allowed); used for controls.
  static DiscretizedOperator from_matrix(const Grid& grid, Eigen::MatrixXd matrix, std::string name);

  const Grid& grid() const { return grid_; }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const std::string& name() const { return name_; }
  double epsilon() const { return epsilon_; }
  // Hoelder constant of the kernel; infinite for operators built from a raw matrix.
  double smooth_constant() const { return smooth_constant_; }

  GridFunction apply(const GridFunction& f) const;
  // T(f dm): density folded into the input.
  GridFunction apply(const GridFunction& f, const Measure& m) const;
  DiscretizedOperator transpose() const;

 private:
  Grid grid_;
  Eigen::MatrixXd matrix_;
  std::string name_;
  double epsilon_ = 1.0;
  double smooth_constant_ = 2.0;
};

struct PowerOptions {
  int iters = 20000;
  double tol = 1e-9;
  std::uint64_t seed = 0x5eed;
};

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = true;
  std::string warning;
  GridFunction maximizer;  // input direction in cell values, unit norm in the source space
};

// Largest singular value of a matrix by power iteration on A^T A.
NormEstimate matrix_norm(const Eigen::MatrixXd& A, const PowerOptions& options = {});

// Norm of f -> T(f dmu) from L^2(mu) to L^2(nu).
NormEstimate strong_norm(const DiscretizedOperator& T, const Measure& mu, const Measure& nu,
                         const PowerOptions& options = {});
// Same quantity from a dense singular value decomposition.
double dense_strong_norm(const DiscretizedOperator& T, const Measure& mu, const Measure& nu);
// Norm of plain T on L^2(w dx); equals strong_norm with mu = 1/w, nu = w.
NormEstimate plain_weighted_norm(const DiscretizedOperator& T, const Measure& w, const PowerOptions& options = {});

// sup over t of t w(|Tf| > t)^{1/2} / ||f||_w for one probe, by an exact sweep over thresholds.
double weak_ratio(const GridFunction& Tf, const Measure& w, double f_norm);

struct WeakOptions {
  bool indicators = true;
  bool haar = true;
  bool singular_vector = true;
  int random_probes = 16;
  std::uint64_t seed = 7;
  std::vector<GridFunction> extra;  // caller-supplied probes
  PowerOptions power;
};

struct WeakReport {
  double weak = 0.0;
  double strong_lower = 0.0;  // best ||Tf||_w / ||f||_w over the same probes
  std::string best_probe;
  std::int64_t probes = 0;
};

// Lower bound for the norm of T from L^2(w) to weak L^2(w).
WeakReport weak_norm(const DiscretizedOperator& T, const Measure& w, const WeakOptions& options = {});

struct TestConstantReport {
  double K_chi = 0.0;
  double forward = 0.0;  // max ||T(chi_I dmu)||_nu^2 / mu(I)
  double dual = 0.0;     // max ||T'(chi_I dnu)||_mu^2 / nu(I)
  std::vector<Cube> cubes;             // dyadic family only
  std::vector<double> forward_ratio;   // per cube, dyadic family only
  std::vector<double> dual_ratio;
};

TestConstantReport test_constant(const DiscretizedOperator& T, const Measure& mu, const Measure& nu,
                                 CubeFamily family = CubeFamily::Dyadic);
// Test ratios over an explicit list of (possibly clipped) cubes.
TestConstantReport test_constant_cubes(const DiscretizedOperator& T, const Measure& mu, const Measure& nu,
                                       std::vector<Cube> cubes);

struct LorentzReport {
  double lhs = 0.0;   // sqrt(K_chi)
  double rhs = 0.0;   // weak(T on w) + weak(T' on 1/w)
  double weak_T = 0.0;
  double weak_T_dual = 0.0;
  double margin = 0.0;  // rhs - lhs
  double strong_lower = 0.0;
};

struct LorentzOptions {
  int enriched_cubes = 64;
  WeakOptions weak;
};

LorentzReport lorentz_duality_check(const DiscretizedOperator& T, const Weight& w, CubeFamily family = CubeFamily::Dyadic,
                                    const LorentzOptions& options = {});

struct NormReport {
  double strong = 0.0;        // max of the power estimate and every probe ratio
  double strong_power = 0.0;
  bool converged = true;
  int iterations = 0;
  double weak = 0.0;
  double weak_dual = 0.0;
  double K_chi = 0.0;
  double lorentz_lhs = 0.0;
  double lorentz_rhs = 0.0;
};

NormReport norm_report(const DiscretizedOperator& T, const Weight& w, CubeFamily family = CubeFamily::Dyadic,
                       const PowerOptions& power = {}, const LorentzOptions& lorentz = {});

// Norm of f -> int y^eps / (y + |x - s|)^(d + eps) f(s) dmu(s) from L^2(mu) to L^2(nu).
NormEstimate poisson_averaging_norm(double y, const Measure& mu, const Measure& nu, double epsilon = 1.0,
                                    const PowerOptions& options = {});
// Exact norm of the averaging operator over one shifted grid of cubes at `level`.
double averaging_grid_norm(int level, const IVec& shift, const Measure& mu, const Measure& nu);
// Norm of f -> (2 radius)^{-d} int_{|x - s|_inf < radius} f dmu.
NormEstimate window_average_norm(double radius, const Measure& mu, const Measure& nu, const PowerOptions& options = {});

}  // namespace corona_lab
