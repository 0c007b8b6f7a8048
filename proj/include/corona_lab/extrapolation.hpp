#pragma once

#include <functional>
#include <string>
#include <vector>

#include "corona_lab/operator.hpp"
#include "corona_lab/weight.hpp"

namespace corona_lab {

// S_w f = M(|f| w) / w with the grid-aligned maximal function.
GridFunction s_w(const GridFunction& f, const Weight& w);

struct SwNormReport {
  double value = 0.0;       // best ratio ||S_w f||_w / ||f||_w seen
  std::string best_probe;
  std::int64_t probes = 0;
};

struct SwNormOptions {
  int orbit_steps = 60;      // nonlinear power steps from each seed
  int random_probes = 8;
  std::uint64_t seed = 11;
  double tol = 1e-9;
};

// Lower estimate of the norm of S_w on L^2(w) from indicator, weight-shaped and random seeds,
// each followed along its normalized S_w orbit.
SwNormReport sw_norm(const Weight& w, const SwNormOptions& options = {});

struct MajorantReport {
  double operator_norm_Sw = 0.0;  // N used in the series (after the orbit check)
  int truncation_k = 0;            // number of series terms
  double ratio_max = 0.0;          // max S_w(Rh) / Rh
  double a1_of_wRh = 0.0;
  double norm_Rh = 0.0;
  double norm_h = 0.0;
  double truncation_slack = 0.0;   // ||next term||_w / ||h||_w at the cut
  bool majorizes = true;           // Rh >= h cellwise
};

struct MajorantOptions {
  double tol = 1e-12;
  int max_terms = 400;
  double sw_norm = 0.0;  // 0: estimate with sw_norm()
  SwNormOptions norm;
};

// Rh = sum_k S_w^k h / (2 N)^k with N >= every ratio met along the orbit of h.
GridFunction rubio_de_francia(const GridFunction& h, const Weight& w, MajorantReport& report,
                              const MajorantOptions& options = {});

using PhiFunction = std::function<double(double)>;
double phi_linear(double t);
double phi_loglinear(double t);
PhiFunction phi_by_name(const std::string& name);

struct WeakTransferReport {
  double w_omega = 0.0;         // w({|T f| > 1})
  double sqrt_w_omega = 0.0;
  double W_omega = 0.0;         // (w Rh)(Omega)
  double int_fW = 0.0;          // int |f| w Rh
  double f_norm = 0.0;
  double Rh_norm = 0.0;
  double a1_W = 0.0;
  double phi_a1 = 0.0;
  double weak_l1_constant = 0.0;  // W(Omega) / (phi([W]_A1) int |f| W)
  double a2 = 0.0;
  double weak_proxy = 0.0;        // sqrt(w(Omega)) / ||f||_w
  double final_ratio = 0.0;       // weak_proxy / phi_of_a2
  double phi_of_a2 = 0.0;
  bool link_majorant = true;      // sqrt(w(Omega)) <= W(Omega)
  bool link_cauchy = true;        // int |f| W <= ||f||_w ||Rh||_w
  bool link_norm = true;          // ||Rh||_w <= 2 ||h||_w + slack
  MajorantReport majorant;
};

// Runs the extrapolation argument at height 1 for the plain operator on L^2(w).
WeakTransferReport weak_transfer_check(const DiscretizedOperator& T, const Weight& w, const PhiFunction& phi,
                                       const GridFunction& f, const MajorantOptions& options = {});

}  // namespace corona_lab
