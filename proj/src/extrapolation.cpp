#include "corona_lab/extrapolation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "corona_lab/errors.hpp"
#include "corona_lab/pivotal.hpp"
#include "corona_lab/util.hpp"

namespace corona_lab {

GridFunction s_w(const GridFunction& f, const Weight& w) {
  const Grid& grid = w.grid();
  require(static_cast<Index>(f.size()) == grid.size(), ErrorKind::Parameter, "function has the wrong size");
  GridFunction fw(f.size());
  for (std::size_t c = 0; c < f.size(); ++c) fw[c] = std::abs(f[c]) * w.values()[c];
  GridFunction out = maximal_function(fw, grid);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] /= w.values()[c];
  return out;
}

namespace {

Weight wide_weight(const Grid& grid, std::vector<double> values) {
  return Weight(grid, std::move(values), Clamp{1e-300, 1e300});
}

double ratio_of(const GridFunction& f, const Weight& w, const Measure& wm, GridFunction* image) {
  const double n = wm.norm(f);
  if (n <= 0.0) return 0.0;
  GridFunction g = s_w(f, w);
  const double r = wm.norm(g) / n;
  if (image) *image = std::move(g);
  return r;
}

}  // namespace

SwNormReport sw_norm(const Weight& w, const SwNormOptions& options) {
  const Grid& grid = w.grid();
  const Measure wm = w.nu();
  const auto n = static_cast<std::size_t>(grid.size());
  std::vector<std::pair<std::string, GridFunction>> seeds;
  seeds.emplace_back("one", GridFunction(n, 1.0));
  {
    GridFunction inv(n);
    for (std::size_t c = 0; c < n; ++c) inv[c] = 1.0 / w.values()[c];
    seeds.emplace_back("inverse_weight", std::move(inv));
  }
  // 1/w on the standard cubes around the extreme cells of w.
  const auto& v = w.values();
  const auto lo = static_cast<Index>(std::min_element(v.begin(), v.end()) - v.begin());
  const auto hi = static_cast<Index>(std::max_element(v.begin(), v.end()) - v.begin());
  Lattice standard;
  standard.dim = grid.dim;
  standard.grid_level = grid.level;
  for (Index cell : {lo, hi}) {
    for (int level = 0; level <= grid.level; ++level) {
      const Cube q = standard.containing(grid.coords(cell), level);
      GridFunction f(n, 0.0);
      for (Index c : q.cells(grid)) f[static_cast<std::size_t>(c)] = 1.0 / w[c];
      seeds.emplace_back("inverse_weight_on:" + q.describe(), std::move(f));
    }
  }
  Rng rng(options.seed);
  for (int p = 0; p < options.random_probes; ++p) {
    GridFunction f(n);
    for (auto& x : f) x = rng.uniform01();
    seeds.emplace_back("random:" + std::to_string(p), std::move(f));
  }

  std::vector<double> best(seeds.size(), 0.0);
  parallel_for(seeds.size(), [&](std::size_t s) {
    GridFunction f = seeds[s].second;
    double prev = 0.0;
    for (int step = 0; step < std::max(1, options.orbit_steps); ++step) {
      GridFunction image;
      const double r = ratio_of(f, w, wm, &image);
      best[s] = std::max(best[s], r);
      if (r <= 0.0 || std::abs(r - prev) <= options.tol * r) break;
      prev = r;
      const double scale = wm.norm(image);
      for (auto& x : image) x /= scale;
      f = std::move(image);
    }
  });
  SwNormReport rep;
  rep.probes = static_cast<std::int64_t>(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (best[s] > rep.value) {
      rep.value = best[s];
      rep.best_probe = seeds[s].first;
    }
  }
  return rep;
}

GridFunction rubio_de_francia(const GridFunction& h, const Weight& w, MajorantReport& report,
                              const MajorantOptions& options) {
  const Grid& grid = w.grid();
  require(static_cast<Index>(h.size()) == grid.size(), ErrorKind::Parameter, "function has the wrong size");
  require(std::all_of(h.begin(), h.end(), [](double x) { return x >= 0.0; }), ErrorKind::Parameter,
          "h must be nonnegative");
  const Measure wm = w.nu();
  report = MajorantReport{};
  report.norm_h = wm.norm(h);
  require(report.norm_h > 0.0, ErrorKind::Parameter, "h must have positive norm");
  double N = options.sw_norm > 0.0 ? options.sw_norm : sw_norm(w, options.norm).value;

  // Unit orbit e_k with S_w e_k = ratio_k e_{k+1}.
  std::vector<GridFunction> orbit;
  std::vector<double> ratios;
  GridFunction e = h;
  for (auto& x : e) x /= report.norm_h;
  double log_coeff = 0.0;  // log of prod ratio_i / (2N) for the next term
  bool cut = false;
  while (static_cast<int>(orbit.size()) < options.max_terms) {
    GridFunction image;
    const double r = ratio_of(e, w, wm, &image);
    orbit.push_back(e);
    ratios.push_back(r);
    N = std::max(N, r);
    log_coeff += std::log(r / (2.0 * N));
    if (log_coeff <= std::log(options.tol) || r == 0.0) {
      cut = true;
      break;
    }
    for (auto& x : image) x /= r;
    e = std::move(image);
  }
  if (!cut) {
    fail(ErrorKind::Convergence, "majorant series did not reach the tolerance in " +
                                     std::to_string(options.max_terms) +
                                     " terms; re-estimate the norm of S_w");
  }
  report.operator_norm_Sw = N;
  report.truncation_k = static_cast<int>(orbit.size());
  GridFunction Rh(h.size(), 0.0);
  double coeff = 1.0;
  for (std::size_t k = 0; k < orbit.size(); ++k) {
    if (ratios[k] / (2.0 * N) > 0.5 * (1.0 + 1e-12)) {
      fail(ErrorKind::Convergence, "majorant series is not decaying; re-estimate the norm of S_w");
    }
    for (std::size_t c = 0; c < Rh.size(); ++c) Rh[c] += coeff * report.norm_h * orbit[k][c];
    coeff *= ratios[k] / (2.0 * N);
  }
  report.truncation_slack = coeff;
  report.norm_Rh = wm.norm(Rh);
  for (std::size_t c = 0; c < h.size(); ++c) {
    if (Rh[c] < h[c]) report.majorizes = false;
  }
  const GridFunction SR = s_w(Rh, w);
  for (std::size_t c = 0; c < Rh.size(); ++c) {
    if (Rh[c] > 0.0) report.ratio_max = std::max(report.ratio_max, SR[c] / Rh[c]);
  }
  std::vector<double> W(h.size());
  for (std::size_t c = 0; c < W.size(); ++c) W[c] = w.values()[c] * Rh[c];
  if (std::all_of(W.begin(), W.end(), [](double x) { return x > 0.0; })) {
    report.a1_of_wRh = a1_norm(wide_weight(grid, W), grid.dim == 1 ? CubeFamily::AllAligned : CubeFamily::Dyadic);
  } else {
    report.a1_of_wRh = std::numeric_limits<double>::infinity();
  }
  return Rh;
}

double phi_linear(double t) { return t; }

double phi_loglinear(double t) { return t * std::log1p(t); }

PhiFunction phi_by_name(const std::string& name) {
  if (name == "linear") return phi_linear;
  if (name == "loglinear") return phi_loglinear;
  fail(ErrorKind::Config, "unknown phi '" + name + "' (expected linear or loglinear)");
}

WeakTransferReport weak_transfer_check(const DiscretizedOperator& T, const Weight& w, const PhiFunction& phi,
                                       const GridFunction& f, const MajorantOptions& options) {
  const Grid& grid = w.grid();
  require(T.grid() == grid, ErrorKind::Parameter, "operator and weight live on different grids");
  const Measure wm = w.nu();
  WeakTransferReport rep;
  rep.f_norm = wm.norm(f);
  rep.a2 = a2_norm(w);
  rep.phi_of_a2 = phi(rep.a2);
  const GridFunction Tf = T.apply(f);
  GridFunction omega(f.size(), 0.0);
  KahanSum wo;
  for (std::size_t c = 0; c < f.size(); ++c) {
    if (std::abs(Tf[c]) > 1.0) {
      omega[c] = 1.0;
      wo.add(wm.cell_mass(static_cast<Index>(c)));
    }
  }
  rep.w_omega = wo.value();
  rep.sqrt_w_omega = std::sqrt(rep.w_omega);
  if (rep.w_omega == 0.0) return rep;

  // Extremal h for w(Omega)^{1/2} = sup { int_Omega h w : ||h||_w = 1 }.
  GridFunction h(f.size());
  for (std::size_t c = 0; c < h.size(); ++c) h[c] = omega[c] / rep.sqrt_w_omega;
  const GridFunction Rh = rubio_de_francia(h, w, rep.majorant, options);
  rep.Rh_norm = rep.majorant.norm_Rh;
  KahanSum Wo, fW;
  const double cell = grid.cell_volume();
  for (std::size_t c = 0; c < h.size(); ++c) {
    const double W = w.values()[c] * Rh[c];
    if (omega[c] != 0.0) Wo.add(W * cell);
    fW.add(std::abs(f[c]) * W * cell);
  }
  rep.W_omega = Wo.value();
  rep.int_fW = fW.value();
  rep.a1_W = rep.majorant.a1_of_wRh;
  rep.phi_a1 = phi(rep.a1_W);
  rep.weak_l1_constant = rep.int_fW > 0.0 ? rep.W_omega / (rep.phi_a1 * rep.int_fW) : 0.0;
  rep.weak_proxy = rep.f_norm > 0.0 ? rep.sqrt_w_omega / rep.f_norm : 0.0;
  rep.final_ratio = rep.phi_of_a2 > 0.0 ? rep.weak_proxy / rep.phi_of_a2 : 0.0;
  const double slack = 1e-12;
  rep.link_majorant = rep.sqrt_w_omega <= rep.W_omega * (1.0 + slack);
  rep.link_cauchy = rep.int_fW <= rep.f_norm * rep.Rh_norm * (1.0 + slack);
  rep.link_norm = rep.Rh_norm <= (2.0 + 2.0 * rep.majorant.truncation_slack) * rep.majorant.norm_h * (1.0 + slack);
  return rep;
}

}  // namespace corona_lab
