#include "corona_lab/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "corona_lab/errors.hpp"
#include "corona_lab/util.hpp"

namespace corona_lab {

KernelSpec hilbert_kernel() {
  KernelSpec k;
  k.name = "hilbert";
  k.dim = 1;
  k.epsilon = 1.0;
  k.size_constant = 1.0;
  k.smooth_constant = 2.0;
  k.evaluate = [](const Point& x, const Point& y) { return 1.0 / (x[0] - y[0]); };
  return k;
}

KernelSpec zero_kernel(int dim) {
  KernelSpec k;
  k.name = "zero";
  k.dim = dim;
  k.evaluate = [](const Point&, const Point&) { return 0.0; };
  return k;
}

KernelSpec dyadic_kernel() {
  KernelSpec k;
  k.name = "dyadic";
  k.dim = 1;
  k.epsilon = 1.0;
  k.size_constant = 1.0;
  k.smooth_constant = std::numeric_limits<double>::infinity();
  k.evaluate = [](const Point& x, const Point& y) {
    if (x[0] == y[0]) return 0.0;
    int level = 0;
    while (level < 60 && std::floor(std::ldexp(x[0], level + 1)) == std::floor(std::ldexp(y[0], level + 1))) ++level;
    const double value = std::ldexp(1.0, level);
    const double sign = (x[0] > y[0] ? 1.0 : -1.0) * (level % 2 == 0 ? 1.0 : -1.0);
    return sign * value;
  };
  return k;
}

KernelSpec kernel_by_name(const std::string& name, int dim) {
  if (name == "hilbert") {
    require(dim == 1, ErrorKind::Config, "the hilbert kernel is one-dimensional");
    return hilbert_kernel();
  }
  if (name == "zero") return zero_kernel(dim);
  if (name == "dyadic") {
    require(dim == 1, ErrorKind::Config, "the dyadic kernel is one-dimensional");
    return dyadic_kernel();
  }
  fail(ErrorKind::Config, "unknown kernel '" + name + "'");
}

RegularityReport kernel_regularity_check(const KernelSpec& kernel, std::int64_t samples, std::uint64_t seed) {
  require(samples >= 1, ErrorKind::Parameter, "samples must be >= 1");
  RegularityReport report;
  report.samples = samples;
  Rng rng(seed);
  const int d = kernel.dim;
  auto dist = [d](const Point& a, const Point& b) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  };
  constexpr double kSlack = 1e-9;
  for (std::int64_t i = 0; i < samples; ++i) {
    Point x{}, y{}, xp{};
    for (int k = 0; k < d; ++k) {
      x[k] = rng.uniform01();
      y[k] = rng.uniform01();
    }
    const double r = dist(x, y);
    if (r == 0.0) continue;
    // x' at distance up to r / 2 in a random direction.
    Point dir{};
    double norm = 0.0;
    for (int k = 0; k < d; ++k) {
      dir[k] = rng.normal();
      norm += dir[k] * dir[k];
    }
    norm = std::sqrt(norm);
    const double step = 0.5 * r * rng.uniform01();
    for (int k = 0; k < d; ++k) xp[k] = x[k] + (norm > 0.0 ? dir[k] / norm : 0.0) * step;
    const double h = dist(x, xp);

    const double size_ratio = std::abs(kernel.evaluate(x, y)) * std::pow(r, d) / kernel.size_constant;
    report.worst_size_ratio = std::max(report.worst_size_ratio, size_ratio);
    if (!std::isfinite(kernel.smooth_constant) || h == 0.0) continue;
    const double bound = kernel.smooth_constant * std::pow(h, kernel.epsilon) / std::pow(r, d + kernel.epsilon);
    // Each of the two differences separately.
    const double first = std::abs(kernel.evaluate(x, y) - kernel.evaluate(xp, y)) / bound;
    const double second = std::abs(kernel.evaluate(y, x) - kernel.evaluate(y, xp)) / bound;
    const double ratio = std::max(first, second);
    if (ratio > report.worst_smooth_ratio) {
      report.worst_smooth_ratio = ratio;
      report.x = x;
      report.y = y;
      report.x_prime = xp;
    }
  }
  report.passed = report.worst_size_ratio <= 1.0 + kSlack && report.worst_smooth_ratio <= 1.0 + kSlack;
  return report;
}

// ---------------------------------------------------------------------------

DiscretizedOperator DiscretizedOperator::from_kernel(const KernelSpec& kernel, const Grid& grid) {
  require(kernel.dim == grid.dim, ErrorKind::Parameter, "kernel and grid dimensions differ");
  require(static_cast<bool>(kernel.evaluate), ErrorKind::Parameter, "kernel has no evaluator");
  DiscretizedOperator T;
  T.grid_ = grid;
  T.name_ = kernel.name;
  T.epsilon_ = kernel.epsilon;
  T.smooth_constant_ = kernel.smooth_constant;
  const Index n = grid.size();
  T.matrix_ = Eigen::MatrixXd::Zero(n, n);
  const double vol = grid.cell_volume();
  std::vector<Point> mids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) mids[static_cast<std::size_t>(i)] = grid.midpoint(i);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    for (Index j = 0; j < n; ++j) {
      if (static_cast<Index>(i) == j) continue;
      T.matrix_(static_cast<Index>(i), j) = kernel.evaluate(mids[i], mids[static_cast<std::size_t>(j)]) * vol;
    }
  });
  require(T.matrix_.allFinite(), ErrorKind::Parameter, "kernel produced non-finite entries");
  return T;
}

DiscretizedOperator DiscretizedOperator::from_matrix(const Grid& grid, Eigen::MatrixXd matrix, std::string name) {
  require(matrix.rows() == grid.size() && matrix.cols() == grid.size(), ErrorKind::Parameter,
          "matrix does not match the grid");
  DiscretizedOperator T;
  T.grid_ = grid;
  T.matrix_ = std::move(matrix);
  T.name_ = std::move(name);
  T.smooth_constant_ = std::numeric_limits<double>::infinity();
  return T;
}

namespace {

Eigen::VectorXd to_vec(const GridFunction& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
}

GridFunction to_fn(const Eigen::VectorXd& v) { return GridFunction(v.data(), v.data() + v.size()); }

Eigen::VectorXd sqrt_density(const Measure& m) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(m.density.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = std::sqrt(m.density[static_cast<std::size_t>(i)]);
  return s;
}

}  // namespace

GridFunction DiscretizedOperator::apply(const GridFunction& f) const {
  require(static_cast<Index>(f.size()) == grid_.size(), ErrorKind::Parameter, "function has the wrong size");
  return to_fn(matrix_ * to_vec(f));
}

GridFunction DiscretizedOperator::apply(const GridFunction& f, const Measure& m) const {
  require(static_cast<Index>(f.size()) == grid_.size(), ErrorKind::Parameter, "function has the wrong size");
  Eigen::VectorXd v = to_vec(f).cwiseProduct(to_vec(m.density));
  return to_fn(matrix_ * v);
}

DiscretizedOperator DiscretizedOperator::transpose() const {
  DiscretizedOperator T;
  T.grid_ = grid_;
  T.matrix_ = matrix_.transpose();
  T.name_ = name_ + "'";
  T.epsilon_ = epsilon_;
  T.smooth_constant_ = smooth_constant_;
  return T;
}

// ---------------------------------------------------------------------------

NormEstimate matrix_norm(const Eigen::MatrixXd& A, const PowerOptions& options) {
  require(options.iters >= 1, ErrorKind::Parameter, "iters must be >= 1");
  NormEstimate out;
  Rng rng(options.seed);
  Eigen::VectorXd v(A.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 1.0 + 0.5 * rng.normal();
  v.normalize();
  double value = 0.0;
  double checkpoint = -1.0;
  out.converged = false;
  for (int it = 1; it <= options.iters; ++it) {
    const Eigen::VectorXd u = A * v;
    value = u.norm();
    out.iterations = it;
    if (value == 0.0) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd next = A.transpose() * u;
    const double nn = next.norm();
    if (nn == 0.0) {
      out.converged = true;
      break;
    }
    v = next / nn;
    if (it % 10 == 0) {
      if (checkpoint > 0.0 && std::abs(value - checkpoint) <= options.tol * value) {
        out.converged = true;
        break;
      }
      checkpoint = value;
    }
  }
  out.value = value;
  out.maximizer = to_fn(v);
  if (!out.converged) {
    out.warning = "power iteration did not converge; value is the last Rayleigh estimate (a lower bound)";
  }
  return out;
}

NormEstimate strong_norm(const DiscretizedOperator& T, const Measure& mu, const Measure& nu, const PowerOptions& options) {
  const Eigen::VectorXd smu = sqrt_density(mu), snu = sqrt_density(nu);
  const Eigen::MatrixXd A = snu.asDiagonal() * T.matrix() * smu.asDiagonal();
  NormEstimate est = matrix_norm(A, options);
  const double h = std::sqrt(mu.grid.cell_volume());
  for (std::size_t i = 0; i < est.maximizer.size(); ++i) {
    est.maximizer[i] /= smu(static_cast<Eigen::Index>(i)) * h;
  }
  return est;
}

double dense_strong_norm(const DiscretizedOperator& T, const Measure& mu, const Measure& nu) {
  const Eigen::VectorXd smu = sqrt_density(mu), snu = sqrt_density(nu);
  const Eigen::MatrixXd A = snu.asDiagonal() * T.matrix() * smu.asDiagonal();
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

NormEstimate plain_weighted_norm(const DiscretizedOperator& T, const Measure& w, const PowerOptions& options) {
  const Eigen::VectorXd sw = sqrt_density(w);
  const Eigen::MatrixXd A = sw.asDiagonal() * T.matrix() * sw.cwiseInverse().asDiagonal();
  NormEstimate est = matrix_norm(A, options);
  const double h = std::sqrt(w.grid.cell_volume());
  for (std::size_t i = 0; i < est.maximizer.size(); ++i) {
    est.maximizer[i] /= sw(static_cast<Eigen::Index>(i)) * h;
  }
  return est;
}

double weak_ratio(const GridFunction& Tf, const Measure& w, double f_norm) {
  if (f_norm <= 0.0) return 0.0;
  std::vector<std::size_t> order(Tf.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double va = std::abs(Tf[a]), vb = std::abs(Tf[b]);
    return va != vb ? va > vb : a < b;
  });
  KahanSum mass;
  double best = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double v = std::abs(Tf[order[k]]);
    if (v == 0.0) break;
    mass.add(w.cell_mass(static_cast<Index>(order[k])));
    best = std::max(best, v * std::sqrt(mass.value()));
  }
  return best / f_norm;
}

namespace {

struct Probe {
  std::string name;
  GridFunction f;
};

std::vector<Cube> standard_cubes(const Grid& grid, int max_level) {
  const Lattice lattice{grid.dim, grid.level, {0, 0, 0}, 0};
  return lattice.descendants(lattice.top(), max_level);
}

void evaluate_probes(const DiscretizedOperator& T, const Measure& w, const std::vector<Probe>& probes, WeakReport& report) {
  if (probes.empty()) return;
  const Index n = T.grid().size();
  constexpr Index kBatch = 256;
  for (std::size_t start = 0; start < probes.size(); start += kBatch) {
    const Index count = std::min<Index>(kBatch, static_cast<Index>(probes.size() - start));
    Eigen::MatrixXd P(n, count);
    for (Index c = 0; c < count; ++c) P.col(c) = to_vec(probes[start + static_cast<std::size_t>(c)].f);
    const Eigen::MatrixXd Y = T.matrix() * P;
    for (Index c = 0; c < count; ++c) {
      const GridFunction& f = probes[start + static_cast<std::size_t>(c)].f;
      const double fn = w.norm(f);
      if (fn <= 0.0) continue;
      const GridFunction y = to_fn(Y.col(c));
      const double weak = weak_ratio(y, w, fn);
      const double strong = w.norm(y) / fn;
      ++report.probes;
      report.strong_lower = std::max(report.strong_lower, strong);
      if (weak > report.weak) {
        report.weak = weak;
        report.best_probe = probes[start + static_cast<std::size_t>(c)].name;
      }
    }
  }
}

}  // namespace

WeakReport weak_norm(const DiscretizedOperator& T, const Measure& w, const WeakOptions& options) {
  const Grid& grid = T.grid();
  const auto n = static_cast<std::size_t>(grid.size());
  std::vector<Probe> probes;
  if (options.indicators || options.haar) {
    for (const Cube& c : standard_cubes(grid, grid.level)) {
      if (options.indicators) {
        GridFunction f(n, 0.0);
        for (Index cell : c.cells(grid)) f[static_cast<std::size_t>(cell)] = 1.0;
        probes.push_back({"indicator " + c.describe(), std::move(f)});
      }
      if (options.haar && c.level < grid.level) {
        GridFunction f(n, 0.0);
        const Index half = c.lo[0] + c.side_cells() / 2;
        for (Index cell : c.cells(grid)) f[static_cast<std::size_t>(cell)] = grid.coords(cell)[0] < half ? 1.0 : -1.0;
        probes.push_back({"haar " + c.describe(), std::move(f)});
      }
    }
  }
  if (options.singular_vector) {
    probes.push_back({"top singular vector", plain_weighted_norm(T, w, options.power).maximizer});
  }
  Rng rng(options.seed);
  for (int p = 0; p < options.random_probes; ++p) {
    GridFunction f(n);
    for (auto& v : f) v = rng.normal();
    probes.push_back({"random " + std::to_string(p), std::move(f)});
  }
  for (std::size_t e = 0; e < options.extra.size(); ++e) {
    probes.push_back({"extra " + std::to_string(e), options.extra[e]});
  }
  require(!probes.empty(), ErrorKind::Parameter, "probe family is empty");
  WeakReport report;
  evaluate_probes(T, w, probes, report);
  return report;
}

TestConstantReport test_constant_cubes(const DiscretizedOperator& T, const Measure& mu, const Measure& nu,
                                       std::vector<Cube> cubes) {
  const Grid& grid = T.grid();
  const Index n = grid.size();
  const double h = grid.cell_volume();
  TestConstantReport report;
  const Eigen::VectorXd dmu = to_vec(mu.density), dnu = to_vec(nu.density);
  auto weighted_sq = [h](const Eigen::VectorXd& y, const Eigen::VectorXd& dens) {
    return y.cwiseProduct(y).dot(dens) * h;
  };
  cubes.erase(std::remove_if(cubes.begin(), cubes.end(), [](const Cube& c) { return !c.meets_domain(); }),
              cubes.end());
  report.cubes = std::move(cubes);
  const auto m = static_cast<Index>(report.cubes.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, m), Z = Eigen::MatrixXd::Zero(n, m);
  std::vector<double> mass_mu(report.cubes.size()), mass_nu(report.cubes.size());
  for (Index c = 0; c < m; ++c) {
    const Cube& cube = report.cubes[static_cast<std::size_t>(c)];
    for (Index cell : cube.cells(grid)) {
      X(cell, c) = dmu(cell);
      Z(cell, c) = dnu(cell);
    }
    mass_mu[static_cast<std::size_t>(c)] = mu.mass(cube);
    mass_nu[static_cast<std::size_t>(c)] = nu.mass(cube);
  }
  const Eigen::MatrixXd Y = T.matrix() * X;
  const Eigen::MatrixXd W = T.matrix().transpose() * Z;
  report.forward_ratio.resize(report.cubes.size());
  report.dual_ratio.resize(report.cubes.size());
  for (Index c = 0; c < m; ++c) {
    const auto i = static_cast<std::size_t>(c);
    report.forward_ratio[i] = weighted_sq(Y.col(c), dnu) / mass_mu[i];
    report.dual_ratio[i] = weighted_sq(W.col(c), dmu) / mass_nu[i];
    report.forward = std::max(report.forward, report.forward_ratio[i]);
    report.dual = std::max(report.dual, report.dual_ratio[i]);
  }
  report.K_chi = std::max(report.forward, report.dual);
  return report;
}

TestConstantReport test_constant(const DiscretizedOperator& T, const Measure& mu, const Measure& nu, CubeFamily family) {
  const Grid& grid = T.grid();
  const Index n = grid.size();
  const double h = grid.cell_volume();
  TestConstantReport report;
  const Eigen::VectorXd dmu = to_vec(mu.density), dnu = to_vec(nu.density);
  auto weighted_sq = [h](const Eigen::VectorXd& y, const Eigen::VectorXd& dens) {
    return y.cwiseProduct(y).dot(dens) * h;
  };
  if (family == CubeFamily::Dyadic) {
    return test_constant_cubes(T, mu, nu, standard_cubes(grid, grid.level));
  }
  if (grid.dim == 1) {
    // Column prefix sums give T applied to every interval indicator.
    auto sweep = [&](const Eigen::MatrixXd& M, const Eigen::VectorXd& src, const Eigen::VectorXd& dst, double& best) {
      Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(n, n + 1);
      std::vector<double> mass(static_cast<std::size_t>(n + 1), 0.0);
      KahanSum acc;
      for (Index j = 0; j < n; ++j) {
        prefix.col(j + 1) = prefix.col(j) + M.col(j) * src(j);
        acc.add(src(j) * h);
        mass[static_cast<std::size_t>(j + 1)] = acc.value();
      }
      std::vector<double> local(static_cast<std::size_t>(n), 0.0);
      parallel_for(static_cast<std::size_t>(n), [&](std::size_t a) {
        const auto ai = static_cast<Index>(a);
        for (Index b = ai + 1; b <= n; ++b) {
          const double m = mass[static_cast<std::size_t>(b)] - mass[a];
          if (m <= 0.0) continue;
          local[a] = std::max(local[a], weighted_sq(prefix.col(b) - prefix.col(ai), dst) / m);
        }
      });
      best = *std::max_element(local.begin(), local.end());
    };
    sweep(T.matrix(), dmu, dnu, report.forward);
    const Eigen::MatrixXd Mt = T.matrix().transpose();
    sweep(Mt, dnu, dmu, report.dual);
  } else {
    // Every grid-aligned cube, one at a time.
    const Index side = grid.side();
    for (Index s = 1; s <= side; ++s) {
      const Index count = side - s + 1;
      IVec m{0, 0, 0};
      while (true) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n), z = Eigen::VectorXd::Zero(n);
        double mm = 0.0, mn = 0.0;
        IVec c = m;
        while (true) {
          const Index id = grid.linear(c);
          x(id) = dmu(id);
          z(id) = dnu(id);
          mm += dmu(id) * h;
          mn += dnu(id) * h;
          int k = 0;
          for (; k < grid.dim; ++k) {
            if (++c[k] < m[k] + s) break;
            c[k] = m[k];
          }
          if (k == grid.dim) break;
        }
        report.forward = std::max(report.forward, weighted_sq(T.matrix() * x, dnu) / mm);
        report.dual = std::max(report.dual, weighted_sq(T.matrix().transpose() * z, dmu) / mn);
        int k = 0;
        for (; k < grid.dim; ++k) {
          if (++m[k] < count) break;
          m[k] = 0;
        }
        if (k == grid.dim) break;
      }
    }
  }
  report.K_chi = std::max(report.forward, report.dual);
  return report;
}

LorentzReport lorentz_duality_check(const DiscretizedOperator& T, const Weight& w, CubeFamily family,
                                    const LorentzOptions& options) {
  const Grid& grid = T.grid();
  const Measure mu = w.mu(), nu = w.nu();
  const TestConstantReport dyadic = test_constant(T, mu, nu, CubeFamily::Dyadic);
  const double K_chi = family == CubeFamily::Dyadic ? dyadic.K_chi : test_constant(T, mu, nu, family).K_chi;

  auto top_cubes = [&](const std::vector<double>& ratios) {
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return ratios[a] != ratios[b] ? ratios[a] > ratios[b] : a < b;
    });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(options.enriched_cubes)));
    return order;
  };
  const auto n = static_cast<std::size_t>(grid.size());
  const DiscretizedOperator Tt = T.transpose();

  // Probes for T on L^2(w): T'(chi_I w) / w for cubes with large dual ratio.
  WeakOptions forward_opts = options.weak;
  for (std::size_t idx : top_cubes(dyadic.dual_ratio)) {
    GridFunction chi(n, 0.0);
    for (Index c : dyadic.cubes[idx].cells(grid)) chi[static_cast<std::size_t>(c)] = 1.0;
    GridFunction f = Tt.apply(chi, nu);
    for (std::size_t i = 0; i < n; ++i) f[i] /= w.values()[i];
    forward_opts.extra.push_back(std::move(f));
  }
  // Probes for T' on L^2(1/w): T(chi_I / w) w for cubes with large forward ratio.
  WeakOptions dual_opts = options.weak;
  for (std::size_t idx : top_cubes(dyadic.forward_ratio)) {
    GridFunction chi(n, 0.0);
    for (Index c : dyadic.cubes[idx].cells(grid)) chi[static_cast<std::size_t>(c)] = 1.0;
    GridFunction g = T.apply(chi, mu);
    for (std::size_t i = 0; i < n; ++i) g[i] *= w.values()[i];
    dual_opts.extra.push_back(std::move(g));
  }
  const WeakReport wt = weak_norm(T, nu, forward_opts);
  const WeakReport wd = weak_norm(Tt, mu, dual_opts);
  LorentzReport report;
  report.lhs = std::sqrt(K_chi);
  report.weak_T = wt.weak;
  report.weak_T_dual = wd.weak;
  report.rhs = wt.weak + wd.weak;
  report.margin = report.rhs - report.lhs;
  report.strong_lower = wt.strong_lower;
  return report;
}

NormReport norm_report(const DiscretizedOperator& T, const Weight& w, CubeFamily family, const PowerOptions& power,
                       const LorentzOptions& lorentz) {
  NormReport report;
  const Measure mu = w.mu(), nu = w.nu();
  const NormEstimate est = strong_norm(T, mu, nu, power);
  report.strong_power = est.value;
  report.converged = est.converged;
  report.iterations = est.iterations;
  LorentzOptions lopts = lorentz;
  lopts.weak.power = power;
  const LorentzReport lr = lorentz_duality_check(T, w, family, lopts);
  report.weak = lr.weak_T;
  report.weak_dual = lr.weak_T_dual;
  report.lorentz_lhs = lr.lhs;
  report.lorentz_rhs = lr.rhs;
  report.K_chi = lr.lhs * lr.lhs;
  report.strong = std::max(est.value, lr.strong_lower);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

double sup_distance(const Point& a, const Point& b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s = std::max(s, std::abs(a[k] - b[k]));
  return s;
}

double euclid(const Point& a, const Point& b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

NormEstimate weighted_kernel_norm(const Grid& grid, const Measure& mu, const Measure& nu, const PowerOptions& options,
                                  const std::function<double(const Point&, const Point&)>& kernel) {
  const Index n = grid.size();
  Eigen::MatrixXd K(n, n);
  const double h = grid.cell_volume();
  std::vector<Point> mids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) mids[static_cast<std::size_t>(i)] = grid.midpoint(i);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    for (Index j = 0; j < n; ++j) K(static_cast<Index>(i), j) = kernel(mids[i], mids[static_cast<std::size_t>(j)]) * h;
  });
  return strong_norm(DiscretizedOperator::from_matrix(grid, std::move(K), "kernel"), mu, nu, options);
}

}  // namespace

NormEstimate poisson_averaging_norm(double y, const Measure& mu, const Measure& nu, double epsilon,
                                    const PowerOptions& options) {
  require(y > 0.0, ErrorKind::Parameter, "y must be positive");
  const int d = mu.grid.dim;
  const double num = std::pow(y, epsilon);
  return weighted_kernel_norm(mu.grid, mu, nu, options, [=](const Point& a, const Point& b) {
    return num / std::pow(y + euclid(a, b, d), d + epsilon);
  });
}

double averaging_grid_norm(int level, const IVec& shift, const Measure& mu, const Measure& nu) {
  const Lattice lattice{mu.grid.dim, mu.grid.level, shift, 0};
  double best = 0.0;
  for (const Cube& Q : lattice.cubes_at_level(level)) {
    const double v = Q.volume();
    best = std::max(best, mu.mass(Q) * nu.mass(Q) / (v * v));
  }
  return std::sqrt(best);
}

NormEstimate window_average_norm(double radius, const Measure& mu, const Measure& nu, const PowerOptions& options) {
  require(radius > 0.0, ErrorKind::Parameter, "radius must be positive");
  const int d = mu.grid.dim;
  const double scale = 1.0 / std::pow(2.0 * radius, d);
  return weighted_kernel_norm(mu.grid, mu, nu, options, [=](const Point& a, const Point& b) {
    return sup_distance(a, b, d) < radius ? scale : 0.0;
  });
}

}  // namespace corona_lab
