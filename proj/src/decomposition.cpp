#include "corona_lab/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "corona_lab/errors.hpp"
#include "corona_lab/pivotal.hpp"
#include "corona_lab/util.hpp"

namespace corona_lab {

const char* to_string(PairClass cls) {
  switch (cls) {
    case PairClass::Diagonal: return "diagonal";
    case PairClass::LongRange1: return "long_range_1";
    case PairClass::LongRange2: return "long_range_2";
    case PairClass::MidRange1: return "mid_range_1";
    case PairClass::MidRange2: return "mid_range_2";
    case PairClass::ShortRangeTau: return "short_range_tau";
    case PairClass::ShortRangeRho: return "short_range_rho";
    case PairClass::DiscardedBad: return "discarded_bad";
  }
  return "unknown";
}

double long_range_constant(int dim, double epsilon, double smooth_constant) {
  return smooth_constant * std::pow(std::sqrt(double(dim)) / 2.0, epsilon) * std::pow(3.0, dim + epsilon);
}

double neighbor_constant(int dim, double epsilon, double smooth_constant) {
  return smooth_constant * std::pow(std::sqrt(double(dim)) / 2.0, epsilon) * std::pow(2.0, dim + epsilon);
}

double stopping_constant(int dim, double epsilon, double smooth_constant) {
  const double rd = std::sqrt(double(dim));
  return smooth_constant * std::pow(rd / 2.0, epsilon) * std::pow(2.0, epsilon) *
         std::pow(2.0 + rd / 2.0, dim + epsilon);
}

namespace {

using Vec = Eigen::VectorXd;

Vec to_vec(const GridFunction& f) { return Eigen::Map<const Vec>(f.data(), static_cast<Index>(f.size())); }

GridFunction to_fn(const Vec& v) { return GridFunction(v.data(), v.data() + v.size()); }

double cell_sum(const Vec& z, const Cube& cube, const Grid& grid) {
  KahanSum acc;
  for (Index c : cube.cells(grid)) acc.add(z(c));
  return acc.value();
}

double safe_ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

void note(AuditSummary& audit, double value, double bound) {
  ++audit.checked;
  audit.worst_ratio = std::max(audit.worst_ratio, safe_ratio(std::abs(value), bound));
}

int son_containing(const Cube& outer, const Cube& inner, std::vector<Cube>* sons_out = nullptr) {
  const auto sons = children(outer);
  int found = -1;
  for (std::size_t s = 0; s < sons.size(); ++s) {
    if (sons[s].contains(inner)) {
      found = static_cast<int>(s);
      break;
    }
  }
  if (sons_out) *sons_out = sons;
  return found;
}

// Inner product of two martingale differences on the same cube.
double coeff_inner(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& masses) {
  KahanSum acc;
  for (std::size_t s = 0; s < masses.size(); ++s) acc.add(a[s] * b[s] * masses[s]);
  return acc.value();
}

double coeff_norm_sq(const std::vector<double>& a, const std::vector<double>& masses) {
  return coeff_inner(a, a, masses);
}

// Nonzero coefficients of one decomposition with their functions and norms.
struct CoeffTable {
  std::vector<std::size_t> index;  // into dec.coeffs
  std::vector<Vec> fn;
  std::vector<double> norm;
  std::vector<double> mass;  // measure of the cube
};

CoeffTable table_of(const MartingaleDecomposition& dec, const Measure& m, const std::vector<bool>* skip = nullptr) {
  CoeffTable t;
  for (std::size_t i = 0; i < dec.coeffs.size(); ++i) {
    const Coefficient& co = dec.coeffs[i];
    if (co.is_zero()) continue;
    if (skip && (*skip)[i]) continue;
    t.index.push_back(i);
    t.fn.push_back(to_vec(co.as_function(m.grid)));
    t.norm.push_back(std::sqrt(co.norm_sq(m)));
    t.mass.push_back(m.mass(co.cube));
  }
  return t;
}

// One side of the short-range analysis. The bilinear form reads B(outer, inner) = inner^T A outer.
struct SideInput {
  const Eigen::MatrixXd* A = nullptr;
  const Lattice* outer_lattice = nullptr;
  const Lattice* inner_lattice = nullptr;
  const Measure* outer_m = nullptr;
  const Measure* inner_m = nullptr;
  const MartingaleDecomposition* outer_good = nullptr;
  const MartingaleDecomposition* inner_good = nullptr;
  const std::vector<bool>* inner_bad = nullptr;
  const GridFunction* F = nullptr;  // outer function, good part, no top term
  const StoppingTree* tree = nullptr;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (outer coeff, inner coeff) indices
  int r = 1;
  double epsilon = 1.0;
  double smooth = 2.0;
  double K_chi = 0.0;
  double telescoping_tol = 1e-9;
  bool paraproducts = true;
};

// Function representing B(chi_X, .) in the inner space: A chi_X / (inner density h).
Vec representer(const SideInput& in, const Vec& chi) {
  const Grid& grid = in.inner_m->grid;
  const double h = grid.cell_volume();
  Vec v = (*in.A) * chi;
  for (Index c = 0; c < v.size(); ++c) {
    const double d = in.inner_m->density[static_cast<std::size_t>(c)] * h;
    v(c) = d > 0.0 ? v(c) / d : 0.0;
  }
  return v;
}

Vec indicator(const Cube& cube, const Grid& grid) {
  Vec v = Vec::Zero(grid.size());
  for (Index c : cube.cells(grid)) v(c) = 1.0;
  return v;
}

// Inner cubes that can enter a shell: good, nonzero level offset, with their outer ancestor.
struct EligibleInner {
  std::size_t coeff = 0;  // index into inner decomposition
  Cube outer_anchor;      // l(J)
  int shell = -1;         // owner of l(J) in the tree
  std::vector<double> masses;  // inner measure of the sons of J
};

std::vector<EligibleInner> eligible_inner(const SideInput& in) {
  std::vector<EligibleInner> out;
  const auto& coeffs = in.inner_good->coeffs;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    const Cube& J = coeffs[j].cube;
    if ((*in.inner_bad)[j] || J.level < in.r + 1) continue;
    const Cube anchor = in.outer_lattice->containing(J.lo, J.level - in.r);
    if (!anchor.contains(J)) continue;  // J straddles outer cubes; cannot happen for good J
    const int shell = in.tree->owner(anchor);
    if (shell < 0) continue;
    EligibleInner e;
    e.coeff = j;
    e.outer_anchor = anchor;
    e.shell = shell;
    for (const Cube& s : children(J)) e.masses.push_back(in.inner_m->mass(s));
    out.push_back(std::move(e));
  }
  return out;
}

struct NodeData {
  std::vector<std::vector<double>> own;     // coefficients of B(chi_S, .) per eligible J
  std::vector<std::vector<double>> parent;  // coefficients of B(chi_{S^ \ S}, .) per eligible J
};

std::vector<double> coefficient_values(const Vec& v, const Cube& J, const Measure& m) {
  GridFunction fn = to_fn(v);
  return delta_coefficient(fn, J, m).child_values;
}

void paraproducts(const SideInput& in, const std::vector<EligibleInner>& elig, ShortRangeReport& out) {
  const StoppingTree& tree = *in.tree;
  const Grid& grid = in.outer_m->grid;
  const Measure& om = *in.outer_m;
  const Measure& im = *in.inner_m;
  const std::size_t nodes = tree.nodes.size();
  ParaproductReport& pp = out.paraproducts;
  pp.stopping_cubes = static_cast<int>(nodes);
  pp.eps0 = std::pow(2.0, in.epsilon / 8.0) - 1.0;
  const auto& inner_coeffs = in.inner_good->coeffs;

  // Decompositions of the representers on the eligible inner cubes.
  std::vector<NodeData> data(nodes);
  parallel_for(nodes, [&](std::size_t s) {
    const Cube& S = tree.nodes[s].cube;
    const Vec own = representer(in, indicator(S, grid));
    Vec par = Vec::Zero(grid.size());
    if (s != 0) {
      const Cube& hat = tree.nodes[static_cast<std::size_t>(tree.nodes[s].parent)].cube;
      par = representer(in, indicator(hat, grid)) - own;
    }
    data[s].own.resize(elig.size());
    data[s].parent.resize(elig.size());
    for (std::size_t e = 0; e < elig.size(); ++e) {
      const Cube& J = inner_coeffs[elig[e].coeff].cube;
      data[s].own[e] = coefficient_values(own, J, im);
      if (s != 0) data[s].parent[e] = coefficient_values(par, J, im);
    }
  });

  // in Q_S: l(J) inside S, i.e. S is an ancestor (or equal) of the shell of J
  auto in_Q = [&](std::size_t s, std::size_t e) { return tree.is_ancestor(static_cast<int>(s), elig[e].shell); };

  const GridFunction& F = *in.F;
  std::vector<double> avg_S(nodes), avg_father(nodes, 0.0);
  for (std::size_t s = 0; s < nodes; ++s) {
    avg_S[s] = om.average(tree.nodes[s].cube, F);
    if (s != 0) avg_father[s] = om.average(in.outer_lattice->parent(tree.nodes[s].cube), F);
  }

  // Telescoping pieces.
  KahanSum shells, rho_outer, rho_parent;
  for (std::size_t e = 0; e < elig.size(); ++e) {
    const auto& gvals = inner_coeffs[elig[e].coeff].child_values;
    const auto s = static_cast<std::size_t>(elig[e].shell);
    const double pairing = coeff_inner(data[s].own[e], gvals, elig[e].masses);
    shells.add((om.average(elig[e].outer_anchor, F) - avg_S[s]) * pairing);
    rho_outer.add(avg_S[s] * pairing);
    for (std::size_t t = 1; t < nodes; ++t) {
      if (in_Q(t, e)) rho_parent.add(avg_father[t] * coeff_inner(data[t].parent[e], gvals, elig[e].masses));
    }
  }
  out.telescoping.shells = shells.value();
  out.telescoping.rho_outer = rho_outer.value();
  out.telescoping.rho_parent = rho_parent.value();

  CarlesonOptions copts;
  copts.random_probes = 0;

  // First paraproduct per stopping cube; a_I lives on l(J) = I.
  std::vector<std::pair<Cube, double>> b_seq;
  for (std::size_t s = 0; s < nodes; ++s) {
    std::map<Cube, double> a;
    double b = 0.0;
    for (std::size_t e = 0; e < elig.size(); ++e) {
      if (static_cast<std::size_t>(elig[e].shell) != s) continue;
      const double v = coeff_norm_sq(data[s].own[e], elig[e].masses);
      a[elig[e].outer_anchor] += v;
      b += v;
    }
    const Cube& S = tree.nodes[s].cube;
    b_seq.emplace_back(S, b);
    pp.max_b_ratio = std::max(pp.max_b_ratio, safe_ratio(b, in.K_chi * om.mass(S)));
    std::vector<std::pair<Cube, double>> seq(a.begin(), a.end());
    if (seq.empty()) continue;
    const CarlesonReport rep = carleson_embedding_check(seq, *in.outer_lattice, om, 0.0, copts);
    const double norm = std::sqrt(rep.exact_ratio);
    pp.max_first_norm = std::max(pp.max_first_norm, norm);
    pp.max_first_carleson = std::max(pp.max_first_carleson, rep.carleson_constant);
    if (rep.exact_ratio > 4.0 * rep.carleson_constant * (1.0 + 1e-9) + 1e-300) pp.first_ok = false;
  }
  {
    const CarlesonReport rep = carleson_embedding_check(b_seq, *in.outer_lattice, om, 0.0, copts);
    pp.outer_norm = std::sqrt(rep.exact_ratio);
    pp.b_carleson = rep.carleson_constant;
    pp.outer_ok = rep.exact_ratio <= 4.0 * rep.carleson_constant * (1.0 + 1e-9) && pp.max_b_ratio <= 1.0 + 1e-9;
  }

  // Second paraproduct.
  std::vector<double> u_sq(nodes, 0.0);
  for (std::size_t s = 1; s < nodes; ++s) {
    KahanSum acc;
    for (std::size_t e = 0; e < elig.size(); ++e) {
      if (in_Q(s, e)) acc.add(coeff_norm_sq(data[s].parent[e], elig[e].masses));
    }
    u_sq[s] = acc.value();
  }
  int max_gap = 0;
  for (std::size_t s = 0; s < nodes; ++s) max_gap = std::max(max_gap, tree.nodes[s].generation);
  pp.F.assign(static_cast<std::size_t>(max_gap) + 1, 0.0);
  std::vector<std::vector<double>> a_j(static_cast<std::size_t>(max_gap) + 1, std::vector<double>(nodes, 0.0));
  KahanSum odp;
  for (std::size_t s = 1; s < nodes; ++s) {
    const double x = avg_father[s];
    for (std::size_t t = 1; t < nodes; ++t) {
      const int gap = stopping_distance(tree, static_cast<int>(s), static_cast<int>(t));
      if (gap < 0) continue;
      KahanSum own_sq, cross;
      for (std::size_t e = 0; e < elig.size(); ++e) {
        if (!in_Q(t, e)) continue;
        own_sq.add(coeff_norm_sq(data[s].parent[e], elig[e].masses));
        if (gap > 0) cross.add(coeff_inner(data[s].parent[e], data[t].parent[e], elig[e].masses));
      }
      a_j[static_cast<std::size_t>(gap)][s] += own_sq.value();
      if (gap > 0) odp.add(2.0 * std::abs(x * avg_father[t] * cross.value()));
    }
  }
  for (std::size_t j = 0; j < pp.F.size(); ++j) {
    KahanSum acc;
    for (std::size_t s = 1; s < nodes; ++s) acc.add(avg_father[s] * avg_father[s] * a_j[j][s]);
    pp.F[j] = acc.value();
  }
  pp.DP = pp.F[0];
  pp.ODP = odp.value();
  {
    KahanSum acc;
    for (std::size_t j = 1; j < pp.F.size(); ++j) acc.add(std::pow(1.0 + pp.eps0, double(j)) * pp.F[j]);
    acc.add(pp.F[0] / pp.eps0);
    pp.ODP_bound = acc.value();
  }
  for (std::size_t j = 0; j < a_j.size(); ++j) {
    std::vector<std::pair<Cube, double>> seq;
    for (std::size_t s = 1; s < nodes; ++s) {
      if (a_j[j][s] > 0.0) seq.emplace_back(in.outer_lattice->parent(tree.nodes[s].cube), a_j[j][s]);
    }
    CarlesonOptions only;
    only.random_probes = 0;
    only.exact = false;
    pp.a_j_carleson.push_back(seq.empty() ? 0.0
                                          : carleson_embedding_check(seq, *in.outer_lattice, om, 0.0, only)
                                                .carleson_constant);
  }
  const double f_sq = om.inner(F, F);
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < pp.F.size(); ++j) {
    if (f_sq > 0.0) {
      pp.F_fit_constant = std::max(pp.F_fit_constant, pp.F[j] * std::pow(2.0, j * in.epsilon / 2.0) / f_sq);
    }
    if (pp.F[j] > 0.0) {
      xs.push_back(double(j));
      ys.push_back(std::log2(pp.F[j]));
    }
  }
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= double(xs.size());
    my /= double(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
    pp.F_slope = sxy / sxx;
  }

  // pi^Q as a matrix in orthonormal coordinates, and its action on F.
  const double h = grid.cell_volume();
  const Index n = grid.size();
  Eigen::MatrixXd PQ = Eigen::MatrixXd::Zero(n, n);
  Vec piF = Vec::Zero(n);
  for (std::size_t s = 1; s < nodes; ++s) {
    Vec u = Vec::Zero(n);
    for (std::size_t e = 0; e < elig.size(); ++e) {
      if (!in_Q(s, e)) continue;
      Coefficient co{inner_coeffs[elig[e].coeff].cube, data[s].parent[e]};
      u += to_vec(co.as_function(grid));
    }
    piF += avg_father[s] * u;
    const Cube father = in.outer_lattice->parent(tree.nodes[s].cube);
    const double fm = om.mass(father);
    if (fm <= 0.0) continue;
    Vec left(n), right = Vec::Zero(n);
    for (Index c = 0; c < n; ++c) left(c) = u(c) * std::sqrt(im.density[static_cast<std::size_t>(c)] * h);
    for (Index c : father.cells(grid)) {
      right(c) = std::sqrt(om.density[static_cast<std::size_t>(c)] * h) / fm;
    }
    PQ += left * right.transpose();
  }
  if (nodes > 1) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(PQ);
    pp.parent_norm = svd.singularValues()(0);
  }
  pp.parent_f_sq = im.inner(to_fn(piF), to_fn(piF));
  const double slack = 1e-9 * (pp.DP + pp.ODP) + 1e-300;
  pp.second_ok = pp.parent_f_sq <= pp.DP + pp.ODP + slack && pp.ODP <= pp.ODP_bound * (1.0 + 1e-9) + 1e-300;
}

ShortRangeReport run_side(const SideInput& in) {
  ShortRangeReport out;
  const Grid& grid = in.outer_m->grid;
  const int d = grid.dim;
  const double eps = in.epsilon;
  const StoppingTree& tree = *in.tree;
  out.K = tree.K;
  out.neighbor_audit.name = "neighbor";
  out.neighbor_audit.constant = neighbor_constant(d, eps, in.smooth);
  out.stopping_audit.name = "stopping";
  out.stopping_audit.constant = stopping_constant(d, eps, in.smooth);
  const bool audits = std::isfinite(in.smooth);
  const double delta = goodness_delta(d, eps);

  const auto& oc = in.outer_good->coeffs;
  const auto& ic = in.inner_good->coeffs;
  std::map<std::size_t, Vec> z;  // A^T (Delta_J) per inner coefficient
  for (const auto& [i, j] : in.pairs) {
    if (!z.count(j)) z[j] = in.A->transpose() * to_vec(ic[j].as_function(grid));
  }
  std::map<Cube, double> poisson_cache;
  KahanSum neighbor, difficult, stopping, nabs, sabs, nbound;
  for (const auto& [i, j] : in.pairs) {
    const Coefficient& co = oc[i];
    const Cube& J = ic[j].cube;
    const Vec& zj = z[j];
    const ShortRangeTerms t = short_range_split(co, zj, J, tree, grid);
    const double direct = zj.dot(to_vec(co.as_function(grid)));
    const double scale = std::abs(t.neighbor) + std::abs(t.difficult) + std::abs(t.stopping) + std::abs(direct);
    if (scale > 0.0) out.split_residual = std::max(out.split_residual, std::abs(t.total() - direct) / scale);
    neighbor.add(t.neighbor);
    difficult.add(t.difficult);
    stopping.add(t.stopping);
    nabs.add(std::abs(t.neighbor));
    sabs.add(std::abs(t.stopping));
    ++out.pairs;

    std::vector<Cube> sons;
    const int son = son_containing(co.cube, J, &sons);
    const Cube& Ii = sons[static_cast<std::size_t>(son)];
    const double lI = co.cube.side(), lJ = J.side();
    const double f_norm = std::sqrt(co.norm_sq(*in.outer_m));
    const double g_norm = std::sqrt(ic[j].norm_sq(*in.inner_m));
    // neighbor: || chi_{I \ I_i} Delta_I f || and the dist = 0 kernel factor
    KahanSum nsq;
    for (std::size_t s = 0; s < sons.size(); ++s) {
      if (static_cast<int>(s) != son) nsq.add(co.child_values[s] * co.child_values[s] * in.outer_m->mass(sons[s]));
    }
    const double nb = out.neighbor_audit.constant * std::pow(lI * lJ, eps / 2.0) / std::pow(lI + lJ, d + eps) *
                      std::sqrt(in.outer_m->mass(co.cube) * in.inner_m->mass(J)) * std::sqrt(nsq.value()) * g_norm;
    // Both estimates need the goodness margin of J inside its son; only kept bad cubes can miss it.
    double margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < d; ++k) {
      margin = std::min({margin, J.lower(k) - Ii.lower(k), Ii.upper(k) - J.upper(k)});
    }
    const bool separated = margin >= std::pow(lJ, delta) * std::pow(lI, 1.0 - delta) * (1.0 - 1e-12);
    if (!separated) {
      ++out.neighbor_audit.skipped;
      ++out.stopping_audit.skipped;
      nbound.add(std::numeric_limits<double>::infinity());
    } else {
      nbound.add(nb);
      if (audits) note(out.neighbor_audit, t.neighbor, nb);
    }
    auto it = poisson_cache.find(Ii);
    if (it == poisson_cache.end()) {
      const Cube& S = tree.nodes[static_cast<std::size_t>(t.stopping_node)].cube;
      it = poisson_cache.emplace(Ii, poisson_functional(Ii, S, *in.outer_m, eps)).first;
    }
    const double mIi = in.outer_m->mass(Ii);
    const double term = std::sqrt(in.inner_m->mass(J) / mIi) * std::pow(lJ / lI, eps / 2.0) * it->second *
                        f_norm * g_norm;
    if (audits && separated) note(out.stopping_audit, t.stopping, out.stopping_audit.constant * term);
  }
  out.neighbor = neighbor.value();
  out.difficult = difficult.value();
  out.stopping = stopping.value();
  out.neighbor_abs = nabs.value();
  out.stopping_abs = sabs.value();
  out.neighbor_bound = audits ? nbound.value() : std::numeric_limits<double>::infinity();
  require(out.split_residual <= 1e-10, ErrorKind::Assertion, "three-term split does not reassemble");

  out.stopping_sum = stopping_sum_bound(tree, *in.outer_good, *in.inner_good, *in.outer_m, *in.inner_m, in.r);
  out.stopping_bound = audits && out.stopping_audit.skipped == 0
                           ? out.stopping_audit.constant * out.stopping_sum.T_value
                           : std::numeric_limits<double>::infinity();

  out.telescoping.difficult = out.difficult;
  if (in.paraproducts) {
    const auto elig = eligible_inner(in);
    paraproducts(in, elig, out);
    const TelescopingReport& tr = out.telescoping;
    const double rebuilt = tr.shells + tr.rho_outer + tr.rho_parent;
    const double scale = std::abs(tr.difficult) + std::abs(tr.shells) + std::abs(tr.rho_outer) +
                         std::abs(tr.rho_parent) + out.neighbor_abs + out.stopping_abs;
    out.telescoping.residual = std::abs(rebuilt - tr.difficult);
    if (out.telescoping.residual > in.telescoping_tol * std::max(scale, 1e-300)) {
      fail(ErrorKind::Assertion, "telescoping identity fails: difficult terms " + std::to_string(tr.difficult) +
                                     " vs paraproduct pairings " + std::to_string(rebuilt));
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd bilinear_matrix(const DiscretizedOperator& T, const Measure& mu, const Measure& nu) {
  const Grid& grid = T.grid();
  require(mu.grid == grid && nu.grid == grid, ErrorKind::Parameter, "operator and measures live on different grids");
  const double h = grid.cell_volume();
  // T.matrix() already carries the cell volume of the source side.
  const Vec n = to_vec(nu.density) * h;
  return n.asDiagonal() * T.matrix() * to_vec(mu.density).asDiagonal();
}

double bilinear_form(const DiscretizedOperator& T, const GridFunction& f, const GridFunction& g, const Measure& mu,
                     const Measure& nu, bool check_support) {
  const Grid& grid = T.grid();
  require(static_cast<Index>(f.size()) == grid.size() &&
              static_cast<Index>(g.size()) == grid.size(),
          ErrorKind::Parameter, "functions do not match the grid");
  if (check_support) {
    require(supported_in_center(f, grid) && supported_in_center(g, grid), ErrorKind::Domain,
            "f and g must vanish outside [1/4, 3/4)^d");
  }
  const Vec Tf = T.matrix() * to_vec(f).cwiseProduct(to_vec(mu.density));
  return nu.inner(to_fn(Tf), g);
}

PairClass classify_pair(const Cube& I, bool I_bad, const Cube& J, bool J_bad, int r) {
  if (I_bad || J_bad) return PairClass::DiscardedBad;
  const double scale = std::ldexp(1.0, I.dim * r);
  const double vI = I.volume(), vJ = J.volume();
  const bool comparable = vJ <= scale * vI && vI <= scale * vJ;
  const double dist = cube_distance(I, J);
  if (comparable && dist <= std::max(vI, vJ)) return PairClass::Diagonal;
  if (I.contains(J) && scale * vJ < vI) return PairClass::ShortRangeTau;
  if (J.contains(I) && scale * vI < vJ) return PairClass::ShortRangeRho;
  const bool disjoint = !I.intersects(J);
  if (disjoint && scale * vI < vJ) return PairClass::MidRange1;
  if (disjoint && scale * vJ < vI) return PairClass::MidRange2;
  if (disjoint && comparable) return vI <= vJ ? PairClass::LongRange1 : PairClass::LongRange2;
  fail(ErrorKind::Classification, "pair " + I.describe() + " / " + J.describe() + " fits no class");
}

PairClassification classify_pairs(const LatticePair& pair, const MartingaleDecomposition& f_dec,
                                  const MartingaleDecomposition& g_dec, bool discard_bad) {
  require(discard_bad || pair.mu.shift == pair.nu.shift, ErrorKind::Parameter,
          "bad cubes can only be kept when the two lattices coincide");
  PairClassification out;
  out.f_bad.assign(f_dec.coeffs.size(), false);
  out.g_bad.assign(g_dec.coeffs.size(), false);
  std::vector<std::size_t> fi, gj;
  for (std::size_t i = 0; i < f_dec.coeffs.size(); ++i) {
    if (f_dec.coeffs[i].is_zero()) continue;
    fi.push_back(i);
    out.f_bad[i] = discard_bad && classify_badness(f_dec.coeffs[i].cube, pair).essentially_bad;
  }
  for (std::size_t j = 0; j < g_dec.coeffs.size(); ++j) {
    if (g_dec.coeffs[j].is_zero()) continue;
    gj.push_back(j);
    out.g_bad[j] = discard_bad && classify_badness(g_dec.coeffs[j].cube, pair).essentially_bad;
  }
  out.pairs.reserve(fi.size() * gj.size());
  for (std::size_t i : fi) {
    for (std::size_t j : gj) {
      const PairClass cls =
          classify_pair(f_dec.coeffs[i].cube, out.f_bad[i], g_dec.coeffs[j].cube, out.g_bad[j], pair.r);
      out.pairs.push_back({i, j, cls});
      ++out.counts[static_cast<std::size_t>(cls)];
    }
  }
  return out;
}

ShortRangeTerms short_range_split(const Coefficient& outer, const Eigen::VectorXd& inner_z, const Cube& inner,
                                  const StoppingTree& tree, const Grid& grid) {
  std::vector<Cube> sons;
  const int son = son_containing(outer.cube, inner, &sons);
  require(son >= 0 && !outer.cube.same_box(inner), ErrorKind::Classification,
          inner.describe() + " is not inside a son of " + outer.cube.describe());
  const Cube& Ii = sons[static_cast<std::size_t>(son)];
  const int node = tree.owner(Ii);
  require(node >= 0, ErrorKind::Containment, Ii.describe() + " lies outside the stopping tree");
  const Cube& S = tree.nodes[static_cast<std::size_t>(node)].cube;
  const double c = outer.child_values[static_cast<std::size_t>(son)];
  ShortRangeTerms t;
  t.stopping_node = node;
  KahanSum nb;
  for (std::size_t s = 0; s < sons.size(); ++s) {
    if (static_cast<int>(s) == son || outer.child_values[s] == 0.0) continue;
    nb.add(outer.child_values[s] * cell_sum(inner_z, sons[s], grid));
  }
  t.neighbor = nb.value();
  if (c != 0.0) {
    const double on_S = cell_sum(inner_z, S, grid);
    t.difficult = c * on_S;
    // S = I_i leaves nothing outside I_i
    t.stopping = S.same_box(Ii) ? 0.0 : -c * (on_S - cell_sum(inner_z, Ii, grid));
  }
  return t;
}

StoppingSumReport stopping_sum_bound(const StoppingTree& tree, const MartingaleDecomposition& outer_good,
                                     const MartingaleDecomposition& inner_good, const Measure& outer_measure,
                                     const Measure& inner_measure, int r) {
  StoppingSumReport rep;
  const int d = outer_measure.grid.dim;
  const double eps = tree.epsilon;
  const double root = std::sqrt(tree.threshold_multiplier * tree.K);
  const CoeffTable ot = table_of(outer_good, outer_measure);
  const CoeffTable it = table_of(inner_good, inner_measure);
  std::map<int, double> outer_level_sq, inner_level_sq;
  for (std::size_t a = 0; a < ot.index.size(); ++a) {
    outer_level_sq[outer_good.coeffs[ot.index[a]].cube.level] += ot.norm[a] * ot.norm[a];
  }
  for (std::size_t b = 0; b < it.index.size(); ++b) {
    inner_level_sq[inner_good.coeffs[it.index[b]].cube.level] += it.norm[b] * it.norm[b];
  }
  std::map<std::tuple<int, int, int>, KahanSum> slices;
  std::map<Cube, double> poisson_cache;
  for (std::size_t a = 0; a < ot.index.size(); ++a) {
    const Coefficient& co = outer_good.coeffs[ot.index[a]];
    const Cube& I = co.cube;
    for (std::size_t b = 0; b < it.index.size(); ++b) {
      const Cube& J = inner_good.coeffs[it.index[b]].cube;
      const int n = J.level - I.level;
      if (n < r + 1 || !I.contains(J)) continue;
      std::vector<Cube> sons;
      const int son = son_containing(I, J, &sons);
      if (son < 0) continue;
      const Cube& Ii = sons[static_cast<std::size_t>(son)];
      auto pc = poisson_cache.find(Ii);
      if (pc == poisson_cache.end()) {
        const int node = tree.owner(Ii);
        require(node >= 0, ErrorKind::Containment, Ii.describe() + " lies outside the stopping tree");
        pc = poisson_cache.emplace(Ii, poisson_functional(Ii, tree.nodes[static_cast<std::size_t>(node)].cube,
                                                          outer_measure, eps))
                 .first;
      }
      const double mIi = outer_measure.mass(Ii);
      if (mIi <= 0.0) continue;
      const double value = std::sqrt(inner_measure.mass(J) / mIi) * pc->second * it.norm[b] * ot.norm[a];
      slices[{n, I.level, son}].add(value);
      rep.T_value += std::pow(2.0, -n * eps / 2.0) * value;
    }
  }
  for (auto& [key, acc] : slices) {
    SliceValue s;
    std::tie(s.n, s.k, s.son) = key;
    s.value = acc.value();
    s.bound = root * std::sqrt(outer_level_sq[s.k]) * std::sqrt(inner_level_sq[s.k + s.n]);
    const double ratio = safe_ratio(s.value, s.bound);
    rep.max_slice_ratio = std::max(rep.max_slice_ratio, ratio);
    if (ratio > 1.0 + 1e-9) rep.slice_ok = false;
    rep.slices.push_back(s);
  }
  double series = 0.0;
  for (int n = r + 1; n <= outer_measure.grid.level; ++n) series += std::pow(2.0, -n * eps / 2.0);
  KahanSum fsq, gsq;
  for (double v : ot.norm) fsq.add(v * v);
  for (double v : it.norm) gsq.add(v * v);
  rep.bound = root * std::pow(2.0, d / 2.0) * series * std::sqrt(fsq.value() * gsq.value());
  rep.total_ok = rep.T_value <= rep.bound * (1.0 + 1e-9) + 1e-300;
  return rep;
}

DecompositionTrees build_decomposition_trees(const Measure& mu, const Measure& nu, const LatticePair& pair,
                                             double threshold_multiplier) {
  PivotalOptions po;
  po.search = PivotalSearch::SonPartitions;
  po.epsilon = pair.epsilon;
  po.lattice_set = true;
  CoronaOptions co;
  co.threshold_multiplier = threshold_multiplier;
  co.epsilon = pair.epsilon;

  po.lattice = pair.mu;
  const double K_mu = estimate_pivotal_constant(mu, nu, po).K_estimate;
  po.lattice = pair.nu;
  const double K_nu = estimate_pivotal_constant(nu, mu, po).K_estimate;
  DecompositionTrees trees;
  trees.mu_tree = build_stopping_tree(pair.mu.top(), pair.mu, mu, nu, K_mu, co);
  trees.nu_tree = build_stopping_tree(pair.nu.top(), pair.nu, nu, mu, K_nu, co);
  return trees;
}

DecompositionReport full_report(const DiscretizedOperator& T, const Weight& w, const GridFunction& f,
                                const GridFunction& g, const LatticePair& pair, const DecompositionTrees& trees,
                                const DecompositionOptions& options) {
  const Grid& grid = T.grid();
  require(w.grid() == grid && pair.grid_level() == grid.level && pair.dim() == grid.dim, ErrorKind::Parameter,
          "operator, weight and lattices live on different grids");
  require(trees.mu_tree.lattice.id == pair.mu.id && trees.nu_tree.lattice.id == pair.nu.id &&
              trees.mu_tree.lattice.shift == pair.mu.shift && trees.nu_tree.lattice.shift == pair.nu.shift,
          ErrorKind::Parameter, "stopping trees were built on other lattices");
  const Measure mu = w.mu(), nu = w.nu();
  const int d = grid.dim;
  const double eps = pair.epsilon;
  DecompositionReport rep;
  rep.total = bilinear_form(T, f, g, mu, nu, true);
  rep.f_norm = mu.norm(f);
  rep.g_norm = nu.norm(g);
  rep.constants = {options.c0, options.c1, options.c2};

  const Eigen::MatrixXd A = bilinear_matrix(T, mu, nu);
  const MartingaleDecomposition fd = decompose(f, mu, pair.mu, MeasureTag::Mu);
  const MartingaleDecomposition gd = decompose(g, nu, pair.nu, MeasureTag::Nu);
  const GridFunction Lf = fd.top_function(grid), Lg = gd.top_function(grid);
  GridFunction f_rest(f.size());
  for (std::size_t c = 0; c < f.size(); ++c) f_rest[c] = f[c] - Lf[c];
  rep.lambda_f = bilinear_form(T, Lf, g, mu, nu, false);
  rep.lambda_g = bilinear_form(T, f_rest, Lg, mu, nu, false);

  const PairClassification cls = classify_pairs(pair, fd, gd, options.discard_bad);
  rep.counts = cls.counts;
  MartingaleDecomposition fgood = fd, ggood = gd;
  for (std::size_t i = 0; i < fd.coeffs.size(); ++i) {
    if (cls.f_bad[i]) std::fill(fgood.coeffs[i].child_values.begin(), fgood.coeffs[i].child_values.end(), 0.0);
  }
  for (std::size_t j = 0; j < gd.coeffs.size(); ++j) {
    if (cls.g_bad[j]) std::fill(ggood.coeffs[j].child_values.begin(), ggood.coeffs[j].child_values.end(), 0.0);
  }
  fgood.top = 0.0;
  ggood.top = 0.0;
  const GridFunction F = fgood.reconstruct(grid), G = ggood.reconstruct(grid);
  rep.F_norm = mu.norm(F);
  rep.G_norm = nu.norm(G);

  // Measured constants.
  rep.joint_a2 = joint_a2(mu, nu, d == 1 ? CubeFamily::AllAligned : CubeFamily::Dyadic);
  std::vector<Cube> lattice_cubes = pair.mu.descendants(pair.mu.top(), grid.level);
  for (const Cube& c : pair.nu.descendants(pair.nu.top(), grid.level)) lattice_cubes.push_back(c);
  rep.K_chi = test_constant_cubes(T, mu, nu, lattice_cubes).K_chi;
  rep.K_mu = trees.mu_tree.K;
  rep.K_nu = trees.nu_tree.K;
  rep.operator_proxy = dense_strong_norm(T, mu, nu);

  // Pair values.
  std::map<std::size_t, Vec> zg, fphi;
  for (const auto& p : cls.pairs) {
    if (!zg.count(p.j)) zg[p.j] = A.transpose() * to_vec(gd.coeffs[p.j].as_function(grid));
    if (!fphi.count(p.i)) fphi[p.i] = to_vec(fd.coeffs[p.i].as_function(grid));
  }
  std::array<KahanSum, kPairClassCount> sums, abs_sums;
  std::array<double, kPairClassCount> bounds{};
  const double smooth = T.smooth_constant();
  const bool audits = std::isfinite(smooth);
  const double A_long = long_range_constant(d, eps, smooth);
  rep.diagonal_audit.name = "diagonal";
  rep.diagonal_audit.constant = std::pow(4.0, d) * std::sqrt(rep.K_chi);
  rep.long_audit.name = "long_range";
  rep.long_audit.constant = A_long;
  rep.mid_audit.name = "mid_range";
  rep.mid_audit.constant = A_long;
  std::vector<std::pair<std::size_t, std::size_t>> tau_pairs, rho_pairs;
  for (const auto& p : cls.pairs) {
    const double value = zg[p.j].dot(fphi[p.i]);
    const auto k = static_cast<std::size_t>(p.cls);
    sums[k].add(value);
    abs_sums[k].add(std::abs(value));
    const Cube& I = fd.coeffs[p.i].cube;
    const Cube& J = gd.coeffs[p.j].cube;
    const double fn = std::sqrt(fd.coeffs[p.i].norm_sq(mu));
    const double gn = std::sqrt(gd.coeffs[p.j].norm_sq(nu));
    const double lI = I.side(), lJ = J.side();
    const double dist = cube_distance(I, J);
    const double D = std::pow(dist + lI + lJ, d + eps);
    const double masses = std::sqrt(mu.mass(I) * nu.mass(J)) * fn * gn;
    switch (p.cls) {
      case PairClass::Diagonal: {
        const double b = rep.diagonal_audit.constant * fn * gn;
        bounds[k] += (b);
        note(rep.diagonal_audit, value, b);
        break;
      }
      case PairClass::LongRange1:
      case PairClass::LongRange2: {
        const double small = std::min(lI, lJ), big = std::max(lI, lJ);
        if (!audits || dist < std::max(big, std::sqrt(double(d)) * small)) {
          ++rep.long_audit.skipped;
          bounds[k] += (std::numeric_limits<double>::infinity());
          break;
        }
        const double b = A_long * std::pow(small, eps) / D * masses;
        bounds[k] += (b);
        note(rep.long_audit, value, b);
        break;
      }
      case PairClass::MidRange1:
      case PairClass::MidRange2: {
        const double small = std::min(lI, lJ);
        if (!audits || dist < std::sqrt(double(d)) * small) {
          ++rep.mid_audit.skipped;
          bounds[k] += (std::numeric_limits<double>::infinity());
          break;
        }
        const double b = A_long * std::pow(lI * lJ, eps / 2.0) / D * masses;
        bounds[k] += (b);
        note(rep.mid_audit, value, b);
        break;
      }
      case PairClass::ShortRangeTau: tau_pairs.emplace_back(p.i, p.j); break;
      case PairClass::ShortRangeRho: rho_pairs.emplace_back(p.j, p.i); break;
      case PairClass::DiscardedBad: break;
    }
  }

  SideInput tau;
  tau.A = &A;
  tau.outer_lattice = &pair.mu;
  tau.inner_lattice = &pair.nu;
  tau.outer_m = &mu;
  tau.inner_m = &nu;
  tau.outer_good = &fgood;
  tau.inner_good = &ggood;
  tau.inner_bad = &cls.g_bad;
  tau.F = &F;
  tau.tree = &trees.mu_tree;
  tau.pairs = std::move(tau_pairs);
  tau.r = pair.r;
  tau.epsilon = eps;
  tau.smooth = smooth;
  tau.K_chi = rep.K_chi;
  tau.telescoping_tol = options.telescoping_tol;
  tau.paraproducts = options.paraproducts;
  rep.tau = run_side(tau);

  const Eigen::MatrixXd At = A.transpose();
  SideInput rho = tau;
  rho.A = &At;
  rho.outer_lattice = &pair.nu;
  rho.inner_lattice = &pair.mu;
  rho.outer_m = &nu;
  rho.inner_m = &mu;
  rho.outer_good = &ggood;
  rho.inner_good = &fgood;
  rho.inner_bad = &cls.f_bad;
  rho.F = &G;
  rho.tree = &trees.nu_tree;
  rho.pairs = std::move(rho_pairs);
  rep.rho = run_side(rho);

  const double FG = rep.F_norm * rep.G_norm;
  for (ShortRangeReport* side : {&rep.tau, &rep.rho}) {
    const ParaproductReport& pp = side->paraproducts;
    side->difficult_bound = (pp.max_first_norm + pp.outer_norm + pp.parent_norm) * FG;
  }

  const double fg = rep.f_norm * rep.g_norm;
  for (int k = 0; k < kPairClassCount; ++k) {
    ClassSum& c = rep.classes[static_cast<std::size_t>(k)];
    c.cls = static_cast<PairClass>(k);
    c.pairs = rep.counts[static_cast<std::size_t>(k)];
    c.signed_sum = sums[static_cast<std::size_t>(k)].value();
    c.abs_sum = abs_sums[static_cast<std::size_t>(k)].value();
    c.bound = bounds[static_cast<std::size_t>(k)];
  }
  auto& tau_c = rep.classes[static_cast<std::size_t>(PairClass::ShortRangeTau)];
  auto& rho_c = rep.classes[static_cast<std::size_t>(PairClass::ShortRangeRho)];
  tau_c.bound = rep.tau.neighbor_bound + rep.tau.stopping_bound + rep.tau.difficult_bound;
  rho_c.bound = rep.rho.neighbor_bound + rep.rho.stopping_bound + rep.rho.difficult_bound;
  rep.classes[static_cast<std::size_t>(PairClass::DiscardedBad)].bound = std::numeric_limits<double>::infinity();
  for (auto& c : rep.classes) {
    switch (c.cls) {
      case PairClass::Diagonal: c.paper_value = std::sqrt(rep.K_chi) * fg; break;
      case PairClass::LongRange1:
      case PairClass::LongRange2:
      case PairClass::MidRange1:
      case PairClass::MidRange2: c.paper_value = std::sqrt(rep.joint_a2) * fg; break;
      case PairClass::ShortRangeTau: c.paper_value = (std::sqrt(rep.K_mu) + std::sqrt(rep.K_chi)) * fg; break;
      case PairClass::ShortRangeRho: c.paper_value = (std::sqrt(rep.K_nu) + std::sqrt(rep.K_chi)) * fg; break;
      case PairClass::DiscardedBad: c.paper_value = 0.0; break;
    }
    c.paper_ratio = c.paper_value > 0.0 ? c.abs_sum / c.paper_value : 0.0;
  }
  rep.discarded_bad = rep.classes[static_cast<std::size_t>(PairClass::DiscardedBad)].signed_sum;

  KahanSum total;
  for (const auto& c : rep.classes) total.add(c.signed_sum);
  total.add(rep.lambda_f);
  total.add(rep.lambda_g);
  rep.reassembled = total.value();
  rep.reassembly_residual = std::abs(rep.total - rep.reassembled);
  rep.reassembly_scale = fg * rep.operator_proxy;
  if (rep.reassembly_residual > options.reassembly_tol * std::max(rep.reassembly_scale, 1e-300)) {
    fail(ErrorKind::Assertion, "reassembly residual " + std::to_string(rep.reassembly_residual) +
                                   " exceeds tolerance");
  }
  const double K = std::max(rep.K_mu, rep.K_nu);
  rep.bound_value =
      (options.c0 * std::sqrt(rep.joint_a2) + options.c1 * std::sqrt(K) + options.c2 * std::sqrt(rep.K_chi)) * fg;
  rep.bound_ratio = rep.bound_value > 0.0 ? std::abs(rep.total) / rep.bound_value : 0.0;
  return rep;
}

}  // namespace corona_lab
