#include "corona_lab/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "corona_lab/corona.hpp"
#include "corona_lab/decomposition.hpp"
#include "corona_lab/errors.hpp"
#include "corona_lab/extrapolation.hpp"
#include "corona_lab/lattice.hpp"
#include "corona_lab/martingale.hpp"
#include "corona_lab/operator.hpp"
#include "corona_lab/pivotal.hpp"
#include "corona_lab/util.hpp"
#include "corona_lab/weight.hpp"

namespace corona_lab {

using json = nlohmann::ordered_json;

const char* artifact_version() { return CORONA_LAB_VERSION; }

std::vector<std::string> command_names() {
  return {"weight", "goodbad", "pivotal", "corona", "norms", "decompose", "extrapolate", "sweep"};
}

namespace {

struct RunConfig {
  std::string command;
  std::string spec_path;
  json weight;
  std::string kernel = "hilbert";
  int level = 6;
  int r = 2;
  double epsilon = 1.0;
  std::uint64_t seed = 1;
  std::int64_t trials = 1000;
  std::string format = "json";
  double threshold_mult = 100.0;
  double tol = 1e-9;
  std::string cubes = "dyadic";
  std::string family = "power";
  double alpha_min = -0.9;
  double alpha_max = 0.9;
  int steps = 19;
  std::string phi = "loglinear";
  bool aligned = false;      // decompose: both lattices unshifted
  bool discard_bad = true;   // decompose: drop essentially bad cubes
};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("config field '") + key + "' has the wrong type");
  }
}

Point point_of(const json& j, const char* key, Point fallback) {
  if (!j.contains(key)) return fallback;
  const json& a = j[key];
  if (a.is_number()) return Point{a.get<double>(), a.get<double>(), a.get<double>()};
  require(a.is_array() && a.size() >= 1 && a.size() <= 3, ErrorKind::Config,
          std::string("weight field '") + key + "' must be a number or an array of up to 3 numbers");
  Point p = fallback;
  for (std::size_t k = 0; k < a.size(); ++k) p[k] = a[k].get<double>();
  return p;
}

json point_json(const Point& p, int dim) {
  json a = json::array();
  for (int k = 0; k < dim; ++k) a.push_back(p[static_cast<std::size_t>(k)]);
  return a;
}

// Accepts parameters either at top level or nested under "params".
WeightSpec weight_spec_of(const json& raw, int level) {
  WeightSpec s;
  json j = raw;
  if (raw.contains("params")) {
    require(raw["params"].is_object(), ErrorKind::Config, "weight params must be an object");
    for (const auto& [key, value] : raw["params"].items()) j[key] = value;
  }
  try {
    s.kind = get_or<std::string>(j, "kind", "constant");
    s.dim = get_or<int>(j, "dim", 1);
    s.level = level;
    s.value = get_or<double>(j, "value", s.value);
    s.c = get_or<double>(j, "c", s.c);
    s.region_lo = point_of(j, "region_lo", s.region_lo);
    s.region_side = get_or<double>(j, "region_side", s.region_side);
    s.alpha = get_or<double>(j, "alpha", s.alpha);
    s.center = point_of(j, "center", s.center);
    s.ratio = get_or<double>(j, "ratio", s.ratio);
    if (j.contains("values")) s.values = j["values"].get<std::vector<double>>();
    if (j.contains("clamp")) {
      s.clamp.lo = get_or<double>(j["clamp"], "lo", s.clamp.lo);
      s.clamp.hi = get_or<double>(j["clamp"], "hi", s.clamp.hi);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed weight spec: ") + e.what());
  }
  return s;
}

json weight_spec_json(const WeightSpec& s) {
  json j;
  if (s.kind == "constant") j["value"] = s.value;
  if (s.kind == "step") {
    j["c"] = s.c;
    j["region_lo"] = point_json(s.region_lo, s.dim);
    j["region_side"] = s.region_side;
  }
  if (s.kind == "power") {
    j["alpha"] = s.alpha;
    j["center"] = point_json(s.center, s.dim);
  }
  if (s.kind == "lacunary") {
    j["ratio"] = s.ratio;
    j["center"] = point_json(s.center, s.dim);
  }
  if (s.kind == "explicit") j["values"] = s.values;
  j["clamp"] = {{"lo", s.clamp.lo}, {"hi", s.clamp.hi}};
  json out;
  out["kind"] = s.kind;
  out["dim"] = s.dim;
  out["level"] = s.level;
  out["params"] = j;
  return out;
}

RunConfig parse_config(const std::string& command, const std::string& text) {
  json j;
  try {
    j = text.empty() ? json::object() : json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorKind::Config, "config must be a JSON object");
  RunConfig c;
  c.command = command;
  c.spec_path = get_or<std::string>(j, "spec", "");
  c.kernel = get_or<std::string>(j, "kernel", c.kernel);
  c.r = get_or<int>(j, "r", c.r);
  c.epsilon = get_or<double>(j, "epsilon", c.epsilon);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.trials = get_or<std::int64_t>(j, "trials", c.trials);
  c.format = get_or<std::string>(j, "format", c.format);
  c.threshold_mult = get_or<double>(j, "threshold_mult", c.threshold_mult);
  c.tol = get_or<double>(j, "tol", c.tol);
  c.cubes = get_or<std::string>(j, "cubes", c.cubes);
  c.family = get_or<std::string>(j, "family", c.family);
  c.alpha_min = get_or<double>(j, "alpha_min", c.alpha_min);
  c.alpha_max = get_or<double>(j, "alpha_max", c.alpha_max);
  c.steps = get_or<int>(j, "steps", c.steps);
  c.phi = get_or<std::string>(j, "phi", c.phi);
  c.aligned = get_or<bool>(j, "aligned", c.aligned);
  c.discard_bad = get_or<bool>(j, "discard_bad", c.discard_bad);

  if (j.contains("weight")) {
    c.weight = j["weight"];
  } else if (!c.spec_path.empty()) {
    std::ifstream in(c.spec_path);
    require(static_cast<bool>(in), ErrorKind::Config, "cannot read weight spec '" + c.spec_path + "'");
    try {
      c.weight = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorKind::Config, "weight spec '" + c.spec_path + "' is not valid JSON: " + e.what());
    }
  } else {
    c.weight = json{{"kind", "constant"}, {"value", 1.0}};
  }
  require(c.weight.is_object(), ErrorKind::Config, "weight spec must be a JSON object");
  c.level = get_or<int>(j, "level", get_or<int>(c.weight, "level", c.level));
  require(c.format == "json" || c.format == "csv", ErrorKind::Config, "format must be json or csv");
  require(c.format == "json" || command == "sweep", ErrorKind::Config, "csv output is only available for sweep");
  require(c.trials >= 1, ErrorKind::Config, "trials must be >= 1");
  require(c.steps >= 1, ErrorKind::Config, "steps must be >= 1");
  require(c.tol > 0.0, ErrorKind::Config, "tol must be positive");
  require(c.threshold_mult > 0.0, ErrorKind::Config, "threshold multiplier must be positive");
  return c;
}

CubeFamily family_of(const RunConfig& c) {
  try {
    return cube_family_from_string(c.cubes);
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
}

KernelSpec kernel_of(const RunConfig& c, int dim) {
  try {
    return kernel_by_name(c.kernel, dim);
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
}

json resolved(const RunConfig& c, const WeightSpec& ws) {
  json j;
  j["command"] = c.command;
  j["weight"] = weight_spec_json(ws);
  j["kernel"] = c.kernel;
  j["level"] = c.level;
  j["r"] = c.r;
  j["epsilon"] = c.epsilon;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["format"] = c.format;
  j["threshold_mult"] = c.threshold_mult;
  j["tol"] = c.tol;
  j["cubes"] = c.cubes;
  if (c.command == "sweep") {
    j["family"] = c.family;
    j["alpha_min"] = c.alpha_min;
    j["alpha_max"] = c.alpha_max;
    j["steps"] = c.steps;
  }
  if (c.command == "extrapolate" || c.command == "sweep") j["phi"] = c.phi;
  if (c.command == "decompose") {
    j["aligned"] = c.aligned;
    j["discard_bad"] = c.discard_bad;
  }
  return j;
}

json cube_json(const Cube& c) {
  json j;
  j["lattice"] = c.lattice == 0 ? "mu" : "nu";
  j["level"] = c.level;
  json lo = json::array(), hi = json::array();
  for (int k = 0; k < c.dim; ++k) {
    lo.push_back(c.lower(k));
    hi.push_back(c.upper(k));
  }
  j["lower"] = lo;
  j["upper"] = hi;
  return j;
}

json shift_json(const Lattice& l) {
  json a = json::array();
  for (int k = 0; k < l.dim; ++k) a.push_back(l.shift[static_cast<std::size_t>(k)]);
  return a;
}

struct Checks {
  json values = json::object();
  std::vector<std::string> failed;
  void add(const std::string& name, bool ok) {
    values[name] = ok;
    if (!ok) failed.push_back(name);
  }
};

GridFunction centered_random(const Grid& grid, std::uint64_t seed) {
  Rng rng(seed);
  GridFunction f(static_cast<std::size_t>(grid.size()), 0.0);
  const Index n = grid.side();
  for (Index i = 0; i < grid.size(); ++i) {
    const IVec x = grid.coords(i);
    bool inside = true;
    for (int k = 0; k < grid.dim; ++k) inside = inside && 4 * x[k] >= n && 4 * x[k] < 3 * n;
    if (inside) f[static_cast<std::size_t>(i)] = rng.normal();
  }
  return f;
}

// --- subcommands -----------------------------------------------------------

json cmd_weight(const RunConfig&, const Weight& w, Checks& checks) {
  json r;
  const auto& v = w.values();
  r["cells"] = w.grid().size();
  r["min"] = *std::min_element(v.begin(), v.end());
  r["max"] = *std::max_element(v.begin(), v.end());
  r["a2"] = a2_norm(w, CubeFamily::Dyadic);
  r["a1"] = a1_norm(w, CubeFamily::Dyadic);
  r["a2_all_aligned"] = a2_norm(w, CubeFamily::AllAligned);
  r["a1_all_aligned"] = a1_norm(w, CubeFamily::AllAligned);
  r["joint_a2"] = joint_a2(w.mu(), w.nu(), CubeFamily::Dyadic);
  checks.add("a2_at_least_one", r["a2"].get<double>() >= 1.0 - 1e-12);
  checks.add("a1_at_least_one", r["a1"].get<double>() >= 1.0 - 1e-12);
  return r;
}

json cmd_goodbad(const RunConfig& c, const Weight& w, Checks& checks) {
  const Grid& grid = w.grid();
  json r;
  const LatticePair pair = sample_lattice_pair(c.seed, grid.dim, c.epsilon, c.r, grid.level);
  r["pair"] = {{"shift_mu", shift_json(pair.mu)}, {"shift_nu", shift_json(pair.nu)},
               {"delta", pair.delta}, {"r", pair.r}};
  BadnessProbabilityOptions bo;
  bo.dim = grid.dim;
  bo.epsilon = c.epsilon;
  json rows = json::array();
  bool in_range = true;
  for (int rr = 1; rr <= std::max(4, c.r); ++rr) {
    const Estimate e = badness_probability(c.level, rr, c.trials, c.seed, bo);
    rows.push_back({{"r", rr}, {"probability", e.value}, {"std_error", e.std_error}, {"trials", e.trials}});
    in_range = in_range && e.value >= 0.0 && e.value <= 1.0;
  }
  r["badness_probability"] = rows;
  BadMassOptions mo;
  mo.dim = grid.dim;
  mo.epsilon = c.epsilon;
  const GridFunction f = centered_random(grid, c.seed);
  const Estimate bm = bad_mass_expectation(f, w.mu(), c.r, std::min<std::int64_t>(c.trials, 200), c.seed, mo);
  r["bad_mass_fraction"] = {{"value", bm.value}, {"std_error", bm.std_error}, {"trials", bm.trials}};
  checks.add("probabilities_in_unit_interval", in_range);
  return r;
}

json cmd_pivotal(const RunConfig& c, const Weight& w, Checks& checks) {
  PivotalOptions po;
  po.epsilon = c.epsilon;
  const PivotalReport p = estimate_pivotal_constant(w.mu(), w.nu(), po);
  const double a2 = a2_norm(w);
  json r;
  r["K_estimate"] = p.K_estimate;
  r["K_tilde"] = p.K_tilde;
  r["witness"] = cube_json(p.witness);
  r["witness_family"] = p.witness_family;
  r["witness_cubes"] = static_cast<std::int64_t>(p.witness_cubes.size());
  r["a2"] = a2;
  r["K_over_a2"] = p.K_estimate / a2;
  r["K_over_a2_squared"] = p.K_estimate / (a2 * a2);
  r["buckley_ratio"] = buckley_ratio(w, a2);
  r["depth"] = p.depth;
  checks.add("K_positive", p.K_estimate > 0.0);
  return r;
}

json tree_json(const StoppingTree& t, const PackingReport& pk) {
  json r;
  r["K"] = t.K;
  r["threshold_multiplier"] = t.threshold_multiplier;
  json nodes = json::array();
  for (const StoppingNode& n : t.nodes) {
    json j = cube_json(n.cube);
    j["parent"] = n.parent;
    j["generation"] = n.generation;
    j["ratio"] = n.ratio;
    nodes.push_back(j);
  }
  r["nodes"] = nodes;
  r["packing"] = {{"passed", pk.passed},
                  {"max_child_fraction", pk.max_child_fraction},
                  {"violations", static_cast<std::int64_t>(pk.violations.size())},
                  {"generation_fraction", pk.generation_fraction},
                  {"generation_ok", pk.generation_ok},
                  {"max_subtree_ratio", pk.max_subtree_ratio},
                  {"subtree_ok", pk.subtree_ok}};
  return r;
}

json cmd_corona(const RunConfig& c, const Weight& w, Checks& checks) {
  PivotalOptions po;
  po.epsilon = c.epsilon;
  const Measure mu = w.mu(), nu = w.nu();
  const PivotalReport p = estimate_pivotal_constant(mu, nu, po);
  Lattice standard;
  standard.dim = w.grid().dim;
  standard.grid_level = w.grid().level;
  CoronaOptions co;
  co.threshold_multiplier = c.threshold_mult;
  co.epsilon = c.epsilon;
  const StoppingTree t = build_stopping_tree(standard.top(), standard, mu, nu, p.K_estimate, co);
  const PackingReport pk = packing_check(t, mu);
  json r = tree_json(t, pk);
  checks.add("packing", pk.passed);
  return r;
}

json cmd_norms(const RunConfig& c, const Weight& w, Checks& checks) {
  const DiscretizedOperator T = DiscretizedOperator::from_kernel(kernel_of(c, w.grid().dim), w.grid());
  PowerOptions power;
  power.tol = c.tol;
  power.seed = c.seed;
  const NormReport n = norm_report(T, w, family_of(c), power);
  json r;
  r["strong"] = n.strong;
  r["strong_power"] = n.strong_power;
  r["converged"] = n.converged;
  r["iterations"] = n.iterations;
  r["weak"] = n.weak;
  r["weak_dual"] = n.weak_dual;
  r["K_chi"] = n.K_chi;
  r["lorentz_lhs"] = n.lorentz_lhs;
  r["lorentz_rhs"] = n.lorentz_rhs;
  r["a2"] = a2_norm(w, family_of(c));
  checks.add("weak_le_strong", n.weak <= n.strong * (1.0 + 1e-12) && n.weak_dual <= n.strong * (1.0 + 1e-12));
  return r;
}

json audit_json(const AuditSummary& a) {
  return {{"constant", a.constant}, {"checked", a.checked}, {"skipped", a.skipped},
          {"worst_ratio", a.worst_ratio}, {"passed", a.passed()}};
}

json side_json(const ShortRangeReport& s) {
  json j;
  j["pairs"] = s.pairs;
  j["K"] = s.K;
  j["neighbor"] = s.neighbor;
  j["difficult"] = s.difficult;
  j["stopping"] = s.stopping;
  j["neighbor_abs"] = s.neighbor_abs;
  j["stopping_abs"] = s.stopping_abs;
  j["split_residual"] = s.split_residual;
  j["neighbor_bound"] = s.neighbor_bound;
  j["stopping_bound"] = s.stopping_bound;
  j["difficult_bound"] = s.difficult_bound;
  j["neighbor_audit"] = audit_json(s.neighbor_audit);
  j["stopping_audit"] = audit_json(s.stopping_audit);
  j["stopping_sum"] = {{"T", s.stopping_sum.T_value},
                       {"bound", s.stopping_sum.bound},
                       {"max_slice_ratio", s.stopping_sum.max_slice_ratio},
                       {"slices", static_cast<std::int64_t>(s.stopping_sum.slices.size())},
                       {"slice_ok", s.stopping_sum.slice_ok},
                       {"total_ok", s.stopping_sum.total_ok}};
  j["telescoping"] = {{"difficult", s.telescoping.difficult},
                      {"shells", s.telescoping.shells},
                      {"rho_outer", s.telescoping.rho_outer},
                      {"rho_parent", s.telescoping.rho_parent},
                      {"residual", s.telescoping.residual}};
  const ParaproductReport& p = s.paraproducts;
  j["paraproducts"] = {{"stopping_cubes", p.stopping_cubes},
                       {"max_first_norm", p.max_first_norm},
                       {"max_first_carleson", p.max_first_carleson},
                       {"first_ok", p.first_ok},
                       {"outer_norm", p.outer_norm},
                       {"b_carleson", p.b_carleson},
                       {"max_b_ratio", p.max_b_ratio},
                       {"outer_ok", p.outer_ok},
                       {"parent_norm", p.parent_norm},
                       {"parent_f_sq", p.parent_f_sq},
                       {"DP", p.DP},
                       {"ODP", p.ODP},
                       {"ODP_bound", p.ODP_bound},
                       {"eps0", p.eps0},
                       {"second_ok", p.second_ok},
                       {"F", p.F},
                       {"a_j_carleson", p.a_j_carleson},
                       {"F_fit_constant", p.F_fit_constant},
                       {"F_slope", p.F_slope}};
  return j;
}

json cmd_decompose(const RunConfig& c, const Weight& w, Checks& checks) {
  const Grid& grid = w.grid();
  const DiscretizedOperator T = DiscretizedOperator::from_kernel(kernel_of(c, grid.dim), grid);
  const LatticePair pair = c.aligned ? make_lattice_pair(grid.dim, c.epsilon, c.r, grid.level, {0, 0, 0}, {0, 0, 0})
                                     : sample_lattice_pair(c.seed, grid.dim, c.epsilon, c.r, grid.level);
  const GridFunction f = centered_random(grid, c.seed * 2 + 1);
  const GridFunction g = centered_random(grid, c.seed * 2 + 2);
  const DecompositionTrees trees = build_decomposition_trees(w.mu(), w.nu(), pair, c.threshold_mult);
  DecompositionOptions opts;
  opts.threshold_multiplier = c.threshold_mult;
  opts.discard_bad = c.discard_bad;
  const DecompositionReport d = full_report(T, w, f, g, pair, trees, opts);
  json r;
  r["pair"] = {{"shift_mu", shift_json(pair.mu)}, {"shift_nu", shift_json(pair.nu)}, {"delta", pair.delta}};
  r["total"] = d.total;
  r["lambda_f"] = d.lambda_f;
  r["lambda_g"] = d.lambda_g;
  r["discarded_bad"] = d.discarded_bad;
  r["reassembled"] = d.reassembled;
  r["reassembly_residual"] = d.reassembly_residual;
  r["reassembly_scale"] = d.reassembly_scale;
  json classes = json::object();
  for (const ClassSum& cs : d.classes) {
    classes[to_string(cs.cls)] = {{"pairs", cs.pairs},         {"signed", cs.signed_sum},
                                  {"abs", cs.abs_sum},         {"bound", cs.bound},
                                  {"paper_value", cs.paper_value}, {"paper_ratio", cs.paper_ratio}};
  }
  r["classes"] = classes;
  r["norms"] = {{"f", d.f_norm}, {"g", d.g_norm}, {"f_good", d.F_norm}, {"g_good", d.G_norm}};
  r["constants"] = {{"joint_a2", d.joint_a2}, {"K_chi", d.K_chi}, {"K_mu", d.K_mu}, {"K_nu", d.K_nu},
                    {"operator_proxy", d.operator_proxy}};
  r["audits"] = {{"diagonal", audit_json(d.diagonal_audit)},
                 {"long_range", audit_json(d.long_audit)},
                 {"mid_range", audit_json(d.mid_audit)}};
  r["tau"] = side_json(d.tau);
  r["rho"] = side_json(d.rho);
  r["bound_value"] = d.bound_value;
  r["bound_ratio"] = d.bound_ratio;
  r["trees"] = {{"mu", tree_json(trees.mu_tree, packing_check(trees.mu_tree, w.mu()))},
                {"nu", tree_json(trees.nu_tree, packing_check(trees.nu_tree, w.nu()))}};
  checks.add("diagonal_audit", d.diagonal_audit.passed());
  checks.add("long_range_audit", d.long_audit.passed());
  checks.add("mid_range_audit", d.mid_audit.passed());
  for (const auto& [name, side] : {std::pair<const char*, const ShortRangeReport*>{"tau", &d.tau},
                                   std::pair<const char*, const ShortRangeReport*>{"rho", &d.rho}}) {
    const std::string n = name;
    checks.add(n + "_neighbor_audit", side->neighbor_audit.passed());
    checks.add(n + "_stopping_audit", side->stopping_audit.passed());
    checks.add(n + "_slices", side->stopping_sum.slice_ok && side->stopping_sum.total_ok);
    checks.add(n + "_first_paraproduct", side->paraproducts.first_ok);
    checks.add(n + "_outer_paraproduct", side->paraproducts.outer_ok);
    checks.add(n + "_second_paraproduct", side->paraproducts.second_ok);
  }
  return r;
}

json majorant_json(const MajorantReport& m) {
  return {{"operator_norm_Sw", m.operator_norm_Sw}, {"truncation_k", m.truncation_k},
          {"ratio_max", m.ratio_max},               {"a1_of_wRh", m.a1_of_wRh},
          {"norm_Rh", m.norm_Rh},                   {"norm_h", m.norm_h},
          {"truncation_slack", m.truncation_slack}, {"majorizes", m.majorizes}};
}

json cmd_extrapolate(const RunConfig& c, const Weight& w, Checks& checks) {
  const Grid& grid = w.grid();
  PhiFunction phi;
  try {
    phi = phi_by_name(c.phi);
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what());
  }
  Rng rng(c.seed);
  GridFunction h(static_cast<std::size_t>(grid.size()));
  for (auto& x : h) x = rng.uniform01();
  const double a2 = a2_norm(w);
  const SwNormReport sn = sw_norm(w);
  MajorantOptions mo;
  mo.sw_norm = sn.value;
  MajorantReport m;
  rubio_de_francia(h, w, m, mo);
  json r;
  r["a2"] = a2;
  r["sw_norm"] = {{"value", sn.value}, {"best_probe", sn.best_probe}, {"probes", sn.probes},
                  {"ratio_to_a2", sn.value / a2}};
  r["majorant"] = majorant_json(m);
  r["a1_of_wRh_over_a2"] = m.a1_of_wRh / a2;
  checks.add("majorizes", m.majorizes);
  checks.add("norm_Rh", m.norm_Rh <= (2.0 + 2.0 * m.truncation_slack) * m.norm_h * (1.0 + 1e-12));
  checks.add("ratio_max", m.ratio_max <= 2.0 * m.operator_norm_Sw * (1.0 + 1e-6));

  const DiscretizedOperator T = DiscretizedOperator::from_kernel(kernel_of(c, grid.dim), grid);
  GridFunction f = centered_random(grid, c.seed + 7);
  const WeakTransferReport wt = weak_transfer_check(T, w, phi, f, mo);
  r["weak_transfer"] = {{"w_omega", wt.w_omega},
                        {"sqrt_w_omega", wt.sqrt_w_omega},
                        {"W_omega", wt.W_omega},
                        {"int_fW", wt.int_fW},
                        {"f_norm", wt.f_norm},
                        {"Rh_norm", wt.Rh_norm},
                        {"a1_W", wt.a1_W},
                        {"phi_a1", wt.phi_a1},
                        {"weak_l1_constant", wt.weak_l1_constant},
                        {"weak_proxy", wt.weak_proxy},
                        {"phi_of_a2", wt.phi_of_a2},
                        {"final_ratio", wt.final_ratio},
                        {"link_majorant", wt.link_majorant},
                        {"link_cauchy", wt.link_cauchy},
                        {"link_norm", wt.link_norm}};
  checks.add("transfer_links", wt.link_majorant && wt.link_cauchy && wt.link_norm);
  return r;
}

struct SweepRow {
  double alpha, a2, a1, strong, weak, K_chi, bound_linear, bound_loglinear, ratio_linear, ratio_loglinear;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<SweepRow> sweep_rows(const RunConfig& c, const WeightSpec& base, Checks& checks) {
  require(c.family == "power", ErrorKind::Config, "sweep family must be 'power'");
  std::vector<SweepRow> rows;
  const Grid grid(base.dim, c.level);
  const DiscretizedOperator T = DiscretizedOperator::from_kernel(kernel_of(c, base.dim), grid);
  PowerOptions power;
  power.tol = c.tol;
  power.seed = c.seed;
  bool weak_ok = true;
  for (int i = 0; i < c.steps; ++i) {
    const double alpha =
        c.steps == 1 ? c.alpha_min
                     : (c.alpha_min * double(c.steps - 1 - i) + c.alpha_max * double(i)) / double(c.steps - 1);
    WeightSpec s = base;
    s.kind = "power";
    s.alpha = alpha;
    s.level = c.level;
    const Weight w = make_weight(s);
    const NormReport n = norm_report(T, w, family_of(c), power);
    SweepRow row{};
    row.alpha = alpha;
    row.a2 = a2_norm(w, family_of(c));
    row.a1 = a1_norm(w, family_of(c));
    row.strong = n.strong;
    row.weak = n.weak;
    row.K_chi = n.K_chi;
    row.bound_linear = row.a2;
    row.bound_loglinear = row.a2 * std::log1p(row.a2);
    row.ratio_linear = row.strong / row.bound_linear;
    row.ratio_loglinear = row.strong / row.bound_loglinear;
    weak_ok = weak_ok && n.weak <= n.strong * (1.0 + 1e-12);
    rows.push_back(row);
  }
  checks.add("weak_le_strong", weak_ok);
  return rows;
}

}  // namespace

WeightSpec weight_spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("weight spec is not valid JSON: ") + e.what());
  }
  require(j.is_object(), ErrorKind::Config, "weight spec must be a JSON object");
  return weight_spec_of(j, get_or<int>(j, "level", 6));
}

RunOutcome run_command(const std::string& command, const std::string& config_json) {
  const auto names = command_names();
  require(std::find(names.begin(), names.end(), command) != names.end(), ErrorKind::Config,
          "unknown command '" + command + "'");
  const RunConfig c = parse_config(command, config_json);
  WeightSpec ws = weight_spec_of(c.weight, c.level);
  if (command == "sweep") ws.kind = "power";
  const json config = resolved(c, ws);
  RunOutcome out;
  out.format = c.format;
  out.resolved_config = config.dump();
  Checks checks;

  if (command == "sweep") {
    const std::vector<SweepRow> rows = sweep_rows(c, ws, checks);
    if (c.format == "csv") {
      std::ostringstream os;
      os << "alpha,a2,a1,strong,weak,K_chi,bound_linear,bound_loglinear,ratio_linear,ratio_loglinear\n";
      for (const SweepRow& r : rows) {
        os << fmt(r.alpha) << ',' << fmt(r.a2) << ',' << fmt(r.a1) << ',' << fmt(r.strong) << ',' << fmt(r.weak)
           << ',' << fmt(r.K_chi) << ',' << fmt(r.bound_linear) << ',' << fmt(r.bound_loglinear) << ','
           << fmt(r.ratio_linear) << ',' << fmt(r.ratio_loglinear) << '\n';
      }
      out.output = os.str();
    } else {
      json arr = json::array();
      for (const SweepRow& r : rows) {
        arr.push_back({{"alpha", r.alpha},
                       {"a2", r.a2},
                       {"a1", r.a1},
                       {"strong", r.strong},
                       {"weak", r.weak},
                       {"K_chi", r.K_chi},
                       {"bound_linear", r.bound_linear},
                       {"bound_loglinear", r.bound_loglinear},
                       {"ratio_linear", r.ratio_linear},
                       {"ratio_loglinear", r.ratio_loglinear}});
      }
      json doc;
      doc["schema"] = "corona-lab/1";
      doc["version"] = artifact_version();
      doc["command"] = command;
      doc["config"] = config;
      doc["result"] = {{"rows", arr}};
      doc["checks"] = checks.values;
      doc["status"] = checks.failed.empty() ? "ok" : "failed";
      out.output = doc.dump(2) + "\n";
    }
    out.failed = checks.failed;
    return out;
  }

  const Weight w = make_weight(ws);
  json result;
  if (command == "weight") result = cmd_weight(c, w, checks);
  else if (command == "goodbad") result = cmd_goodbad(c, w, checks);
  else if (command == "pivotal") result = cmd_pivotal(c, w, checks);
  else if (command == "corona") result = cmd_corona(c, w, checks);
  else if (command == "norms") result = cmd_norms(c, w, checks);
  else if (command == "decompose") result = cmd_decompose(c, w, checks);
  else result = cmd_extrapolate(c, w, checks);

  json doc;
  doc["schema"] = "corona-lab/1";
  doc["version"] = artifact_version();
  doc["command"] = command;
  doc["config"] = config;
  doc["result"] = result;
  doc["checks"] = checks.values;
  doc["status"] = checks.failed.empty() ? "ok" : "failed";
  doc["failed"] = checks.failed;
  out.output = doc.dump(2) + "\n";
  out.failed = checks.failed;
  return out;
}

}  // namespace corona_lab
