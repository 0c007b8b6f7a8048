// Acceptance runner: `acceptance cN` checks criterion N and prints one PASS/FAIL line.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>
#include <sys/wait.h>

#include <json.hpp>

#include "corona_lab/corona.hpp"
#include "corona_lab/decomposition.hpp"
#include "corona_lab/errors.hpp"
#include "corona_lab/extrapolation.hpp"
#include "corona_lab/martingale.hpp"
#include "corona_lab/pipeline.hpp"
#include "corona_lab/pivotal.hpp"
#include "corona_lab/util.hpp"

using namespace corona_lab;
using json = nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// Pinned tolerances.
constexpr int kC1Instances = 50;
constexpr double kC1Relative = 1e-8;
constexpr double kC1Seconds = 120.0;
constexpr int kC2Instances = 100;
constexpr double kC2Residual = 1e-10;
constexpr double kC4Spread = 10.0;
constexpr std::int64_t kC5Trials = 10000;
constexpr double kC5Sigmas = 3.0;
constexpr double kC5Seconds = 60.0;
constexpr double kC6Seconds = 60.0;
constexpr double kC8NormFactor = 2.01;
constexpr double kC8Spread = 5.0;
constexpr int kC8Pairs = 20;
constexpr double kC9Validation = 1.25;
constexpr double kC9Seconds = 600.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

GridFunction central_random(const Grid& g, Rng& rng) {
  GridFunction f(static_cast<std::size_t>(g.size()), 0.0);
  const Index n = g.side();
  for (Index i = 0; i < g.size(); ++i) {
    const IVec c = g.coords(i);
    bool inside = true;
    for (int k = 0; k < g.dim; ++k) inside = inside && 4 * c[k] >= n && 4 * c[k] < 3 * n;
    if (inside) f[static_cast<std::size_t>(i)] = rng.normal();
  }
  return f;
}

Weight random_weight(const Grid& g, Rng& rng, double spread) {
  std::vector<double> v(static_cast<std::size_t>(g.size()));
  for (double& x : v) x = std::exp(rng.uniform(-spread, spread));
  return Weight(g, std::move(v));
}

// 1. Exact reassembly of the bilinear form.
Verdict c1() {
  Stopwatch clock;
  const Grid g(1, 6);
  const auto H = DiscretizedOperator::from_kernel(hilbert_kernel(), g);
  Rng rng(101);
  double worst = 0.0;
  int done = 0;
  for (int t = 0; t < kC1Instances; ++t) {
    const Weight w = random_weight(g, rng, 0.2 + 0.05 * t);
    const LatticePair pair = sample_lattice_pair(1000 + static_cast<std::uint64_t>(t), 1, 1.0, 2, 6);
    const GridFunction f = central_random(g, rng), gg = central_random(g, rng);
    const DecompositionTrees trees = build_decomposition_trees(w.mu(), w.nu(), pair);
    const DecompositionReport rep = full_report(H, w, f, gg, pair, trees);
    const double denom = std::max(std::abs(rep.total), 1e-300);
    worst = std::max(worst, rep.reassembly_residual / denom);
    ++done;
  }
  const double secs = clock.seconds();
  return {done >= kC1Instances && worst <= kC1Relative && secs <= kC1Seconds,
          std::to_string(done) + " instances, worst relative residual " + fmt("%.3g", worst) + ", " +
              fmt("%.1f", secs) + " s"};
}

// 2. Parseval, reconstruction and orthogonality of martingale differences.
Verdict c2() {
  Rng rng(202);
  double worst = 0.0;
  for (int t = 0; t < kC2Instances; ++t) {
    const int L = 2 + t % 5;
    const Grid g(1, L);
    const Weight w = random_weight(g, rng, 1.5);
    const Index q = g.side() / 4;
    const Lattice lat{1, L, {rng.between(-q, q), 0, 0}, 0};
    const GridFunction f = central_random(g, rng);
    const Measure mu = w.mu();
    const auto dec = decompose(f, mu, lat);
    const double total = mu.inner(f, f);
    const double scale = std::max(total, 1e-300);
    const GridFunction back = dec.reconstruct(g);
    double rec = 0.0;
    for (std::size_t c = 0; c < f.size(); ++c) rec = std::max(rec, std::abs(back[c] - f[c]));
    KahanSum energy;
    energy.add(dec.top * dec.top * mu.mass(dec.top_cube));
    for (const auto& co : dec.coeffs) energy.add(co.norm_sq(mu));
    double ortho = 0.0;
    for (std::size_t a = 0; a < dec.coeffs.size(); ++a) {
      const GridFunction fa = dec.coeffs[a].as_function(g);
      for (std::size_t b = a + 1; b < dec.coeffs.size(); ++b) {
        ortho = std::max(ortho, std::abs(mu.inner(fa, dec.coeffs[b].as_function(g))));
      }
    }
    double fmax = 1.0;
    for (double x : f) fmax = std::max(fmax, std::abs(x));
    worst = std::max({worst, rec / fmax, std::abs(energy.value() - total) / scale, ortho / scale});
  }
  return {worst <= kC2Residual, std::to_string(kC2Instances) + " decompositions, worst residual " + fmt("%.3g", worst)};
}

// 3. Half packing of stopping trees with K from the pivotal search.
Verdict c3() {
  std::vector<Weight> suite;
  for (double c : {2.0, 4.0, 8.0, 16.0, 64.0}) suite.push_back(Weight::step(Grid(1, 6), c));
  suite.push_back(Weight::step(Grid(1, 6), 64.0, {0.40625, 0, 0}, 0.03125));
  for (double a : {-0.9, -0.7, -0.5, -0.3, 0.3, 0.5, 0.7, 0.9}) suite.push_back(Weight::power(Grid(1, 7), a));
  suite.push_back(Weight::step(Grid(2, 4), 8.0, {0.25, 0.25, 0.0}, 0.5));
  std::size_t violations = 0, nodes = 0;
  double worst = 0.0;
  for (const Weight& w : suite) {
    const Grid& g = w.grid();
    for (const IVec& shift : {IVec{0, 0, 0}, IVec{g.side() / 8, g.dim > 1 ? -g.side() / 8 : 0, 0}}) {
      const Lattice lat{g.dim, g.level, shift, 0};
      const double K = estimate_pivotal_constant(w.mu(), w.nu()).K_estimate;
      const StoppingTree tree = build_stopping_tree(lat.top(), lat, w.mu(), w.nu(), K);
      const PackingReport rep = packing_check(tree, w.mu());
      violations += rep.violations.size();
      nodes += tree.nodes.size();
      worst = std::max(worst, rep.max_child_fraction);
    }
  }
  return {violations == 0, std::to_string(suite.size() * 2) + " trees, " + std::to_string(nodes) + " nodes, " +
                               std::to_string(violations) + " violations, max child fraction " + fmt("%.4f", worst)};
}

// 4. K_estimate / [w]^2 over the step sweep.
Verdict c4() {
  double lo = INFINITY, hi = 0.0, a2_lo = INFINITY, a2_hi = 0.0;
  std::string values;
  for (double c : {2.0, 4.0, 8.0, 16.0}) {
    const Weight w = Weight::step(Grid(1, 6), c);
    const double a2 = a2_norm(w, CubeFamily::Dyadic);
    const double r = estimate_pivotal_constant(w.mu(), w.nu()).K_estimate / (a2 * a2);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    a2_lo = std::min(a2_lo, a2);
    a2_hi = std::max(a2_hi, a2);
    values += (values.empty() ? "" : " ") + fmt("%.4g", r);
  }
  const double spread = hi / lo;
  return {spread <= kC4Spread, "K/[w]^2 = [" + values + "], spread " + fmt("%.1f", spread) + " (limit " +
                                   fmt("%.0f", kC4Spread) + "), [w]_A2 in [" + fmt("%.3g", a2_lo) + ", " +
                                   fmt("%.3g", a2_hi) + "]"};
}

// 5. Essential badness probability decays in r.
Verdict c5() {
  Stopwatch clock;
  std::vector<Estimate> p;
  for (int r = 1; r <= 4; ++r) p.push_back(badness_probability(6, r, kC5Trials, 5000));
  bool monotone = true;
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double se = std::hypot(p[i].std_error, p[i - 1].std_error);
    monotone = monotone && p[i].value <= p[i - 1].value + kC5Sigmas * se;
  }
  const bool halved = p[3].value <= 0.5 * p[0].value;
  const double secs = clock.seconds();
  std::string values;
  for (const Estimate& e : p) values += (values.empty() ? "" : " ") + fmt("%.4f", e.value);
  return {monotone && halved && secs <= kC5Seconds, "p(r=1..4) = [" + values + "], monotone " +
                                                        (monotone ? "yes" : "no") + ", halved " +
                                                        (halved ? "yes" : "no") + ", " + fmt("%.1f", secs) + " s"};
}

// 6. Hilbert calibration.
Verdict c6() {
  Stopwatch clock;
  const Grid g(1, 10);
  const auto H = DiscretizedOperator::from_kernel(hilbert_kernel(), g);
  const Weight one = Weight::constant(g);
  const double strong = strong_norm(H, one.mu(), one.nu()).value;
  const double K = test_constant(H, one.mu(), one.nu()).K_chi;
  const double secs = clock.seconds();
  bool weak_ok = true;
  const Grid g6(1, 6);
  const auto H6 = DiscretizedOperator::from_kernel(hilbert_kernel(), g6);
  std::vector<Weight> suite{Weight::constant(g6)};
  for (double c : {2.0, 4.0, 8.0, 16.0}) suite.push_back(Weight::step(g6, c));
  for (double a : {-0.9, -0.5, 0.5, 0.9}) suite.push_back(Weight::power(g6, a));
  for (const Weight& w : suite) {
    const NormReport r = norm_report(H6, w);
    weak_ok = weak_ok && r.weak <= r.strong * (1.0 + 1e-12) && r.weak_dual <= r.strong * (1.0 + 1e-12);
  }
  const bool ok = strong >= 0.9 * kPi && strong <= kPi && K >= 0.85 * kPi * kPi && K <= kPi * kPi && weak_ok &&
                  secs <= kC6Seconds;
  return {ok, "strong " + fmt("%.4f", strong) + " / pi = " + fmt("%.4f", strong / kPi) + ", K_chi / pi^2 = " +
                  fmt("%.4f", K / (kPi * kPi)) + ", weak <= strong " + (weak_ok ? "yes" : "no") + ", L=10 in " +
                  fmt("%.2f", secs) + " s"};
}

// 7. Paraproduct decay on the forced-stopping configuration, run through the pipeline.
Verdict c7() {
  const json cfg = {{"level", 6},
                    {"aligned", true},
                    {"discard_bad", false},
                    {"threshold_mult", 0.1},
                    {"weight",
                     {{"kind", "step"}, {"params", {{"c", 64.0}, {"region_lo", {0.40625}}, {"region_side", 0.03125}}}}}};
  const json doc = json::parse(run_command("decompose", cfg.dump()).output);
  const json& tau = doc["result"]["tau"]["paraproducts"];
  const std::vector<double> F = tau["F"].get<std::vector<double>>();
  const int stopping = tau["stopping_cubes"].get<int>();
  bool ok = F.size() >= 2 && F[0] > 0.0 && F[1] > 0.0 && stopping >= 2;
  std::string ratios;
  for (std::size_t j = 1; j <= 3; ++j) {
    const double Fj = j < F.size() ? F[j] : 0.0;
    const double ratio = F.empty() || F[0] <= 0.0 ? INFINITY : Fj / F[0];
    ok = ok && ratio <= std::pow(2.0, -static_cast<double>(j) / 4.0);
    ratios += (ratios.empty() ? "" : " ") + fmt("%.4g", ratio);
  }
  return {ok, std::to_string(stopping) + " stopping cubes, F_j/F_0 (j=1..3) = [" + ratios + "]"};
}

// 8. Rubio de Francia majorant.
Verdict c8() {
  Rng rng(808);
  bool majorizes = true;
  double worst_norm = 0.0;
  for (int t = 0; t < kC8Pairs; ++t) {
    const Grid g(1, 4 + t % 3);
    const Weight w = random_weight(g, rng, 0.5 + 0.1 * t);
    GridFunction h(static_cast<std::size_t>(g.size()));
    for (double& x : h) x = rng.uniform01();
    MajorantReport rep;
    const GridFunction Rh = rubio_de_francia(h, w, rep);
    for (std::size_t c = 0; c < h.size(); ++c) majorizes = majorizes && Rh[c] >= h[c];
    worst_norm = std::max(worst_norm, rep.norm_Rh / rep.norm_h);
  }
  double lo = INFINITY, hi = 0.0;
  for (int i = 0; i < 19; ++i) {
    const double alpha = -0.9 + 0.1 * i;
    const Weight w = Weight::power(Grid(1, 6), alpha);
    GridFunction h(static_cast<std::size_t>(w.grid().size()));
    for (double& x : h) x = rng.uniform01();
    MajorantReport rep;
    rubio_de_francia(h, w, rep);
    const double r = rep.a1_of_wRh / a2_norm(w);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  const bool ok = majorizes && worst_norm <= kC8NormFactor && hi / lo <= kC8Spread;
  return {ok, std::string("Rh >= h ") + (majorizes ? "yes" : "no") + ", max ||Rh||/||h|| " + fmt("%.4f", worst_norm) +
                  ", [wRh]_A1/[w]_A2 in [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "], spread " +
                  fmt("%.2f", hi / lo)};
}

// 9. Headline sweep: fit C on even-indexed points, validate on the odd ones.
Verdict c9() {
  Stopwatch clock;
  const json cfg = {{"level", 10}, {"steps", 19}, {"alpha_min", -0.9}, {"alpha_max", 0.9}, {"kernel", "hilbert"}};
  const json doc = json::parse(run_command("sweep", cfg.dump()).output);
  const json& rows = doc["result"]["rows"];
  double C = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); i += 2) C = std::max(C, rows[i]["ratio_loglinear"].get<double>());
  for (std::size_t i = 1; i < rows.size(); i += 2) worst = std::max(worst, rows[i]["ratio_loglinear"].get<double>());
  const double secs = clock.seconds();
  const bool ok = rows.size() == 19 && worst <= kC9Validation * C && secs <= kC9Seconds;
  return {ok, "fitted C " + fmt("%.4f", C) + ", worst validation ratio " + fmt("%.4f", worst) + " = " +
                  fmt("%.3f", worst / C) + " C, " + fmt("%.1f", secs) + " s"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// 10. Repeated CLI runs are byte-identical.
Verdict c10() {
  const auto dir = std::filesystem::temp_directory_path() / "corona_lab_acceptance_c10";
  std::filesystem::create_directories(dir);
  const std::vector<std::string> runs = {
      "decompose --level 6 --seed 4",
      "goodbad --level 6 --seed 4 --trials 500",
      "pivotal --level 6 --seed 4",
      "extrapolate --level 6 --seed 4",
      "sweep --level 6 --steps 5 --format csv",
  };
  int identical = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::string out[2];
    for (int k = 0; k < 2; ++k) {
      const auto path = dir / ("run" + std::to_string(i) + "_" + std::to_string(k));
      const std::string cmd = std::string(CORONA_LAB_CLI_PATH) + " " + runs[i] + " --out " + path.string() +
                              " >/dev/null 2>&1";
      const int raw = std::system(cmd.c_str());
      if (!WIFEXITED(raw) || WEXITSTATUS(raw) != 0) return {false, "run failed: " + runs[i]};
      out[k] = slurp(path);
    }
    if (!out[0].empty() && out[0] == out[1]) ++identical;
  }
  std::filesystem::remove_all(dir);
  return {identical == static_cast<int>(runs.size()),
          std::to_string(identical) + "/" + std::to_string(runs.size()) + " commands byte-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<Verdict()>> criteria = {
      {"c1", c1}, {"c2", c2}, {"c3", c3}, {"c4", c4}, {"c5", c5},
      {"c6", c6}, {"c7", c7}, {"c8", c8}, {"c9", c9}, {"c10", c10},
  };
  std::vector<std::string> wanted;
  for (int i = 1; i < argc; ++i) wanted.emplace_back(argv[i]);
  if (wanted.empty()) {
    for (int i = 1; i <= 10; ++i) wanted.push_back("c" + std::to_string(i));
  }
  bool all = true;
  for (const std::string& name : wanted) {
    const auto it = criteria.find(name);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion '%s'\n", name.c_str());
      return 2;
    }
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %s: %s\n", v.pass ? "PASS" : "FAIL", name.substr(1).c_str(), v.detail.c_str());
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
