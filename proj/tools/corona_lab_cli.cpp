#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "corona_lab/corona_lab.h"

namespace {

using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::string config_path;
  std::string spec;
  std::string kernel;
  int level = 0;
  int r = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  std::int64_t trials = 0;
  std::string out;
  std::string format;
  double threshold_mult = 0.0;
  double tol = 0.0;
  std::string cubes;
  std::string family;
  double alpha_min = 0.0;
  double alpha_max = 0.0;
  int steps = 0;
  std::string phi;
};

bool is_config_error(clab_status s) {
  return s == CLAB_ERR_CONFIG || s == CLAB_ERR_PARAMETER || s == CLAB_ERR_RESOLUTION || s == CLAB_ERR_DOMAIN ||
         s == CLAB_ERR_NULL_ARGUMENT;
}

bool read_file(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream os;
  os << in.rdbuf();
  text = os.str();
  return true;
}

bool write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return false;
  out << text;
  return static_cast<bool>(out);
}

// --config accepts a plain config object or a previous JSON report (its "config" member).
int load_base_config(const std::string& path, json& cfg) {
  std::string text;
  if (!read_file(path, text)) {
    std::cerr << "error: cannot read config '" << path << "'\n";
    return kExitConfig;
  }
  try {
    json j = json::parse(text);
    if (j.contains("schema") && j.contains("config")) j = j["config"];
    if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
    cfg = j;
  } catch (const std::exception& e) {
    std::cerr << "error: config '" << path << "': " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

int run(const std::string& command, const Flags& flags, const CLI::App& sub) {
  auto given = [&](const char* flag) {
    const CLI::Option* o = sub.get_option_no_throw(flag);
    return o != nullptr && o->count() > 0;
  };
  json cfg = json::object();
  if (given("--config")) {
    if (int rc = load_base_config(flags.config_path, cfg); rc != kExitOk) return rc;
    cfg.erase("command");
  }
  auto set = [&](const char* flag, const char* key, const auto& value) {
    if (given(flag)) cfg[key] = value;
  };
  set("--spec", "spec", flags.spec);
  if (given("--spec")) cfg.erase("weight");
  set("--kernel", "kernel", flags.kernel);
  set("--level", "level", flags.level);
  set("--r", "r", flags.r);
  set("--epsilon", "epsilon", flags.epsilon);
  set("--seed", "seed", flags.seed);
  set("--trials", "trials", flags.trials);
  set("--format", "format", flags.format);
  set("--threshold-mult", "threshold_mult", flags.threshold_mult);
  set("--tol", "tol", flags.tol);
  set("--cubes", "cubes", flags.cubes);
  set("--family", "family", flags.family);
  set("--alpha-min", "alpha_min", flags.alpha_min);
  set("--alpha-max", "alpha_max", flags.alpha_max);
  set("--steps", "steps", flags.steps);
  set("--phi", "phi", flags.phi);

  clab_report* report = nullptr;
  const clab_status st = clab_run(command.c_str(), cfg.dump().c_str(), &report);
  if (st != CLAB_OK) {
    std::cerr << "error (" << clab_status_name(st) << "): " << clab_last_error() << "\n";
    return is_config_error(st) ? kExitConfig : kExitFailed;
  }
  const std::string output = clab_report_output(report);
  const std::string format = clab_report_format(report);
  const std::string resolved = clab_report_config(report);
  const std::size_t failed = clab_report_failed_count(report);
  for (std::size_t i = 0; i < failed; ++i) {
    std::cerr << "invariant failed: " << clab_report_failed_name(report, i) << "\n";
  }
  clab_report_free(report);

  if (flags.out.empty()) {
    std::fwrite(output.data(), 1, output.size(), stdout);
  } else {
    if (!write_file(flags.out, output)) {
      std::cerr << "error: cannot write '" << flags.out << "'\n";
      return kExitConfig;
    }
    // CSV cannot carry the config, so it goes next to the table.
    if (format == "csv") {
      json side;
      side["schema"] = "corona-lab/1";
      side["version"] = clab_version();
      side["config"] = json::parse(resolved);
      if (!write_file(flags.out + ".config.json", side.dump(2) + "\n")) {
        std::cerr << "error: cannot write '" << flags.out << ".config.json'\n";
        return kExitConfig;
      }
    }
  }
  return failed == 0 ? kExitOk : kExitFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for two-weight and A2 estimates of dyadic singular integrals"};
  app.set_version_flag("--version", std::string(clab_version()));
  app.require_subcommand(1);

  Flags flags;
  const char* commands[][2] = {
      {"weight", "A2 and A1 characteristics of a weight"},
      {"goodbad", "sampled lattice pair and bad-cube probabilities"},
      {"pivotal", "pivotal constant estimate and Buckley ratio"},
      {"corona", "stopping tree and packing check"},
      {"norms", "strong, weak and testing norms of the operator"},
      {"decompose", "full bilinear decomposition with audits"},
      {"extrapolate", "Rubio de Francia majorant and weak transfer"},
      {"sweep", "power-weight sweep of norms against A2 bounds"},
  };
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c[0], c[1]);
    sub->add_option("--config", flags.config_path, "JSON config or previous JSON report to re-run");
    sub->add_option("--spec", flags.spec, "weight spec JSON file");
    sub->add_option("--kernel", flags.kernel, "kernel name (hilbert, zero, dyadic)");
    sub->add_option("--level", flags.level, "grid level L (2^L cells per side)");
    sub->add_option("--r", flags.r, "goodness depth r");
    sub->add_option("--epsilon", flags.epsilon, "kernel smoothness exponent");
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--trials", flags.trials, "Monte Carlo trials");
    sub->add_option("--out", flags.out, "output path (stdout when omitted)");
    sub->add_option("--format", flags.format, "json or csv (csv for sweep only)");
    sub->add_option("--threshold-mult", flags.threshold_mult, "stopping threshold multiplier");
    sub->add_option("--tol", flags.tol, "power iteration tolerance");
    sub->add_option("--cubes", flags.cubes, "cube family: dyadic or all");
    if (std::string(c[0]) == "sweep") {
      sub->add_option("--family", flags.family, "weight family (power)");
      sub->add_option("--alpha-min", flags.alpha_min, "smallest exponent");
      sub->add_option("--alpha-max", flags.alpha_max, "largest exponent");
      sub->add_option("--steps", flags.steps, "number of sweep points");
    }
    if (std::string(c[0]) == "sweep" || std::string(c[0]) == "extrapolate") {
      sub->add_option("--phi", flags.phi, "growth function: linear or loglinear");
    }
    subs.emplace_back(c[0], sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) return run(name, flags, *sub);
  }
  return kExitConfig;
}
