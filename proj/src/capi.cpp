#include "corona_lab/corona_lab.h"

#include <exception>
#include <new>
#include <string>

#include <json.hpp>

#include "corona_lab/errors.hpp"
#include "corona_lab/lattice.hpp"
#include "corona_lab/operator.hpp"
#include "corona_lab/pipeline.hpp"
#include "corona_lab/weight.hpp"

struct clab_weight {
  corona_lab::Weight weight;
};

struct clab_operator {
  corona_lab::DiscretizedOperator op;
};

struct clab_lattice_pair {
  corona_lab::LatticePair pair;
};

struct clab_report {
  corona_lab::RunOutcome outcome;
};

namespace {

thread_local std::string last_error;

clab_status status_of(corona_lab::ErrorKind kind) {
  using corona_lab::ErrorKind;
  switch (kind) {
    case ErrorKind::Parameter: return CLAB_ERR_PARAMETER;
    case ErrorKind::Resolution: return CLAB_ERR_RESOLUTION;
    case ErrorKind::Domain: return CLAB_ERR_DOMAIN;
    case ErrorKind::Containment: return CLAB_ERR_CONTAINMENT;
    case ErrorKind::Disjointness: return CLAB_ERR_DISJOINTNESS;
    case ErrorKind::Degenerate: return CLAB_ERR_DEGENERATE;
    case ErrorKind::Classification: return CLAB_ERR_CLASSIFICATION;
    case ErrorKind::Convergence: return CLAB_ERR_CONVERGENCE;
    case ErrorKind::Assertion: return CLAB_ERR_ASSERTION;
    case ErrorKind::Config: return CLAB_ERR_CONFIG;
  }
  return CLAB_ERR_INTERNAL;
}

template <typename Body>
clab_status guarded(Body&& body) {
  try {
    last_error.clear();
    body();
    return CLAB_OK;
  } catch (const corona_lab::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return CLAB_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return CLAB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return CLAB_ERR_INTERNAL;
  }
}

clab_status null_argument(const char* what) {
  last_error = std::string("null argument: ") + what;
  return CLAB_ERR_NULL_ARGUMENT;
}

corona_lab::CubeFamily family_of(int all_cubes) {
  return all_cubes ? corona_lab::CubeFamily::AllAligned : corona_lab::CubeFamily::Dyadic;
}

}  // namespace

extern "C" {

const char* clab_version(void) { return corona_lab::artifact_version(); }

const char* clab_status_name(clab_status status) {
  switch (status) {
    case CLAB_OK: return "ok";
    case CLAB_ERR_PARAMETER: return "parameter";
    case CLAB_ERR_RESOLUTION: return "resolution";
    case CLAB_ERR_DOMAIN: return "domain";
    case CLAB_ERR_CONTAINMENT: return "containment";
    case CLAB_ERR_DISJOINTNESS: return "disjointness";
    case CLAB_ERR_DEGENERATE: return "degenerate";
    case CLAB_ERR_CLASSIFICATION: return "classification";
    case CLAB_ERR_CONVERGENCE: return "convergence";
    case CLAB_ERR_ASSERTION: return "assertion";
    case CLAB_ERR_CONFIG: return "config";
    case CLAB_ERR_NULL_ARGUMENT: return "null_argument";
    case CLAB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* clab_last_error(void) { return last_error.c_str(); }

clab_status clab_weight_create(const char* spec_json, clab_weight** out) {
  if (!spec_json) return null_argument("spec_json");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    const corona_lab::WeightSpec s = corona_lab::weight_spec_from_json(spec_json);
    *out = new clab_weight{corona_lab::make_weight(s)};
  });
}

void clab_weight_free(clab_weight* w) { delete w; }

clab_status clab_weight_size(const clab_weight* w, int64_t* cells) {
  if (!w) return null_argument("w");
  if (!cells) return null_argument("cells");
  *cells = w->weight.grid().size();
  return CLAB_OK;
}

clab_status clab_weight_values(const clab_weight* w, double* buffer, size_t capacity) {
  if (!w) return null_argument("w");
  if (!buffer && capacity > 0) return null_argument("buffer");
  const auto& v = w->weight.values();
  for (size_t i = 0; i < capacity && i < v.size(); ++i) buffer[i] = v[i];
  return CLAB_OK;
}

clab_status clab_weight_a2(const clab_weight* w, int all_cubes, double* out) {
  if (!w) return null_argument("w");
  if (!out) return null_argument("out");
  return guarded([&] { *out = corona_lab::a2_norm(w->weight, family_of(all_cubes)); });
}

clab_status clab_weight_a1(const clab_weight* w, int all_cubes, double* out) {
  if (!w) return null_argument("w");
  if (!out) return null_argument("out");
  return guarded([&] { *out = corona_lab::a1_norm(w->weight, family_of(all_cubes)); });
}

clab_status clab_operator_create(const char* kernel, int dim, int level, clab_operator** out) {
  if (!kernel) return null_argument("kernel");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    const corona_lab::KernelSpec spec = corona_lab::kernel_by_name(kernel, dim);
    *out = new clab_operator{corona_lab::DiscretizedOperator::from_kernel(spec, corona_lab::Grid(dim, level))};
  });
}

void clab_operator_free(clab_operator* op) { delete op; }

clab_status clab_operator_strong_norm(const clab_operator* op, const clab_weight* w, double* out) {
  if (!op) return null_argument("op");
  if (!w) return null_argument("w");
  if (!out) return null_argument("out");
  return guarded([&] {
    corona_lab::require(op->op.grid() == w->weight.grid(), corona_lab::ErrorKind::Parameter,
                        "operator and weight live on different grids");
    *out = corona_lab::strong_norm(op->op, w->weight.mu(), w->weight.nu()).value;
  });
}

clab_status clab_operator_test_constant(const clab_operator* op, const clab_weight* w, double* out) {
  if (!op) return null_argument("op");
  if (!w) return null_argument("w");
  if (!out) return null_argument("out");
  return guarded([&] {
    corona_lab::require(op->op.grid() == w->weight.grid(), corona_lab::ErrorKind::Parameter,
                        "operator and weight live on different grids");
    *out = corona_lab::test_constant(op->op, w->weight.mu(), w->weight.nu()).K_chi;
  });
}

clab_status clab_lattice_pair_sample(uint64_t seed, int dim, double epsilon, int r, int grid_level,
                                     clab_lattice_pair** out) {
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    *out = new clab_lattice_pair{corona_lab::sample_lattice_pair(seed, dim, epsilon, r, grid_level)};
  });
}

void clab_lattice_pair_free(clab_lattice_pair* pair) { delete pair; }

clab_status clab_lattice_pair_shift(const clab_lattice_pair* pair, int which, int64_t* shift) {
  if (!pair) return null_argument("pair");
  if (!shift) return null_argument("shift");
  if (which != 0 && which != 1) {
    last_error = "which must be 0 (mu) or 1 (nu)";
    return CLAB_ERR_PARAMETER;
  }
  const corona_lab::Lattice& l = pair->pair.lattice(which);
  for (std::size_t k = 0; k < 3; ++k) shift[k] = l.shift[k];
  return CLAB_OK;
}

clab_status clab_cube_badness(const clab_lattice_pair* pair, int which, int level, const int64_t* index, int* bad,
                              int* essentially_bad) {
  if (!pair) return null_argument("pair");
  if (!index) return null_argument("index");
  if (which != 0 && which != 1) {
    last_error = "which must be 0 (mu) or 1 (nu)";
    return CLAB_ERR_PARAMETER;
  }
  return guarded([&] {
    const corona_lab::IVec idx{index[0], index[1], index[2]};
    const corona_lab::Cube cube = pair->pair.lattice(which).cube(level, idx);
    const corona_lab::BadnessResult b = corona_lab::classify_badness(cube, pair->pair);
    if (bad) *bad = b.bad ? 1 : 0;
    if (essentially_bad) *essentially_bad = b.essentially_bad ? 1 : 0;
  });
}

clab_status clab_run(const char* command, const char* config_json, clab_report** out) {
  if (!command) return null_argument("command");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    *out = new clab_report{corona_lab::run_command(command, config_json ? config_json : "")};
  });
}

void clab_report_free(clab_report* report) { delete report; }

const char* clab_report_output(const clab_report* report) { return report ? report->outcome.output.c_str() : ""; }

const char* clab_report_format(const clab_report* report) { return report ? report->outcome.format.c_str() : ""; }

const char* clab_report_config(const clab_report* report) {
  return report ? report->outcome.resolved_config.c_str() : "";
}

size_t clab_report_failed_count(const clab_report* report) { return report ? report->outcome.failed.size() : 0; }

const char* clab_report_failed_name(const clab_report* report, size_t i) {
  if (!report || i >= report->outcome.failed.size()) return "";
  return report->outcome.failed[i].c_str();
}

}  // extern "C"
