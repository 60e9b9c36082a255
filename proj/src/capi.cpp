/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pmfnet/pmfnet.h"

#include <exception>
#include <new>
#include <omp.h>
#include <string>

#include "pmfnet/error.hpp"
#include "pmfnet/experiment.hpp"
#include "pmfnet/model_io.hpp"
#include "pmfnet/rates.hpp"
#include "pmfnet/simulate.hpp"

struct pmf_result {
  pmfnet::ResultEnvelope env;
  std::string envelope;
  std::string payload;
};

struct pmf_model {
  pmfnet::ModelInstance mi;
};

namespace {

thread_local std::string g_last_error;

pmf_status fail(pmf_status s, const char* msg) {
  g_last_error = msg;
  return s;
}

template <class F>
pmf_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const pmfnet::Error& e) {
    switch (e.kind()) {
      case pmfnet::ErrorKind::Config: return fail(PMF_ERR_CONFIG, e.what());
      case pmfnet::ErrorKind::Precondition: return fail(PMF_ERR_PRECONDITION, e.what());
      case pmfnet::ErrorKind::Numeric: return fail(PMF_ERR_NUMERIC, e.what());
      case pmfnet::ErrorKind::Layout: return fail(PMF_ERR_LAYOUT, e.what());
    }
    return fail(PMF_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PMF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PMF_ERR_INTERNAL, e.what());
  }
}

pmf_status null_arg(const char* name) {
  return fail(PMF_ERR_PRECONDITION, (std::string(name) + " must not be NULL").c_str());
}

}  // namespace

extern "C" {

const char* pmf_version(void) { return PMFNET_VERSION; }

const char* pmf_last_error(void) { return g_last_error.c_str(); }

void pmf_set_threads(unsigned n) {
  static const int dflt = omp_get_max_threads();
  omp_set_num_threads(n == 0 ? dflt : static_cast<int>(n));
}

size_t pmf_kind_count(void) { return pmfnet::experiment_kinds().size(); }

const char* pmf_kind_name(size_t i) {
  const auto& k = pmfnet::experiment_kinds();
  return i < k.size() ? k[i].c_str() : nullptr;
}

pmf_status pmf_run(const char* spec_json, const char* base_dir, pmf_result** out) {
  if (!spec_json) return null_arg("spec_json");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto spec = pmfnet::parse_json_text(spec_json, "spec");
    auto* r = new pmf_result;
    try {
      r->env = pmfnet::run_experiment(spec, base_dir ? base_dir : ".");
      r->envelope = r->env.to_json().dump(2);
      r->payload = r->env.payload.dump();
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
    return PMF_OK;
  });
}

const char* pmf_result_envelope(const pmf_result* r) { return r ? r->envelope.c_str() : nullptr; }
const char* pmf_result_payload(const pmf_result* r) { return r ? r->payload.c_str() : nullptr; }
int pmf_result_exit_code(const pmf_result* r) { return r ? r->env.exit_code : PMF_ERR_INTERNAL; }
size_t pmf_result_file_count(const pmf_result* r) { return r ? r->env.files.size() : 0; }

const char* pmf_result_file_name(const pmf_result* r, size_t i) {
  return r && i < r->env.files.size() ? r->env.files[i].first.c_str() : nullptr;
}

const char* pmf_result_file_content(const pmf_result* r, size_t i) {
  return r && i < r->env.files.size() ? r->env.files[i].second.c_str() : nullptr;
}

pmf_status pmf_result_write(const pmf_result* r, const char* out_dir) {
  if (!r) return null_arg("result");
  if (!out_dir) return null_arg("out_dir");
  return guarded([&] {
    pmfnet::write_outputs(r->env, out_dir);
    return PMF_OK;
  });
}

void pmf_result_free(pmf_result* r) { delete r; }

pmf_status pmf_model_load(const char* path, pmf_model** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    *out = new pmf_model{pmfnet::load_model_file(path)};
    return PMF_OK;
  });
}

pmf_status pmf_model_parse(const char* json_text, pmf_model** out) {
  if (!json_text) return null_arg("json_text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    *out = new pmf_model{pmfnet::model_from_json(pmfnet::parse_json_text(json_text, "model"))};
    return PMF_OK;
  });
}

pmf_status pmf_model_family(const char* name, size_t N, pmf_model** out) {
  if (!name) return null_arg("name");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    *out = new pmf_model{pmfnet::family_instance(name, N)};
    return PMF_OK;
  });
}

pmf_status pmf_model_dims(const pmf_model* m, size_t* n, size_t* n_noise) {
  if (!m) return null_arg("model");
  if (n) *n = m->mi.coeffs.n;
  if (n_noise) *n_noise = m->mi.coeffs.m;
  g_last_error.clear();
  return PMF_OK;
}

pmf_status pmf_model_rates(const pmf_model* m, double T, double* r, double* bound) {
  if (!m) return null_arg("model");
  return guarded([&] {
    const auto rep = pmfnet::error_bound(m->mi.coeffs, m->mi.noise, T);
    if (r) {
      for (std::size_t k = 0; k < rep.r.size(); ++k) r[k] = rep.r[k];
    }
    if (bound) *bound = rep.bound;
    return PMF_OK;
  });
}

pmf_status pmf_model_estimate(const pmf_model* m, double T, size_t steps, size_t paths, uint64_t seed,
                              unsigned threads, double* delta_hat, double* std_err) {
  if (!m) return null_arg("model");
  return guarded([&] {
    pmfnet::SimConfig s;
    s.T = T;
    s.steps = steps;
    s.n_paths = paths;
    s.seed = seed;
    s.threads = threads;
    const auto est = pmfnet::estimate_error(m->mi.coeffs, m->mi.noise, s);
    if (delta_hat) *delta_hat = est.delta_hat;
    if (std_err) *std_err = est.std_err;
    return PMF_OK;
  });
}

void pmf_model_free(pmf_model* m) { delete m; }

}  // extern "C"
