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

/* C interface to the pmfnet library. Handles are opaque; every call that can
 * fail returns a pmf_status and leaves a message in pmf_last_error(). */
#ifndef PMFNET_PMFNET_H
#define PMFNET_PMFNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PMF_API __declspec(dllexport)
#else
#define PMF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pmf_status {
  PMF_OK = 0,
  PMF_ERR_INTERNAL = 1,
  PMF_ERR_CONFIG = 2,
  PMF_CERT_FAIL = 3,
  PMF_ERR_PRECONDITION = 4,
  PMF_ERR_NUMERIC = 5,
  PMF_ERR_LAYOUT = 6
} pmf_status;

typedef struct pmf_result pmf_result;
typedef struct pmf_model pmf_model;

PMF_API const char* pmf_version(void);

/* Message for the last failing call on this thread; "" if none. */
PMF_API const char* pmf_last_error(void);

/* Worker threads for parallel sections; 0 restores the default. */
PMF_API void pmf_set_threads(unsigned n);

PMF_API size_t pmf_kind_count(void);
PMF_API const char* pmf_kind_name(size_t i);

/* Runs an experiment spec given as JSON text. Relative paths in the spec
 * resolve against base_dir (NULL means "."). A failed certification still
 * returns PMF_OK; check pmf_result_exit_code. */
PMF_API pmf_status pmf_run(const char* spec_json, const char* base_dir, pmf_result** out);

/* Strings below are owned by the result and live until pmf_result_free. */
PMF_API const char* pmf_result_envelope(const pmf_result* r);
PMF_API const char* pmf_result_payload(const pmf_result* r);
PMF_API int pmf_result_exit_code(const pmf_result* r);
PMF_API size_t pmf_result_file_count(const pmf_result* r);
PMF_API const char* pmf_result_file_name(const pmf_result* r, size_t i);
PMF_API const char* pmf_result_file_content(const pmf_result* r, size_t i);
PMF_API pmf_status pmf_result_write(const pmf_result* r, const char* out_dir);
PMF_API void pmf_result_free(pmf_result* r);

PMF_API pmf_status pmf_model_load(const char* path, pmf_model** out);
PMF_API pmf_status pmf_model_parse(const char* json_text, pmf_model** out);
PMF_API pmf_status pmf_model_family(const char* name, size_t N, pmf_model** out);
PMF_API pmf_status pmf_model_dims(const pmf_model* m, size_t* n, size_t* n_noise);
/* r must hold 12 values. */
PMF_API pmf_status pmf_model_rates(const pmf_model* m, double T, double* r, double* bound);
PMF_API pmf_status pmf_model_estimate(const pmf_model* m, double T, size_t steps, size_t paths,
                                      uint64_t seed, unsigned threads, double* delta_hat,
                                      double* std_err);
PMF_API void pmf_model_free(pmf_model* m);

#ifdef __cplusplus
}
#endif

#endif
