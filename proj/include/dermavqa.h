/* dermavqa.h - C interface to the dermatology CVQA pipeline engine.
 *
 * Usage:
 *   dvqa_engine_t* engine = NULL;
 *   if (dvqa_engine_create("config.json", &engine) != DVQA_STATUS_OK) { ... }
 *   dvqa_engine_set_option(engine, "seed", "42");
 *   dvqa_status_t status = dvqa_run(engine, "valid");
 *   if (status != DVQA_STATUS_OK) fprintf(stderr, "%s\n", dvqa_engine_last_error(engine));
 *   dvqa_engine_destroy(engine);
 *
 * Status codes double as process exit codes: 0 success, 1 runtime/backend
 * failure, 2 configuration/input error.
 */
#ifndef DERMAVQA_H
#define DERMAVQA_H

#include <stddef.h>

#if defined(_WIN32)
#define DVQA_EXPORT __declspec(dllexport)
#else
#define DVQA_EXPORT __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct dvqa_engine dvqa_engine_t;

typedef enum {
    DVQA_STATUS_OK = 0,
    DVQA_STATUS_RUNTIME_ERROR = 1,
    DVQA_STATUS_CONFIG_ERROR = 2
} dvqa_status_t;

DVQA_EXPORT const char* dvqa_version(void);

/* Creates an engine from a JSON config file. Environment overrides
 * (DVQA_SEED, DVQA_WORKERS, DVQA_MOCK_BACKENDS) apply on top of the file. */
DVQA_EXPORT dvqa_status_t dvqa_engine_create(const char* config_path, dvqa_engine_t** out);

/* Same, but from an in-memory JSON document. Relative paths stay relative
 * to the current working directory. */
DVQA_EXPORT dvqa_status_t dvqa_engine_create_from_json(const char* config_json,
                                                       dvqa_engine_t** out);

DVQA_EXPORT void dvqa_engine_destroy(dvqa_engine_t* engine);

/* Dotted-path config override, e.g. ("paths.output_dir", "/tmp/out") or
 * ("seed", "7"). Values parse as JSON scalars when possible. Overrides win
 * over environment variables, which win over the config file. */
DVQA_EXPORT dvqa_status_t dvqa_engine_set_option(dvqa_engine_t* engine, const char* key,
                                                 const char* value);

/* Message for the last failed call on this engine; empty string if none.
 * The pointer stays valid until the next call on the same engine. */
DVQA_EXPORT const char* dvqa_engine_last_error(const dvqa_engine_t* engine);

/* Pipeline commands. Each writes its outputs plus a manifest JSON under the
 * configured directories. */
DVQA_EXPORT dvqa_status_t dvqa_preprocess(dvqa_engine_t* engine, const char* split);
DVQA_EXPORT dvqa_status_t dvqa_build_kb(dvqa_engine_t* engine);
DVQA_EXPORT dvqa_status_t dvqa_run(dvqa_engine_t* engine, const char* split);
DVQA_EXPORT dvqa_status_t dvqa_aggregate(dvqa_engine_t* engine, const char* split);
DVQA_EXPORT dvqa_status_t dvqa_evaluate(dvqa_engine_t* engine, const char* split);

/* Pairwise agreement across `count` submission files. `names[i]` labels
 * `paths[i]`; include_gold != 0 adds the split's annotations as a
 * pseudo-model. */
DVQA_EXPORT dvqa_status_t dvqa_agreement(dvqa_engine_t* engine, const char* const* names,
                                         const char* const* paths, size_t count,
                                         int include_gold, const char* split);

/* Manifest JSON of the last successful command on this engine, as a string;
 * empty if none. Valid until the next call on the same engine. */
DVQA_EXPORT const char* dvqa_engine_last_manifest(const dvqa_engine_t* engine);

#ifdef __cplusplus
}
#endif

#endif /* DERMAVQA_H */
