#ifndef EDGETIMER_EDGETIMER_H
#define EDGETIMER_EDGETIMER_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ET_API __declspec(dllexport)
#else
#define ET_API __attribute__((visibility("default")))
#endif

typedef enum et_status {
  ET_OK = 0,
  ET_ERR_ARGUMENT = 1,           /* null handle, unknown key, bad variant */
  ET_ERR_CONFIG = 2,             /* config file unreadable or invalid */
  ET_ERR_MISSING_CHECKPOINT = 3,
  ET_ERR_CHECKPOINT = 4,         /* checkpoint unreadable or for another config */
  ET_ERR_WORKLOAD = 5,           /* trace or script could not be loaded */
  ET_ERR_DIVERGED = 6,           /* training produced non-finite values */
  ET_ERR_IO = 7,
  ET_ERR_INTERNAL = 8
} et_status;

typedef struct et_experiment et_experiment;

ET_API const char* et_version(void);

/* Message of the last failed call on this thread ("" if none). */
ET_API const char* et_last_error(void);

ET_API et_status et_experiment_from_file(const char* path, et_experiment** out);
ET_API et_status et_experiment_from_json(const char* json, et_experiment** out);
ET_API void et_experiment_destroy(et_experiment* exp);

/* Overrides: seed, pattern, rules, method, epochs, horizon, train_on_eval_script. */
ET_API et_status et_experiment_set(et_experiment* exp, const char* key, const char* value);

/* Effective configuration as JSON. The pointer stays valid until the next
   call on the same handle. */
ET_API const char* et_experiment_config(et_experiment* exp);

ET_API et_status et_train(et_experiment* exp, const char* out_dir);
/* checkpoint may be NULL: <out_dir>/checkpoint.bin is used. */
ET_API et_status et_eval(et_experiment* exp, const char* out_dir, const char* checkpoint);
ET_API et_status et_grid(et_experiment* exp, const char* out_dir);
/* variant: no-decomposition, no-layer1, no-layer2, no-layer3, no-centralized,
   no-safe or all. */
ET_API et_status et_ablate(et_experiment* exp, const char* variant, const char* out_dir);
ET_API et_status et_smoke(et_experiment* exp, const char* out_dir, int slots, int* completed, int* total);

/* "key=value" lines describing the last run on this handle. */
ET_API const char* et_last_summary(et_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif /* EDGETIMER_EDGETIMER_H */
