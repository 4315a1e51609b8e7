/* C interface of the udalm landmark-detection library. */
#ifndef UDALM_UDALM_H
#define UDALM_UDALM_H

#include <stddef.h>

#if defined(_WIN32)
#define UDALM_API __declspec(dllexport)
#else
#define UDALM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum udalm_status {
    UDALM_OK = 0,
    UDALM_ERR_INVALID_ARGUMENT = 1,
    UDALM_ERR_CONFIG = 2,
    UDALM_ERR_INPUT = 3,
    UDALM_ERR_LOAD = 4,
    UDALM_ERR_INTERNAL = 5
} udalm_status;

typedef struct udalm_config udalm_config;
typedef struct udalm_model udalm_model;

/* Message of the last failure on the calling thread; empty after success. */
UDALM_API const char* udalm_last_error(void);
UDALM_API const char* udalm_version(void);

/* Strings returned through char** out-parameters are released with this. */
UDALM_API void udalm_string_free(char* s);

/* Configuration. Relative data paths resolve against the file's directory.
   udalm_config_profile accepts "desk" or "full_scale". */
UDALM_API udalm_status udalm_config_load(const char* path, udalm_config** out);
UDALM_API udalm_status udalm_config_profile(const char* profile, udalm_config** out);
UDALM_API udalm_status udalm_config_set_seed(udalm_config* cfg, unsigned long long seed);
UDALM_API udalm_status udalm_config_set_deterministic(udalm_config* cfg, int deterministic);
/* Resolved data.test_manifest; empty string when unset. */
UDALM_API udalm_status udalm_config_test_manifest(const udalm_config* cfg, char** out_path);
UDALM_API udalm_status udalm_config_to_json(const udalm_config* cfg, char** out_json);
UDALM_API void udalm_config_free(udalm_config* cfg);

/* Commands. Output directories are created as needed. */
UDALM_API udalm_status udalm_synth(const udalm_config* cfg, const char* out_dir);
UDALM_API udalm_status udalm_train_source(const udalm_config* cfg, const char* out_dir, char** out_checkpoint);
/* Resumes from the newest checkpoint under out_dir, else from init_checkpoint
   (may be NULL), else from scratch. max_round < 0 runs to the curriculum end. */
UDALM_API udalm_status udalm_adapt(const udalm_config* cfg, const char* out_dir, const char* init_checkpoint,
                                   int max_round, int* out_last_round);
/* Writes the report under out_dir/eval and returns it as JSON. radii may be NULL. */
UDALM_API udalm_status udalm_eval(const char* checkpoint, const char* manifest, const double* radii_mm,
                                  size_t n_radii, const char* out_dir, const char* name, char** out_json);
UDALM_API udalm_status udalm_pseudo_labels_show(const char* file, const char* image_id, char** out_text);
/* cfg may be NULL; with it, a source/target histogram is added. */
UDALM_API udalm_status udalm_report(const char* run_dir, const udalm_config* cfg, char** out_path);

/* Models. */
UDALM_API udalm_status udalm_model_load(const char* checkpoint, udalm_model** out);
UDALM_API void udalm_model_free(udalm_model* model);
UDALM_API int udalm_model_num_landmarks(const udalm_model* model);
UDALM_API int udalm_model_input_width(const udalm_model* model);
UDALM_API int udalm_model_input_height(const udalm_model* model);
/* pixels: row-major width*height values in [0,1]. The image is resized to the
   model input. coords_xy receives 2*L values in the given image's pixels,
   confidences L values. */
UDALM_API udalm_status udalm_model_predict(const udalm_model* model, const double* pixels, int width, int height,
                                           double* coords_xy, double* confidences);

#ifdef __cplusplus
}
#endif

#endif
