/* C interface to the despeckling library.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every fallible call returns a psd_status; on
 * failure psd_last_error() describes the problem (thread-local, valid until
 * the next failing call on the same thread). */
#ifndef PSD_PSD_H
#define PSD_PSD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(PSD_BUILDING_DLL)
#define PSD_API __declspec(dllexport)
#else
#define PSD_API __declspec(dllimport)
#endif
#else
#define PSD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum psd_status {
  PSD_OK = 0,
  PSD_ERR_INVALID_ARGUMENT = 1,
  PSD_ERR_SHAPE = 2,
  PSD_ERR_IO = 3,
  PSD_ERR_CORRUPT_FILE = 4,
  PSD_ERR_CONFIG_MISMATCH = 5,
  PSD_ERR_CONFIG = 6,
  PSD_ERR_RUNTIME = 7
} psd_status;

typedef struct psd_image psd_image;
typedef struct psd_model psd_model;
typedef struct psd_config psd_config;

PSD_API const char* psd_last_error(void);
PSD_API const char* psd_version(void);

/* --- images ------------------------------------------------------------- */

/* Copies width*height row-major floats. pixels may be NULL for an all-zero image. */
PSD_API psd_status psd_image_create(int width, int height, const float* pixels, psd_image** out);
PSD_API psd_status psd_image_load(const char* path, psd_image** out);
/* depth: 8, 16, or 32 (float). */
PSD_API psd_status psd_image_export(const psd_image* image, const char* path, int depth);
PSD_API int psd_image_width(const psd_image* image);
PSD_API int psd_image_height(const psd_image* image);
PSD_API const float* psd_image_data(const psd_image* image);
PSD_API void psd_image_free(psd_image* image);

/* Multiplies by a fresh Gamma(looks, 1/looks) field drawn from seed. */
PSD_API psd_status psd_speckle(const psd_image* clean, double looks, uint64_t seed, psd_image** out);

/* --- models ------------------------------------------------------------- */

PSD_API psd_status psd_model_load(const char* path, psd_model** out);
PSD_API psd_status psd_model_save(const psd_model* model, const char* path);
/* Role name: "g1", "g2", "discriminator" or "despeckler". */
PSD_API const char* psd_model_role(const psd_model* model);
PSD_API size_t psd_model_parameter_count(const psd_model* model);
PSD_API void psd_model_free(psd_model* model);

/* Pads, runs, crops back and clamps to [0, 1]. */
PSD_API psd_status psd_despeckle(const psd_model* model, const psd_image* image, psd_image** out);

/* --- metrics ------------------------------------------------------------ */

/* saturated (may be NULL) is set to 1 when the MSE is zero and the value is the cap. */
PSD_API psd_status psd_psnr(const psd_image* reference, const psd_image* test, double peak,
                            double* db, int* saturated);
PSD_API psd_status psd_ssim(const psd_image* reference, const psd_image* test, double* value);

/* --- run configuration and pipeline commands ----------------------------- */

PSD_API psd_status psd_config_create(psd_config** out);
PSD_API psd_status psd_config_set(psd_config* config, const char* key, const char* value);
PSD_API psd_status psd_config_load_file(psd_config* config, const char* path);
/* Returns NULL for an unknown key. Pointer valid until the key is next set. */
PSD_API const char* psd_config_get(const psd_config* config, const char* key);
PSD_API void psd_config_free(psd_config* config);

/* Enumerates every configuration key (sorted) with a one-line description. */
PSD_API int psd_config_key_count(void);
PSD_API const char* psd_config_key_name(int index);
PSD_API const char* psd_config_key_help(int index);

/* Number of subcommands and their names ("synth", "train-s2s", ...). */
PSD_API int psd_command_count(void);
PSD_API const char* psd_command_name(int index);

/* Runs one pipeline subcommand with the given configuration. */
PSD_API psd_status psd_run(const char* command, const psd_config* config);

#ifdef __cplusplus
}
#endif

#endif /* PSD_PSD_H */
