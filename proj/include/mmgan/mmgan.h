/* C interface to the multimodal GAN core. All functions return a status
 * code; details of the most recent failure are available through
 * mmgan_last_error. Sessions are opaque and single-threaded. */
#ifndef MMGAN_H
#define MMGAN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#ifndef MMGAN_API
#define MMGAN_API __attribute__((visibility("default")))
#endif

typedef enum {
    MMGAN_OK = 0,
    MMGAN_ERR_CONFIG = 2,   /* invalid configuration or overrides */
    MMGAN_ERR_RUNTIME = 3,  /* numeric or precondition failure */
    MMGAN_ERR_IO = 4        /* file system, image, or checkpoint format */
} mmgan_status;

typedef struct mmgan_session mmgan_session;

/* Message for the most recent error on the session; with a NULL session,
 * the most recent session-creation error. The pointer stays valid until the
 * next call on the same session (or the next creation attempt). */
MMGAN_API const char* mmgan_last_error(const mmgan_session* session);

/* Fresh session from an optional config file (NULL = built-in defaults)
 * plus "key=value" overrides, applied in order. */
MMGAN_API mmgan_status mmgan_session_create(const char* config_path,
                                            const char* const* overrides,
                                            size_t n_overrides,
                                            mmgan_session** out);

/* Restores networks, optimizers, controller state, and counters from a
 * checkpoint written by mmgan_train/mmgan_finetune. Overrides may adjust
 * runtime settings but must not change the architecture. */
MMGAN_API mmgan_status mmgan_session_from_checkpoint(const char* checkpoint_path,
                                                     const char* const* overrides,
                                                     size_t n_overrides,
                                                     mmgan_session** out);

MMGAN_API void mmgan_session_destroy(mmgan_session* session);

/* Adversarial training per the session config. Writes metrics.csv,
 * periodic checkpoints, and sample grids under out_dir. */
MMGAN_API mmgan_status mmgan_train(mmgan_session* session, const char* out_dir);

/* Cross-domain fine-tuning: holds out finetune.holdout_class from the
 * configured data source and resumes with balanced paired/unpaired batches. */
MMGAN_API mmgan_status mmgan_finetune(mmgan_session* session, const char* out_dir);

/* Why the last mmgan_train/mmgan_finetune on this session ended:
 * "max_steps", "max_images", or "ada_threshold"; "" if none ran. */
MMGAN_API const char* mmgan_stop_reason(const mmgan_session* session);

/* count generated tuples as one PNG grid per modality:
 * <out_dir>/samples_<modality>.png */
MMGAN_API mmgan_status mmgan_sample(mmgan_session* session, int64_t count,
                                    const char* out_dir);

/* (num_codes - 1) * fps frames along a path through latent space, one PNG
 * per frame and modality: <out_dir>/frame_<n>_<modality>.png */
MMGAN_API mmgan_status mmgan_interpolate(mmgan_session* session, int num_codes,
                                         int fps, const char* out_dir);

/* Distribution metrics of the current generator against the configured
 * data source. Writes report.csv and report.txt under out_dir; if table_out
 * is non-NULL it receives a malloc'd copy of the human-readable table
 * (release with mmgan_string_free). */
MMGAN_API mmgan_status mmgan_evaluate(mmgan_session* session, const char* out_dir,
                                      char** table_out);

/* Procedural dataset per the session config, exported with a manifest. */
MMGAN_API mmgan_status mmgan_make_dataset(mmgan_session* session, const char* out_dir);

/* count generated tuples written in the dataset export format (RGB plus
 * 16-bit depth with range sidecars, normals, manifest.json). */
MMGAN_API mmgan_status mmgan_export_rgbd(mmgan_session* session, int64_t count,
                                         const char* out_dir);

/* Loss / augmentation / distance curves from a metrics.csv. Session-free. */
MMGAN_API mmgan_status mmgan_plot(const char* csv_path, const char* out_dir);

MMGAN_API void mmgan_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MMGAN_H */
