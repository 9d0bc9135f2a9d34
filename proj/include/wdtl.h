/*
 * wdtl — Wasserstein-distance deep transfer learning for 1-D fault
 * classification. C interface to the shared library: opaque handles,
 * integer status codes, thread-local error messages.
 */
#ifndef WDTL_H
#define WDTL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wdtl_status {
    WDTL_OK = 0,
    WDTL_USAGE_ERROR = 1,   /* bad argument, bad config key, contract violation */
    WDTL_DATA_ERROR = 2,    /* malformed dataset/checkpoint file */
    WDTL_NUMERIC_ERROR = 3, /* training diverged (non-finite loss) */
    WDTL_IO_ERROR = 4       /* filesystem failure */
} wdtl_status;

typedef struct wdtl_config_s wdtl_config;
typedef struct wdtl_dataset_s wdtl_dataset;
typedef struct wdtl_checkpoint_s wdtl_checkpoint;
typedef struct wdtl_report_s wdtl_report;

/* Message for the most recent failure on this thread. */
const char* wdtl_last_error(void);

/* ---- configuration (flat key = value schema) ---- */
wdtl_config* wdtl_config_new(void);
wdtl_status wdtl_config_load(wdtl_config* cfg, const char* path);
wdtl_status wdtl_config_set(wdtl_config* cfg, const char* key, const char* value);
wdtl_status wdtl_config_get(const wdtl_config* cfg, const char* key,
                            char* buf, size_t buflen);
/* Notices collected while loading (defaults applied); index until NULL. */
const char* wdtl_config_notice(const wdtl_config* cfg, int index);
void wdtl_config_free(wdtl_config* cfg);

/* ---- datasets ---- */
wdtl_status wdtl_synth(const wdtl_config* cfg, wdtl_dataset** out);
wdtl_status wdtl_dataset_load(const char* path, wdtl_dataset** out);
/* format: "binary" or "csv" */
wdtl_status wdtl_dataset_save(const wdtl_dataset* ds, const char* path,
                              const char* format);
int64_t wdtl_dataset_size(const wdtl_dataset* ds);
wdtl_status wdtl_dataset_label_subset(const wdtl_dataset* ds, int per_class,
                                      uint64_t seed, wdtl_dataset** out);
void wdtl_dataset_free(wdtl_dataset* ds);

/* ---- training ---- */
wdtl_status wdtl_pretrain(const wdtl_config* cfg, const wdtl_dataset* source,
                          wdtl_checkpoint** ckpt, wdtl_report** report);
/* labeled_target may be NULL (unsupervised adaptation). */
wdtl_status wdtl_adapt(const wdtl_config* cfg, const wdtl_dataset* source,
                       const wdtl_dataset* target, const wdtl_checkpoint* init,
                       const wdtl_dataset* labeled_target,
                       wdtl_checkpoint** best, wdtl_report** report);

wdtl_status wdtl_checkpoint_save(const wdtl_checkpoint* ckpt, const char* path);
wdtl_status wdtl_checkpoint_load(const char* path, wdtl_checkpoint** out);
void wdtl_checkpoint_free(wdtl_checkpoint* ckpt);

/* ---- evaluation / export ---- */
/* confusion is row-major [truth][predicted], 4x4; may be NULL. */
wdtl_status wdtl_evaluate(const wdtl_checkpoint* ckpt, const wdtl_dataset* ds,
                          double* accuracy, int64_t confusion[16]);
wdtl_status wdtl_export_features(const wdtl_checkpoint* ckpt,
                                 const wdtl_dataset* ds, const char* path);

/* ---- reports ---- */
wdtl_status wdtl_report_save_json(const wdtl_report* report, const char* path);
double wdtl_report_best_accuracy(const wdtl_report* report);
double wdtl_report_final_accuracy(const wdtl_report* report);
void wdtl_report_free(wdtl_report* report);

/* Mean and Student-t 95% CI half-width over run accuracies; ci_half is
 * set to 0 when n < 2. */
wdtl_status wdtl_aggregate(const double* values, int n, double* mean,
                           double* ci_half);

/* SHA-256 of a file as a lowercase hex string (65-byte buffer). */
wdtl_status wdtl_hash_file(const char* path, char hex_out[65]);

#ifdef __cplusplus
}
#endif

#endif /* WDTL_H */
