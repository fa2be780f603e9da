/* C interface to the LGMRec engine. All functions return an lgmrec_status; on
 * failure lgmrec_last_error() describes the problem (thread-local, valid until the
 * next call on the same thread). Strings returned through char** are owned by the
 * caller and released with lgmrec_string_free. */
#ifndef LGMREC_H
#define LGMREC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define LGMREC_API __declspec(dllexport)
#else
#define LGMREC_API __attribute__((visibility("default")))
#endif

typedef enum lgmrec_status {
  LGMREC_OK = 0,
  LGMREC_ERR_CONFIG = 1,
  LGMREC_ERR_IO = 2,
  LGMREC_ERR_PARSE = 3,
  LGMREC_ERR_DIMENSION = 4,
  LGMREC_ERR_INDEX = 5,
  LGMREC_ERR_EMPTY_DATASET = 6,
  LGMREC_ERR_NUMERIC = 7,
  LGMREC_ERR_UNAVAILABLE = 8,
  LGMREC_ERR_USAGE = 9,
  LGMREC_ERR_CONTRASTIVE_DEGENERATE = 10,
  LGMREC_ERR_TRUNCATION = 11,
  LGMREC_ERR_FORMAT = 12,
  LGMREC_ERR_INTERNAL = 99
} lgmrec_status;

typedef enum lgmrec_split { LGMREC_SPLIT_TRAIN = 0, LGMREC_SPLIT_VALID = 1, LGMREC_SPLIT_TEST = 2 } lgmrec_split;

typedef struct lgmrec_config lgmrec_config;
typedef struct lgmrec_dataset lgmrec_dataset;
typedef struct lgmrec_model lgmrec_model;

/* Per-epoch progress; valid_recall is NaN when the epoch was not validated. */
typedef void (*lgmrec_progress_fn)(void* user, size_t epoch, double total_loss, double bpr_loss,
                                   double hcl_loss, double valid_recall, double seconds);

LGMREC_API const char* lgmrec_version(void);
LGMREC_API const char* lgmrec_last_error(void);
LGMREC_API const char* lgmrec_status_name(lgmrec_status status);
LGMREC_API void lgmrec_string_free(char* s);

/* Configuration: preset defaults < JSON file (may be NULL) < key=value overrides. */
LGMREC_API lgmrec_status lgmrec_config_load(const char* json_path, const char* const* overrides,
                                            size_t num_overrides, lgmrec_config** out);
/* Takes the config embedded in a run manifest and checks the recorded data digests. */
LGMREC_API lgmrec_status lgmrec_config_from_manifest(const char* manifest_path, lgmrec_config** out);
LGMREC_API lgmrec_status lgmrec_config_set(lgmrec_config* cfg, const char* assignment);
LGMREC_API lgmrec_status lgmrec_config_to_json(const lgmrec_config* cfg, char** out);
LGMREC_API void lgmrec_config_free(lgmrec_config* cfg);

/* Commands. Every output lands under out_dir. */
LGMREC_API lgmrec_status lgmrec_train(const lgmrec_config* cfg, const char* out_dir,
                                      lgmrec_progress_fn progress, void* user);
LGMREC_API lgmrec_status lgmrec_generate(const lgmrec_config* cfg, const char* out_dir);
/* grid entries are "key=v1,v2,..."; the results table is returned in *table. */
LGMREC_API lgmrec_status lgmrec_sweep(const lgmrec_config* cfg, const char* const* grid,
                                      size_t num_axes, const char* out_dir,
                                      lgmrec_progress_fn progress, void* user, char** table);
/* Forces shared user IDs; the ratio table is returned in *table. */
LGMREC_API lgmrec_status lgmrec_diagnose(const lgmrec_config* cfg, size_t users, size_t epochs,
                                         const char* out_dir, char** table);

typedef struct lgmrec_eval_request {
  lgmrec_split split;
  const size_t* cutoffs;
  size_t num_cutoffs;
  const size_t* groups; /* NULL: no sparsity-group report */
  size_t num_groups;
  const size_t* export_users; /* dense user ids; NULL: no dependency export */
  size_t num_export_users;
} lgmrec_eval_request;

typedef struct lgmrec_eval_result {
  char* metrics;      /* metric<TAB>value lines */
  char* groups;       /* NULL unless requested */
  char* dependencies; /* NULL unless requested */
} lgmrec_eval_result;

/* out_dir may be NULL. overrides apply to the checkpoint's recorded config. */
LGMREC_API lgmrec_status lgmrec_evaluate(const char* checkpoint_dir, const char* const* overrides,
                                         size_t num_overrides, const lgmrec_eval_request* req,
                                         const char* out_dir, lgmrec_eval_result* out);
LGMREC_API void lgmrec_eval_result_free(lgmrec_eval_result* r);

/* Lower-level access. */
LGMREC_API lgmrec_status lgmrec_dataset_load(lgmrec_config* cfg, const char* corpus_dir,
                                             lgmrec_dataset** out);
LGMREC_API size_t lgmrec_dataset_num_users(const lgmrec_dataset* d);
LGMREC_API size_t lgmrec_dataset_num_items(const lgmrec_dataset* d);
LGMREC_API void lgmrec_dataset_free(lgmrec_dataset* d);

/* The model keeps a pointer to the dataset, which must outlive it. */
LGMREC_API lgmrec_status lgmrec_model_load(const char* checkpoint_dir, const lgmrec_dataset* d,
                                           lgmrec_model** out);
/* Writes num_cutoffs values each to recall and ndcg. */
LGMREC_API lgmrec_status lgmrec_model_evaluate(const lgmrec_model* m, lgmrec_split split,
                                               const size_t* cutoffs, size_t num_cutoffs,
                                               double* recall, double* ndcg);
/* Top-n items for a dense user id, training items masked. */
LGMREC_API lgmrec_status lgmrec_model_recommend(const lgmrec_model* m, size_t user, size_t n,
                                                size_t* items);
LGMREC_API void lgmrec_model_free(lgmrec_model* m);

#ifdef __cplusplus
}
#endif

#endif
