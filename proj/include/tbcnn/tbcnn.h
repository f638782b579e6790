/*
 * Copyright 2026 The TBCNN Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the TBCNN toolkit.
 *
 * Every fallible call returns a tbcnn_status; on failure the message is
 * available from tbcnn_last_error() (per thread) until the next call.
 * Strings returned through `char**` are owned by the caller and released with
 * tbcnn_string_free(). Handles are released with their *_free function;
 * passing NULL to a free function is a no-op.
 */

#ifndef TBCNN_TBCNN_H
#define TBCNN_TBCNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(TBCNN_BUILDING_LIBRARY)
#define TBCNN_API __attribute__((visibility("default")))
#else
#define TBCNN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tbcnn_status {
  TBCNN_OK = 0,
  TBCNN_ERR_USAGE = 1,   /* bad arguments or configuration */
  TBCNN_ERR_DATA = 2,    /* malformed or inconsistent input */
  TBCNN_ERR_NUMERIC = 3  /* divergence / non-finite values */
} tbcnn_status;

typedef struct tbcnn_dataset tbcnn_dataset;
typedef struct tbcnn_embeddings tbcnn_embeddings;
typedef struct tbcnn_model tbcnn_model;
typedef struct tbcnn_baseline tbcnn_baseline;

TBCNN_API const char* tbcnn_version(void);
TBCNN_API const char* tbcnn_last_error(void);
TBCNN_API void tbcnn_string_free(char* s);

/* 0 quiet, 1 warnings, 2 info, 3 debug. */
TBCNN_API void tbcnn_set_log_level(int level);

/* ---- datasets ---------------------------------------------------------- */

typedef struct tbcnn_gen_options {
  int n_classes;
  int per_class;
  int count_matched; /* nonzero: groups share one symbol multiset */
  int min_size;
  int max_size;
  double ambiguity;
  uint64_t seed;
} tbcnn_gen_options;

TBCNN_API void tbcnn_gen_options_init(tbcnn_gen_options* opts);

/* Synthetic corpus in the dataset file format. */
TBCNN_API tbcnn_status tbcnn_generate(const tbcnn_gen_options* opts, char** dataset_text);

TBCNN_API tbcnn_status tbcnn_dataset_parse(const char* text, tbcnn_dataset** out);
TBCNN_API tbcnn_status tbcnn_dataset_load(const char* path, tbcnn_dataset** out);
TBCNN_API void tbcnn_dataset_free(tbcnn_dataset* ds);
TBCNN_API int tbcnn_dataset_size(const tbcnn_dataset* ds);
TBCNN_API int tbcnn_dataset_classes(const tbcnn_dataset* ds);
TBCNN_API int tbcnn_dataset_vocab_size(const tbcnn_dataset* ds);

/* ---- pretraining ------------------------------------------------------- */

typedef struct tbcnn_pretrain_options {
  int nf;
  double margin;
  double lr;
  int epochs;
  uint64_t seed;
  double init_scale;
  double momentum;
  double l2;
} tbcnn_pretrain_options;

TBCNN_API void tbcnn_pretrain_options_init(tbcnn_pretrain_options* opts);

/* Pretrains on every tree of the dataset. `epoch_loss` (optional) receives
 * one mean hinge loss per line. */
TBCNN_API tbcnn_status tbcnn_pretrain(const tbcnn_dataset* ds, const tbcnn_pretrain_options* opts,
                                      tbcnn_embeddings** out, char** epoch_loss);

TBCNN_API tbcnn_status tbcnn_embeddings_load(const char* path, tbcnn_embeddings** out);
TBCNN_API tbcnn_status tbcnn_embeddings_save(const tbcnn_embeddings* emb, const char* path);
TBCNN_API void tbcnn_embeddings_free(tbcnn_embeddings* emb);

/* Agglomerative clustering of the symbol vectors (the `<UNK>` row excluded).
 * linkage: "average" | "single" | "complete"; format: "nested" | "newick". */
TBCNN_API tbcnn_status tbcnn_cluster(const tbcnn_embeddings* emb, const char* linkage,
                                     const char* format, char** out);

/* The k nearest symbols to `symbol`, one "name<TAB>distance" per line. */
TBCNN_API tbcnn_status tbcnn_neighbors(const tbcnn_embeddings* emb, const char* symbol, int k,
                                       char** out);

/* ---- supervised training ---------------------------------------------- */

/* `config_text` uses `key = value` lines (NULL for defaults). `init` is
 * "random", "pretrained" or "zero", or NULL to keep the config's value; `bow`
 * is 0/1, or -1 to keep the config's value. `embeddings` is required for
 * pretrained init. `curve` (optional) receives the learning curve as TSV. */
TBCNN_API tbcnn_status tbcnn_train(const tbcnn_dataset* ds, const char* config_text, const char* init,
                                   int bow, const tbcnn_embeddings* embeddings, tbcnn_model** out,
                                   char** curve);

TBCNN_API tbcnn_status tbcnn_model_load(const char* path, tbcnn_model** out);
TBCNN_API tbcnn_status tbcnn_model_save(const tbcnn_model* model, const char* path);
TBCNN_API void tbcnn_model_free(tbcnn_model* model);
TBCNN_API int tbcnn_model_classes(const tbcnn_model* model);

typedef struct tbcnn_metrics {
  double error_rate; /* percent */
  double mean_cost;
  int count;
} tbcnn_metrics;

/* Re-derives the split from the seed stored in the model. split: "train" |
 * "cv" | "test" | "all". `report` (optional) receives a JSON document. */
TBCNN_API tbcnn_status tbcnn_evaluate(const tbcnn_model* model, const tbcnn_dataset* ds,
                                      const char* split, tbcnn_metrics* metrics, char** report);

/* Class probabilities for one AST interchange document. Writes
 * min(capacity, classes) values and stores the class count in *n_classes. */
TBCNN_API tbcnn_status tbcnn_predict(const tbcnn_model* model, const char* ast_text, double* probs,
                                     int capacity, int* n_classes);

/* ---- bag-of-words baselines ------------------------------------------- */

typedef struct tbcnn_baseline_options {
  const char* method; /* "lr" or "svm" */
  double lr;
  double l2;
  int epochs;
  uint64_t seed;
  uint64_t split_seed;
} tbcnn_baseline_options;

TBCNN_API void tbcnn_baseline_options_init(tbcnn_baseline_options* opts);

/* Trains on the train split and reports on the test split. */
TBCNN_API tbcnn_status tbcnn_baseline_train(const tbcnn_dataset* ds, const tbcnn_baseline_options* opts,
                                            tbcnn_baseline** out, tbcnn_metrics* test_metrics,
                                            char** report);
TBCNN_API tbcnn_status tbcnn_baseline_save(const tbcnn_baseline* model, const char* path);
TBCNN_API void tbcnn_baseline_free(tbcnn_baseline* model);

/* ---- diagnostics ------------------------------------------------------- */

/* Finite-difference check over 5 seeds starting at `seed`. *passed is set to
 * 1 on success. `report` (optional) receives the per-tensor table. */
TBCNN_API tbcnn_status tbcnn_gradcheck(uint64_t seed, int dims, int* passed, double* max_rel_error,
                                       char** report);

/* Table of convolution weight conventions for `siblings` children. */
TBCNN_API tbcnn_status tbcnn_eta_table(int siblings, char** out);

#ifdef __cplusplus
}
#endif

#endif /* TBCNN_TBCNN_H */
