#ifndef MVQ_H
#define MVQ_H

/* Multi-query vehicle re-identification toolkit: C API.
 *
 * Every function returns MVQ_OK (0) or a nonzero status code; the message of
 * the most recent failure on the calling thread is available through
 * mvq_last_error(). Objects are opaque handles owned by the caller and
 * released with the matching *_free function. Strings returned through
 * char** out-parameters are released with mvq_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MVQ_OK 0
#define MVQ_ERR_CONFIG 2 /* bad configuration or usage */
#define MVQ_ERR_DATA 3   /* bad or missing data */
#define MVQ_ERR_MODEL 4  /* bad or missing model */

typedef struct mvq_dataset mvq_dataset;
typedef struct mvq_features mvq_features;
typedef struct mvq_vcc mvq_vcc;
typedef struct mvq_cvfr mvq_cvfr;
typedef struct mvq_report mvq_report;

const char* mvq_version(void);
const char* mvq_last_error(void);
void mvq_string_free(char* s);

/* ---- synthetic benchmark data ----
 * config_json: synth generator configuration (all keys optional).
 * A dataset directory holds train/query/gallery JSONL files, a ground-truth
 * sidecar and a manifest with the seed and config hash. */
int mvq_synth_generate(const char* config_json, mvq_dataset** out);
int mvq_dataset_write(const mvq_dataset* ds, const char* out_dir);
int mvq_dataset_read(const char* dir, mvq_dataset** out);
int mvq_dataset_counts(const mvq_dataset* ds, size_t* train, size_t* query,
                       size_t* gallery);
void mvq_dataset_free(mvq_dataset* ds);

/* ---- viewpoint-conditioned embedding model ---- */
int mvq_vcc_train(const mvq_dataset* ds, const char* config_json, mvq_vcc** out,
                  char** trace_csv);
int mvq_vcc_save(const mvq_vcc* model, const char* path);
int mvq_vcc_load(const char* path, mvq_vcc** out);
void mvq_vcc_free(mvq_vcc* model);

/* ---- feature extraction ----
 * split is "train", "query" or "gallery". Feature files are JSONL or the
 * packed "MURF1" binary cache; mvq_features_read detects the format. */
int mvq_embed_split(const mvq_vcc* model, const mvq_dataset* ds,
                    const char* split, mvq_features** out);
int mvq_features_write_jsonl(const mvq_features* f, const char* path);
int mvq_features_write_binary(const mvq_features* f, const char* path);
int mvq_features_read(const char* path, mvq_features** out);
int mvq_features_count(const mvq_features* f, size_t* count);
void mvq_features_free(mvq_features* f);

/* ---- cross-view feature recovery model ---- */
int mvq_cvfr_train(const mvq_vcc* vcc, const mvq_dataset* ds,
                   const char* config_json, mvq_cvfr** out, char** trace_csv);
int mvq_cvfr_save(const mvq_cvfr* model, const char* path);
int mvq_cvfr_load(const char* path, mvq_cvfr** out);
void mvq_cvfr_free(mvq_cvfr* model);

/* Recover the appearance feature of `missing_viewpoint` from 1 or 2
 * available views. Viewpoints are "front", "side" or "rear"; every feature
 * buffer holds feature_dim doubles and out_feature must hold feature_dim. */
int mvq_cvfr_recover(const mvq_cvfr* model, const char* const* available_viewpoints,
                     const double* const* available_features,
                     size_t available_count, size_t feature_dim,
                     const char* missing_viewpoint, double* out_feature);

/* ---- evaluation ----
 * options_json keys (all optional):
 *   mode: "single" | "average" | "multi"      (default "multi")
 *   junk_filter: bool                          (default true)
 *   fusion: "weighted_sum" | "weighted_feature"
 *   allow_partial: bool                        (default false)
 *   threads: int                               (default 1)
 *   seed: u64 query-set sampling seed          (default 7)
 *   metric: { cmc_ranks, epsilon, empty_positive_policy, suppression }
 */
int mvq_eval(const mvq_features* queries, const mvq_features* gallery,
             const mvq_cvfr* cvfr /* nullable */, const char* options_json,
             mvq_report** out);
int mvq_report_json(const mvq_report* r, char** out_text);
int mvq_report_csv(const mvq_report* r, char** out_text);
int mvq_report_aggregate(const mvq_report* r, const char* name, double* out_value);
void mvq_report_free(mvq_report* r);

/* ---- experiments ----
 * name: "fig8" (gallery modification), "table5" (missing viewpoint ablation,
 * needs cvfr_path) or "fig10" (query count sweep). Writes one report JSON per
 * setting plus summary.csv into out_dir. options_json is the mvq_eval options
 * document; fig10 also honors "max_queries". */
int mvq_experiment(const char* name, const char* data_dir, const char* vcc_path,
                   const char* cvfr_path /* nullable */, const char* options_json,
                   const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* MVQ_H */
