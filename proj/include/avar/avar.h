/* C interface to the attention-analysis library: opaque handles, integer
 * status codes, JSON option/result strings. Every function returns AVAR_OK
 * (0) or an error code; avar_last_error() holds a thread-local message for
 * the most recent failure on the calling thread. Strings returned through
 * char** out-parameters are owned by the caller and released with
 * avar_string_free(). */

#ifndef AVAR_H
#define AVAR_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum avar_status {
    AVAR_OK = 0,
    AVAR_INVALID_ARGUMENT,
    AVAR_OVERLAP,
    AVAR_OUT_OF_RANGE,
    AVAR_EMPTY_SYSTEM_SPAN,
    AVAR_EMPTY_IMAGE_SPAN,
    AVAR_EMPTY_QUERY_SET,
    AVAR_EMPTY_RESPONSE_SPAN,
    AVAR_NEGATIVE_ENTRY,
    AVAR_ROW_SUM,
    AVAR_CAUSAL_VIOLATION,
    AVAR_BAD_MAGIC,
    AVAR_HEADER_PARSE,
    AVAR_LENGTH_MISMATCH,
    AVAR_INVALID_CONFIG,
    AVAR_SEQUENCE_TOO_LONG,
    AVAR_SYMBOL_OUT_OF_RANGE,
    AVAR_STALE_TRACE,
    AVAR_SHAPE_MISMATCH,
    AVAR_SERIES_LENGTH_MISMATCH,
    AVAR_DEGENERATE_VARIANCE,
    AVAR_NEGATIVE_SCORE,
    AVAR_EMPTY_INPUT,
    AVAR_GROUP_TOO_SMALL,
    AVAR_NONFINITE_RATIO,
    AVAR_NONFINITE_INPUT,
    AVAR_INVALID_GAMMA,
    AVAR_BACKEND_ERROR,
    AVAR_EMPTY_OUTPUT,
    AVAR_NO_ANCHOR_PRODUCED,
    AVAR_IO_ERROR,
    AVAR_INTERNAL_ERROR
} avar_status;

const char* avar_version(void);
const char* avar_status_name(int status);
/* Message for the last failing call on this thread; empty string if none. */
const char* avar_last_error(void);
void avar_string_free(char* s);

/* ---- attention dumps ------------------------------------------------- */

typedef struct avar_dump avar_dump;

int avar_dump_open(const char* path, avar_dump** out);
int avar_dump_save(const avar_dump* d, const char* path);
void avar_dump_free(avar_dump* d);
/* {seq_len, layers, heads, causal, sample_id} */
int avar_dump_info(const avar_dump* d, char** json_out);

/* options: {"query_set":"user"|"response", "strict":bool}; all optional.
 * result: {model_level, band, query_set_kind, per_layer, per_head, samples} */
int avar_analyze(const avar_dump* d, const char* options_json, char** json_out);
int avar_analyze_csv(const avar_dump* d, const char* options_json, char** csv_out);
int avar_analyze_svg(const avar_dump* d, const char* options_json, char** svg_out);

/* Mean model-level VAS over several dump files.
 * result: {mean, band, samples:[{id, vas}]} */
int avar_aggregate(const char* const* paths, size_t n_paths, const char* options_json,
                   char** json_out);

/* name_out points at a static string ("Narrow"|"Wide"|"Panoramic"). */
int avar_classify_band(double vas, const char** name_out);

int avar_pearson(const double* xs, const double* ys, size_t n, double* r_out);

/* options: {"gamma":g, "layers":[..], "image_only":bool}; layers optional.
 * summary: {vas_before, vas_after, gamma} */
int avar_reallocate(const avar_dump* in, const char* options_json, avar_dump** out,
                    char** summary_json);

/* ---- micro model ------------------------------------------------------ */

typedef struct avar_model avar_model;

/* config: {"vocab_size","image_vocab_size","d_model","n_layers","n_heads",
 * "max_seq_len","seed"}; all optional, defaults documented in README. */
int avar_model_init(const char* config_json, avar_model** out);
int avar_model_load(const char* path, avar_model** out);
int avar_model_save(const avar_model* m, const char* path);
void avar_model_free(avar_model* m);
/* {config:{...}, param_count, step} */
int avar_model_info(const avar_model* m, char** json_out);

/* Supervised cold start on the grounded-lookup task.
 * options: {"steps","lr","alpha","beta","epsilon","seed","query_set",
 *           "env":{"n_keys","n_values","pairs_per_episode"}}
 * result: {"history":[{step,lm,enhance_img,suppress_sys,total,
 *           mean_image_attention_mass,vas_model}], "eval":{...}} */
int avar_train(avar_model* m, const char* options_json, char** json_out);

/* GRPO fine-tuning.
 * options: {"steps","seed","group_size","clip_range","kl_coeff","lr",
 *           "lambda_v","lambda_f","epsilon","max_new","epochs_per_batch",
 *           "env":{...}}
 * result: {"history":[{step,mean_reward,mean_accuracy,mean_visual_reward,
 *           mean_vas,kl}], "eval":{...}} */
int avar_rl(avar_model* m, const char* options_json, char** json_out);

/* Central-difference verification of all gradient paths.
 * options: {"seeds":[..], "h", "tolerance", "model":{...}}
 * result: {"pass":bool, "param_count", "entries":[{loss,seed,max_rel_error,pass}]} */
int avar_gradcheck(const char* options_json, char** json_out);

/* Greedy decoding with and without attention reallocation.
 * options: {"gamma","layers":[..],"image_only","episodes","seed","env":{...}}
 * result: {vas_before, vas_after, gamma, accuracy_before, accuracy_after, episodes} */
int avar_generate(const avar_model* m, const char* options_json, char** json_out);

/* Staged comparison: lm / attn / rl variants over shared seeds.
 * options: {"seeds":[..], "cold_steps","rl_steps","eval_episodes","model":{...},
 *           "env":{...}}
 * result: {"rows":[{variant,seed,vas,accuracy}]} */
int avar_compare(const char* options_json, char** json_out);

/* ---- synthesis pipeline ------------------------------------------------ */

/* options: {"backend":"mock"|"http", "endpoint", "in", "out", "n",
 *           "concurrency", "seed", "templates_dir", "anchor_every",
 *           "max_tokens", "temperature", "anchor_mode":"client"|"rule"}
 * "out" is required; "in" optional (toy inputs generated when absent).
 * HTTP credentials come from the AVAR_API_KEY environment variable.
 * result: {total, succeeded, failed, mean_anchor_count, failures:[..]} */
int avar_synth(const char* options_json, char** json_out);

/* Render training/RL history JSONL as an SVG curve chart.
 * result: {series:[names], points} */
int avar_report_svg(const char* history_path, const char* svg_path, char** json_out);

#ifdef __cplusplus
}
#endif

#endif /* AVAR_H */
