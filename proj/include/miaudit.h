/* miaudit - membership-inference audit toolkit, C API.
 *
 * Every function returns a status code: 0 success, 1 config error, 2 data
 * error, 3 numeric failure (the CLI uses the same values as exit codes).
 * mia_last_error() describes the most recent failure on this thread.
 * Handles are opaque; free them with the matching *_free call.
 */
#ifndef MIAUDIT_H
#define MIAUDIT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MIA_OK 0
#define MIA_ERR_CONFIG 1
#define MIA_ERR_DATA 2
#define MIA_ERR_NUMERIC 3

typedef struct mia_config_s mia_config;
typedef struct mia_model_s mia_model;

const char* mia_version(void);

/* Thread-local message for the last failed call; empty string otherwise. */
const char* mia_last_error(void);

/* Experiment configuration (sectioned key=value text). */
int mia_config_load(const char* path, mia_config** out);
int mia_config_parse(const char* text, mia_config** out);
/* Override "section.key" with value; overrides win over file values. */
int mia_config_override(mia_config* cfg, const char* dotted_key, const char* value);
void mia_config_free(mia_config* cfg);

/* Train per config ([train] section; adversarial selects PGD-AT). Writes
 * model.json and train_log.jsonl into output_dir (config output_dir when
 * output_dir is NULL). Accuracies may be NULL. */
int mia_train(const mia_config* cfg, int adversarial, const char* output_dir,
              double* train_accuracy, double* test_accuracy, double* adv_accuracy);

/* Run the configured attack over sampled members/non-members against
 * model.checkpoint; writes attack_outcomes.csv. */
int mia_attack(const mia_config* cfg, const char* output_dir);

/* Full audit: train (or load) the model, score every membership metric,
 * write audit.csv, the distance/accuracy tables, comparison.csv and
 * report.json. */
int mia_audit(const mia_config* cfg, const char* output_dir);

/* Re-emit the CSV tables from a report.json bundle. */
int mia_report(const char* bundle_path, const char* output_dir);

/* Model checkpoints. */
int mia_model_load(const char* path, mia_model** out);
void mia_model_free(mia_model* model);
int mia_model_num_classes(const mia_model* model, int* out);
int mia_model_input_size(const mia_model* model, size_t* out);
/* probs_out must hold num_classes entries; temperature > 0, 1 = plain model
 * output. x is the flattened input. */
int mia_model_predict(const mia_model* model, const double* x, size_t x_len, double temperature,
                      double* probs_out, size_t probs_len);

#ifdef __cplusplus
}
#endif

#endif /* MIAUDIT_H */
