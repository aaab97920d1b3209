/* DeMaDs C API: misconfiguration detection for PV inverters in
 * low-voltage distribution grids, driven entirely through files.
 *
 * All functions return DEMADS_OK (0) on success; on failure
 * demads_last_error() describes the most recent error of the calling
 * thread. Handles are opaque and freed with their matching _close call.
 */
#ifndef DEMADS_H
#define DEMADS_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum demads_status {
    DEMADS_OK = 0,
    DEMADS_ERR_USAGE = 1,       /* invalid arguments */
    DEMADS_ERR_PARSE = 2,       /* file/config parse or validation failure */
    DEMADS_ERR_CONVERGENCE = 3, /* power flow did not converge */
    DEMADS_ERR_FINGERPRINT = 4, /* model bound to a different topology */
    DEMADS_ERR_IO = 5,          /* filesystem failure */
    DEMADS_ERR_INTERNAL = 6     /* anything else */
} demads_status;

const char* demads_version(void);

/* Message for the calling thread's most recent failure; never NULL. */
const char* demads_last_error(void);

/* ---- grids ---------------------------------------------------------- */

typedef struct demads_grid demads_grid;

/* Writes a random radial grid file (buses >= 2). Deterministic in seed. */
demads_status demads_grid_generate(int buses, int feeders, int pv_units,
                                   unsigned long long seed, const char* out_path);

/* Loads and validates a grid file. */
demads_status demads_grid_open(const char* path, demads_grid** out);
void demads_grid_close(demads_grid* grid);

int demads_grid_bus_count(const demads_grid* grid);
int demads_grid_line_count(const demads_grid* grid);
int demads_grid_pv_count(const demads_grid* grid);
/* Valid while the handle lives. */
const char* demads_grid_fingerprint(const demads_grid* grid);

/* ---- pipeline stages (file to file) --------------------------------- */

/* Runs a scenario file; writes per-day substation/meter/pv CSVs and
 * metadata.json into out_dir. */
demads_status demads_simulate(const char* scenario_path, const char* out_dir);

/* Trains the load-estimation ANN on simulation-generated dummy data for
 * one grid. config_path may be NULL for defaults. */
demads_status demads_train_estimator(const char* grid_path, const char* config_path,
                                     unsigned long long seed, const char* out_model_path);

/* Pre-trains the device-level detector across the grids listed in the
 * manifest file. */
demads_status demads_pretrain_detector(const char* manifest_path, unsigned long long seed,
                                       const char* out_model_path);

/* Runs calibration plus the once-a-day monitoring protocol over a
 * measurement directory; writes report.jsonl, summary.md and the
 * calibrated SVM into out_dir. detector_path may be NULL (transformer
 * level only). */
demads_status demads_monitor(const char* measurements_dir, const char* grid_path,
                             const char* estimator_path, const char* detector_path,
                             const char* out_dir);

/* Runs the benchmark manifest; writes results.csv/results.md and
 * seed_manifest.json into out_dir. */
demads_status demads_benchmark(const char* manifest_path, const char* out_dir);

/* Scores a saved SVM model on a dataset CSV; format is csv, md or json. */
demads_status demads_evaluate(const char* svm_model_path, const char* dataset_csv_path,
                              const char* out_dir, const char* format);

/* ---- model handles --------------------------------------------------- */

typedef struct demads_estimator demads_estimator;

demads_status demads_estimator_open(const char* path, demads_estimator** out);
void demads_estimator_close(demads_estimator* estimator);
int demads_estimator_channel_count(const demads_estimator* estimator);
int demads_estimator_output_count(const demads_estimator* estimator);
/* record: substation channels; out_loads: estimated kW per load bus. */
demads_status demads_estimator_estimate(const demads_estimator* estimator, const double* record,
                                        int record_len, double hour_of_day, double pv_total_kw,
                                        double* out_loads, int out_len);

typedef struct demads_detector demads_detector;

demads_status demads_detector_open(const char* path, demads_detector** out);
void demads_detector_close(demads_detector* detector);
int demads_detector_window_len(const demads_detector* detector);
int demads_detector_class_count(const demads_detector* detector);
/* window: one day of voltage magnitudes (pu); out_probs: class
 * probabilities (index 0 correct operation, 1 the use-case malfunction). */
demads_status demads_detector_classify(const demads_detector* detector, const double* window,
                                       int window_len, double* out_probs, int probs_len);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DEMADS_H */
