#pragma once

#include <optional>
#include <string>
#include <vector>

#include "miaudit/config.hpp"
#include "miaudit/metrics.hpp"

namespace miaudit {

// (T x lambda) grid of values, mirroring the paper-style tables: rows are
// temperatures, columns are lambdas.
struct ReportTable {
    std::string name;        // e.g. "dist_member"
    std::string population;  // member | nonmember | combined
    std::vector<double> temperatures;
    std::vector<double> lambdas;
    std::vector<std::vector<std::optional<double>>> cells;  // [T][lambda]; nullopt = no data
    std::vector<std::vector<std::size_t>> unreached;        // excluded samples per cell

    std::optional<double> cell(std::size_t ti, std::size_t li) const { return cells[ti][li]; }
};

struct ComparisonRow {
    std::string metric;
    double acc_inf = 0.0;
    std::optional<double> tau;        // absent for the binary rules
    std::string direction;            // above | below | flag
    std::optional<double> lambda;     // best cell, I_dd only
    std::optional<double> temperature;
};

struct AveragedDistance {
    double mean = 0.0;
    std::size_t used = 0;
    std::size_t unreached = 0;
};

// Arithmetic mean over (example, target) distances; unreached entries are
// excluded and counted. Throws when every entry is unreached.
AveragedDistance averaged_distance(const std::vector<std::optional<double>>& distances);

struct ExperimentResult {
    ReportTable member_dist;
    ReportTable nonmember_dist;
    ReportTable acc_table;
    std::vector<ComparisonRow> comparison;
    std::vector<AuditRecord> records;
    std::vector<double> lambdas;
    std::vector<double> temperatures;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<std::string> written_files;
};

// End-to-end protocol: train (or load) the model, sample m members and m
// non-members, score every metric, build the per-cell distance and accuracy
// tables plus the cross-metric comparison, and write every artifact into
// cfg.output_dir. Deterministic under (config, seed).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Renders tables to CSV text (header row = lambda values, first column = T
// values, cells rounded half-even to 3 decimals).
std::string table_csv(const ReportTable& table);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);

// Machine-readable bundle of all tables (full precision) and the config echo.
std::string report_bundle_json(const ExperimentResult& result, const ExperimentConfig& cfg);

// Re-emits the CSV files from a bundle produced by report_bundle_json.
// Returns the written paths.
std::vector<std::string> emit_report_from_bundle(const std::string& bundle_json,
                                                 const std::string& output_dir);

// Training + evaluation driven by the config; writes checkpoint, training log
// and an evaluation summary. Used by the train/advtrain CLI commands.
struct TrainRunResult {
    std::string checkpoint_path;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    double adv_accuracy = 0.0;  // accuracy under the configured attack
};
TrainRunResult run_training(const ExperimentConfig& cfg, bool adversarial);

// Attack sweep over sampled members/non-members against a trained checkpoint;
// writes per-example outcomes CSV. Used by the attack CLI command.
std::string run_attack_sweep(const ExperimentConfig& cfg);

}  // namespace miaudit
