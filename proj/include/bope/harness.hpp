#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bope/classify.hpp"
#include "bope/core.hpp"
#include "bope/diagnostics.hpp"
#include "bope/estimators.hpp"
#include "bope/kernels.hpp"
#include "bope/synthetic.hpp"
#include "bope/weights.hpp"

namespace bope {

// A supervised dataset to be turned into a bandit problem: classification
// labels for discrete mode, real labels for continuous mode.
struct TabularDataset {
    std::string name;
    Matrix features;
    IntVector class_labels;  // discrete mode, densely indexed 0..k-1
    Vector real_labels;      // continuous mode
    int num_classes = 0;
    ActionKind mode = ActionKind::Discrete;
};

// Parses a headered CSV with numeric feature columns and a named label
// column. Classification labels are re-indexed densely to 0..k-1 in sorted
// order of their raw string values; row order is preserved.
TabularDataset load_csv(const std::string& path, const std::string& label_column, ActionKind mode);

// Bundled synthetic dataset generators (Gaussian class blobs; a regression
// surface with a bimodal label marginal).
TabularDataset synth_multiclass(int n, int k, int p, double noise, RngSpec rng);
TabularDataset synth_regression(int n, int p, double noise, RngSpec rng);

struct ModelConfigs {
    ClassifierConfig target;      // defines the target policy
    ClassifierConfig dm;          // reward model
    ClassifierConfig propensity;  // logging-policy model
    ClassifierConfig bope;        // balancing-weight classifier
};

struct ExperimentConfig {
    ActionKind mode = ActionKind::Discrete;

    // Exactly one data source: a CSV path, a bundled synthetic generator, or
    // an oracle preset name / oracle config path.
    std::string data_path;
    std::string label_column;
    std::string synth;  // "multiclass" | "regression"
    int synth_n = 3000;
    int synth_k = 4;
    int synth_p = 8;
    double synth_noise = 1.0;
    std::string oracle;
    int oracle_n = 10000;  // per-replication sample size in oracle mode

    int replications = 100;
    std::uint64_t seed = 0;
    ModelConfigs models;
    double clip_epsilon = 1e-3;
    double density_floor = 1e-6;
    int folds = 5;
    KernelKind kernel = KernelKind::Gaussian;
    double bandwidth_c = 1.0;
    std::vector<double> tau_quantiles = {0.5, 0.8, 0.9, 0.95, 0.99,
                                         std::numeric_limits<double>::infinity()};
    std::vector<std::string> estimators = {"dm", "is", "dr", "switch", "switch_dr"};
    std::string out_path = "report.csv";
    int threads = 1;
    int min_class_count = 10;
    std::string dataset_name;  // defaults to the data source name
};

// Key-value config file (one `key = value` per line, `#` comments). Unknown
// or duplicated keys are errors. Throws ConfigError.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Resolved config serialized in canonical key order; its FNV-1a hash goes to
// the report sidecar. Excludes out_path and threads so neither affects report
// content.
std::string canonical_config(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(const std::string& text);

struct ReportRow {
    std::string dataset;
    std::string estimator;      // dm | is | dr | switch | switch_dr
    std::string weight_source;  // none | ips | bope
    double bias = 0.0;
    double rmse = 0.0;
    double rmse_se = 0.0;
    double balance_l1 = 0.0;
    double mean_ess = 0.0;
    int replications_used = 0;
    bool has_weights = false;  // DM rows carry no balance/ESS values
};

struct ReplicationRecord {
    int replication = 0;
    std::string estimator;
    std::string weight_source;
    double value = 0.0;
    double n_effective = 0.0;
    std::optional<double> tau;
    std::string error;  // nonempty marks a failed, excluded replication
};

struct ExperimentResult {
    std::vector<ReportRow> rows;
    std::vector<ReplicationRecord> records;
    std::vector<std::string> warnings;
    double truth = 0.0;
    double truth_se = 0.0;  // nonzero only for Monte Carlo ground truth
    std::string dataset_name;
};

struct Summary {
    double bias = 0.0;
    double rmse = 0.0;
    double se = 0.0;  // delta-method standard error of the rmse
};

Summary summarize(const std::vector<double>& estimates, double truth);

// Everything fixed across replications of a dataset-mode experiment: the
// train/test split, the target policy and its actions, and ground truth.
// Nuisance models (reward, propensity, balancing classifier) are refit per
// replication on fresh train-half logging draws.
struct BanditBundle {
    ActionKind mode = ActionKind::Discrete;
    int k = 0;
    Matrix train_states, test_states;
    IntVector train_class, test_class;
    Vector train_real, test_real;
    ProposedActions proposed_train, proposed_test;
    double truth = 0.0;
    Vector action_pool;  // continuous: empirical train-label distribution
    std::vector<std::string> warnings;
};

// Realizes the classifier-to-bandit transformation: one 50/50 split, a target
// policy fit on train predicting labels as actions, reward 1{a == label}.
BanditBundle classification_to_bandit(const TabularDataset& data, const ExperimentConfig& cfg,
                                      RngSpec rng);

// Regression counterpart: target actions are model predictions, logging draws
// come from the empirical train-label distribution, reward is -|a - y|.
BanditBundle regression_to_bandit(const TabularDataset& data, const ExperimentConfig& cfg, RngSpec rng);

// Runs the full protocol: per replication regenerate logged data, refit
// weight models, evaluate every selected estimator under both weight sources,
// and aggregate. Deterministic given cfg.seed, including across thread counts.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Report CSV (fixed column order, 6 significant digits), sidecar metadata
// JSON, and the per-replication record CSV.
std::string format_report_csv(const ExperimentResult& result);
std::string format_records_csv(const ExperimentResult& result);
std::string format_metadata_json(const ExperimentResult& result, const ExperimentConfig& cfg);
void write_report_files(const ExperimentResult& result, const ExperimentConfig& cfg);

// Oracle lookup for CLI and config: built-in preset names (p1, p2, p2_null,
// p3) or a path to an oracle config file.
std::variant<DiscreteOracle, ContinuousOracle> load_oracle(const std::string& name_or_path);

// Fixed-format float printing used everywhere a report is written.
std::string format_number(double x);

}  // namespace bope
