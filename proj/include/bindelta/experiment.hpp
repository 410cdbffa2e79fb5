#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bindelta/data.hpp"
#include "bindelta/eval.hpp"
#include "bindelta/models.hpp"

namespace bindelta::experiment {

struct DatasetConfig {
    std::string source = "synthetic"; // "synthetic" | "csv"
    std::string csv_path;
    data::SynthConfig synth;
    bool seed_set = false; // synth.seed explicitly given, else derived from run seed
};

/// One experiment run, reproducible from this struct alone. JSON documents
/// with unknown keys are rejected (silent typos are the main
/// reproducibility hazard).
struct ExperimentConfig {
    models::Variant variant = models::Variant::MG;
    std::size_t k = 0;     // 0: variant default (16 for "+", else 100)
    double alpha = -1.0;   // < 0: variant default
    double gamma = 0.0;    // <= 0: auto
    std::uint64_t seed = 0;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double lr_decay = 0.9;
    double val_fraction = 0.2;
    std::size_t trials = 0; // 0 = unset: train runs 1, ablate runs 3
    std::string compose_mode = "default"; // "default" | "additive" | "riemannian"
    std::string bin_selection = "teacher_forced"; // | "predicted"
    std::optional<bool> clip_gradients;   // unset: variant default
    std::vector<std::size_t> bin_hidden{64, 32};
    std::vector<std::size_t> delta_hidden; // empty: variant default
    std::vector<std::size_t> regressor_hidden{64, 32};
    DatasetConfig dataset;
    std::filesystem::path out_dir;
    std::vector<std::size_t> k_list{1, 4, 8, 16, 24}; // discretize
    std::string sweep_parameter;                      // ablate: "K" | "alpha"
    std::vector<double> sweep_values;
    std::string median_rule = "lower_middle";
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& c);

models::ModelConfig to_model_config(const ExperimentConfig& c, std::size_t feature_dim);
models::TrainConfig to_train_config(const ExperimentConfig& c, std::uint64_t seed);
eval::MedianRule median_rule(const ExperimentConfig& c);

data::Dataset load_or_generate(const DatasetConfig& dc, std::uint64_t run_seed);

struct TrainedCategory {
    int category = 0;
    models::TrainResult result;
};

struct RunOutput {
    std::vector<TrainedCategory> models;
    eval::MetricReport report;
    bool diverged = false;
};

/// Train one model per category on the configured dataset and evaluate on
/// the held-out split. When out_dir is non-empty, writes
/// manifest.json, history.csv, report.{csv,json} and the model bundle.
RunOutput run_training(const ExperimentConfig& cfg, std::uint64_t seed,
                       const std::filesystem::path& out_dir);

std::string history_to_csv(const std::vector<TrainedCategory>& models);

void save_bundle(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                 const std::vector<TrainedCategory>& models);
std::map<int, models::ModelParams> load_bundle(const std::filesystem::path& dir);

void write_manifest(const std::filesystem::path& path, const ExperimentConfig& cfg,
                    const std::vector<std::uint64_t>& seeds);

// Subcommand drivers; return process exit codes (0 ok, 2 runtime trouble).
int cmd_discretize(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& model_dir);
int cmd_ablate(const ExperimentConfig& cfg);

/// Default output root: BINDELTA_OUT env var, else "./runs".
std::filesystem::path default_out_root();

} // namespace bindelta::experiment
