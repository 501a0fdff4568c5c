#pragma once
#include <string>
#include <vector>

#include "pofl/trainer.hpp"

namespace pofl {

// Resolved run request: experiment parameters plus data source and outputs.
// Defaults reproduce the reference setup (30 devices, 10 scheduled, alpha 0.1,
// 1 W budget, 1e-11 W noise, batch 10, 0.1 * 0.95^t learning rate with 1e-5
// floor, free-space path loss at 915 MHz, distances in [10, 50] m, two shards
// per device, 10 trials).
struct RunConfig {
    ExperimentConfig experiment;
    std::string dataset = "synthetic";  // "synthetic" | "mnist:DIR"
    std::size_t synthetic_samples = 2000;
    std::size_t synthetic_features = 20;
    int synthetic_classes = 10;
    std::size_t synthetic_test_samples = 1000;
    std::string out_dir = "runs/out";
    std::vector<double> alpha_sweep;  // empty: single run at experiment.policy.alpha
};

// One key=value assignment; unknown keys raise with the key name.
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat key=value file, '#' comments, blank lines ignored.
void apply_config_file(RunConfig& cfg, const std::string& path);

std::string csv_header();
std::string format_csv_rows(const ExperimentResult& result);

struct RunOutputs {
    std::vector<std::string> csv_paths;
    std::vector<std::string> summary_paths;
    std::string sweep_summary_path;  // sweep mode only
    std::string manifest_path;
};

// Loads data, runs the experiment (or the alpha sweep), writes per-round CSV,
// per-trial summary JSON and the run manifest. The manifest is written before
// the run starts and finalized when it ends.
RunOutputs run(const RunConfig& cfg);

}  // namespace pofl
