#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pofl/channel.hpp"
#include "pofl/dataset.hpp"
#include "pofl/rng.hpp"
#include "pofl/scheduling.hpp"

namespace pofl {

// eta^t = max(initial * decay^t, floor)
struct LrSchedule {
    double initial = 0.1;
    double decay = 0.95;
    double floor = 1e-5;
};

double lr_at(const LrSchedule& s, std::size_t round);

struct PartitionSpec {
    enum class Kind { shards, classes } kind = Kind::shards;
    std::size_t per_device = 2;  // shards or classes per device
};

struct SeedBundle {
    std::uint64_t data = 1;
    std::uint64_t channel = 2;
    std::uint64_t sched = 3;
    std::uint64_t noise = 4;
};

struct ExperimentConfig {
    std::size_t n_devices = 30;
    std::size_t rounds = 100;
    std::size_t scheduled = 10;  // |S^t|
    std::size_t batch_size = 10;
    std::size_t trials = 10;
    Policy policy;
    LrSchedule lr;
    ChannelConfig channel;  // distances_m resolved per experiment
    double dist_min_m = 10.0;
    double dist_max_m = 50.0;
    PartitionSpec partition;
    SeedBundle seeds;
    std::size_t eval_train_subsample = 10000;  // 0 = evaluate the full train split
    std::size_t parallel_trials = 1;

    void validate() const;
};

// Advisory diagnostics on the learning-rate schedule (divergent step-size sum
// and square-summability); never fatal, the default schedule trips the latter.
std::vector<std::string> lr_schedule_warnings(const LrSchedule& s);

struct RoundMetrics {
    std::size_t round = 0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    double e_com_analytic = 0.0;
    double e_com_empirical = 0.0;
    double e_var_minibatch = 0.0;
    double e_var_full = 0.0;
    double rx_scale = 0.0;  // a^t
    double lr_sum = 0.0;    // running gamma
    std::vector<std::size_t> scheduled_ids;  // ascending
};

struct TrialResult {
    std::vector<RoundMetrics> rounds;
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;
    std::size_t best_round = 0;
    double final_loss = 0.0;
};

struct ExperimentResult {
    std::vector<TrialResult> trials;
    double mean_final_accuracy = 0.0, sd_final_accuracy = 0.0;
    double mean_best_accuracy = 0.0, sd_best_accuracy = 0.0;
    double stderr_best_accuracy = 0.0;
    std::vector<std::string> warnings;
};

// Squared deviation of the reweighted scheduled sum from take * the
// full-participation weighted sum, with m_i/(M p_i) base-probability weights.
double compute_update_variance(std::span<const std::size_t> selected,
                               std::span<const double> base_probs,
                               const std::vector<std::vector<double>>& grads,
                               std::span<const double> sample_counts,
                               double total_samples);

// One trial's mutable state; run_round advances it by one communication round.
struct TrialState {
    const Dataset* train = nullptr;
    const Dataset* test = nullptr;
    Partition partition;
    ChannelConfig channel;
    std::vector<double> weights;           // w^t
    std::vector<double> sample_counts;     // m_i
    double total_samples = 0.0;            // M
    std::vector<std::uint32_t> eval_rows;  // train-loss evaluation subset
    Rng data_rng{0}, channel_rng{0}, sched_rng{0}, noise_rng{0};
    std::size_t round = 0;
    double lr_sum = 0.0;
};

TrialState make_trial_state(const ExperimentConfig& cfg, const Dataset& train,
                            const Dataset& test, std::size_t trial);

RoundMetrics run_round(TrialState& st, const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& train,
                                const Dataset& test);

}  // namespace pofl
