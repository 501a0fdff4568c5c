#include "pofl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pofl/aircomp.hpp"
#include "pofl/model.hpp"

namespace pofl {

double lr_at(const LrSchedule& s, std::size_t round) {
    return std::max(s.initial * std::pow(s.decay, double(round)), s.floor);
}

void ExperimentConfig::validate() const {
    if (n_devices == 0) throw std::invalid_argument("config: devices must be positive");
    if (rounds == 0) throw std::invalid_argument("config: rounds must be positive");
    if (scheduled == 0 || scheduled > n_devices)
        throw std::invalid_argument("config: num-scheduled must be in [1, devices]");
    if (batch_size == 0) throw std::invalid_argument("config: batch size must be positive");
    if (trials == 0) throw std::invalid_argument("config: trials must be positive");
    if (!(policy.alpha > 0.0)) throw std::invalid_argument("config: alpha must be positive");
    if (!(lr.initial > 0.0) || !(lr.decay > 0.0) || !(lr.floor > 0.0))
        throw std::invalid_argument("config: learning rates must be positive");
    if (!(dist_min_m > 0.0) || dist_max_m < dist_min_m)
        throw std::invalid_argument("config: bad distance range");
    if (partition.per_device == 0)
        throw std::invalid_argument("config: partition per-device count must be positive");
    ChannelConfig probe = channel;
    probe.distances_m = {dist_min_m};
    probe.validate();
}

std::vector<std::string> lr_schedule_warnings(const LrSchedule& s) {
    std::vector<std::string> out;
    // geometric-with-floor: the step sum diverges (fine) but the squared sum
    // diverges too, so the asymptotic vanishing condition fails
    if (s.floor > 0.0)
        out.push_back("learning-rate floor keeps sum eta^2 divergent; the asymptotic "
                      "convergence conditions hold only up to the floor");
    if (s.decay >= 1.0)
        out.push_back("learning rate does not decay; squared step sum diverges");
    return out;
}

double compute_update_variance(std::span<const std::size_t> selected,
                               std::span<const double> base_probs,
                               const std::vector<std::vector<double>>& grads,
                               std::span<const double> sample_counts,
                               double total_samples) {
    if (grads.empty()) return 0.0;
    const std::size_t dim = grads.front().size();
    const double take = double(selected.size());
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        double scheduled_sum = 0.0;
        for (std::size_t i : selected)
            scheduled_sum += sample_counts[i] / (total_samples * base_probs[i]) *
                             grads[i][d];
        double full_sum = 0.0;
        for (std::size_t j = 0; j < grads.size(); ++j)
            full_sum += sample_counts[j] / total_samples * grads[j][d];
        const double diff = scheduled_sum - take * full_sum;
        sq += diff * diff;
    }
    return sq;
}

namespace {

// stable per-trial stream salts
constexpr std::uint64_t kSaltPartition = 0x7a51;
constexpr std::uint64_t kSaltEval = 0xe7a1;
constexpr std::uint64_t kSaltDistances = 0xd157;

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial, std::uint64_t salt) {
    return mix64(seed) ^ mix64((std::uint64_t(trial) << 16) | salt);
}

}  // namespace

TrialState make_trial_state(const ExperimentConfig& cfg, const Dataset& train,
                            const Dataset& test, std::size_t trial) {
    TrialState st;
    st.train = &train;
    st.test = &test;
    st.channel = cfg.channel;
    if (st.channel.distances_m.size() != cfg.n_devices) {
        // static geometry shared by every trial of the experiment
        Rng geo(cfg.seeds.channel, kSaltDistances);
        st.channel.distances_m =
            draw_distances(cfg.n_devices, cfg.dist_min_m, cfg.dist_max_m, geo);
    }

    const std::uint64_t part_seed = trial_seed(cfg.seeds.data, trial, kSaltPartition);
    st.partition = cfg.partition.kind == PartitionSpec::Kind::shards
                       ? partition_shards(train, cfg.n_devices,
                                          cfg.partition.per_device, part_seed)
                       : partition_by_classes(train, cfg.n_devices,
                                              int(cfg.partition.per_device), part_seed);

    st.sample_counts.resize(cfg.n_devices);
    for (std::size_t i = 0; i < cfg.n_devices; ++i) {
        st.sample_counts[i] = double(st.partition.sample_count(i));
        if (st.partition.sample_count(i) == 0)
            throw std::runtime_error("trial setup: a device received no samples");
    }
    st.total_samples = double(st.partition.total_count());

    st.weights.assign(param_dim(train), 0.0);

    // deterministic train-loss evaluation rows: the partitioned union,
    // optionally subsampled
    std::vector<std::uint32_t> united;
    for (const auto& dev : st.partition.device_samples)
        united.insert(united.end(), dev.begin(), dev.end());
    std::sort(united.begin(), united.end());
    if (cfg.eval_train_subsample != 0 && cfg.eval_train_subsample < united.size()) {
        Rng pick(trial_seed(cfg.seeds.data, trial, kSaltEval));
        for (std::size_t i = 0; i < cfg.eval_train_subsample; ++i) {
            const std::size_t j = i + pick.uniform_index(united.size() - i);
            std::swap(united[i], united[j]);
        }
        united.resize(cfg.eval_train_subsample);
        std::sort(united.begin(), united.end());
    }
    st.eval_rows = std::move(united);

    st.data_rng = Rng(cfg.seeds.data, trial + 1);
    st.channel_rng = Rng(cfg.seeds.channel, trial + 1);
    st.sched_rng = Rng(cfg.seeds.sched, trial + 1);
    st.noise_rng = Rng(cfg.seeds.noise, trial + 1);
    return st;
}

namespace {

RoundMetrics run_round_impl(TrialState& st, const ExperimentConfig& cfg) {
    const std::size_t n = cfg.n_devices;
    const std::size_t dim = st.weights.size();
    const double eta = lr_at(cfg.lr, st.round);

    // local mini-batch gradients, uploaded statistics, omniscient full gradients
    std::vector<std::vector<double>> grads_mb(n), grads_full(n);
    std::vector<double> means(n), variances(n), norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t m_i = st.partition.sample_count(i);
        const std::size_t batch = std::min(cfg.batch_size, m_i);
        grads_mb[i] = local_gradient(st.weights, *st.train, st.partition, i, batch,
                                     st.data_rng);
        grads_full[i] = full_gradient(st.weights, *st.train, st.partition, i);
        const GradientStats s = gradient_stats(grads_mb[i]);
        means[i] = s.mean;
        variances[i] = s.variance;
        norms[i] = s.norm;
    }

    const ChannelRealization fading = draw_channels(st.channel, st.channel_rng);

    double v_tilde = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        v_tilde += st.sample_counts[i] / st.total_samples * variances[i];

    ScheduleInputs inputs;
    inputs.sample_counts = st.sample_counts;
    inputs.total_samples = st.total_samples;
    inputs.h_mag = fading.magnitude;
    inputs.grad_norms = norms;
    inputs.v_tilde = v_tilde;
    inputs.dim = dim;
    inputs.noise_power = st.channel.noise_power;
    inputs.tx_power = st.channel.tx_power;

    std::vector<double> probs;
    try {
        probs = scheduling_probabilities(cfg.policy, inputs);
    } catch (const std::runtime_error&) {
        // all-zero scores (e.g. every gradient exactly zero): fall back to uniform
        probs.assign(n, 1.0 / double(n));
    }

    const ScheduleOutcome outcome =
        sample_without_replacement(probs, cfg.scheduled, st.sched_rng);

    const bool reweighted = cfg.policy.kind != PolicyKind::deterministic_random;
    const std::vector<double> rho =
        reweighted ? aggregation_weights(outcome, st.sample_counts, st.total_samples)
                   : proportional_weights(outcome, st.sample_counts);

    std::vector<std::span<const double>> scheduled_grads;
    std::vector<double> scheduled_h;
    scheduled_grads.reserve(outcome.selected.size());
    scheduled_h.reserve(outcome.selected.size());
    for (std::size_t dev : outcome.selected) {
        scheduled_grads.emplace_back(grads_mb[dev]);
        scheduled_h.push_back(fading.magnitude[dev]);
    }

    const double noise_power =
        cfg.policy.kind == PolicyKind::noise_free ? 0.0 : st.channel.noise_power;
    const AggregationResult agg =
        simulate_aggregation(scheduled_grads, rho, scheduled_h, st.channel.tx_power,
                             noise_power, st.noise_rng);

    for (std::size_t d = 0; d < dim; ++d) st.weights[d] -= eta * agg.estimate[d];

    RoundMetrics metrics;
    metrics.round = st.round;
    metrics.e_com_analytic = agg.distortion_analytic;
    metrics.e_com_empirical = agg.distortion_realized;
    metrics.rx_scale = agg.rx_scale;
    metrics.e_var_minibatch =
        compute_update_variance(outcome.selected, probs, grads_mb,
                                st.sample_counts, st.total_samples);
    metrics.e_var_full =
        compute_update_variance(outcome.selected, probs, grads_full,
                                st.sample_counts, st.total_samples);
    st.lr_sum += eta;
    metrics.lr_sum = st.lr_sum;
    metrics.scheduled_ids = outcome.selected;
    std::sort(metrics.scheduled_ids.begin(), metrics.scheduled_ids.end());

    metrics.train_loss = softmax_loss(st.weights, *st.train, st.eval_rows);
    metrics.test_accuracy = evaluate(st.weights, *st.test).accuracy;

    ++st.round;
    return metrics;
}

}  // namespace

RoundMetrics run_round(TrialState& st, const ExperimentConfig& cfg) {
    try {
        return run_round_impl(st, cfg);
    } catch (const std::exception& e) {
        throw std::runtime_error("round " + std::to_string(st.round) + ": " + e.what());
    }
}

namespace {

TrialResult run_trial(const ExperimentConfig& cfg, const Dataset& train,
                      const Dataset& test, std::size_t trial) {
    TrialState st = make_trial_state(cfg, train, test, trial);
    TrialResult result;
    result.rounds.reserve(cfg.rounds);
    for (std::size_t t = 0; t < cfg.rounds; ++t)
        result.rounds.push_back(run_round(st, cfg));
    result.final_accuracy = result.rounds.back().test_accuracy;
    result.final_loss = result.rounds.back().train_loss;
    result.best_accuracy = 0.0;
    for (const auto& r : result.rounds) {
        if (r.test_accuracy > result.best_accuracy) {
            result.best_accuracy = r.test_accuracy;
            result.best_round = r.round;
        }
    }
    return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& train,
                                const Dataset& test) {
    cfg.validate();
    ExperimentResult out;
    out.warnings = lr_schedule_warnings(cfg.lr);
    out.trials.resize(cfg.trials);

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(cfg.parallel_trials, cfg.trials));
    if (workers == 1) {
        for (std::size_t t = 0; t < cfg.trials; ++t)
            out.trials[t] = run_trial(cfg, train, test, t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t t = next.fetch_add(1);
                    if (t >= cfg.trials) return;
                    out.trials[t] = run_trial(cfg, train, test, t);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    auto mean_sd = [&](auto getter, double& mean, double& sd) {
        mean = 0.0;
        for (const auto& tr : out.trials) mean += getter(tr);
        mean /= double(out.trials.size());
        sd = 0.0;
        if (out.trials.size() > 1) {
            for (const auto& tr : out.trials) {
                const double d = getter(tr) - mean;
                sd += d * d;
            }
            sd = std::sqrt(sd / double(out.trials.size() - 1));
        }
    };
    mean_sd([](const TrialResult& t) { return t.final_accuracy; },
            out.mean_final_accuracy, out.sd_final_accuracy);
    mean_sd([](const TrialResult& t) { return t.best_accuracy; },
            out.mean_best_accuracy, out.sd_best_accuracy);
    out.stderr_best_accuracy =
        out.sd_best_accuracy / std::sqrt(double(out.trials.size()));
    return out;
}

}  // namespace pofl
