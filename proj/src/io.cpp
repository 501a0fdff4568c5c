#include "pofl/io.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pofl/model.hpp"

namespace pofl {

namespace {

using ordered_json = nlohmann::ordered_json;

double parse_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad numeric value for " + key + ": " + value);
    }
    if (pos != value.size())
        throw std::runtime_error("config: bad numeric value for " + key + ": " + value);
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad integer value for " + key + ": " + value);
    }
    if (pos != value.size())
        throw std::runtime_error("config: bad integer value for " + key + ": " + value);
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

PartitionSpec parse_partition(const std::string& value) {
    PartitionSpec spec;
    const auto colon = value.find(':');
    const std::string kind = value.substr(0, colon);
    if (kind == "shards") spec.kind = PartitionSpec::Kind::shards;
    else if (kind == "classes") spec.kind = PartitionSpec::Kind::classes;
    else throw std::runtime_error("config: bad partition spec: " + value);
    if (colon == std::string::npos)
        throw std::runtime_error("config: partition needs a count, e.g. shards:2");
    spec.per_device = parse_u64("partition", value.substr(colon + 1));
    return spec;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(key, item));
    }
    return out;
}

ordered_json config_json(const RunConfig& cfg, bool include_out = true) {
    const ExperimentConfig& e = cfg.experiment;
    ordered_json j;
    j["devices"] = e.n_devices;
    j["rounds"] = e.rounds;
    j["num_scheduled"] = e.scheduled;
    j["batch_size"] = e.batch_size;
    j["trials"] = e.trials;
    j["policy"] = policy_name(e.policy.kind);
    j["alpha"] = e.policy.alpha;
    j["lr_initial"] = e.lr.initial;
    j["lr_decay"] = e.lr.decay;
    j["lr_floor"] = e.lr.floor;
    j["noise_power"] = e.channel.noise_power;
    j["tx_power"] = e.channel.tx_power;
    j["antenna_gain"] = e.channel.antenna_gain;
    j["carrier_freq"] = e.channel.carrier_freq_hz;
    j["path_loss_exp"] = e.channel.path_loss_exp;
    j["dist_min"] = e.dist_min_m;
    j["dist_max"] = e.dist_max_m;
    j["partition"] = std::string(e.partition.kind == PartitionSpec::Kind::shards
                                     ? "shards:"
                                     : "classes:") +
                     std::to_string(e.partition.per_device);
    j["eval_train_subsample"] = e.eval_train_subsample;
    j["parallel_trials"] = e.parallel_trials;
    j["seeds"] = {{"data", e.seeds.data},
                  {"channel", e.seeds.channel},
                  {"sched", e.seeds.sched},
                  {"noise", e.seeds.noise}};
    j["dataset"] = cfg.dataset;
    if (cfg.dataset == "synthetic") {
        j["synthetic_samples"] = cfg.synthetic_samples;
        j["synthetic_features"] = cfg.synthetic_features;
        j["synthetic_classes"] = cfg.synthetic_classes;
        j["synthetic_test_samples"] = cfg.synthetic_test_samples;
    }
    if (!cfg.alpha_sweep.empty()) j["alpha_sweep"] = cfg.alpha_sweep;
    if (include_out) j["out"] = cfg.out_dir;
    return j;
}

ordered_json summary_json(const RunConfig& cfg, double alpha,
                          const ExperimentResult& result) {
    ordered_json j;
    j["alpha"] = alpha;
    j["config"] = config_json(cfg, /*include_out=*/false);
    j["config"]["alpha"] = alpha;
    ordered_json trials = ordered_json::array();
    for (std::size_t t = 0; t < result.trials.size(); ++t) {
        const TrialResult& tr = result.trials[t];
        trials.push_back({{"trial", t},
                          {"final_accuracy", tr.final_accuracy},
                          {"best_accuracy", tr.best_accuracy},
                          {"best_round", tr.best_round},
                          {"final_train_loss", tr.final_loss}});
    }
    j["trials"] = trials;
    j["mean_final_accuracy"] = result.mean_final_accuracy;
    j["sd_final_accuracy"] = result.sd_final_accuracy;
    j["mean_best_accuracy"] = result.mean_best_accuracy;
    j["sd_best_accuracy"] = result.sd_best_accuracy;
    j["stderr_best_accuracy"] = result.stderr_best_accuracy;
    j["warnings"] = result.warnings;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

struct LoadedData {
    Dataset train;
    Dataset test;
};

LoadedData load_data(const RunConfig& cfg) {
    LoadedData data;
    if (cfg.dataset == "synthetic") {
        if (cfg.synthetic_samples == 0 || cfg.synthetic_test_samples == 0)
            throw std::runtime_error("config: synthetic train/test sizes must be positive");
        // one pool split into train/test so both share the class clusters
        const std::size_t total = cfg.synthetic_samples + cfg.synthetic_test_samples;
        Dataset pool = generate_synthetic(total, cfg.synthetic_features,
                                          cfg.synthetic_classes,
                                          cfg.experiment.seeds.data);
        auto slice = [&](std::size_t begin, std::size_t count) {
            Dataset d;
            d.n_samples = count;
            d.n_features = pool.n_features;
            d.n_classes = pool.n_classes;
            d.features.assign(pool.features.begin() +
                                  std::ptrdiff_t(begin * pool.n_features),
                              pool.features.begin() +
                                  std::ptrdiff_t((begin + count) * pool.n_features));
            d.labels.assign(pool.labels.begin() + std::ptrdiff_t(begin),
                            pool.labels.begin() + std::ptrdiff_t(begin + count));
            return d;
        };
        data.train = slice(0, cfg.synthetic_samples);
        data.test = slice(cfg.synthetic_samples, cfg.synthetic_test_samples);
        // keep class count consistent across the split
        data.train.n_classes = pool.n_classes;
        data.test.n_classes = pool.n_classes;
    } else if (cfg.dataset.rfind("mnist:", 0) == 0) {
        const std::string dir = cfg.dataset.substr(6);
        data.train = load_idx(dir + "/train-images-idx3-ubyte",
                              dir + "/train-labels-idx1-ubyte");
        data.test = load_idx(dir + "/t10k-images-idx3-ubyte",
                             dir + "/t10k-labels-idx1-ubyte");
        data.train.n_classes = data.test.n_classes =
            std::max(data.train.n_classes, data.test.n_classes);
    } else {
        throw std::runtime_error("config: bad dataset spec: " + cfg.dataset +
                                 " (expected synthetic or mnist:DIR)");
    }
    return data;
}

}  // namespace

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    ExperimentConfig& e = cfg.experiment;
    if (key == "devices") e.n_devices = parse_u64(key, value);
    else if (key == "rounds") e.rounds = parse_u64(key, value);
    else if (key == "num_scheduled") e.scheduled = parse_u64(key, value);
    else if (key == "batch_size") e.batch_size = parse_u64(key, value);
    else if (key == "trials") e.trials = parse_u64(key, value);
    else if (key == "policy") e.policy.kind = parse_policy_kind(value);
    else if (key == "alpha") e.policy.alpha = parse_double(key, value);
    else if (key == "lr_initial") e.lr.initial = parse_double(key, value);
    else if (key == "lr_decay") e.lr.decay = parse_double(key, value);
    else if (key == "lr_floor") e.lr.floor = parse_double(key, value);
    else if (key == "noise_power") e.channel.noise_power = parse_double(key, value);
    else if (key == "tx_power") e.channel.tx_power = parse_double(key, value);
    else if (key == "antenna_gain") e.channel.antenna_gain = parse_double(key, value);
    else if (key == "carrier_freq") e.channel.carrier_freq_hz = parse_double(key, value);
    else if (key == "path_loss_exp") e.channel.path_loss_exp = parse_double(key, value);
    else if (key == "dist_min") e.dist_min_m = parse_double(key, value);
    else if (key == "dist_max") e.dist_max_m = parse_double(key, value);
    else if (key == "seed_data") e.seeds.data = parse_u64(key, value);
    else if (key == "seed_channel") e.seeds.channel = parse_u64(key, value);
    else if (key == "seed_sched") e.seeds.sched = parse_u64(key, value);
    else if (key == "seed_noise") e.seeds.noise = parse_u64(key, value);
    else if (key == "partition") e.partition = parse_partition(value);
    else if (key == "eval_train_subsample") e.eval_train_subsample = parse_u64(key, value);
    else if (key == "parallel_trials") e.parallel_trials = parse_u64(key, value);
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "synthetic_samples") cfg.synthetic_samples = parse_u64(key, value);
    else if (key == "synthetic_features") cfg.synthetic_features = parse_u64(key, value);
    else if (key == "synthetic_classes") cfg.synthetic_classes = int(parse_u64(key, value));
    else if (key == "synthetic_test_samples")
        cfg.synthetic_test_samples = parse_u64(key, value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "alpha_sweep") cfg.alpha_sweep = parse_double_list(key, value);
    else throw std::runtime_error("config: unknown key: " + key);
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: missing '=' at " + path + ":" +
                                     std::to_string(lineno));
        apply_key_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string csv_header() {
    return "trial,round,train_loss,test_acc,e_com_analytic,e_com_empirical,"
           "e_var_mb,e_var_full,a_t,gamma_T,scheduled_ids";
}

std::string format_csv_rows(const ExperimentResult& result) {
    std::string out = csv_header();
    out += '\n';
    for (std::size_t t = 0; t < result.trials.size(); ++t) {
        for (const RoundMetrics& r : result.trials[t].rounds) {
            out += std::to_string(t);
            out += ',';
            out += std::to_string(r.round);
            out += ',';
            out += fmt(r.train_loss);
            out += ',';
            out += fmt(r.test_accuracy);
            out += ',';
            out += fmt(r.e_com_analytic);
            out += ',';
            out += fmt(r.e_com_empirical);
            out += ',';
            out += fmt(r.e_var_minibatch);
            out += ',';
            out += fmt(r.e_var_full);
            out += ',';
            out += fmt(r.rx_scale);
            out += ',';
            out += fmt(r.lr_sum);
            out += ',';
            for (std::size_t k = 0; k < r.scheduled_ids.size(); ++k) {
                if (k) out += ';';
                out += std::to_string(r.scheduled_ids[k]);
            }
            out += '\n';
        }
    }
    return out;
}

RunOutputs run(const RunConfig& cfg) {
    cfg.experiment.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    RunOutputs outputs;
    outputs.manifest_path = cfg.out_dir + "/manifest.json";

    ordered_json manifest;
    manifest["artifact"] = "pofl-sim";
    manifest["version"] = "1.0.0";
    manifest["status"] = "running";
    manifest["started_at"] = iso_now();
    manifest["config"] = config_json(cfg);
    manifest["outputs"] = ordered_json::array();
    write_text(outputs.manifest_path, manifest.dump(2) + "\n");

    const LoadedData data = load_data(cfg);

    std::vector<double> alphas = cfg.alpha_sweep;
    const bool sweep = !alphas.empty();
    if (!sweep) alphas = {cfg.experiment.policy.alpha};

    ordered_json sweep_rows = ordered_json::array();
    for (double alpha : alphas) {
        ExperimentConfig exp = cfg.experiment;
        exp.policy.alpha = alpha;
        const ExperimentResult result = run_experiment(exp, data.train, data.test);

        std::string tag;
        if (sweep) {
            tag = "_alpha" + fmt(alpha);
            for (char& c : tag)
                if (c == '.') c = 'p';
        }
        const std::string csv_path = cfg.out_dir + "/rounds" + tag + ".csv";
        const std::string summary_path = cfg.out_dir + "/summary" + tag + ".json";
        write_text(csv_path, format_csv_rows(result));
        write_text(summary_path, summary_json(cfg, alpha, result).dump(2) + "\n");
        outputs.csv_paths.push_back(csv_path);
        outputs.summary_paths.push_back(summary_path);

        if (sweep)
            sweep_rows.push_back({{"alpha", alpha},
                                  {"mean_best_accuracy", result.mean_best_accuracy},
                                  {"sd_best_accuracy", result.sd_best_accuracy},
                                  {"mean_final_accuracy", result.mean_final_accuracy}});
        for (const auto& w : result.warnings)
            std::fprintf(stderr, "warning: %s\n", w.c_str());
    }

    if (sweep) {
        outputs.sweep_summary_path = cfg.out_dir + "/sweep_summary.json";
        ordered_json j;
        j["noise_power"] = cfg.experiment.channel.noise_power;
        j["rows"] = sweep_rows;
        write_text(outputs.sweep_summary_path, j.dump(2) + "\n");
    }

    manifest["status"] = "complete";
    manifest["finished_at"] = iso_now();
    for (const auto& p : outputs.csv_paths) manifest["outputs"].push_back(p);
    for (const auto& p : outputs.summary_paths) manifest["outputs"].push_back(p);
    if (!outputs.sweep_summary_path.empty())
        manifest["outputs"].push_back(outputs.sweep_summary_path);
    write_text(outputs.manifest_path, manifest.dump(2) + "\n");
    return outputs;
}

}  // namespace pofl
