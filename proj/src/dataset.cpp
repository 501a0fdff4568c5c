#include "pofl/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <stdexcept>

#include "pofl/rng.hpp"

namespace pofl {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::uint32_t read_be_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx: truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

std::size_t Partition::total_count() const {
    std::size_t n = 0;
    for (const auto& d : device_samples) n += d.size();
    return n;
}

Dataset load_idx(std::istream& images, std::istream& labels) {
    const std::uint32_t img_magic = read_be_u32(images);
    if (img_magic != kImageMagic)
        throw std::runtime_error("idx: bad image magic " + std::to_string(img_magic) +
                                 ", expected " + std::to_string(kImageMagic));
    const std::uint32_t n_images = read_be_u32(images);
    const std::uint32_t rows = read_be_u32(images);
    const std::uint32_t cols = read_be_u32(images);

    const std::uint32_t lab_magic = read_be_u32(labels);
    if (lab_magic != kLabelMagic)
        throw std::runtime_error("idx: bad label magic " + std::to_string(lab_magic) +
                                 ", expected " + std::to_string(kLabelMagic));
    const std::uint32_t n_labels = read_be_u32(labels);
    if (n_labels != n_images)
        throw std::runtime_error("idx: image/label count mismatch (" +
                                 std::to_string(n_images) + " vs " +
                                 std::to_string(n_labels) + ")");

    const std::size_t pixels = std::size_t(rows) * cols;
    Dataset out;
    out.n_samples = n_images;
    out.n_features = pixels + 1;  // constant feature appended
    out.features.resize(out.n_samples * out.n_features);
    out.labels.resize(out.n_samples);

    std::vector<unsigned char> buf(pixels);
    for (std::size_t i = 0; i < out.n_samples; ++i) {
        images.read(reinterpret_cast<char*>(buf.data()), std::streamsize(pixels));
        if (!images) throw std::runtime_error("idx: truncated image data");
        float* dst = out.features.data() + i * out.n_features;
        for (std::size_t j = 0; j < pixels; ++j)
            dst[j] = float(buf[j]) * (1.0f / 255.0f);
        dst[pixels] = 1.0f;
    }
    for (std::size_t i = 0; i < out.n_samples; ++i) {
        char c = 0;
        labels.read(&c, 1);
        if (!labels) throw std::runtime_error("idx: truncated label data");
        out.labels[i] = int(static_cast<unsigned char>(c));
    }
    out.n_classes = 1 + *std::max_element(out.labels.begin(), out.labels.end());
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);
    return load_idx(img, lab);
}

Dataset generate_synthetic(std::size_t n_samples, std::size_t n_features,
                           int n_classes, std::uint64_t seed) {
    if (n_samples == 0 || n_features == 0 || n_classes <= 0)
        throw std::invalid_argument("generate_synthetic: counts must be positive");

    Rng rng(seed, 0x5f4e7441);
    // Cluster centers spread wide relative to unit within-class noise so a
    // linear model can separate them.
    const double spread = 3.0;
    std::vector<double> centers(std::size_t(n_classes) * n_features);
    for (auto& c : centers) c = spread * rng.normal();

    Dataset out;
    out.n_samples = n_samples;
    out.n_features = n_features + 1;
    out.n_classes = n_classes;
    out.features.resize(n_samples * out.n_features);
    out.labels.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const int label = int(rng.uniform_index(std::size_t(n_classes)));
        out.labels[i] = label;
        float* dst = out.features.data() + i * out.n_features;
        const double* mu = centers.data() + std::size_t(label) * n_features;
        for (std::size_t j = 0; j < n_features; ++j)
            dst[j] = float(mu[j] + rng.normal());
        dst[n_features] = 1.0f;
    }
    return out;
}

Partition partition_shards(const Dataset& data, std::size_t n_devices,
                           std::size_t shards_per_device, std::uint64_t seed) {
    if (n_devices == 0 || shards_per_device == 0)
        throw std::invalid_argument("partition_shards: counts must be positive");
    const std::size_t n_shards = n_devices * shards_per_device;
    const std::size_t shard_size = data.n_samples / n_shards;
    if (shard_size == 0)
        throw std::invalid_argument("partition_shards: shard size is zero");

    // stable label sort so equal labels keep index order
    std::vector<std::uint32_t> order(data.n_samples);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return data.labels[a] < data.labels[b];
    });

    std::vector<std::size_t> shard_ids(n_shards);
    std::iota(shard_ids.begin(), shard_ids.end(), std::size_t(0));
    Rng rng(seed, 0x5148ec);
    for (std::size_t i = n_shards - 1; i > 0; --i)
        std::swap(shard_ids[i], shard_ids[rng.uniform_index(i + 1)]);

    Partition part;
    part.device_samples.resize(n_devices);
    for (std::size_t d = 0; d < n_devices; ++d) {
        auto& dst = part.device_samples[d];
        dst.reserve(shards_per_device * shard_size);
        for (std::size_t s = 0; s < shards_per_device; ++s) {
            const std::size_t shard = shard_ids[d * shards_per_device + s];
            const auto begin = order.begin() + std::ptrdiff_t(shard * shard_size);
            dst.insert(dst.end(), begin, begin + std::ptrdiff_t(shard_size));
        }
    }
    return part;
}

Partition partition_by_classes(const Dataset& data, std::size_t n_devices,
                               int classes_per_device, std::uint64_t seed) {
    if (n_devices == 0 || classes_per_device <= 0)
        throw std::invalid_argument("partition_by_classes: counts must be positive");
    if (classes_per_device > data.n_classes)
        throw std::invalid_argument("partition_by_classes: more classes per device than classes");

    const std::size_t per_class =
        data.n_samples / (n_devices * std::size_t(classes_per_device));
    if (per_class == 0)
        throw std::invalid_argument("partition_by_classes: per-class sample count is zero");

    Rng rng(seed, 0xc1a55);
    std::vector<std::vector<std::uint32_t>> pools(std::size_t(data.n_classes));
    for (std::uint32_t i = 0; i < data.n_samples; ++i)
        pools[std::size_t(data.labels[i])].push_back(i);
    for (auto& pool : pools)
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[rng.uniform_index(i)]);

    // how many devices each class can still serve
    std::vector<std::size_t> capacity(pools.size());
    for (std::size_t c = 0; c < pools.size(); ++c)
        capacity[c] = pools[c].size() / per_class;

    // Randomized assignment of classes_per_device distinct classes per device,
    // retried on the rare dead end of a tight capacity multiset.
    const int max_attempts = 1000;
    std::vector<std::vector<int>> assigned;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<std::size_t> remaining = capacity;
        assigned.assign(n_devices, {});
        bool ok = true;
        for (std::size_t d = 0; d < n_devices && ok; ++d) {
            std::vector<std::size_t> taken;
            for (int k = 0; k < classes_per_device; ++k) {
                std::size_t total = 0;
                for (std::size_t c = 0; c < remaining.size(); ++c)
                    if (std::find(taken.begin(), taken.end(), c) == taken.end())
                        total += remaining[c];
                if (total == 0) {
                    ok = false;
                    break;
                }
                std::size_t pick = rng.uniform_index(total);
                std::size_t chosen = remaining.size();
                for (std::size_t c = 0; c < remaining.size(); ++c) {
                    if (std::find(taken.begin(), taken.end(), c) != taken.end()) continue;
                    if (pick < remaining[c]) {
                        chosen = c;
                        break;
                    }
                    pick -= remaining[c];
                }
                taken.push_back(chosen);
                remaining[chosen] -= 1;
                assigned[d].push_back(int(chosen));
            }
        }
        if (ok) break;
        assigned.clear();
    }
    if (assigned.empty())
        throw std::invalid_argument("partition_by_classes: infeasible class supply");

    std::vector<std::size_t> cursor(pools.size(), 0);
    Partition part;
    part.device_samples.resize(n_devices);
    for (std::size_t d = 0; d < n_devices; ++d) {
        for (int c : assigned[d]) {
            auto& pool = pools[std::size_t(c)];
            auto& cur = cursor[std::size_t(c)];
            for (std::size_t k = 0; k < per_class; ++k)
                part.device_samples[d].push_back(pool[cur++]);
        }
    }
    return part;
}

}  // namespace pofl
