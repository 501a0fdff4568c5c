#pragma once
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pofl {

// In-memory classification dataset. A constant-1 feature is appended to every
// row so the model bias folds into the flat weight vector.
struct Dataset {
    std::vector<float> features;  // row-major, n_samples x n_features
    std::vector<int> labels;
    std::size_t n_samples = 0;
    std::size_t n_features = 0;  // includes the appended constant feature
    int n_classes = 0;

    const float* row(std::size_t i) const {
        return features.data() + i * n_features;
    }
};

// Per-device index lists into a parent dataset. Lists are disjoint; samples
// left over by the integer split are not assigned to anyone.
struct Partition {
    std::vector<std::vector<std::uint32_t>> device_samples;

    std::size_t n_devices() const { return device_samples.size(); }
    std::size_t sample_count(std::size_t device) const {
        return device_samples[device].size();
    }
    std::size_t total_count() const;
};

// IDX readers (big-endian magic 2051 for images, 2049 for labels). Pixels are
// scaled to [0,1] and the constant feature is appended.
Dataset load_idx(std::istream& images, std::istream& labels);
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Separable Gaussian class clusters, deterministic for a fixed seed.
Dataset generate_synthetic(std::size_t n_samples, std::size_t n_features,
                           int n_classes, std::uint64_t seed);

// Label-sorted shard split: samples are sorted by label, cut into
// n_devices * shards_per_device equal shards, and each device receives
// shards_per_device random shards.
Partition partition_shards(const Dataset& data, std::size_t n_devices,
                           std::size_t shards_per_device, std::uint64_t seed);

// Each device holds classes_per_device distinct classes with
// floor(M / (n_devices * classes_per_device)) samples per class.
Partition partition_by_classes(const Dataset& data, std::size_t n_devices,
                               int classes_per_device, std::uint64_t seed);

}  // namespace pofl
