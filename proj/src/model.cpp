#include "pofl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pofl/rng.hpp"

namespace pofl {

namespace {

// weight-row times feature-row with four independent accumulators so the
// reduction vectorizes under strict floating point
double dot_features(const double* w, const float* x, std::size_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        a0 += w[j] * double(x[j]);
        a1 += w[j + 1] * double(x[j + 1]);
        a2 += w[j + 2] * double(x[j + 2]);
        a3 += w[j + 3] * double(x[j + 3]);
    }
    for (; j < n; ++j) a0 += w[j] * double(x[j]);
    return (a0 + a1) + (a2 + a3);
}

// softmax probabilities for one row, numerically stabilized
void row_probs(std::span<const double> w, const Dataset& data, std::size_t row,
               std::vector<double>& probs) {
    const std::size_t F = data.n_features;
    const int K = data.n_classes;
    const float* x = data.row(row);
    double z_max = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
        const double z = dot_features(w.data() + std::size_t(k) * F, x, F);
        probs[std::size_t(k)] = z;
        z_max = std::max(z_max, z);
    }
    double denom = 0.0;
    for (int k = 0; k < K; ++k) {
        double& p = probs[std::size_t(k)];
        p = std::exp(p - z_max);
        denom += p;
    }
    const double inv = 1.0 / denom;
    for (int k = 0; k < K; ++k) probs[std::size_t(k)] *= inv;
}

void check_model(std::span<const double> w, const Dataset& data) {
    if (w.size() != param_dim(data))
        throw std::invalid_argument("model: weight vector has wrong dimension");
}

}  // namespace

std::vector<double> softmax_gradient(std::span<const double> w, const Dataset& data,
                                     std::span<const std::uint32_t> rows) {
    check_model(w, data);
    if (rows.empty()) throw std::invalid_argument("softmax_gradient: empty batch");
    const std::size_t F = data.n_features;
    const int K = data.n_classes;
    std::vector<double> grad(w.size(), 0.0);
    std::vector<double> probs(static_cast<std::size_t>(K));
    for (std::uint32_t r : rows) {
        row_probs(w, data, r, probs);
        const float* x = data.row(r);
        const int y = data.labels[r];
        for (int k = 0; k < K; ++k) {
            const double delta = probs[std::size_t(k)] - (k == y ? 1.0 : 0.0);
            double* gk = grad.data() + std::size_t(k) * F;
            for (std::size_t j = 0; j < F; ++j) gk[j] += delta * double(x[j]);
        }
    }
    const double inv = 1.0 / double(rows.size());
    for (double& g : grad) g *= inv;
    return grad;
}

double softmax_loss(std::span<const double> w, const Dataset& data,
                    std::span<const std::uint32_t> rows) {
    check_model(w, data);
    if (rows.empty()) throw std::invalid_argument("softmax_loss: empty batch");
    std::vector<double> probs(static_cast<std::size_t>(data.n_classes));
    double sum = 0.0;
    for (std::uint32_t r : rows) {
        row_probs(w, data, r, probs);
        const double p = std::max(probs[std::size_t(data.labels[r])], 1e-300);
        sum -= std::log(p);
    }
    return sum / double(rows.size());
}

std::vector<double> local_gradient(std::span<const double> w, const Dataset& data,
                                   const Partition& part, std::size_t device,
                                   std::size_t batch_size, Rng& rng) {
    const auto& local = part.device_samples.at(device);
    if (local.empty()) throw std::runtime_error("local_gradient: device has no samples");
    if (batch_size == 0 || batch_size > local.size())
        throw std::invalid_argument("local_gradient: batch size out of range");

    // partial Fisher-Yates: first batch_size entries form the batch
    std::vector<std::uint32_t> pool(local);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t j = i + rng.uniform_index(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    return softmax_gradient(w, data, std::span(pool.data(), batch_size));
}

std::vector<double> full_gradient(std::span<const double> w, const Dataset& data,
                                  const Partition& part, std::size_t device) {
    const auto& local = part.device_samples.at(device);
    if (local.empty()) throw std::runtime_error("full_gradient: device has no samples");
    return softmax_gradient(w, data, std::span(local.data(), local.size()));
}

EvalResult evaluate_rows(std::span<const double> w, const Dataset& data,
                         std::span<const std::uint32_t> rows) {
    check_model(w, data);
    if (rows.empty()) throw std::invalid_argument("evaluate: empty dataset");
    const std::size_t F = data.n_features;
    const int K = data.n_classes;
    std::vector<double> logits(static_cast<std::size_t>(K));
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::uint32_t r : rows) {
        const float* x = data.row(r);
        double z_max = -std::numeric_limits<double>::infinity();
        int argmax = 0;
        for (int k = 0; k < K; ++k) {
            const double z = dot_features(w.data() + std::size_t(k) * F, x, F);
            logits[std::size_t(k)] = z;
            if (z > z_max) {  // strict: ties keep the lowest index
                z_max = z;
                argmax = k;
            }
        }
        double denom = 0.0;
        for (int k = 0; k < K; ++k) denom += std::exp(logits[std::size_t(k)] - z_max);
        loss += std::log(denom) - (logits[std::size_t(data.labels[r])] - z_max);
        correct += std::size_t(argmax == data.labels[r]);
    }
    return {loss / double(rows.size()), double(correct) / double(rows.size())};
}

EvalResult evaluate(std::span<const double> w, const Dataset& data) {
    std::vector<std::uint32_t> rows(data.n_samples);
    std::iota(rows.begin(), rows.end(), 0u);
    return evaluate_rows(w, data, rows);
}

}  // namespace pofl
