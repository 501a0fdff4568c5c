#pragma once
#include <span>
#include <vector>

#include "pofl/dataset.hpp"

namespace pofl {

class Rng;

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Flat parameter count of the multinomial logistic model: one weight block
// per class (class-major), bias included via the dataset's constant feature.
inline std::size_t param_dim(const Dataset& data) {
    return data.n_features * std::size_t(data.n_classes);
}

// Mean softmax cross-entropy gradient / loss over the given sample rows.
std::vector<double> softmax_gradient(std::span<const double> w, const Dataset& data,
                                     std::span<const std::uint32_t> rows);
double softmax_loss(std::span<const double> w, const Dataset& data,
                    std::span<const std::uint32_t> rows);

// Mini-batch gradient for one device: batch_size rows drawn uniformly without
// replacement from the device's local set.
std::vector<double> local_gradient(std::span<const double> w, const Dataset& data,
                                   const Partition& part, std::size_t device,
                                   std::size_t batch_size, Rng& rng);

// Gradient over the device's full local set.
std::vector<double> full_gradient(std::span<const double> w, const Dataset& data,
                                  const Partition& part, std::size_t device);

// Mean cross-entropy and argmax accuracy over a dataset. Logit ties break
// toward the lowest class index.
EvalResult evaluate(std::span<const double> w, const Dataset& data);
EvalResult evaluate_rows(std::span<const double> w, const Dataset& data,
                         std::span<const std::uint32_t> rows);

}  // namespace pofl
