#pragma once
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pofl/scheduling.hpp"

namespace pofl {
namespace oracle {

// Brute-force verifiers for the closed forms. Everything in this namespace
// re-implements the formulas from scratch and never calls the production
// scheduling or transceiver code paths.

struct NumericSolveReport {
    std::vector<double> probs;            // numeric optimum
    double objective_numeric = 0.0;
    double objective_closed_form = 0.0;
    double kkt_residual = 0.0;            // max |p_numeric - p_closed_form|
    std::size_t iterations = 0;
};

// Single-device expected distortion-plus-variance objective evaluated by
// direct summation.
double enumerate_expected_objective(std::span<const double> probs,
                                    const ScheduleInputs& in, double alpha);

// Minimizes sum c_i / p_i on the probability simplex with 0 < p <= 1 by
// bisecting the simplex multiplier; per-coordinate clamping handles the box.
NumericSolveReport solve_p2_numeric(const ScheduleInputs& in, double alpha,
                                    double tol);

// Second, methodologically independent solver for cross-validation.
std::vector<double> solve_p2_projected_gradient(const ScheduleInputs& in,
                                                double alpha, std::size_t max_iters);

// Exact marginal inclusion probabilities of successive sampling without
// replacement, by enumerating every ordered outcome. Needs n <= 8.
std::vector<double> enumerate_schedule_distribution(std::span<const double> probs,
                                                    std::size_t take);

struct MonteCarloMean {
    std::vector<double> mean;
    std::vector<double> std_error;
    std::size_t n_trials = 0;
};

// Streaming per-coordinate mean and standard error; sample(out) fills one
// draw of size dim.
template <typename SampleFn>
MonteCarloMean monte_carlo_mean(std::size_t dim, std::size_t n_trials,
                                SampleFn&& sample) {
    if (n_trials < 2) throw std::invalid_argument("monte_carlo_mean: need >= 2 trials");
    MonteCarloMean out;
    out.n_trials = n_trials;
    out.mean.assign(dim, 0.0);
    out.std_error.assign(dim, 0.0);
    std::vector<double> m2(dim, 0.0);
    std::vector<double> draw(dim, 0.0);
    for (std::size_t t = 1; t <= n_trials; ++t) {
        sample(std::span<double>(draw));
        for (std::size_t d = 0; d < dim; ++d) {
            const double delta = draw[d] - out.mean[d];
            out.mean[d] += delta / double(t);
            m2[d] += delta * (draw[d] - out.mean[d]);
        }
    }
    for (std::size_t d = 0; d < dim; ++d)
        out.std_error[d] = std::sqrt(m2[d] / (double(n_trials - 1) * double(n_trials)));
    return out;
}

}  // namespace oracle
}  // namespace pofl
