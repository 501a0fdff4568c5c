#include "pofl/oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace pofl {
namespace oracle {

namespace {

// Objective coefficients: cost_i = (1+a) A_i + (1+1/a) B_i with
// A_i the per-device noise-distortion term and B_i the importance term,
// so the objective is sum cost_i / p_i plus a p-independent constant.
struct P2Coefficients {
    std::vector<double> cost;
    double constant = 0.0;  // -(1+1/a) sum B_i
};

P2Coefficients p2_coefficients(const ScheduleInputs& in, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("p2: alpha must be positive");
    in.validate();
    const std::size_t n = in.n_devices();
    const double m_total_sq = in.total_samples * in.total_samples;
    P2Coefficients out;
    out.cost.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double m_sq = in.sample_counts[i] * in.sample_counts[i];
        const double noise = double(in.dim) * in.noise_power * in.v_tilde * m_sq /
                             (in.tx_power * in.h_mag[i] * in.h_mag[i] * m_total_sq);
        const double importance =
            m_sq * in.grad_norms[i] * in.grad_norms[i] / m_total_sq;
        out.cost[i] = (1.0 + alpha) * noise + (1.0 + 1.0 / alpha) * importance;
        out.constant -= (1.0 + 1.0 / alpha) * importance;
    }
    return out;
}

// Closed form re-derived here (independent of the production scheduler):
// p_i proportional to sqrt(cost_i), floored, normalized.
std::vector<double> closed_form_probs(const P2Coefficients& coeff) {
    std::vector<double> p(coeff.cost.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::max(std::sqrt(coeff.cost[i]), kProbabilityFloor);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

double objective_of(const P2Coefficients& coeff, std::span<const double> p) {
    double obj = coeff.constant;
    for (std::size_t i = 0; i < p.size(); ++i) obj += coeff.cost[i] / p[i];
    return obj;
}

// Projection onto { sum p = 1, lo <= p_i <= 1 } by bisecting the shift.
std::vector<double> project_box_simplex(std::span<const double> v, double lo) {
    const std::size_t n = v.size();
    double tau_lo = -1.0, tau_hi = 1.0;
    for (double x : v) {
        tau_lo = std::min(tau_lo, x - 1.0);
        tau_hi = std::max(tau_hi, x - lo);
    }
    auto mass = [&](double tau) {
        double s = 0.0;
        for (double x : v) s += std::clamp(x - tau, lo, 1.0);
        return s;
    };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (tau_lo + tau_hi);
        if (mass(mid) > 1.0) tau_lo = mid;
        else tau_hi = mid;
    }
    const double tau = 0.5 * (tau_lo + tau_hi);
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::clamp(v[i] - tau, lo, 1.0);
    return p;
}

}  // namespace

double enumerate_expected_objective(std::span<const double> probs,
                                    const ScheduleInputs& in, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("enumerate: alpha must be positive");
    in.validate();
    if (probs.size() != in.n_devices())
        throw std::invalid_argument("enumerate: probability size mismatch");
    const double m_total_sq = in.total_samples * in.total_samples;
    double distortion = 0.0, variance = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double m_sq = in.sample_counts[i] * in.sample_counts[i];
        distortion += double(in.dim) * in.noise_power * in.v_tilde * m_sq /
                      (probs[i] * in.tx_power * in.h_mag[i] * in.h_mag[i] * m_total_sq);
        variance += (1.0 / probs[i] - 1.0) * m_sq * in.grad_norms[i] *
                    in.grad_norms[i] / m_total_sq;
    }
    return (1.0 + alpha) * distortion + (1.0 + 1.0 / alpha) * variance;
}

NumericSolveReport solve_p2_numeric(const ScheduleInputs& in, double alpha,
                                    double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_p2: tol must be positive");
    const P2Coefficients coeff = p2_coefficients(in, alpha);
    const std::size_t n = coeff.cost.size();

    // zero-cost coordinates sit at the floor; the rest share the budget
    double budget = 1.0;
    double sqrt_cost_sum = 0.0;
    std::size_t n_active = 0;
    for (double c : coeff.cost) {
        if (c > 0.0) {
            sqrt_cost_sum += std::sqrt(c);
            ++n_active;
        } else {
            budget -= kProbabilityFloor;
        }
    }
    if (n_active == 0)
        throw std::runtime_error("solve_p2: all cost coefficients are zero");

    NumericSolveReport report;
    report.probs.assign(n, kProbabilityFloor);

    // stationarity gives p_i = sqrt(cost_i / mu); bisect mu until the
    // clamped coordinates spend exactly the budget
    auto mass = [&](double mu) {
        double s = 0.0;
        for (double c : coeff.cost)
            if (c > 0.0) s += std::min(std::sqrt(c / mu), 1.0);
        return s;
    };
    double mu_hi = sqrt_cost_sum / budget;
    mu_hi *= mu_hi;  // unclamped solution; mass(mu_hi) <= budget
    double mu_lo = mu_hi;
    std::size_t iters = 0;
    while (mass(mu_lo) < budget && iters < 200) {
        mu_lo *= 0.25;
        ++iters;
    }
    if (mass(mu_lo) < budget)
        throw std::runtime_error("solve_p2: could not bracket the multiplier");
    double mu = mu_hi;
    for (; iters < 500; ++iters) {
        mu = 0.5 * (mu_lo + mu_hi);
        const double m = mass(mu);
        if (std::abs(m - budget) <= tol) break;
        if (m > budget) mu_lo = mu;
        else mu_hi = mu;
    }
    if (std::abs(mass(mu) - budget) > tol * 16.0)
        throw std::runtime_error("solve_p2: bisection did not converge");
    report.iterations = iters;
    for (std::size_t i = 0; i < n; ++i)
        if (coeff.cost[i] > 0.0)
            report.probs[i] = std::min(std::sqrt(coeff.cost[i] / mu), 1.0);

    const std::vector<double> closed = closed_form_probs(coeff);
    report.objective_numeric = objective_of(coeff, report.probs);
    report.objective_closed_form = objective_of(coeff, closed);
    for (std::size_t i = 0; i < n; ++i)
        report.kkt_residual =
            std::max(report.kkt_residual, std::abs(report.probs[i] - closed[i]));
    return report;
}

std::vector<double> solve_p2_projected_gradient(const ScheduleInputs& in,
                                                double alpha, std::size_t max_iters) {
    const P2Coefficients coeff = p2_coefficients(in, alpha);
    const std::size_t n = coeff.cost.size();
    std::vector<double> p(n, 1.0 / double(n));
    double obj = objective_of(coeff, p);
    double step = 1.0;
    std::vector<double> trial(n), grad(n);
    for (std::size_t it = 0; it < max_iters; ++it) {
        double gnorm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            grad[i] = -coeff.cost[i] / (p[i] * p[i]);
            gnorm += grad[i] * grad[i];
        }
        gnorm = std::sqrt(gnorm);
        if (gnorm == 0.0) break;
        bool moved = false;
        while (step > 1e-18) {
            for (std::size_t i = 0; i < n; ++i)
                trial[i] = p[i] - step * grad[i] / gnorm;
            std::vector<double> proj = project_box_simplex(trial, kProbabilityFloor);
            const double trial_obj = objective_of(coeff, proj);
            if (trial_obj < obj) {
                p = std::move(proj);
                obj = trial_obj;
                step *= 1.3;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return p;
}

std::vector<double> enumerate_schedule_distribution(std::span<const double> probs,
                                                    std::size_t take) {
    const std::size_t n = probs.size();
    if (n > 8) throw std::invalid_argument("enumerate_schedule_distribution: n > 8");
    if (take == 0 || take > n)
        throw std::invalid_argument("enumerate_schedule_distribution: take out of range");

    std::vector<double> marginals(n, 0.0);
    // depth-first over ordered outcomes, probability product along the path
    struct Frame {
        std::uint32_t mask;
        double prob;
        std::size_t depth;
    };
    std::vector<Frame> stack{{0u, 1.0, 0}};
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        if (f.depth == take) {
            for (std::size_t i = 0; i < n; ++i)
                if (f.mask & (1u << i)) marginals[i] += f.prob;
            continue;
        }
        double remaining = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!(f.mask & (1u << i))) remaining += probs[i];
        for (std::size_t i = 0; i < n; ++i)
            if (!(f.mask & (1u << i)))
                stack.push_back(
                    {f.mask | (1u << i), f.prob * probs[i] / remaining, f.depth + 1});
    }
    return marginals;
}

}  // namespace oracle
}  // namespace pofl
