#include "pofl/aircomp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pofl/rng.hpp"

namespace pofl {

namespace {

void check_design_inputs(std::span<const double> rho, std::span<const double> h_mag,
                         double tx_power) {
    if (rho.empty() || rho.size() != h_mag.size())
        throw std::invalid_argument("aircomp: weight/channel size mismatch");
    if (tx_power <= 0.0) throw std::invalid_argument("aircomp: tx power must be positive");
    for (double r : rho)
        if (!(r > 0.0)) throw std::invalid_argument("aircomp: weights must be positive");
    for (double h : h_mag)
        if (!(h > 0.0)) throw std::runtime_error("aircomp: degenerate zero channel");
}

}  // namespace

GradientStats gradient_stats(std::span<const double> g) {
    if (g.empty()) throw std::invalid_argument("gradient_stats: empty gradient");
    GradientStats s;
    for (double v : g) s.mean += v;
    s.mean /= double(g.size());
    double sq = 0.0;
    for (double v : g) {
        const double d = v - s.mean;
        s.variance += d * d;
        sq += v * v;
    }
    s.variance /= double(g.size());
    s.norm = std::sqrt(sq);
    return s;
}

std::vector<double> normalize(std::span<const double> g, double global_mean,
                              double global_var) {
    if (global_var < 0.0) throw std::invalid_argument("normalize: negative variance");
    std::vector<double> s(g.size(), 0.0);
    if (global_var <= kVarianceEpsilon) return s;
    const double inv = 1.0 / std::sqrt(global_var);
    for (std::size_t d = 0; d < g.size(); ++d) s[d] = (g[d] - global_mean) * inv;
    return s;
}

TransceiverDesign design_transceiver(std::span<const double> rho,
                                     std::span<const double> h_mag, double tx_power) {
    check_design_inputs(rho, h_mag, tx_power);
    const double sqrt_p = std::sqrt(tx_power);
    double a = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rho.size(); ++i)
        a = std::min(a, sqrt_p * h_mag[i] / rho[i]);
    TransceiverDesign out;
    out.rx_scale = a;
    out.tx_scale.resize(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i)
        out.tx_scale[i] = rho[i] * a / h_mag[i];
    return out;
}

double analytic_distortion(double global_var, std::span<const double> rho,
                           std::span<const double> h_mag, double tx_power,
                           std::size_t dim, double noise_power) {
    check_design_inputs(rho, h_mag, tx_power);
    if (noise_power < 0.0)
        throw std::invalid_argument("analytic_distortion: negative noise power");
    if (noise_power == 0.0 || global_var <= kVarianceEpsilon) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i)
        worst = std::max(worst, rho[i] * rho[i] / (h_mag[i] * h_mag[i]));
    return double(dim) * noise_power * global_var / tx_power * worst;
}

AggregationResult simulate_aggregation(const std::vector<std::span<const double>>& grads,
                                       std::span<const double> rho,
                                       std::span<const double> h_mag, double tx_power,
                                       double noise_power, Rng& rng) {
    check_design_inputs(rho, h_mag, tx_power);
    if (grads.size() != rho.size())
        throw std::invalid_argument("simulate_aggregation: gradient count mismatch");
    const std::size_t dim = grads.front().size();
    for (const auto& g : grads)
        if (g.size() != dim)
            throw std::invalid_argument("simulate_aggregation: gradient dim mismatch");

    AggregationResult out;
    double rho_sum = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        const GradientStats s = gradient_stats(grads[i]);
        out.global_mean += rho[i] * s.mean;
        out.global_var += rho[i] * s.variance;
        rho_sum += rho[i];
    }

    const TransceiverDesign design = design_transceiver(rho, h_mag, tx_power);
    out.rx_scale = design.rx_scale;
    out.distortion_analytic =
        analytic_distortion(out.global_var, rho, h_mag, tx_power, dim, noise_power);

    out.estimate.assign(dim, 0.0);
    if (out.global_var <= kVarianceEpsilon) {
        // all scheduled gradients are constant vectors; M_g * 1 is exact
        for (double& v : out.estimate) v = out.global_mean;
    } else {
        // aligned superposition already divided by a: b_i |h_i| / a = rho_i
        for (std::size_t i = 0; i < grads.size(); ++i) {
            const std::vector<double> sym =
                normalize(grads[i], out.global_mean, out.global_var);
            for (std::size_t d = 0; d < dim; ++d) out.estimate[d] += rho[i] * sym[d];
        }
        if (noise_power > 0.0) {
            const double noise_scale = std::sqrt(noise_power) / design.rx_scale;
            for (std::size_t d = 0; d < dim; ++d)
                out.estimate[d] += noise_scale * rng.normal();
        }
        const double sv = std::sqrt(out.global_var);
        for (double& v : out.estimate) v = sv * v + out.global_mean * rho_sum;
    }

    for (std::size_t d = 0; d < dim; ++d) {
        double truth = 0.0;
        for (std::size_t i = 0; i < grads.size(); ++i) truth += rho[i] * grads[i][d];
        const double err = out.estimate[d] - truth;
        out.distortion_realized += err * err;
    }
    return out;
}

}  // namespace pofl
