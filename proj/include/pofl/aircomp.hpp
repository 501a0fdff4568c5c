#pragma once
#include <span>
#include <vector>

namespace pofl {

class Rng;

// Entry mean, population variance (divide by D) and l2 norm of a gradient.
struct GradientStats {
    double mean = 0.0;
    double variance = 0.0;
    double norm = 0.0;
};

// Pre-equalization magnitudes b_i and de-noising receive scalar a for the
// scheduled devices: a = min_i sqrt(P)|h_i|/rho_i, b_i = rho_i * a / |h_i|.
// The power constraint |b_i|^2 <= P binds for the bottleneck device.
struct TransceiverDesign {
    std::vector<double> tx_scale;  // |b_i|
    double rx_scale = 0.0;         // a
};

// Everything the server reconstructs in one AirComp round.
struct AggregationResult {
    std::vector<double> estimate;      // \hat{y}
    double global_mean = 0.0;          // M_g = sum rho_i M_i
    double global_var = 0.0;           // V_g = sum rho_i V_i
    double rx_scale = 0.0;             // a
    double distortion_analytic = 0.0;  // D sigma^2 V_g / P * max rho^2/|h|^2
    double distortion_realized = 0.0;  // || estimate - sum rho g ||^2 this draw
};

// Gradients below this variance are treated as constant vectors: the devices
// transmit zeros and the server reconstructs M_g * 1 exactly.
constexpr double kVarianceEpsilon = 1e-12;

GradientStats gradient_stats(std::span<const double> g);

// Symbol vector (g - M_g 1) / sqrt(V_g); all zeros in the degenerate case.
std::vector<double> normalize(std::span<const double> g, double global_mean,
                              double global_var);

TransceiverDesign design_transceiver(std::span<const double> rho,
                                     std::span<const double> h_mag, double tx_power);

double analytic_distortion(double global_var, std::span<const double> rho,
                           std::span<const double> h_mag, double tx_power,
                           std::size_t dim, double noise_power);

// Full uplink: per-device normalization, aligned superposition, additive
// noise, receive scaling and de-normalization. Noiseless runs reproduce the
// weighted gradient sum exactly.
AggregationResult simulate_aggregation(const std::vector<std::span<const double>>& grads,
                                       std::span<const double> rho,
                                       std::span<const double> h_mag, double tx_power,
                                       double noise_power, Rng& rng);

}  // namespace pofl
