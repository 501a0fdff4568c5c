#pragma once
#include <cstdint>
#include <vector>

namespace pofl {

class Rng;

// Uplink radio parameters. noise_power is the total complex noise power per
// received entry (sigma_z^2, Watts); tx_power is the per-device budget P.
struct ChannelConfig {
    double antenna_gain = 4.11;     // G0
    double carrier_freq_hz = 915e6; // f0
    double path_loss_exp = 3.76;    // PL
    double noise_power = 1e-11;     // sigma_z^2 [W]
    double tx_power = 1.0;          // P [W]
    std::vector<double> distances_m;

    void validate() const;
};

// One round of fading: h_i = sqrt(path_gain_i) * lambda_i with lambda ~ CN(0,1).
// Only magnitudes feed the transceiver; phases are kept for completeness.
struct ChannelRealization {
    std::vector<double> magnitude;  // |h_i|
    std::vector<double> phase;
    std::vector<double> path_gain;  // static g_i per device
};

// Free-space path gain G0 * (c / (4 pi f0 d))^PL.
double path_loss(double distance_m, const ChannelConfig& cfg);

std::vector<double> draw_distances(std::size_t n_devices, double lo_m, double hi_m,
                                   Rng& rng);

ChannelRealization draw_channels(const ChannelConfig& cfg, Rng& rng);

}  // namespace pofl
