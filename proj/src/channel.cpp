#include "pofl/channel.hpp"

#include <cmath>
#include <stdexcept>

#include "pofl/rng.hpp"

namespace pofl {

namespace {
constexpr double kLightSpeed = 3e8;
constexpr double kPi = 3.141592653589793238462643383279502884;
}  // namespace

void ChannelConfig::validate() const {
    if (antenna_gain <= 0.0 || carrier_freq_hz <= 0.0 || tx_power <= 0.0)
        throw std::invalid_argument("channel: gain, frequency and power must be positive");
    if (path_loss_exp < 0.0)
        throw std::invalid_argument("channel: negative path loss exponent");
    if (noise_power < 0.0)
        throw std::invalid_argument("channel: negative noise power");
    for (double d : distances_m)
        if (d <= 0.0) throw std::invalid_argument("channel: nonpositive distance");
}

double path_loss(double distance_m, const ChannelConfig& cfg) {
    if (distance_m <= 0.0)
        throw std::invalid_argument("path_loss: distance must be positive");
    const double wavelength_term =
        kLightSpeed / (4.0 * kPi * cfg.carrier_freq_hz * distance_m);
    return cfg.antenna_gain * std::pow(wavelength_term, cfg.path_loss_exp);
}

std::vector<double> draw_distances(std::size_t n_devices, double lo_m, double hi_m,
                                   Rng& rng) {
    if (lo_m <= 0.0 || hi_m < lo_m)
        throw std::invalid_argument("draw_distances: bad range");
    std::vector<double> d(n_devices);
    for (auto& v : d) v = rng.uniform(lo_m, hi_m);
    return d;
}

ChannelRealization draw_channels(const ChannelConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t n = cfg.distances_m.size();
    ChannelRealization out;
    out.magnitude.resize(n);
    out.phase.resize(n);
    out.path_gain.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.path_gain[i] = path_loss(cfg.distances_m[i], cfg);
        // CN(0,1): real and imaginary parts N(0, 1/2)
        const double re = rng.normal() * std::sqrt(0.5);
        const double im = rng.normal() * std::sqrt(0.5);
        out.magnitude[i] = std::sqrt(out.path_gain[i] * (re * re + im * im));
        out.phase[i] = std::atan2(im, re);
    }
    return out;
}

}  // namespace pofl
