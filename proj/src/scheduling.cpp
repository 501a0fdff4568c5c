#include "pofl/scheduling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pofl/rng.hpp"

namespace pofl {

PolicyKind parse_policy_kind(const std::string& name) {
    if (name == "proposed") return PolicyKind::proposed;
    if (name == "importance" || name == "importance_aware")
        return PolicyKind::importance_aware;
    if (name == "channel" || name == "channel_aware") return PolicyKind::channel_aware;
    if (name == "deterministic") return PolicyKind::deterministic_random;
    if (name == "noise_free") return PolicyKind::noise_free;
    throw std::invalid_argument("unknown policy: " + name);
}

std::string policy_name(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::proposed: return "proposed";
        case PolicyKind::importance_aware: return "importance";
        case PolicyKind::channel_aware: return "channel";
        case PolicyKind::deterministic_random: return "deterministic";
        case PolicyKind::noise_free: return "noise_free";
    }
    return "?";
}

void ScheduleInputs::validate() const {
    const std::size_t n = sample_counts.size();
    if (n == 0) throw std::invalid_argument("schedule inputs: no devices");
    if (h_mag.size() != n || grad_norms.size() != n)
        throw std::invalid_argument("schedule inputs: size mismatch");
    if (!(total_samples > 0.0) || !(tx_power > 0.0) || dim == 0)
        throw std::invalid_argument("schedule inputs: nonpositive scalar");
    if (noise_power < 0.0 || v_tilde < 0.0)
        throw std::invalid_argument("schedule inputs: negative variance term");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sample_counts[i] > 0.0))
            throw std::invalid_argument("schedule inputs: nonpositive sample count");
        if (!(h_mag[i] > 0.0))
            throw std::invalid_argument("schedule inputs: nonpositive channel magnitude");
        if (grad_norms[i] < 0.0)
            throw std::invalid_argument("schedule inputs: negative gradient norm");
    }
}

std::vector<double> device_scores(const ScheduleInputs& in, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("device_scores: alpha must be positive");
    in.validate();
    const std::size_t n = in.n_devices();
    const double m_total_sq = in.total_samples * in.total_samples;
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double m_sq = in.sample_counts[i] * in.sample_counts[i];
        const double h_sq = in.h_mag[i] * in.h_mag[i];
        const double noise_term = (1.0 + alpha) * in.v_tilde * double(in.dim) *
                                  in.noise_power * m_sq /
                                  (in.tx_power * h_sq * m_total_sq);
        const double importance_term = (1.0 + 1.0 / alpha) * m_sq *
                                       in.grad_norms[i] * in.grad_norms[i] / m_total_sq;
        scores[i] = std::sqrt(noise_term + importance_term);
    }
    return scores;
}

namespace {

std::vector<double> normalize_scores(std::vector<double> scores) {
    bool any_positive = false;
    for (double s : scores)
        if (s > 0.0) any_positive = true;
    if (!any_positive)
        throw std::runtime_error("scheduling: all device scores are zero");

    for (double& s : scores) s = std::max(s, kProbabilityFloor);
    double total = 0.0;
    for (double s : scores) total += s;
    for (double& s : scores) s /= total;

    // normalized scores already satisfy p <= 1; the clamp loop only engages
    // on pathological inputs
    for (std::size_t guard = 0; guard < scores.size(); ++guard) {
        double excess = 0.0, free_mass = 0.0;
        for (double p : scores) {
            if (p > 1.0) excess += p - 1.0;
            else free_mass += p;
        }
        if (excess == 0.0) break;
        for (double& p : scores) {
            if (p > 1.0) p = 1.0;
            else p += excess * (p / free_mass);
        }
    }
    return scores;
}

}  // namespace

std::vector<double> scheduling_probabilities(const Policy& policy,
                                             const ScheduleInputs& in) {
    in.validate();
    const std::size_t n = in.n_devices();
    switch (policy.kind) {
        case PolicyKind::proposed:
            return normalize_scores(device_scores(in, policy.alpha));
        case PolicyKind::noise_free: {
            ScheduleInputs quiet = in;
            quiet.noise_power = 0.0;
            return normalize_scores(device_scores(quiet, policy.alpha));
        }
        case PolicyKind::importance_aware: {
            std::vector<double> s(n);
            for (std::size_t i = 0; i < n; ++i)
                s[i] = in.sample_counts[i] / in.total_samples * in.grad_norms[i];
            return normalize_scores(std::move(s));
        }
        case PolicyKind::channel_aware: {
            std::vector<double> s(n);
            for (std::size_t i = 0; i < n; ++i) s[i] = in.h_mag[i] * in.h_mag[i];
            return normalize_scores(std::move(s));
        }
        case PolicyKind::deterministic_random:
            return std::vector<double>(n, 1.0 / double(n));
    }
    throw std::logic_error("scheduling: bad policy kind");
}

ScheduleOutcome sample_without_replacement(std::span<const double> probs,
                                           std::size_t take, Rng& rng) {
    const std::size_t n = probs.size();
    if (take == 0 || take > n)
        throw std::invalid_argument("sample_without_replacement: take out of range");
    double total = 0.0;
    for (double p : probs) {
        if (!(p > 0.0) || p > 1.0)
            throw std::invalid_argument("sample_without_replacement: probabilities must be in (0,1]");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("sample_without_replacement: probabilities must sum to 1");

    ScheduleOutcome out;
    out.base_probs.assign(probs.begin(), probs.end());
    out.selected.reserve(take);
    out.q_at_selection.reserve(take);
    std::vector<bool> chosen(n, false);
    for (std::size_t k = 0; k < take; ++k) {
        double remaining = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!chosen[i]) remaining += probs[i];
        const double u = rng.uniform() * remaining;
        double acc = 0.0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            acc += probs[i];
            pick = i;  // falls through to the last unselected on fp overshoot
            if (u < acc) break;
        }
        chosen[pick] = true;
        out.selected.push_back(pick);
        out.q_at_selection.push_back(std::min(probs[pick] / remaining, 1.0));
    }
    return out;
}

std::vector<double> aggregation_weights(const ScheduleOutcome& outcome,
                                        std::span<const double> sample_counts,
                                        double total_samples) {
    const std::size_t take = outcome.selected.size();
    if (take == 0 || outcome.q_at_selection.size() != take)
        throw std::invalid_argument("aggregation_weights: malformed outcome");
    if (!(total_samples > 0.0))
        throw std::invalid_argument("aggregation_weights: nonpositive total");
    std::vector<double> w(take);
    for (std::size_t k = 0; k < take; ++k) {
        const std::size_t dev = outcome.selected[k];
        const double q = outcome.q_at_selection[k];
        const double share = sample_counts[dev] / total_samples;
        // unbiased ordered-sampling weight; the (S-k-1)/S term restores the
        // mass of the devices already drawn before pick k
        w[k] = share * (1.0 / (double(take) * q) +
                        double(take - 1 - k) / double(take));
    }
    return w;
}

std::vector<double> proportional_weights(const ScheduleOutcome& outcome,
                                         std::span<const double> sample_counts) {
    const std::size_t take = outcome.selected.size();
    if (take == 0) throw std::invalid_argument("proportional_weights: empty outcome");
    double total = 0.0;
    for (std::size_t dev : outcome.selected) total += sample_counts[dev];
    std::vector<double> w(take);
    for (std::size_t k = 0; k < take; ++k)
        w[k] = sample_counts[outcome.selected[k]] / total;
    return w;
}

}  // namespace pofl
