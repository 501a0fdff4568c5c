#pragma once
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pofl {

class Rng;

enum class PolicyKind {
    proposed,             // channel and gradient-importance aware closed form
    importance_aware,     // p_i proportional to (m_i/M) ||g_i||
    channel_aware,        // p_i proportional to |h_i|^2
    deterministic_random, // uniform selection, no reweighting
    noise_free,           // closed form with the noise term forced to zero
};

struct Policy {
    PolicyKind kind = PolicyKind::proposed;
    double alpha = 0.1;  // distortion-vs-variance weight, > 0
};

PolicyKind parse_policy_kind(const std::string& name);
std::string policy_name(PolicyKind kind);

// Everything the server knows when it computes scheduling probabilities.
struct ScheduleInputs {
    std::vector<double> sample_counts;  // m_i
    double total_samples = 0.0;         // M
    std::vector<double> h_mag;          // |h_i| this round
    std::vector<double> grad_norms;     // ||g_i||
    double v_tilde = 0.0;               // sum_i (m_i/M) V_i
    std::size_t dim = 0;                // D
    double noise_power = 0.0;           // sigma_z^2
    double tx_power = 1.0;              // P

    std::size_t n_devices() const { return sample_counts.size(); }
    void validate() const;
};

// Ordered selection with the renormalized probability recorded at each pick.
struct ScheduleOutcome {
    std::vector<std::size_t> selected;    // pick order
    std::vector<double> q_at_selection;   // q used for each pick, in (0,1]
    std::vector<double> base_probs;       // the p the sampling started from
};

// Scores below this get a floor before normalization so sampling stays
// well defined when a device uploads an exactly zero gradient.
constexpr double kProbabilityFloor = 1e-12;

// Per-device scheduling score balancing the noise-distortion term against
// gradient importance; the proposed probabilities are these normalized.
std::vector<double> device_scores(const ScheduleInputs& in, double alpha);

// Single-device scheduling distribution for any policy; sums to one.
std::vector<double> scheduling_probabilities(const Policy& policy,
                                             const ScheduleInputs& in);

// Draw `take` distinct devices; pick k uses the remaining devices'
// probabilities renormalized by the unselected mass.
ScheduleOutcome sample_without_replacement(std::span<const double> probs,
                                           std::size_t take, Rng& rng);

// Unbiased aggregation weight for the k-th pick (1-based):
// (m_k / M) * (1/(S q_k) + (S - k)/S). Reduces to m/(M p) for S = 1.
std::vector<double> aggregation_weights(const ScheduleOutcome& outcome,
                                        std::span<const double> sample_counts,
                                        double total_samples);

// Plain m_i / sum_{j in S} m_j weights of the deterministic baseline.
std::vector<double> proportional_weights(const ScheduleOutcome& outcome,
                                         std::span<const double> sample_counts);

}  // namespace pofl
