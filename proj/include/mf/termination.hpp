#pragma once

#include <span>
#include <vector>

#include "mf/image.hpp"
#include "mf/rng.hpp"

namespace mf {

// Discrete ray-collision distribution: collision mass per ordered sample plus
// residual transmittance mass that escaped every sample.
struct TerminationDistribution {
    std::vector<double> weights;        // w_i = T_i * alpha_i, all >= 0
    std::vector<FeatureVec> features;   // rho_i aligned with weights
    double residual = 1.0;              // remaining transmittance in [0, 1]
    FeatureVec background;              // feature assigned to the residual mass

    void validate() const;  // throws std::invalid_argument on broken invariants
};

// Per-channel raw moments m_1..m_J plus variance.
struct MomentSet {
    std::vector<FeatureVec> raw;  // raw[j-1] = m_j per channel
    FeatureVec variance;

    int order() const { return static_cast<int>(raw.size()); }
};

// Front-to-back compositing weights: w_i = alpha_i * prod_{k<i}(1 - alpha_k),
// residual = prod_i (1 - alpha_i). Features are left empty.
TerminationDistribution weights_from_alphas(std::span<const double> alphas);

// sum_i w_i * rho_i^j, plus residual * background^j when include_background.
FeatureVec raw_moment(const TerminationDistribution& dist, int j, bool include_background);

// m_2 - m_1^2 per channel, clamped to 0 when within -1e-9.
FeatureVec variance(const TerminationDistribution& dist, bool include_background);

// sum_i w_i * (rho_i - m_1)^k, plus background term.
FeatureVec central_moment(const TerminationDistribution& dist, int k, bool include_background);

// Raw moments 1..j_max and variance in one pass.
MomentSet moments(const TerminationDistribution& dist, int j_max, bool include_background);

// Index drawn with probability w_i, kBackgroundIndex with probability residual.
inline constexpr int kBackgroundIndex = -1;
int sample_termination(const TerminationDistribution& dist, SeededRng& rng);

// Clamps tiny negative variances; throws on values below -1e-9.
double clamp_variance(double v);

}  // namespace mf
