#include "mf/termination.hpp"

#include <cmath>
#include <stdexcept>

namespace mf {

void TerminationDistribution::validate() const {
    if (weights.size() != features.size())
        throw std::invalid_argument("weights/features length mismatch");
    double total = residual;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("negative collision weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("collision masses do not sum to 1");
}

TerminationDistribution weights_from_alphas(std::span<const double> alphas) {
    TerminationDistribution dist;
    dist.weights.reserve(alphas.size());
    dist.features.resize(alphas.size());
    double transmittance = 1.0;
    for (double a : alphas) {
        if (!(a >= 0.0 && a <= 1.0))
            throw std::invalid_argument("alpha outside [0, 1]");
        dist.weights.push_back(transmittance * a);
        transmittance *= 1.0 - a;
    }
    dist.residual = transmittance;
    return dist;
}

static int channel_count(const TerminationDistribution& dist, bool include_background) {
    if (!dist.features.empty()) return static_cast<int>(dist.features.front().size());
    if (include_background) return static_cast<int>(dist.background.size());
    return 0;
}

FeatureVec raw_moment(const TerminationDistribution& dist, int j, bool include_background) {
    if (j < 1) throw std::invalid_argument("moment order must be >= 1");
    int k = channel_count(dist, include_background);
    FeatureVec out(k, 0.0);
    for (size_t i = 0; i < dist.weights.size(); ++i) {
        double w = dist.weights[i];
        const FeatureVec& f = dist.features[i];
        for (int c = 0; c < k; ++c) out[c] += w * std::pow(f[c], j);
    }
    if (include_background && !dist.background.empty()) {
        for (int c = 0; c < k; ++c) out[c] += dist.residual * std::pow(dist.background[c], j);
    }
    return out;
}

double clamp_variance(double v) {
    if (v >= 0.0) return v;
    if (v >= -1e-9) return 0.0;
    throw std::runtime_error("variance below -1e-9: numerical error");
}

FeatureVec variance(const TerminationDistribution& dist, bool include_background) {
    FeatureVec m1 = raw_moment(dist, 1, include_background);
    FeatureVec m2 = raw_moment(dist, 2, include_background);
    FeatureVec out(m1.size());
    for (size_t c = 0; c < m1.size(); ++c) out[c] = clamp_variance(m2[c] - m1[c] * m1[c]);
    return out;
}

FeatureVec central_moment(const TerminationDistribution& dist, int k, bool include_background) {
    if (k < 2) throw std::invalid_argument("central moment order must be >= 2");
    FeatureVec m1 = raw_moment(dist, 1, include_background);
    int nch = static_cast<int>(m1.size());
    FeatureVec out(nch, 0.0);
    for (size_t i = 0; i < dist.weights.size(); ++i) {
        double w = dist.weights[i];
        const FeatureVec& f = dist.features[i];
        for (int c = 0; c < nch; ++c) out[c] += w * std::pow(f[c] - m1[c], k);
    }
    if (include_background && !dist.background.empty()) {
        for (int c = 0; c < nch; ++c)
            out[c] += dist.residual * std::pow(dist.background[c] - m1[c], k);
    }
    return out;
}

MomentSet moments(const TerminationDistribution& dist, int j_max, bool include_background) {
    if (j_max < 2) throw std::invalid_argument("j_max must be >= 2");
    MomentSet set;
    set.raw.resize(j_max);
    for (int j = 1; j <= j_max; ++j) set.raw[j - 1] = raw_moment(dist, j, include_background);
    const FeatureVec& m1 = set.raw[0];
    const FeatureVec& m2 = set.raw[1];
    set.variance.resize(m1.size());
    for (size_t c = 0; c < m1.size(); ++c)
        set.variance[c] = clamp_variance(m2[c] - m1[c] * m1[c]);
    return set;
}

int sample_termination(const TerminationDistribution& dist, SeededRng& rng) {
    double u = rng.next_double();
    double acc = 0.0;
    for (size_t i = 0; i < dist.weights.size(); ++i) {
        acc += dist.weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return kBackgroundIndex;
}

}  // namespace mf
