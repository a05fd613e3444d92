#pragma once

#include <cstddef>
#include <vector>

namespace mf {

// Length-K per-pixel feature (K=3 color, K=1 depth, K=8 default semantics).
using FeatureVec = std::vector<double>;

struct FeatureImage {
    int width = 0, height = 0, channels = 0;
    std::vector<double> data;  // (y * width + x) * channels + c

    FeatureImage() = default;
    FeatureImage(int w, int h, int c)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, 0.0) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    FeatureVec pixel(int x, int y) const {
        FeatureVec v(channels);
        for (int c = 0; c < channels; ++c) v[c] = at(x, y, c);
        return v;
    }
    void set_pixel(int x, int y, const FeatureVec& v) {
        for (int c = 0; c < channels; ++c) at(x, y, c) = v[c];
    }
};

// Per-pixel first raw moment, second raw moment, and variance per channel.
struct MomentImage {
    int width = 0, height = 0, channels = 0;
    FeatureImage m1, m2, variance;

    MomentImage() = default;
    MomentImage(int w, int h, int c)
        : width(w), height(h), channels(c), m1(w, h, c), m2(w, h, c), variance(w, h, c) {}
};

}  // namespace mf
