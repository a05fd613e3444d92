#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "mf/image.hpp"

namespace mf {

// Raised when a correlation coefficient is undefined (constant input).
struct UndefinedCorrelationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorrelationReport {
    double pearson = 0.0;
    double spearman = 0.0;
    double kendall = 0.0;
    size_t samples = 0;
};

// Per-pixel Euclidean norm of the channel difference.
FeatureImage error_map(const FeatureImage& rendered, const FeatureImage& gt);

double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

// Kendall tau-b with tie correction; O(n log n) merge-sort counting.
double kendall_tau(std::span<const double> x, std::span<const double> y);

// Average ranks with ties averaged.
std::vector<double> average_ranks(std::span<const double> x);

double psnr(const FeatureImage& a, const FeatureImage& b, double peak = 1.0);

// Windowed SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01 K2=0.03, range 1.
// Channels evaluated separately and averaged; valid (fully covered) windows only.
double ssim(const FeatureImage& a, const FeatureImage& b);

// All three coefficients over masked pixels of a scalar variance and error
// image. mask may be empty (all pixels).
CorrelationReport correlate_variance_error(const FeatureImage& variance_img,
                                           const FeatureImage& error_img,
                                           std::span<const uint8_t> mask = {});

// Index of the maximal score; ties resolved toward the lowest index.
int argmax_score(std::span<const double> scores);

}  // namespace mf
