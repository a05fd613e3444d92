#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mf/camera.hpp"
#include "mf/image.hpp"
#include "mf/termination.hpp"

namespace mf {

// One 3D Gaussian primitive. Covariance is R(q) diag(s^2) R(q)^T; opacity is
// logistic(opacity_raw); the feature is view-independent.
struct Gaussian3D {
    Vec3 mean;
    Vec3 scale{1, 1, 1};     // positive, meters
    Quat rotation;           // unit quaternion
    double opacity_raw = 0.0;
    FeatureVec feature;

    double opacity() const { return sigmoid(opacity_raw); }
};

Mat3 covariance_from_scale_rotation(Vec3 scale, Quat q);

// Image-plane footprint of a projected Gaussian.
struct Splat2D {
    Vec2 mean;        // pixels
    Sym2 cov;         // pixels^2, includes low-pass dilation
    double depth = 0.0;  // camera-frame z, > 0
    double alpha = 0.0;
    int gaussian_index = -1;
};

struct SplatScene {
    std::vector<Gaussian3D> gaussians;
    FeatureVec background;  // feature channels (depth background is z_far)

    int channels() const {
        return gaussians.empty() ? static_cast<int>(background.size())
                                 : static_cast<int>(gaussians.front().feature.size());
    }
};

// Low-pass dilation added to the 2D covariance diagonal (pixels^2).
inline constexpr double kCovDilation = 0.3;
// Per-splat opacity clamp for gradient stability.
inline constexpr double kAlphaClamp = 0.999;
// Compositing stops once remaining transmittance drops below this.
inline constexpr double kTransmittanceStop = 1e-4;
// Squared Mahalanobis support cutoff (3 sigma).
inline constexpr double kSupportCutoff = 9.0;

// EWA projection: 2D mean by pinhole projection, 2D covariance J W Sigma W^T J^T
// plus dilation. Returns nullopt when the camera-frame depth <= z_near.
std::optional<Splat2D> project_gaussian(const Camera& cam, const Gaussian3D& g, int index);

// Ascending camera-frame depth, stable for equal depths.
void sort_splats(std::vector<Splat2D>& splats);

// Projected and depth-sorted view of a scene, reusable across pixels.
struct SplatView {
    std::vector<Splat2D> splats;
    int skipped_singular = 0;
};
SplatView project_scene(const SplatScene& scene, const Camera& cam);

// Alpha-composites the ordered splats at pixel center (px+0.5, py+0.5).
// Feature layout: [scene channels..., depth]; background depth is z_far.
TerminationDistribution composite_pixel(const SplatScene& scene, const SplatView& view,
                                        const Camera& cam, int px, int py);

MomentImage render_image_splat(const SplatScene& scene, const Camera& cam, int j_max,
                               bool mean_only = false);

// Per-gaussian parameter gradients.
struct SplatGrads {
    std::vector<Vec3> d_mean;
    std::vector<Vec3> d_scale;
    std::vector<Quat> d_rotation;
    std::vector<double> d_opacity_raw;
    std::vector<FeatureVec> d_feature;

    void resize(size_t n, int channels);
};

// Upstream gradient at one pixel: d_loss/d_m1 and d_loss/d_m2 per channel
// ([scene channels..., depth]); empty vectors mean zero.
struct SplatPixelGrad {
    int px = 0, py = 0;
    FeatureVec d_m1;
    FeatureVec d_m2;
};

// Exact reverse-mode gradient of the compositing forward pass; the depth
// ordering is treated as constant.
void splat_backward(const SplatScene& scene, const Camera& cam,
                    std::span<const SplatPixelGrad> pixels, SplatGrads& grads);

}  // namespace mf
