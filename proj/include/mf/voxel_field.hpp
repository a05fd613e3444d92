#pragma once

#include <span>
#include <vector>

#include "mf/camera.hpp"
#include "mf/image.hpp"
#include "mf/rng.hpp"
#include "mf/termination.hpp"

namespace mf {

// Dense voxel grid holding unconstrained density (softplus-mapped to sigma)
// and K feature channels, trilinearly interpolated. Queries outside the
// bounding box see sigma = 0.
struct VoxelField {
    int nx = 0, ny = 0, nz = 0;
    int channels = 0;
    Vec3 box_min{-1, -1, -1}, box_max{1, 1, 1};
    std::vector<double> density_raw;  // x-fastest
    std::vector<double> features;     // x-fastest, channel innermost
    FeatureVec background;            // feature assigned past the far plane

    VoxelField() = default;
    VoxelField(int nx_, int ny_, int nz_, int channels_, Vec3 bmin, Vec3 bmax);

    size_t voxel_index(int x, int y, int z) const {
        return (static_cast<size_t>(z) * ny + y) * nx + x;
    }
    size_t num_voxels() const { return static_cast<size_t>(nx) * ny * nz; }

    double sigma_at(Vec3 p) const;                 // softplus(raw), 0 outside box
    void features_at(Vec3 p, double* out) const;   // channels values, 0 outside
};

// Corner indices and weights of trilinear interpolation at p.
struct TriLin {
    size_t idx[8];
    double w[8];
    bool inside = false;
};
TriLin trilinear_weights(const VoxelField& field, Vec3 p);

// One uniform draw per equal bin over [t_near, t_far], ascending.
std::vector<double> stratified_samples(int n_bins, double t_near, double t_far, SeededRng& rng);

// T_i = exp(-sum_{k<i} sigma_k delta_k); T_1 = 1, non-increasing.
std::vector<double> transmittance_discrete(std::span<const double> sigmas,
                                           std::span<const double> deltas);

// alpha_i = 1 - exp(-sigma_i delta_i).
std::vector<double> quadrature_alphas(std::span<const double> sigmas,
                                      std::span<const double> deltas);

struct NerfRaySample {
    double t = 0.0, delta = 0.0;
    Vec3 pos;
    double raw = 0.0;    // interpolated raw density (pre-softplus)
    double sigma = 0.0;
    double alpha = 0.0;
    bool inside = false;
    FeatureVec rho;      // field channels only (depth is t)
};

struct NerfRayCache {
    Ray ray;
    double t_far = 0.0;
    std::vector<NerfRaySample> samples;
};

struct NerfRenderOptions {
    int n_bins = 64;
    double t_near = 0.0, t_far = 1.0;
    int j_max = 2;
    bool include_background = true;
};

// Field quantities along one stratified ray.
NerfRayCache sample_ray(const VoxelField& field, const Ray& ray, const NerfRenderOptions& opt,
                        SeededRng& rng);

// Termination distribution over the cached samples; per-sample feature layout
// is [field channels..., depth t_i], background [field background..., t_far].
TerminationDistribution distribution_from_cache(const VoxelField& field,
                                                const NerfRayCache& cache);

struct NerfPixelRender {
    MomentSet moments;  // field channels + trailing depth channel
    NerfRayCache cache;
};

NerfPixelRender render_pixel_nerf(const VoxelField& field, const Ray& ray,
                                  const NerfRenderOptions& opt, SeededRng& rng);

// Gradients w.r.t. the raw density and feature grids.
struct NerfGrads {
    std::vector<double> density_raw;
    std::vector<double> features;
};

// Upstream gradients for one ray: d_loss/d_m1 and d_loss/d_m2 per channel
// (field channels + depth). Either may be empty for a zero gradient.
struct NerfPixelGrad {
    const NerfRayCache* cache = nullptr;
    FeatureVec d_m1;
    FeatureVec d_m2;
};

// Exact reverse-mode gradient of the forward moment computation.
void nerf_backward(const VoxelField& field, std::span<const NerfPixelGrad> pixels,
                   bool include_background, NerfGrads& grads);

// Mean and variance image over a full camera view (deterministic per seed).
MomentImage render_image_nerf(const VoxelField& field, const Camera& cam, int n_bins, int j_max,
                              uint64_t seed, bool mean_only = false);

}  // namespace mf
