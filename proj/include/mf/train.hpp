#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mf/camera.hpp"
#include "mf/image.hpp"
#include "mf/scenegen.hpp"
#include "mf/splat.hpp"
#include "mf/voxel_field.hpp"

namespace mf {

enum class SamplerKind { kUniform, kVariance, kErrorOracle };

struct PixelCoord {
    int x = 0, y = 0;
};

struct TrainConfig {
    int iterations = 1000;
    int rays_per_iter = 1024;
    int initial_rays_per_image = 200;  // warmup batch before iteration 0
    double lr = 0.01;
    uint64_t seed = 0;
    SamplerKind sampler = SamplerKind::kUniform;
    int grid_dim = 8;    // score grid is grid_dim x grid_dim cells
    int cell_floor = 1;  // minimum rays per cell for active samplers
    int eval_every = 0;  // 0: evaluate only at the end
    bool score_color_only = true;

    void validate() const;
};

struct TrainLogEntry {
    int iteration = 0;
    double loss = 0.0;
    double psnr = 0.0;
    double ssim_value = 0.0;
    double wall_ms = 0.0;
};

// A renderable model with a flat trainable parameter vector.
class TrainableModel {
  public:
    virtual ~TrainableModel() = default;

    virtual int feature_channels() const = 0;
    // Moment image with layout [feature channels..., depth].
    virtual MomentImage render(const Camera& cam, int j_max, bool mean_only = false) const = 0;

    // Mean squared error over the color channels of the given pixels;
    // accumulates parameter gradients into grad (sized param_count()).
    virtual double loss_and_grad(const Camera& cam, const FeatureImage& gt_color,
                                 std::span<const PixelCoord> pixels, uint64_t seed,
                                 uint64_t iteration, std::vector<double>& grad) = 0;

    virtual size_t param_count() const = 0;
    virtual void get_params(std::vector<double>& out) const = 0;
    virtual void set_params(std::span<const double> p) = 0;
    virtual void param_lr_scale(std::vector<double>& out) const = 0;
    virtual void clamp_params(std::span<double>) const {}
};

class NerfModel : public TrainableModel {
  public:
    NerfModel(VoxelField field, int n_bins) : field_(std::move(field)), n_bins_(n_bins) {}

    VoxelField& field() { return field_; }
    const VoxelField& field() const { return field_; }

    int feature_channels() const override { return field_.channels; }
    MomentImage render(const Camera& cam, int j_max, bool mean_only = false) const override;
    double loss_and_grad(const Camera& cam, const FeatureImage& gt_color,
                         std::span<const PixelCoord> pixels, uint64_t seed, uint64_t iteration,
                         std::vector<double>& grad) override;
    size_t param_count() const override;
    void get_params(std::vector<double>& out) const override;
    void set_params(std::span<const double> p) override;
    void param_lr_scale(std::vector<double>& out) const override;

  private:
    VoxelField field_;
    int n_bins_;
};

class SplatModel : public TrainableModel {
  public:
    explicit SplatModel(SplatScene scene) : scene_(std::move(scene)) {}

    SplatScene& scene() { return scene_; }
    const SplatScene& scene() const { return scene_; }

    int feature_channels() const override { return scene_.channels(); }
    MomentImage render(const Camera& cam, int j_max, bool mean_only = false) const override;
    double loss_and_grad(const Camera& cam, const FeatureImage& gt_color,
                         std::span<const PixelCoord> pixels, uint64_t seed, uint64_t iteration,
                         std::vector<double>& grad) override;
    size_t param_count() const override;
    void get_params(std::vector<double>& out) const override;
    void set_params(std::span<const double> p) override;
    void param_lr_scale(std::vector<double>& out) const override;
    void clamp_params(std::span<double> p) const override;

  private:
    SplatScene scene_;
};

// Adaptive-moment gradient descent state (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
  public:
    explicit Adam(size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad, double lr,
              std::span<const double> lr_scale);

  private:
    std::vector<double> m_, v_;
    int t_ = 0;
};

// floor per cell plus largest-remainder apportionment of the surplus
// proportional to scores; sums to budget exactly.
std::vector<int> allocate_rays_by_score(std::span<const double> scores, int budget, int floor);

// Per-cell mean of channel-summed color variance over a grid_dim x grid_dim grid.
std::vector<double> variance_scores(const TrainableModel& model, const Camera& cam,
                                    int grid_dim, bool color_only = true);

// Per-cell mean of channel-summed squared color error against ground truth.
std::vector<double> error_scores(const TrainableModel& model, const Camera& cam,
                                 const FeatureImage& gt_color, int grid_dim);

// Pixel positions drawn uniformly within each cell per the allocation.
std::vector<PixelCoord> sample_cell_pixels(std::span<const int> counts, int grid_dim, int width,
                                           int height, SeededRng& rng);

struct TrainViews {
    std::vector<Camera> cameras;
    std::vector<FeatureImage> gt_color;
};

// Trains in place; logs held-out PSNR/SSIM against eval_cam/eval_gt.
std::vector<TrainLogEntry> train(TrainableModel& model, const TrainViews& views,
                                 const Camera& eval_cam, const FeatureImage& eval_gt,
                                 const TrainConfig& config);

// Uniformly placed Gaussians in a cube with randomized colors and 60% opacity.
SplatScene init_splat_scene(int n_gaussians, int channels, FeatureVec background,
                            uint64_t seed, double half_extent = 1.1);

VoxelField init_voxel_field(int resolution, int channels, FeatureVec background);

}  // namespace mf
