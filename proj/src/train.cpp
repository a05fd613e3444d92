#include "mf/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mf/metrics.hpp"
#include "mf/parallel.hpp"

namespace mf {

void TrainConfig::validate() const {
    if (iterations < 0) throw std::invalid_argument("negative iteration count");
    if (rays_per_iter < 1) throw std::invalid_argument("rays_per_iter must be positive");
    if (lr <= 0) throw std::invalid_argument("learning rate must be positive");
    if (grid_dim < 1) throw std::invalid_argument("grid_dim must be positive");
    if (rays_per_iter < grid_dim * grid_dim * cell_floor)
        throw std::invalid_argument("ray budget below per-cell floor");
}

// ---- NerfModel ----

MomentImage NerfModel::render(const Camera& cam, int j_max, bool mean_only) const {
    return render_image_nerf(field_, cam, n_bins_, j_max, /*seed=*/0, mean_only);
}

size_t NerfModel::param_count() const {
    return field_.num_voxels() * (1 + static_cast<size_t>(field_.channels));
}

void NerfModel::get_params(std::vector<double>& out) const {
    out.resize(param_count());
    std::memcpy(out.data(), field_.density_raw.data(),
                field_.density_raw.size() * sizeof(double));
    std::memcpy(out.data() + field_.density_raw.size(), field_.features.data(),
                field_.features.size() * sizeof(double));
}

void NerfModel::set_params(std::span<const double> p) {
    if (p.size() != param_count()) throw std::invalid_argument("parameter size mismatch");
    std::memcpy(field_.density_raw.data(), p.data(),
                field_.density_raw.size() * sizeof(double));
    std::memcpy(field_.features.data(), p.data() + field_.density_raw.size(),
                field_.features.size() * sizeof(double));
}

void NerfModel::param_lr_scale(std::vector<double>& out) const {
    out.assign(param_count(), 1.0);
    // density responds more slowly through softplus
    for (size_t i = 0; i < field_.density_raw.size(); ++i) out[i] = 2.0;
}

double NerfModel::loss_and_grad(const Camera& cam, const FeatureImage& gt_color,
                                std::span<const PixelCoord> pixels, uint64_t seed,
                                uint64_t iteration, std::vector<double>& grad) {
    if (pixels.empty()) throw std::invalid_argument("empty ray batch");
    int color_ch = std::min(3, field_.channels);
    NerfRenderOptions opt;
    opt.n_bins = n_bins_;
    opt.t_near = cam.z_near;
    opt.t_far = cam.z_far;

    double denom = static_cast<double>(pixels.size()) * color_ch;
    double loss = 0.0;
    std::vector<NerfRayCache> caches(pixels.size());
    std::vector<NerfPixelGrad> pgrads(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) {
        const PixelCoord& pc = pixels[i];
        uint64_t pix = static_cast<uint64_t>(pc.y) * cam.width + pc.x;
        SeededRng rng(seed, SeededRng::pixel_stream(pix, iteration + 1));
        Ray ray = ray_through_pixel(cam, pc.x, pc.y);
        caches[i] = sample_ray(field_, ray, opt, rng);
        TerminationDistribution dist = distribution_from_cache(field_, caches[i]);
        FeatureVec m1 = raw_moment(dist, 1, true);
        NerfPixelGrad& pg = pgrads[i];
        pg.cache = &caches[i];
        pg.d_m1.assign(field_.channels + 1, 0.0);
        for (int c = 0; c < color_ch; ++c) {
            double diff = m1[c] - gt_color.at(pc.x, pc.y, c);
            loss += diff * diff;
            pg.d_m1[c] = 2.0 * diff / denom;
        }
    }
    loss /= denom;

    NerfGrads ng;
    nerf_backward(field_, pgrads, true, ng);
    if (grad.size() != param_count()) grad.assign(param_count(), 0.0);
    for (size_t i = 0; i < ng.density_raw.size(); ++i) grad[i] += ng.density_raw[i];
    size_t off = ng.density_raw.size();
    for (size_t i = 0; i < ng.features.size(); ++i) grad[off + i] += ng.features[i];
    return loss;
}

// ---- SplatModel ----

MomentImage SplatModel::render(const Camera& cam, int j_max, bool mean_only) const {
    return render_image_splat(scene_, cam, j_max, mean_only);
}

size_t SplatModel::param_count() const {
    return scene_.gaussians.size() * (11 + static_cast<size_t>(scene_.channels()));
}

void SplatModel::get_params(std::vector<double>& out) const {
    out.resize(param_count());
    size_t k = 0;
    for (const Gaussian3D& g : scene_.gaussians) {
        out[k++] = g.mean.x;
        out[k++] = g.mean.y;
        out[k++] = g.mean.z;
        out[k++] = g.scale.x;
        out[k++] = g.scale.y;
        out[k++] = g.scale.z;
        for (int j = 0; j < 4; ++j) out[k++] = g.rotation[j];
        out[k++] = g.opacity_raw;
        for (double f : g.feature) out[k++] = f;
    }
}

void SplatModel::set_params(std::span<const double> p) {
    if (p.size() != param_count()) throw std::invalid_argument("parameter size mismatch");
    size_t k = 0;
    for (Gaussian3D& g : scene_.gaussians) {
        g.mean = {p[k], p[k + 1], p[k + 2]};
        g.scale = {p[k + 3], p[k + 4], p[k + 5]};
        k += 6;
        for (int j = 0; j < 4; ++j) g.rotation[j] = p[k++];
        g.opacity_raw = p[k++];
        for (double& f : g.feature) f = p[k++];
    }
}

void SplatModel::param_lr_scale(std::vector<double>& out) const {
    out.resize(param_count());
    size_t k = 0;
    int ch = scene_.channels();
    for (size_t i = 0; i < scene_.gaussians.size(); ++i) {
        for (int j = 0; j < 3; ++j) out[k++] = 0.5;   // mean
        for (int j = 0; j < 3; ++j) out[k++] = 0.25;  // scale
        for (int j = 0; j < 4; ++j) out[k++] = 0.25;  // rotation
        out[k++] = 1.0;                               // opacity
        for (int j = 0; j < ch; ++j) out[k++] = 1.0;  // feature
    }
}

void SplatModel::clamp_params(std::span<double> p) const {
    size_t stride = 11 + static_cast<size_t>(scene_.channels());
    for (size_t i = 0; i + stride <= p.size(); i += stride) {
        for (int j = 3; j < 6; ++j) p[i + j] = std::clamp(p[i + j], 0.01, 1.5);
        // keep the quaternion away from zero norm
        double n = 0.0;
        for (int j = 6; j < 10; ++j) n += p[i + j] * p[i + j];
        n = std::sqrt(n);
        if (n < 1e-6) {
            p[i + 6] = 1.0;
            p[i + 7] = p[i + 8] = p[i + 9] = 0.0;
        } else {
            for (int j = 6; j < 10; ++j) p[i + j] /= n;
        }
        p[i + 10] = std::clamp(p[i + 10], -9.0, 9.0);
    }
}

double SplatModel::loss_and_grad(const Camera& cam, const FeatureImage& gt_color,
                                 std::span<const PixelCoord> pixels, uint64_t /*seed*/,
                                 uint64_t /*iteration*/, std::vector<double>& grad) {
    if (pixels.empty()) throw std::invalid_argument("empty ray batch");
    int ch = scene_.channels();
    int color_ch = std::min(3, ch);
    double denom = static_cast<double>(pixels.size()) * color_ch;

    SplatView view = project_scene(scene_, cam);
    double loss = 0.0;
    std::vector<SplatPixelGrad> pgrads(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) {
        const PixelCoord& pc = pixels[i];
        TerminationDistribution dist = composite_pixel(scene_, view, cam, pc.x, pc.y);
        FeatureVec m1 = raw_moment(dist, 1, true);
        SplatPixelGrad& pg = pgrads[i];
        pg.px = pc.x;
        pg.py = pc.y;
        pg.d_m1.assign(ch + 1, 0.0);
        for (int c = 0; c < color_ch; ++c) {
            double diff = m1[c] - gt_color.at(pc.x, pc.y, c);
            loss += diff * diff;
            pg.d_m1[c] = 2.0 * diff / denom;
        }
    }
    loss /= denom;

    SplatGrads sg;
    splat_backward(scene_, cam, pgrads, sg);
    if (grad.size() != param_count()) grad.assign(param_count(), 0.0);
    size_t k = 0;
    for (size_t i = 0; i < scene_.gaussians.size(); ++i) {
        for (int j = 0; j < 3; ++j) grad[k++] += sg.d_mean[i][j];
        for (int j = 0; j < 3; ++j) grad[k++] += sg.d_scale[i][j];
        for (int j = 0; j < 4; ++j) grad[k++] += sg.d_rotation[i][j];
        grad[k++] += sg.d_opacity_raw[i];
        for (int j = 0; j < static_cast<int>(sg.d_feature[i].size()); ++j)
            grad[k++] += sg.d_feature[i][j];
    }
    return loss;
}

// ---- optimizer ----

void Adam::step(std::span<double> params, std::span<const double> grad, double lr,
                std::span<const double> lr_scale) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw std::invalid_argument("optimizer state shape mismatch");
    ++t_;
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double bc1 = 1.0 - std::pow(beta1, t_);
    double bc2 = 1.0 - std::pow(beta2, t_);
    for (size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1 * m_[i] + (1.0 - beta1) * grad[i];
        v_[i] = beta2 * v_[i] + (1.0 - beta2) * grad[i] * grad[i];
        double mh = m_[i] / bc1;
        double vh = v_[i] / bc2;
        double scale = lr_scale.empty() ? 1.0 : lr_scale[i];
        params[i] -= lr * scale * mh / (std::sqrt(vh) + eps);
    }
}

// ---- ray sampling ----

std::vector<int> allocate_rays_by_score(std::span<const double> scores, int budget, int floor) {
    int n = static_cast<int>(scores.size());
    if (n == 0) throw std::invalid_argument("no cells");
    if (budget < n * floor) throw std::invalid_argument("budget below per-cell floor");
    double total = 0.0;
    for (double s : scores) {
        if (!(s >= 0.0)) throw std::invalid_argument("negative cell score");
        total += s;
    }
    std::vector<int> counts(n, floor);
    int surplus = budget - n * floor;
    if (surplus == 0) return counts;

    std::vector<double> quota(n);
    for (int i = 0; i < n; ++i)
        quota[i] = total > 0.0 ? surplus * scores[i] / total
                               : static_cast<double>(surplus) / n;
    std::vector<int> base(n);
    std::vector<std::pair<double, int>> rem(n);
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        base[i] = static_cast<int>(quota[i]);
        assigned += base[i];
        rem[i] = {quota[i] - base[i], i};
    }
    // largest remainder first; ties toward the lower index
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    int leftover = surplus - assigned;
    for (int i = 0; i < n; ++i) counts[i] += base[i];
    for (int i = 0; i < leftover; ++i) counts[rem[i].second] += 1;
    return counts;
}

static double cell_mean(const MomentImage& img, const FeatureImage& per_pixel, int grid_dim,
                        int gx, int gy) {
    int x0 = gx * img.width / grid_dim, x1 = (gx + 1) * img.width / grid_dim;
    int y0 = gy * img.height / grid_dim, y1 = (gy + 1) * img.height / grid_dim;
    double acc = 0.0;
    int count = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            acc += per_pixel.at(x, y, 0);
            ++count;
        }
    return count > 0 ? acc / count : 0.0;
}

std::vector<double> variance_scores(const TrainableModel& model, const Camera& cam,
                                    int grid_dim, bool color_only) {
    MomentImage img = model.render(cam, 2);
    int nch = color_only ? std::min(3, model.feature_channels()) : model.feature_channels();
    FeatureImage summed(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double v = 0.0;
            for (int c = 0; c < nch; ++c) v += img.variance.at(x, y, c);
            summed.at(x, y, 0) = v;
        }
    std::vector<double> scores(static_cast<size_t>(grid_dim) * grid_dim);
    for (int gy = 0; gy < grid_dim; ++gy)
        for (int gx = 0; gx < grid_dim; ++gx)
            scores[static_cast<size_t>(gy) * grid_dim + gx] =
                cell_mean(img, summed, grid_dim, gx, gy);
    return scores;
}

std::vector<double> error_scores(const TrainableModel& model, const Camera& cam,
                                 const FeatureImage& gt_color, int grid_dim) {
    MomentImage img = model.render(cam, 2, /*mean_only=*/true);
    int nch = std::min(3, model.feature_channels());
    FeatureImage sq(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double e = 0.0;
            for (int c = 0; c < nch; ++c) {
                double d = img.m1.at(x, y, c) - gt_color.at(x, y, c);
                e += d * d;
            }
            sq.at(x, y, 0) = e;
        }
    std::vector<double> scores(static_cast<size_t>(grid_dim) * grid_dim);
    for (int gy = 0; gy < grid_dim; ++gy)
        for (int gx = 0; gx < grid_dim; ++gx)
            scores[static_cast<size_t>(gy) * grid_dim + gx] =
                cell_mean(img, sq, grid_dim, gx, gy);
    return scores;
}

std::vector<PixelCoord> sample_cell_pixels(std::span<const int> counts, int grid_dim, int width,
                                           int height, SeededRng& rng) {
    std::vector<PixelCoord> pixels;
    for (int gy = 0; gy < grid_dim; ++gy)
        for (int gx = 0; gx < grid_dim; ++gx) {
            int x0 = gx * width / grid_dim, x1 = (gx + 1) * width / grid_dim;
            int y0 = gy * height / grid_dim, y1 = (gy + 1) * height / grid_dim;
            int c = counts[static_cast<size_t>(gy) * grid_dim + gx];
            for (int i = 0; i < c; ++i) {
                int x = x0 + static_cast<int>(rng.next_u32() % std::max(1, x1 - x0));
                int y = y0 + static_cast<int>(rng.next_u32() % std::max(1, y1 - y0));
                pixels.push_back({x, y});
            }
        }
    return pixels;
}

// ---- training loop ----

static double eval_psnr(const TrainableModel& model, const Camera& cam,
                        const FeatureImage& gt, double* ssim_out) {
    MomentImage img = model.render(cam, 2, /*mean_only=*/true);
    int nch = std::min(3, model.feature_channels());
    FeatureImage color(img.width, img.height, nch);
    FeatureImage gtc(img.width, img.height, nch);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < nch; ++c) {
                color.at(x, y, c) = img.m1.at(x, y, c);
                gtc.at(x, y, c) = gt.at(x, y, c);
            }
    if (ssim_out) *ssim_out = ssim(color, gtc);
    return psnr(color, gtc);
}

std::vector<TrainLogEntry> train(TrainableModel& model, const TrainViews& views,
                                 const Camera& eval_cam, const FeatureImage& eval_gt,
                                 const TrainConfig& config) {
    config.validate();
    if (views.cameras.empty() || views.cameras.size() != views.gt_color.size())
        throw std::invalid_argument("training views misconfigured");

    std::vector<TrainLogEntry> log;
    if (config.iterations == 0) return log;

    auto t_start = std::chrono::steady_clock::now();
    auto elapsed_ms = [&]() {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         t_start)
            .count();
    };

    std::vector<double> params, grad, lr_scale;
    model.get_params(params);
    model.param_lr_scale(lr_scale);
    Adam adam(params.size());

    size_t n_views = views.cameras.size();

    // warmup batch: a few uniform rays from every image
    if (config.initial_rays_per_image > 0) {
        grad.assign(params.size(), 0.0);
        double loss = 0.0;
        for (size_t v = 0; v < n_views; ++v) {
            const Camera& cam = views.cameras[v];
            SeededRng rng(config.seed, splitmix64(0xA11CE ^ v));
            std::vector<PixelCoord> pixels(config.initial_rays_per_image);
            for (auto& p : pixels)
                p = {static_cast<int>(rng.next_u32() % cam.width),
                     static_cast<int>(rng.next_u32() % cam.height)};
            loss += model.loss_and_grad(cam, views.gt_color[v], pixels, config.seed,
                                        0x7FFF0000ull + v, grad);
        }
        if (!std::isfinite(loss)) throw std::runtime_error("training diverged in warmup");
        adam.step(params, grad, config.lr, lr_scale);
        model.clamp_params(params);
        model.set_params(params);
    }

    for (int iter = 0; iter < config.iterations; ++iter) {
        size_t v = static_cast<size_t>(iter) % n_views;
        const Camera& cam = views.cameras[v];
        SeededRng rng(config.seed, splitmix64(0x5A3E ^ static_cast<uint64_t>(iter)));

        std::vector<PixelCoord> pixels;
        switch (config.sampler) {
            case SamplerKind::kUniform:
                pixels.resize(config.rays_per_iter);
                for (auto& p : pixels)
                    p = {static_cast<int>(rng.next_u32() % cam.width),
                         static_cast<int>(rng.next_u32() % cam.height)};
                break;
            case SamplerKind::kVariance: {
                auto scores =
                    variance_scores(model, cam, config.grid_dim, config.score_color_only);
                auto counts =
                    allocate_rays_by_score(scores, config.rays_per_iter, config.cell_floor);
                pixels = sample_cell_pixels(counts, config.grid_dim, cam.width, cam.height, rng);
                break;
            }
            case SamplerKind::kErrorOracle: {
                auto scores = error_scores(model, cam, views.gt_color[v], config.grid_dim);
                auto counts =
                    allocate_rays_by_score(scores, config.rays_per_iter, config.cell_floor);
                pixels = sample_cell_pixels(counts, config.grid_dim, cam.width, cam.height, rng);
                break;
            }
        }

        grad.assign(params.size(), 0.0);
        double loss = model.loss_and_grad(cam, views.gt_color[v], pixels, config.seed,
                                          static_cast<uint64_t>(iter), grad);
        if (!std::isfinite(loss))
            throw std::runtime_error("training diverged at iteration " + std::to_string(iter));
        adam.step(params, grad, config.lr, lr_scale);
        model.clamp_params(params);
        model.set_params(params);

        bool last = iter + 1 == config.iterations;
        if (last || (config.eval_every > 0 && (iter + 1) % config.eval_every == 0)) {
            TrainLogEntry e;
            e.iteration = iter + 1;
            e.loss = loss;
            e.psnr = eval_psnr(model, eval_cam, eval_gt, &e.ssim_value);
            e.wall_ms = elapsed_ms();
            log.push_back(e);
        }
    }
    return log;
}

// ---- initializers ----

SplatScene init_splat_scene(int n_gaussians, int channels, FeatureVec background,
                            uint64_t seed, double half_extent) {
    if (n_gaussians < 1) throw std::invalid_argument("need at least one gaussian");
    SplatScene scene;
    scene.background = std::move(background);
    SeededRng rng(seed, 0x909);
    scene.gaussians.reserve(n_gaussians);
    double base_scale = 2.4 * half_extent / std::cbrt(static_cast<double>(n_gaussians));
    for (int i = 0; i < n_gaussians; ++i) {
        Gaussian3D g;
        g.mean = {rng.uniform(-half_extent, half_extent), rng.uniform(-half_extent, half_extent),
                  rng.uniform(-half_extent, half_extent)};
        double s = base_scale * rng.uniform(0.5, 1.0);
        g.scale = {s, s, s};
        Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.rotation = normalized(q);
        g.opacity_raw = std::log(0.6 / 0.4);  // 60% default opacity
        g.feature.assign(channels, 0.0);
        for (int c = 0; c < std::min(3, channels); ++c) g.feature[c] = rng.uniform(0.0, 1.0);
        scene.gaussians.push_back(std::move(g));
    }
    return scene;
}

VoxelField init_voxel_field(int resolution, int channels, FeatureVec background) {
    VoxelField field(resolution, resolution, resolution, channels, {-1.4, -1.4, -1.4},
                     {1.4, 1.4, 1.4});
    field.background = std::move(background);
    std::fill(field.density_raw.begin(), field.density_raw.end(), -2.0);
    for (size_t v = 0; v < field.num_voxels(); ++v)
        for (int c = 0; c < std::min(3, channels); ++c)
            field.features[v * channels + c] = 0.5;
    return field;
}

}  // namespace mf
