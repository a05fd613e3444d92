#include "mf/voxel_field.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mf/parallel.hpp"

namespace mf {

VoxelField::VoxelField(int nx_, int ny_, int nz_, int channels_, Vec3 bmin, Vec3 bmax)
    : nx(nx_), ny(ny_), nz(nz_), channels(channels_), box_min(bmin), box_max(bmax) {
    if (nx < 2 || ny < 2 || nz < 2) throw std::invalid_argument("voxel resolution must be >= 2");
    if (channels < 1) throw std::invalid_argument("need at least one feature channel");
    density_raw.assign(num_voxels(), 0.0);
    features.assign(num_voxels() * channels, 0.0);
    background.assign(channels, 0.0);
}

TriLin trilinear_weights(const VoxelField& field, Vec3 p) {
    TriLin t;
    Vec3 ext = field.box_max - field.box_min;
    double u[3], n[3] = {double(field.nx), double(field.ny), double(field.nz)};
    Vec3 rel = p - field.box_min;
    double relv[3] = {rel.x, rel.y, rel.z};
    double extv[3] = {ext.x, ext.y, ext.z};
    for (int a = 0; a < 3; ++a) {
        if (relv[a] < 0.0 || relv[a] > extv[a]) return t;  // outside
        u[a] = relv[a] / extv[a] * (n[a] - 1.0);
    }
    int i0[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        i0[a] = static_cast<int>(u[a]);
        if (i0[a] > static_cast<int>(n[a]) - 2) i0[a] = static_cast<int>(n[a]) - 2;
        f[a] = u[a] - i0[a];
    }
    int k = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx, ++k) {
                t.idx[k] = field.voxel_index(i0[0] + dx, i0[1] + dy, i0[2] + dz);
                t.w[k] = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
            }
    t.inside = true;
    return t;
}

double VoxelField::sigma_at(Vec3 p) const {
    TriLin t = trilinear_weights(*this, p);
    if (!t.inside) return 0.0;
    double raw = 0.0;
    for (int k = 0; k < 8; ++k) raw += t.w[k] * density_raw[t.idx[k]];
    return softplus(raw);
}

void VoxelField::features_at(Vec3 p, double* out) const {
    TriLin t = trilinear_weights(*this, p);
    for (int c = 0; c < channels; ++c) out[c] = 0.0;
    if (!t.inside) return;
    for (int k = 0; k < 8; ++k) {
        const double* base = &features[t.idx[k] * channels];
        for (int c = 0; c < channels; ++c) out[c] += t.w[k] * base[c];
    }
}

std::vector<double> stratified_samples(int n_bins, double t_near, double t_far, SeededRng& rng) {
    if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
    if (!(t_near < t_far)) throw std::invalid_argument("t_near must be < t_far");
    std::vector<double> t(n_bins);
    double bin = (t_far - t_near) / n_bins;
    for (int i = 0; i < n_bins; ++i) t[i] = t_near + (i + rng.next_double()) * bin;
    return t;
}

std::vector<double> transmittance_discrete(std::span<const double> sigmas,
                                           std::span<const double> deltas) {
    if (sigmas.size() != deltas.size()) throw std::invalid_argument("sigma/delta size mismatch");
    std::vector<double> trans(sigmas.size());
    double acc = 0.0;
    for (size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] >= 0.0)) throw std::invalid_argument("negative density");
        if (!(deltas[i] > 0.0)) throw std::invalid_argument("non-positive segment length");
        trans[i] = std::exp(-acc);
        acc += sigmas[i] * deltas[i];
    }
    return trans;
}

std::vector<double> quadrature_alphas(std::span<const double> sigmas,
                                      std::span<const double> deltas) {
    if (sigmas.size() != deltas.size()) throw std::invalid_argument("sigma/delta size mismatch");
    std::vector<double> alphas(sigmas.size());
    for (size_t i = 0; i < sigmas.size(); ++i) {
        if (!(sigmas[i] >= 0.0)) throw std::invalid_argument("negative density");
        if (!(deltas[i] > 0.0)) throw std::invalid_argument("non-positive segment length");
        alphas[i] = -std::expm1(-sigmas[i] * deltas[i]);
    }
    return alphas;
}

NerfRayCache sample_ray(const VoxelField& field, const Ray& ray, const NerfRenderOptions& opt,
                        SeededRng& rng) {
    NerfRayCache cache;
    cache.ray = ray;
    cache.t_far = opt.t_far;
    std::vector<double> ts = stratified_samples(opt.n_bins, opt.t_near, opt.t_far, rng);
    cache.samples.resize(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) {
        NerfRaySample& s = cache.samples[i];
        s.t = ts[i];
        s.delta = (i + 1 < ts.size()) ? ts[i + 1] - ts[i] : opt.t_far - ts[i];
        if (s.delta <= 0.0) s.delta = 1e-12;
        s.pos = ray.origin + s.t * ray.direction;
        TriLin tl = trilinear_weights(field, s.pos);
        s.inside = tl.inside;
        s.rho.assign(field.channels, 0.0);
        if (tl.inside) {
            double raw = 0.0;
            for (int k = 0; k < 8; ++k) raw += tl.w[k] * field.density_raw[tl.idx[k]];
            s.raw = raw;
            s.sigma = softplus(raw);
            for (int k = 0; k < 8; ++k) {
                const double* base = &field.features[tl.idx[k] * field.channels];
                for (int c = 0; c < field.channels; ++c) s.rho[c] += tl.w[k] * base[c];
            }
        }
        s.alpha = -std::expm1(-s.sigma * s.delta);
    }
    return cache;
}

TerminationDistribution distribution_from_cache(const VoxelField& field,
                                                const NerfRayCache& cache) {
    TerminationDistribution dist;
    size_t n = cache.samples.size();
    dist.weights.reserve(n);
    dist.features.reserve(n);
    double transmittance = 1.0;
    for (const NerfRaySample& s : cache.samples) {
        dist.weights.push_back(transmittance * s.alpha);
        transmittance *= 1.0 - s.alpha;
        FeatureVec f = s.rho;
        f.push_back(s.t);  // depth channel
        dist.features.push_back(std::move(f));
    }
    dist.residual = transmittance;
    dist.background = field.background;
    dist.background.push_back(cache.t_far);
    return dist;
}

NerfPixelRender render_pixel_nerf(const VoxelField& field, const Ray& ray,
                                  const NerfRenderOptions& opt, SeededRng& rng) {
    NerfPixelRender out;
    out.cache = sample_ray(field, ray, opt, rng);
    TerminationDistribution dist = distribution_from_cache(field, out.cache);
    out.moments = moments(dist, opt.j_max, opt.include_background);
    return out;
}

void nerf_backward(const VoxelField& field, std::span<const NerfPixelGrad> pixels,
                   bool include_background, NerfGrads& grads) {
    grads.density_raw.assign(field.num_voxels(), 0.0);
    grads.features.assign(field.num_voxels() * field.channels, 0.0);
    int nch = field.channels + 1;  // trailing depth channel

    for (const NerfPixelGrad& px : pixels) {
        if (px.cache == nullptr) throw std::runtime_error("nerf_backward: missing ray cache");
        const auto& samples = px.cache->samples;
        auto g1 = [&](int c) { return c < (int)px.d_m1.size() ? px.d_m1[c] : 0.0; };
        auto g2 = [&](int c) { return c < (int)px.d_m2.size() ? px.d_m2[c] : 0.0; };

        // phi_i = sum_c g1_c rho_ic + g2_c rho_ic^2, with depth rho = t_i
        size_t n = samples.size();
        std::vector<double> phi(n, 0.0), w(n, 0.0), trans(n, 0.0);
        double t_run = 1.0;
        for (size_t i = 0; i < n; ++i) {
            const NerfRaySample& s = samples[i];
            double p = 0.0;
            for (int c = 0; c < field.channels; ++c)
                p += g1(c) * s.rho[c] + g2(c) * s.rho[c] * s.rho[c];
            p += g1(nch - 1) * s.t + g2(nch - 1) * s.t * s.t;
            phi[i] = p;
            trans[i] = t_run;
            w[i] = t_run * s.alpha;
            t_run *= 1.0 - s.alpha;
        }
        double phi_bg = 0.0;
        if (include_background) {
            for (int c = 0; c < field.channels; ++c) {
                double b = field.background[c];
                phi_bg += g1(c) * b + g2(c) * b * b;
            }
            double tf = px.cache->t_far;
            phi_bg += g1(nch - 1) * tf + g2(nch - 1) * tf * tf;
        }

        // suffix S_j = sum_{i>j} w_i phi_i + residual * phi_bg
        double suffix = include_background ? t_run * phi_bg : 0.0;
        for (size_t ii = n; ii-- > 0;) {
            const NerfRaySample& s = samples[ii];
            double om = 1.0 - s.alpha;
            double g_alpha = trans[ii] * phi[ii] - (om > 1e-12 ? suffix / om : 0.0);
            suffix += w[ii] * phi[ii];

            if (!s.inside) continue;
            TriLin tl = trilinear_weights(field, s.pos);
            // density path: alpha = 1 - exp(-softplus(raw) * delta)
            double g_sigma = g_alpha * s.delta * (1.0 - s.alpha);
            double g_raw = g_sigma * sigmoid(s.raw);
            for (int k = 0; k < 8; ++k) grads.density_raw[tl.idx[k]] += tl.w[k] * g_raw;
            // feature path: d/d rho_ic = w_i (g1_c + 2 rho_ic g2_c)
            for (int c = 0; c < field.channels; ++c) {
                double g_rho = w[ii] * (g1(c) + 2.0 * s.rho[c] * g2(c));
                if (g_rho == 0.0) continue;
                for (int k = 0; k < 8; ++k)
                    grads.features[tl.idx[k] * field.channels + c] += tl.w[k] * g_rho;
            }
        }
    }
}

MomentImage render_image_nerf(const VoxelField& field, const Camera& cam, int n_bins, int j_max,
                              uint64_t seed, bool mean_only) {
    int nch = field.channels + 1;
    MomentImage img(cam.width, cam.height, nch);
    NerfRenderOptions opt;
    opt.n_bins = n_bins;
    opt.t_near = cam.z_near;
    opt.t_far = cam.z_far;
    opt.j_max = j_max;
    parallel_for(static_cast<size_t>(cam.height), [&](size_t yy) {
        int y = static_cast<int>(yy);
        for (int x = 0; x < cam.width; ++x) {
            uint64_t pix = static_cast<uint64_t>(y) * cam.width + x;
            SeededRng rng(seed, SeededRng::pixel_stream(pix, 0));
            Ray ray = ray_through_pixel(cam, x, y);
            NerfRayCache cache = sample_ray(field, ray, opt, rng);
            TerminationDistribution dist = distribution_from_cache(field, cache);
            if (mean_only) {
                FeatureVec m1 = raw_moment(dist, 1, opt.include_background);
                for (int c = 0; c < nch; ++c) img.m1.at(x, y, c) = m1[c];
            } else {
                MomentSet set = moments(dist, j_max, opt.include_background);
                for (int c = 0; c < nch; ++c) {
                    img.m1.at(x, y, c) = set.raw[0][c];
                    img.m2.at(x, y, c) = set.raw[1][c];
                    img.variance.at(x, y, c) = set.variance[c];
                }
            }
        }
    });
    return img;
}

}  // namespace mf
