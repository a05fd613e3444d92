#include "mf/splat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mf/parallel.hpp"

namespace mf {

Mat3 covariance_from_scale_rotation(Vec3 scale, Quat q) {
    if (!(scale.x > 0 && scale.y > 0 && scale.z > 0))
        throw std::invalid_argument("gaussian scale must be positive");
    Mat3 r = rotation_from_quat(normalized(q));
    Mat3 cov = Mat3::zero();
    double s2[3] = {scale.x * scale.x, scale.y * scale.y, scale.z * scale.z};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) cov(i, j) += r(i, k) * s2[k] * r(j, k);
    return cov;
}

std::optional<Splat2D> project_gaussian(const Camera& cam, const Gaussian3D& g, int index) {
    Vec3 t = world_to_camera(cam.pose, g.mean);
    if (t.z <= cam.z_near) return std::nullopt;

    Splat2D s;
    s.gaussian_index = index;
    s.depth = t.z;
    s.mean = {cam.fx * t.x / t.z + cam.cx, cam.fy * t.y / t.z + cam.cy};
    s.alpha = g.opacity();

    Mat3 cov3 = covariance_from_scale_rotation(g.scale, g.rotation);
    const Mat3& w = cam.pose.rotation;
    Mat3 cov_cam = w * cov3 * transpose(w);

    // local affine projection Jacobian at the mean
    double iz = 1.0 / t.z, iz2 = iz * iz;
    double j00 = cam.fx * iz, j02 = -cam.fx * t.x * iz2;
    double j11 = cam.fy * iz, j12 = -cam.fy * t.y * iz2;

    // J * cov_cam * J^T, J = [[j00, 0, j02], [0, j11, j12]]
    double r0[3], r1[3];
    for (int k = 0; k < 3; ++k) {
        r0[k] = j00 * cov_cam(0, k) + j02 * cov_cam(2, k);
        r1[k] = j11 * cov_cam(1, k) + j12 * cov_cam(2, k);
    }
    s.cov.a = r0[0] * j00 + r0[2] * j02 + kCovDilation;
    s.cov.b = r0[1] * j11 + r0[2] * j12;
    s.cov.c = r1[1] * j11 + r1[2] * j12 + kCovDilation;
    return s;
}

void sort_splats(std::vector<Splat2D>& splats) {
    std::stable_sort(splats.begin(), splats.end(),
                     [](const Splat2D& a, const Splat2D& b) { return a.depth < b.depth; });
}

SplatView project_scene(const SplatScene& scene, const Camera& cam) {
    SplatView view;
    view.splats.reserve(scene.gaussians.size());
    for (size_t i = 0; i < scene.gaussians.size(); ++i) {
        auto s = project_gaussian(cam, scene.gaussians[i], static_cast<int>(i));
        if (!s) continue;
        if (s->cov.det() <= 0.0) {
            ++view.skipped_singular;
            continue;
        }
        view.splats.push_back(*s);
    }
    sort_splats(view.splats);
    return view;
}

namespace {

struct Contribution {
    int list_index;   // position in the ordered splat list
    double alpha_eff; // clamped alpha-tilde
    double trans;     // transmittance before this splat
    double weight;
    double gauss;     // exp(-m/2)
    double mahal;
    Vec2 diff;        // p - mean2d
    Sym2 cov_inv;
    bool clamped;
};

// Shared forward walk over ordered splats at one pixel. subset == nullptr
// walks the full ordered list. Returns final transmittance.
double composite_walk(const std::vector<Splat2D>& ordered, const std::vector<int>* subset,
                      Vec2 p, std::vector<Contribution>* out) {
    double trans = 1.0;
    size_t count = subset ? subset->size() : ordered.size();
    for (size_t k = 0; k < count; ++k) {
        int li = subset ? (*subset)[k] : static_cast<int>(k);
        const Splat2D& s = ordered[li];
        double det = s.cov.det();
        if (det <= 0.0) continue;
        Vec2 d = p - s.mean;
        Sym2 inv{s.cov.c / det, -s.cov.b / det, s.cov.a / det};
        double m = inv.a * d.x * d.x + 2.0 * inv.b * d.x * d.y + inv.c * d.y * d.y;
        if (m > kSupportCutoff) continue;
        double gauss = std::exp(-0.5 * m);
        double a_raw = s.alpha * gauss;
        bool clamped = a_raw > kAlphaClamp;
        double a_eff = clamped ? kAlphaClamp : a_raw;
        if (out)
            out->push_back({li, a_eff, trans, trans * a_eff, gauss, m, d, inv, clamped});
        trans *= 1.0 - a_eff;
        if (trans < kTransmittanceStop) break;
    }
    return trans;
}

}  // namespace

TerminationDistribution composite_pixel(const SplatScene& scene, const SplatView& view,
                                        const Camera& cam, int px, int py) {
    Vec2 p{px + 0.5, py + 0.5};
    std::vector<Contribution> contribs;
    double residual = composite_walk(view.splats, nullptr, p, &contribs);

    TerminationDistribution dist;
    dist.weights.reserve(contribs.size());
    dist.features.reserve(contribs.size());
    for (const Contribution& c : contribs) {
        const Splat2D& s = view.splats[c.list_index];
        dist.weights.push_back(c.weight);
        FeatureVec f = scene.gaussians[s.gaussian_index].feature;
        f.push_back(s.depth);
        dist.features.push_back(std::move(f));
    }
    dist.residual = residual;
    dist.background = scene.background;
    dist.background.push_back(cam.z_far);
    return dist;
}

MomentImage render_image_splat(const SplatScene& scene, const Camera& cam, int j_max,
                               bool mean_only) {
    if (scene.gaussians.empty()) throw std::invalid_argument("cannot render an empty scene");
    if (j_max < 2) throw std::invalid_argument("moment order must be at least 2");
    int nch = scene.channels() + 1;
    MomentImage img(cam.width, cam.height, nch);
    SplatView view = project_scene(scene, cam);

    // 16x16 tiles with per-tile splat lists from conservative 3-sigma bounds
    constexpr int kTile = 16;
    int tiles_x = (cam.width + kTile - 1) / kTile;
    int tiles_y = (cam.height + kTile - 1) / kTile;
    std::vector<std::vector<int>> tile_lists(static_cast<size_t>(tiles_x) * tiles_y);
    for (size_t li = 0; li < view.splats.size(); ++li) {
        const Splat2D& s = view.splats[li];
        double tr = s.cov.a + s.cov.c;
        double disc = std::sqrt(std::max(0.0, (s.cov.a - s.cov.c) * (s.cov.a - s.cov.c) +
                                               4.0 * s.cov.b * s.cov.b));
        double radius = 3.0 * std::sqrt(0.5 * (tr + disc));
        int x0 = std::max(0, static_cast<int>((s.mean.x - radius) / kTile));
        int x1 = std::min(tiles_x - 1, static_cast<int>((s.mean.x + radius) / kTile));
        int y0 = std::max(0, static_cast<int>((s.mean.y - radius) / kTile));
        int y1 = std::min(tiles_y - 1, static_cast<int>((s.mean.y + radius) / kTile));
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx)
                tile_lists[static_cast<size_t>(ty) * tiles_x + tx].push_back(
                    static_cast<int>(li));
    }

    parallel_for(tile_lists.size(), [&](size_t tile) {
        int tx = static_cast<int>(tile % tiles_x);
        int ty = static_cast<int>(tile / tiles_x);
        const std::vector<int>& list = tile_lists[tile];
        int x_end = std::min(cam.width, (tx + 1) * kTile);
        int y_end = std::min(cam.height, (ty + 1) * kTile);
        std::vector<Contribution> contribs;
        for (int y = ty * kTile; y < y_end; ++y) {
            for (int x = tx * kTile; x < x_end; ++x) {
                contribs.clear();
                double residual = composite_walk(view.splats, &list, {x + 0.5, y + 0.5},
                                                 &contribs);
                // moments accumulated in place; identical arithmetic to the
                // termination-module path over the same distribution
                int nc = nch;
                for (int c = 0; c < nc; ++c) {
                    double m1 = 0.0, m2 = 0.0;
                    for (const Contribution& cb : contribs) {
                        const Splat2D& s = view.splats[cb.list_index];
                        double f = (c < nc - 1)
                                       ? scene.gaussians[s.gaussian_index].feature[c]
                                       : s.depth;
                        m1 += cb.weight * f;
                        m2 += cb.weight * (f * f);
                    }
                    double bg = (c < nc - 1) ? scene.background[c] : cam.z_far;
                    m1 += residual * bg;
                    if (mean_only) {
                        img.m1.at(x, y, c) = m1;
                        continue;
                    }
                    m2 += residual * (bg * bg);
                    img.m1.at(x, y, c) = m1;
                    img.m2.at(x, y, c) = m2;
                    img.variance.at(x, y, c) = clamp_variance(m2 - m1 * m1);
                }
            }
        }
    });
    return img;
}

void SplatGrads::resize(size_t n, int channels) {
    d_mean.assign(n, Vec3{});
    d_scale.assign(n, Vec3{});
    d_rotation.assign(n, Quat{0, 0, 0, 0});
    d_opacity_raw.assign(n, 0.0);
    d_feature.assign(n, FeatureVec(channels, 0.0));
}

namespace {

// Per-gaussian accumulators at the 2D splat level.
struct Accum2D {
    Vec2 g_mean2d{};
    double g_cov[2][2] = {{0, 0}, {0, 0}};  // full symmetric matrix
    double g_alpha = 0.0;                    // w.r.t. logistic opacity
    double g_depth = 0.0;                    // w.r.t. camera-frame z feature
    FeatureVec g_feature;
    bool touched = false;
};

}  // namespace

void splat_backward(const SplatScene& scene, const Camera& cam,
                    std::span<const SplatPixelGrad> pixels, SplatGrads& grads) {
    int channels = scene.channels();
    int nch = channels + 1;
    size_t n = scene.gaussians.size();
    grads.resize(n, channels);

    SplatView view = project_scene(scene, cam);
    std::vector<Accum2D> acc(n);
    for (auto& a : acc) a.g_feature.assign(channels, 0.0);

    std::vector<Contribution> contribs;
    std::vector<double> phi;
    for (const SplatPixelGrad& px : pixels) {
        auto g1 = [&](int c) { return c < (int)px.d_m1.size() ? px.d_m1[c] : 0.0; };
        auto g2 = [&](int c) { return c < (int)px.d_m2.size() ? px.d_m2[c] : 0.0; };

        contribs.clear();
        Vec2 p{px.px + 0.5, px.py + 0.5};
        double residual = composite_walk(view.splats, nullptr, p, &contribs);

        phi.assign(contribs.size(), 0.0);
        for (size_t i = 0; i < contribs.size(); ++i) {
            const Splat2D& s = view.splats[contribs[i].list_index];
            const FeatureVec& f = scene.gaussians[s.gaussian_index].feature;
            double v = 0.0;
            for (int c = 0; c < channels; ++c) v += g1(c) * f[c] + g2(c) * f[c] * f[c];
            v += g1(nch - 1) * s.depth + g2(nch - 1) * s.depth * s.depth;
            phi[i] = v;
        }
        double phi_bg = 0.0;
        for (int c = 0; c < channels; ++c) {
            double b = scene.background[c];
            phi_bg += g1(c) * b + g2(c) * b * b;
        }
        phi_bg += g1(nch - 1) * cam.z_far + g2(nch - 1) * cam.z_far * cam.z_far;

        double suffix = residual * phi_bg;
        for (size_t ii = contribs.size(); ii-- > 0;) {
            const Contribution& cb = contribs[ii];
            const Splat2D& s = view.splats[cb.list_index];
            int gi = s.gaussian_index;
            Accum2D& a = acc[gi];
            a.touched = true;

            double om = 1.0 - cb.alpha_eff;
            double g_aeff = cb.trans * phi[ii] - (om > 1e-12 ? suffix / om : 0.0);
            suffix += cb.weight * phi[ii];

            // feature and depth channels are linear in w_i
            const FeatureVec& f = scene.gaussians[gi].feature;
            for (int c = 0; c < channels; ++c)
                a.g_feature[c] += cb.weight * (g1(c) + 2.0 * f[c] * g2(c));
            a.g_depth += cb.weight * (g1(nch - 1) + 2.0 * s.depth * g2(nch - 1));

            if (cb.clamped) continue;  // clamp has zero gradient
            a.g_alpha += g_aeff * cb.gauss;
            double g_m = -0.5 * cb.alpha_eff * g_aeff;
            // m = d^T Sinv d with d = p - mean2d
            Vec2 sd{cb.cov_inv.a * cb.diff.x + cb.cov_inv.b * cb.diff.y,
                    cb.cov_inv.b * cb.diff.x + cb.cov_inv.c * cb.diff.y};
            a.g_mean2d.x += g_m * (-2.0 * sd.x);
            a.g_mean2d.y += g_m * (-2.0 * sd.y);
            a.g_cov[0][0] += g_m * (-sd.x * sd.x);
            a.g_cov[0][1] += g_m * (-sd.x * sd.y);
            a.g_cov[1][0] += g_m * (-sd.y * sd.x);
            a.g_cov[1][1] += g_m * (-sd.y * sd.y);
        }
    }

    // Chain per-gaussian 2D gradients through the EWA projection.
    const Mat3& w = cam.pose.rotation;
    for (size_t gi = 0; gi < n; ++gi) {
        if (!acc[gi].touched) continue;
        const Gaussian3D& g = scene.gaussians[gi];
        const Accum2D& a = acc[gi];

        Vec3 t = world_to_camera(cam.pose, g.mean);
        double iz = 1.0 / t.z, iz2 = iz * iz, iz3 = iz2 * iz;
        double j00 = cam.fx * iz, j02 = -cam.fx * t.x * iz2;
        double j11 = cam.fy * iz, j12 = -cam.fy * t.y * iz2;

        Mat3 cov3 = covariance_from_scale_rotation(g.scale, g.rotation);
        Mat3 cov_cam = w * cov3 * transpose(w);

        // d_cov_cam = J^T G2 J (J rows: [j00,0,j02], [0,j11,j12])
        double jt[3][2] = {{j00, 0}, {0, j11}, {j02, j12}};
        Mat3 g_cov_cam = Mat3::zero();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int r = 0; r < 2; ++r)
                    for (int c = 0; c < 2; ++c)
                        g_cov_cam(i, j) += jt[i][r] * a.g_cov[r][c] * jt[j][c];

        Mat3 g_cov3 = transpose(w) * g_cov_cam * w;

        // d_J = 2 G2 J cov_cam
        double jrow[2][3] = {{j00, 0, j02}, {0, j11, j12}};
        double jc[2][3];
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c)
                jc[r][c] = jrow[r][0] * cov_cam(0, c) + jrow[r][1] * cov_cam(1, c) +
                           jrow[r][2] * cov_cam(2, c);
        double g_j[2][3];
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c)
                g_j[r][c] = 2.0 * (a.g_cov[r][0] * jc[0][c] + a.g_cov[r][1] * jc[1][c]);

        // gradient into the camera-frame mean
        Vec3 g_t{};
        // pinhole mean: u = fx tx/tz + cx, v = fy ty/tz + cy
        g_t.x += a.g_mean2d.x * cam.fx * iz;
        g_t.z += a.g_mean2d.x * (-cam.fx * t.x * iz2);
        g_t.y += a.g_mean2d.y * cam.fy * iz;
        g_t.z += a.g_mean2d.y * (-cam.fy * t.y * iz2);
        // J entries depend on t
        g_t.z += g_j[0][0] * (-cam.fx * iz2);
        g_t.x += g_j[0][2] * (-cam.fx * iz2);
        g_t.z += g_j[0][2] * (2.0 * cam.fx * t.x * iz3);
        g_t.z += g_j[1][1] * (-cam.fy * iz2);
        g_t.y += g_j[1][2] * (-cam.fy * iz2);
        g_t.z += g_j[1][2] * (2.0 * cam.fy * t.y * iz3);
        // depth feature is t.z itself
        g_t.z += a.g_depth;

        grads.d_mean[gi] = transpose(w) * g_t;

        // cov3 = M M^T with M = R diag(s); d_M = 2 g_cov3 M
        Quat qh = normalized(g.rotation);
        Mat3 r = rotation_from_quat(qh);
        double s[3] = {g.scale.x, g.scale.y, g.scale.z};
        Mat3 m;  // M = R diag(s)
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) m(i, k) = r(i, k) * s[k];
        Mat3 g_m = Mat3::zero();
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j) g_m(i, k) += 2.0 * g_cov3(i, j) * m(j, k);

        for (int k = 0; k < 3; ++k) {
            double gs = 0.0;
            for (int i = 0; i < 3; ++i) gs += g_m(i, k) * r(i, k);
            grads.d_scale[gi][k] = gs;
        }

        Mat3 g_r = Mat3::zero();
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) g_r(i, k) = g_m(i, k) * s[k];
        auto dr = rotation_quat_jacobian(qh);
        Quat g_qh{0, 0, 0, 0};
        for (int j = 0; j < 4; ++j) {
            double v = 0.0;
            for (int i = 0; i < 9; ++i) v += g_r.m[i] * dr[j].m[i];
            g_qh[j] = v;
        }
        // through normalization: d_q = (I - qh qh^T) / |q| * d_qh
        double qn = norm(g.rotation);
        double proj = g_qh.w * qh.w + g_qh.x * qh.x + g_qh.y * qh.y + g_qh.z * qh.z;
        for (int j = 0; j < 4; ++j) grads.d_rotation[gi][j] = (g_qh[j] - proj * qh[j]) / qn;

        double alpha = g.opacity();
        grads.d_opacity_raw[gi] = a.g_alpha * alpha * (1.0 - alpha);
        grads.d_feature[gi] = a.g_feature;
    }
}

}  // namespace mf
