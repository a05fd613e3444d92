#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mf/metrics.hpp"
#include "mf/train.hpp"

using namespace mf;

namespace {

Camera small_camera(int res = 32) {
    Camera cam;
    cam.fx = cam.fy = res;
    cam.cx = cam.cy = res / 2.0;
    cam.width = cam.height = res;
    cam.z_near = 0.05;
    cam.z_far = 20.0;
    cam.pose = look_at({0, 0, -3.2}, {0, 0, 0});
    return cam;
}

FeatureImage color_slice(const MomentImage& m) {
    FeatureImage out(m.width, m.height, 3);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = m.m1.at(x, y, c);
    return out;
}

std::vector<PixelCoord> grid_pixels(int res, int step) {
    std::vector<PixelCoord> px;
    for (int y = 0; y < res; y += step)
        for (int x = 0; x < res; x += step) px.push_back({x, y});
    return px;
}

}  // namespace

TEST_CASE("adam first step moves by roughly lr in the gradient direction") {
    Adam adam(2);
    std::vector<double> p = {1.0, -2.0};
    std::vector<double> g = {0.5, -3.0};
    std::vector<double> scale = {1.0, 1.0};
    adam.step(p, g, 0.1, scale);
    // bias-corrected first step is lr * g / (|g| + eps) = lr * sign(g)
    CHECK(p[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
}

TEST_CASE("adam honors per-parameter learning-rate scales") {
    Adam adam(2);
    std::vector<double> p = {0.0, 0.0};
    std::vector<double> g = {1.0, 1.0};
    std::vector<double> scale = {1.0, 0.25};
    adam.step(p, g, 0.1, scale);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(-0.025).epsilon(1e-6));
}

TEST_CASE("ray allocation worked cases") {
    std::vector<double> eq = {1, 1, 1, 1};
    auto u = allocate_rays_by_score(eq, 100, 1);
    for (int c : u) CHECK(c == 25);

    std::vector<double> spike = {1, 0, 0, 0};
    auto s = allocate_rays_by_score(spike, 100, 1);
    CHECK(s[0] == 97);
    CHECK(s[1] == 1);
    CHECK(s[2] == 1);
    CHECK(s[3] == 1);
}

TEST_CASE("ray allocation properties on random scores") {
    SeededRng rng(40, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + static_cast<int>(rng.next_u32() % 64);
        int budget = n + static_cast<int>(rng.next_u32() % 2000);
        std::vector<double> scores(n);
        for (double& v : scores) v = rng.next_double() * (rng.next_u32() % 4 ? 1.0 : 0.0);
        auto counts = allocate_rays_by_score(scores, budget, 1);
        int total = 0;
        for (size_t i = 0; i < counts.size(); ++i) {
            CHECK(counts[i] >= 1);
            total += counts[i];
            for (size_t j = 0; j < counts.size(); ++j)
                if (scores[i] > scores[j]) CHECK(counts[i] >= counts[j]);
        }
        CHECK(total == budget);
    }
}

TEST_CASE("ray allocation rejects bad input") {
    std::vector<double> neg = {1.0, -0.5};
    CHECK_THROWS(allocate_rays_by_score(neg, 10, 1));
    std::vector<double> ok = {1.0, 1.0};
    CHECK_THROWS(allocate_rays_by_score(ok, 1, 1));  // budget below the floor total
}

TEST_CASE("sample_cell_pixels puts pixels in their cells and respects counts") {
    SeededRng rng(41, 0);
    std::vector<int> counts(16, 3);
    counts[5] = 10;
    auto px = sample_cell_pixels(counts, 4, 32, 32, rng);
    CHECK(px.size() == 15 * 3 + 10);
    std::vector<int> seen(16, 0);
    for (const PixelCoord& p : px) {
        REQUIRE(p.x >= 0);
        REQUIRE(p.x < 32);
        REQUIRE(p.y >= 0);
        REQUIRE(p.y < 32);
        ++seen[(p.y / 8) * 4 + (p.x / 8)];
    }
    for (int i = 0; i < 16; ++i) CHECK(seen[i] == counts[i]);
}

TEST_CASE("perfect model has zero loss and zero gradient") {
    SplatScene scene = init_splat_scene(12, 3, {0.1, 0.1, 0.2}, 5);
    SplatModel model(std::move(scene));
    Camera cam = small_camera();
    FeatureImage gt = color_slice(model.render(cam, 2, true));
    std::vector<double> grad;
    auto px = grid_pixels(32, 4);
    double loss = model.loss_and_grad(cam, gt, px, 0, 0, grad);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-15));
    for (double g : grad) CHECK(g == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("constant offset gives mse c squared") {
    SplatScene scene = init_splat_scene(4, 3, {0.3, 0.3, 0.3}, 6);
    // fully transparent splats: the render is the constant background
    for (auto& g : scene.gaussians) g.opacity_raw = -40.0;
    SplatModel model(std::move(scene));
    Camera cam = small_camera();
    FeatureImage gt = color_slice(model.render(cam, 2, true));
    for (double& v : gt.data) v += 0.1;
    std::vector<double> grad;
    auto px = grid_pixels(32, 4);
    double loss = model.loss_and_grad(cam, gt, px, 0, 0, grad);
    CHECK(loss == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("variance scores flag a constructed conflict cell") {
    SplatScene scene;
    scene.background = {0, 0, 0};
    Gaussian3D a;
    a.mean = {-0.4, -0.4, 0};  // projects near the center of one interior cell
    a.scale = {0.08, 0.08, 0.08};
    a.opacity_raw = 0.0;  // alpha 0.5
    a.feature = {0, 0, 0};
    Gaussian3D b = a;
    b.mean.z = 0.4;
    b.feature = {1, 1, 1};
    scene.gaussians = {a, b};
    SplatModel model(std::move(scene));
    Camera cam = small_camera();
    auto scores = variance_scores(model, cam, 4);
    REQUIRE(scores.size() == 16);
    int best = argmax_score(scores);
    for (double s : scores) CHECK(s >= 0.0);
    CHECK(scores[best] > 0.0);
    // the conflict lives strictly in one cell; every other cell is near zero
    for (int i = 0; i < 16; ++i)
        if (i != best) CHECK(scores[i] < 1e-6 * std::max(scores[best], 1e-30));
}

TEST_CASE("constant scene has zero variance scores") {
    SplatScene scene = init_splat_scene(6, 3, {0.5, 0.5, 0.5}, 7);
    for (auto& g : scene.gaussians) {
        g.opacity_raw = -40.0;  // transparent: only the background remains
    }
    SplatModel model(std::move(scene));
    auto scores = variance_scores(model, small_camera(), 4);
    for (double s : scores) CHECK(s == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("error scores vanish for a perfect model and flag a wrong region") {
    SplatScene scene = init_splat_scene(10, 3, {0.2, 0.2, 0.2}, 8);
    SplatModel model(std::move(scene));
    Camera cam = small_camera();
    FeatureImage gt = color_slice(model.render(cam, 2, true));
    auto zero = error_scores(model, cam, gt, 4);
    for (double s : zero) {
        CHECK(s >= 0.0);
        CHECK(s == doctest::Approx(0.0).epsilon(1e-15));
    }
    // corrupt one cell of the ground truth
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) gt.at(x, y, 0) += 0.5;
    auto scores = error_scores(model, cam, gt, 4);
    CHECK(argmax_score(scores) == 0);
    CHECK(scores[0] > 0.0);
}

TEST_CASE("zero iterations leaves the model untouched") {
    SplatModel model(init_splat_scene(8, 3, {0.1, 0.1, 0.1}, 9));
    std::vector<double> before;
    model.get_params(before);
    Camera cam = small_camera();
    AnalyticScene sc = generate_scene(2, 3);
    GroundTruth gt = raytrace_ground_truth(sc, cam);
    TrainViews views;
    views.cameras = {cam};
    views.gt_color = {gt.color};
    TrainConfig cfg;
    cfg.iterations = 0;
    auto log = train(model, views, cam, gt.color, cfg);
    CHECK(log.empty());
    std::vector<double> after;
    model.get_params(after);
    CHECK(before == after);
}

TEST_CASE("training improves held-out psnr on a tiny scene") {
    AnalyticScene sc = generate_scene(1, 3);
    Camera c0 = small_camera();
    Camera c1 = small_camera();
    c1.pose = look_at({2.3, 0.6, -2.2}, {0, 0, 0});
    Camera eval = small_camera();
    eval.pose = look_at({-2.0, 0.8, -2.4}, {0, 0, 0});
    GroundTruth g0 = raytrace_ground_truth(sc, c0);
    GroundTruth g1 = raytrace_ground_truth(sc, c1);
    GroundTruth ge = raytrace_ground_truth(sc, eval);

    SplatModel model(init_splat_scene(40, 3, sc.background_color, 11));
    double initial = psnr(color_slice(model.render(eval, 2, true)), ge.color);

    TrainViews views;
    views.cameras = {c0, c1};
    views.gt_color = {g0.color, g1.color};
    TrainConfig cfg;
    cfg.iterations = 150;
    cfg.rays_per_iter = 512;
    cfg.seed = 4;
    auto log = train(model, views, eval, ge.color, cfg);
    REQUIRE(!log.empty());
    CHECK(log.back().psnr > initial);
}

TEST_CASE("splat init is deterministic and bounded") {
    SplatScene a = init_splat_scene(25, 3, {0, 0, 0}, 13);
    SplatScene b = init_splat_scene(25, 3, {0, 0, 0}, 13);
    REQUIRE(a.gaussians.size() == 25);
    for (size_t i = 0; i < 25; ++i) {
        CHECK(a.gaussians[i].mean.x == b.gaussians[i].mean.x);
        CHECK(std::abs(a.gaussians[i].mean.x) <= 1.1);
        CHECK(std::abs(a.gaussians[i].mean.y) <= 1.1);
        CHECK(std::abs(a.gaussians[i].mean.z) <= 1.1);
        CHECK(a.gaussians[i].scale.x > 0.0);
        CHECK(norm(a.gaussians[i].rotation) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(a.gaussians[i].opacity() == doctest::Approx(0.6).epsilon(1e-9));
    }
}

TEST_CASE("voxel init shape and defaults") {
    VoxelField f = init_voxel_field(16, 3, {0.1, 0.2, 0.3});
    CHECK(f.nx == 16);
    CHECK(f.ny == 16);
    CHECK(f.nz == 16);
    CHECK(f.channels == 3);
    CHECK(f.background == FeatureVec{0.1, 0.2, 0.3});
    for (double d : f.density_raw) CHECK(d == -2.0);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    TrainConfig bad = cfg;
    bad.rays_per_iter = 0;
    CHECK_THROWS(bad.validate());
    TrainConfig neg = cfg;
    neg.iterations = -1;
    CHECK_THROWS(neg.validate());
    TrainConfig lr = cfg;
    lr.lr = 0.0;
    CHECK_THROWS(lr.validate());
}
