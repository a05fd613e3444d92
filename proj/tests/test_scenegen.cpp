#include "doctest.h"

#include <cmath>

#include "mf/scenegen.hpp"

using namespace mf;

TEST_CASE("same seed reproduces the same scene") {
    AnalyticScene a = generate_scene(42, 6);
    AnalyticScene b = generate_scene(42, 6);
    REQUIRE(a.spheres.size() == b.spheres.size());
    for (size_t i = 0; i < a.spheres.size(); ++i) {
        CHECK(a.spheres[i].center.x == b.spheres[i].center.x);
        CHECK(a.spheres[i].center.y == b.spheres[i].center.y);
        CHECK(a.spheres[i].center.z == b.spheres[i].center.z);
        CHECK(a.spheres[i].radius == b.spheres[i].radius);
        CHECK(a.spheres[i].color == b.spheres[i].color);
        CHECK(a.spheres[i].semantic_class == b.spheres[i].semantic_class);
    }
}

TEST_CASE("generated spheres stay in a bounded region") {
    AnalyticScene s = generate_scene(9, 1);
    REQUIRE(s.spheres.size() == 1);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        AnalyticScene sc = generate_scene(seed, 8);
        for (const Sphere& sp : sc.spheres) {
            CHECK(std::abs(sp.center.x) <= 0.9);
            CHECK(std::abs(sp.center.y) <= 0.9);
            CHECK(std::abs(sp.center.z) <= 0.9);
            CHECK(sp.radius >= 0.15);
            CHECK(sp.radius <= 0.45);
            REQUIRE(sp.color.size() == 3);
            for (double c : sp.color) {
                CHECK(c >= 0.1);
                CHECK(c <= 1.0);
            }
        }
    }
}

TEST_CASE("seed 7 with 10 spheres has pairwise distinct centers") {
    AnalyticScene s = generate_scene(7, 10);
    REQUIRE(s.spheres.size() == 10);
    for (size_t i = 0; i < 10; ++i)
        for (size_t j = i + 1; j < 10; ++j)
            CHECK(norm(s.spheres[i].center - s.spheres[j].center) > 0.0);
}

TEST_CASE("semantic embeddings are unit norm and class-distinct") {
    for (int k = 0; k < 4; ++k) {
        FeatureVec e = semantic_embedding(k);
        REQUIRE(static_cast<int>(e.size()) == kSemanticDim);
        double n2 = 0.0;
        for (double v : e) n2 += v * v;
        CHECK(n2 == doctest::Approx(1.0));
        CHECK(semantic_embedding(k) == semantic_embedding(k));
    }
    CHECK(semantic_embedding(0) != semantic_embedding(1));
}

TEST_CASE("sphere intersection basic geometry") {
    Sphere s;
    s.center = {0, 0, 3};
    s.radius = 1.0;
    double t = intersect_sphere(Ray{{0, 0, 0}, {0, 0, 1}}, s);
    CHECK(t == doctest::Approx(2.0));
    double miss = intersect_sphere(Ray{{0, 5, 0}, {0, 0, 1}}, s);
    CHECK(miss < 0.0);
    // origin inside: exit hit
    double inside = intersect_sphere(Ray{{0, 0, 3}, {0, 0, 1}}, s);
    CHECK(inside == doctest::Approx(1.0));
}

namespace {

Camera axis_camera(int res) {
    Camera cam;
    cam.fx = cam.fy = res;
    cam.cx = cam.cy = res / 2.0;
    cam.width = cam.height = res;
    cam.z_near = 0.05;
    cam.z_far = 20.0;
    return cam;
}

}  // namespace

TEST_CASE("raytrace with no spheres gives pure background") {
    AnalyticScene scene;
    scene.background_color = {0.1, 0.2, 0.3};
    Camera cam = axis_camera(16);
    GroundTruth gt = raytrace_ground_truth(scene, cam);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            for (int c = 0; c < 3; ++c) CHECK(gt.color.at(x, y, c) == scene.background_color[c]);
            CHECK(gt.depth.at(x, y, 0) == cam.z_far);
        }
}

TEST_CASE("on-axis sphere at depth 3 has center depth 2") {
    AnalyticScene scene;
    Sphere s;
    s.center = {0, 0, 3};
    s.radius = 1.0;
    s.color = {0.8, 0.2, 0.1};
    s.semantic_class = 1;
    scene.spheres = {s};
    Camera cam = axis_camera(33);  // odd: pixel 16 center is exactly on axis
    GroundTruth gt = raytrace_ground_truth(scene, cam);
    CHECK(gt.depth.at(16, 16, 0) == doctest::Approx(2.0).epsilon(1e-9));
    for (int c = 0; c < 3; ++c) CHECK(gt.color.at(16, 16, c) == s.color[c]);
    FeatureVec emb = semantic_embedding(1);
    for (int c = 0; c < kSemanticDim; ++c) CHECK(gt.semantic.at(16, 16, c) == emb[c]);
}

TEST_CASE("center pixel agrees across odd resolutions") {
    AnalyticScene scene = generate_scene(3, 5);
    Camera a = axis_camera(33);
    Camera b = axis_camera(65);
    a.pose = b.pose = look_at({0, 0, -3.2}, {0, 0, 0});
    GroundTruth ga = raytrace_ground_truth(scene, a);
    GroundTruth gb = raytrace_ground_truth(scene, b);
    for (int c = 0; c < 3; ++c)
        CHECK(ga.color.at(16, 16, c) == doctest::Approx(gb.color.at(32, 32, c)).epsilon(1e-12));
    CHECK(ga.depth.at(16, 16, 0) == doctest::Approx(gb.depth.at(32, 32, 0)).epsilon(1e-9));
}

TEST_CASE("camera orbit geometry") {
    auto one = camera_orbit(1, 3.0, {0, 0, 0}, 32, 32, 32.0);
    REQUIRE(one.size() == 1);
    CHECK(norm(one[0].center()) == doctest::Approx(3.0).epsilon(1e-9));

    auto four = camera_orbit(4, 2.5, {0.5, 0, -0.5}, 32, 32, 32.0);
    REQUIRE(four.size() == 4);
    Vec3 target{0.5, 0, -0.5};
    for (const Camera& cam : four) {
        cam.validate();
        CHECK(norm(cam.center() - target) == doctest::Approx(2.5).epsilon(1e-9));
        // principal axis passes through the target
        Vec3 t = world_to_camera(cam.pose, target);
        CHECK(t.x == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
        CHECK(t.y == doctest::Approx(0.0).epsilon(1e-9).scale(1.0));
        CHECK(t.z == doctest::Approx(2.5).epsilon(1e-9));
    }
    // 90 degree azimuth spacing: consecutive positions are orthogonal about the target
    Vec3 d0 = four[0].center() - target;
    Vec3 d1 = four[1].center() - target;
    Vec3 d2 = four[2].center() - target;
    CHECK(dot(d0, d2) == doctest::Approx(-dot(d0, d0) + 2 * d0.y * d0.y).epsilon(1e-6));
    (void)d1;
}

TEST_CASE("desk scene is fixed and populated") {
    AnalyticScene a = desk_scene();
    AnalyticScene b = desk_scene();
    REQUIRE(a.spheres.size() == 8);
    CHECK(a.spheres[0].center.x == b.spheres[0].center.x);
    CHECK(a.spheres[0].semantic_class == 0);
    CHECK(a.spheres[1].semantic_class == 1);
}
