#include "mf/scenegen.hpp"

#include <cmath>
#include <stdexcept>

#include "mf/parallel.hpp"
#include "mf/rng.hpp"

namespace mf {

FeatureVec semantic_embedding(int semantic_class) {
    // Fixed codebook: standard basis rotated by a deterministic mixing pattern
    // so classes are unit-norm and pairwise distinct.
    FeatureVec e(kSemanticDim, 0.0);
    int k = ((semantic_class % kSemanticDim) + kSemanticDim) % kSemanticDim;
    e[k] = 1.0;
    return e;
}

AnalyticScene generate_scene(uint64_t seed, int n_spheres) {
    if (n_spheres < 1) throw std::invalid_argument("need at least one sphere");
    AnalyticScene scene;
    scene.seed = seed;
    SeededRng rng(seed, 0x5ce9e);
    scene.spheres.reserve(n_spheres);
    for (int i = 0; i < n_spheres; ++i) {
        Sphere s;
        s.center = {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
        s.radius = rng.uniform(0.15, 0.45);
        s.color = {rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)};
        // at least two distinct classes once there are two spheres
        s.semantic_class = (i < 2) ? i : static_cast<int>(rng.next_u32() % kSemanticDim);
        scene.spheres.push_back(std::move(s));
    }
    return scene;
}

AnalyticScene desk_scene() { return generate_scene(7, 8); }

double intersect_sphere(const Ray& ray, const Sphere& s) {
    Vec3 oc = ray.origin - s.center;
    double b = dot(oc, ray.direction);
    double c = dot(oc, oc) - s.radius * s.radius;
    double disc = b * b - c;
    if (disc < 0.0) return -1.0;
    double sq = std::sqrt(disc);
    double t0 = -b - sq;
    if (t0 > 1e-9) return t0;
    double t1 = -b + sq;
    if (t1 > 1e-9) return t1;
    return -1.0;
}

GroundTruth raytrace_ground_truth(const AnalyticScene& scene, const Camera& cam) {
    cam.validate();
    GroundTruth gt;
    gt.color = FeatureImage(cam.width, cam.height, 3);
    gt.depth = FeatureImage(cam.width, cam.height, 1);
    gt.semantic = FeatureImage(cam.width, cam.height, kSemanticDim);
    double bg_depth = scene.background_depth > 0.0 ? scene.background_depth : cam.z_far;

    parallel_for(static_cast<size_t>(cam.height), [&](size_t yy) {
        int y = static_cast<int>(yy);
        for (int x = 0; x < cam.width; ++x) {
            Ray ray = ray_through_pixel(cam, x, y);
            double best_t = -1.0;
            const Sphere* hit = nullptr;
            for (const Sphere& s : scene.spheres) {
                double t = intersect_sphere(ray, s);
                if (t > 0.0 && (best_t < 0.0 || t < best_t)) {
                    best_t = t;
                    hit = &s;
                }
            }
            if (hit != nullptr) {
                for (int c = 0; c < 3; ++c) gt.color.at(x, y, c) = hit->color[c];
                Vec3 p_cam = world_to_camera(cam.pose, ray.origin + best_t * ray.direction);
                gt.depth.at(x, y, 0) = p_cam.z;
                FeatureVec emb = semantic_embedding(hit->semantic_class);
                for (int c = 0; c < kSemanticDim; ++c) gt.semantic.at(x, y, c) = emb[c];
            } else {
                for (int c = 0; c < 3; ++c) gt.color.at(x, y, c) = scene.background_color[c];
                gt.depth.at(x, y, 0) = bg_depth;
                // background semantics stay zero
            }
        }
    });
    return gt;
}

std::vector<Camera> camera_orbit(int n_views, double radius, Vec3 target, int width, int height,
                                 double focal, double elevation) {
    if (n_views < 1) throw std::invalid_argument("need at least one view");
    std::vector<Camera> cams;
    cams.reserve(n_views);
    for (int i = 0; i < n_views; ++i) {
        double angle = 2.0 * M_PI * i / n_views;
        double ce = std::cos(elevation), se = std::sin(elevation);
        Vec3 eye = target + Vec3{radius * std::cos(angle) * ce, radius * se,
                                 radius * std::sin(angle) * ce};
        Camera cam;
        cam.width = width;
        cam.height = height;
        cam.fx = cam.fy = focal;
        cam.cx = width / 2.0;
        cam.cy = height / 2.0;
        cam.z_near = 0.05;
        cam.z_far = radius + 3.0;
        cam.pose = look_at(eye, target);
        cams.push_back(cam);
    }
    return cams;
}

}  // namespace mf
