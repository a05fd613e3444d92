#pragma once

#include <vector>

#include "mf/camera.hpp"
#include "mf/image.hpp"

namespace mf {

inline constexpr int kSemanticDim = 8;

struct Sphere {
    Vec3 center;
    double radius = 1.0;
    FeatureVec color;  // RGB in [0, 1]
    int semantic_class = 0;
};

// Procedural ground-truth scene: flat-shaded spheres over a constant background.
struct AnalyticScene {
    std::vector<Sphere> spheres;
    FeatureVec background_color{0.05, 0.05, 0.08};
    double background_depth = 0.0;  // filled with z_far at trace time when 0
    uint64_t seed = 0;
};

// Unit-norm embedding of a semantic class (fixed codebook, constant per class).
FeatureVec semantic_embedding(int semantic_class);

// Deterministic in seed; spheres inside a unit-scale region around the origin.
AnalyticScene generate_scene(uint64_t seed, int n_spheres);

// The fixed scene used by the scaled experiments.
AnalyticScene desk_scene();

struct GroundTruth {
    FeatureImage color;     // 3 channels
    FeatureImage depth;     // 1 channel, camera-frame z
    FeatureImage semantic;  // kSemanticDim channels
};

// Exact nearest-hit sphere tracing per pixel.
GroundTruth raytrace_ground_truth(const AnalyticScene& scene, const Camera& cam);

// Cameras on a sphere of given radius around the target, all looking at it,
// evenly spaced in azimuth at a fixed elevation angle.
std::vector<Camera> camera_orbit(int n_views, double radius, Vec3 target, int width, int height,
                                 double focal, double elevation = 0.35);  // elevation angle, radians

// Smallest positive ray parameter hitting the sphere, or a negative value.
double intersect_sphere(const Ray& ray, const Sphere& s);

}  // namespace mf
