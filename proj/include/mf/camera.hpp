#pragma once

#include "mf/math.hpp"

namespace mf {

// World-to-camera rigid transform. Camera looks down +z in its own frame.
struct Pose {
    Mat3 rotation;      // world -> camera
    Vec3 translation;   // camera frame

    static Pose identity() { return Pose{}; }
};

Vec3 world_to_camera(const Pose& pose, Vec3 p);
Vec3 camera_to_world(const Pose& pose, Vec3 p);
Pose inverse(const Pose& pose);

// Checks ||R^T R - I|| and det(R) = +1, throws std::invalid_argument otherwise.
void validate_rotation(const Mat3& r, double tol = 1e-9);

struct Camera {
    double fx = 100.0, fy = 100.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    double z_near = 0.01, z_far = 100.0;
    Pose pose;

    Vec3 center() const;  // camera origin in world frame

    void validate() const;
};

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length
};

// Pinhole back-projection through the center of pixel (px, py).
Ray ray_through_pixel(const Camera& cam, int px, int py);

// Look-at pose: camera at eye, principal axis toward target.
Pose look_at(Vec3 eye, Vec3 target, Vec3 up = {0, 1, 0});

}  // namespace mf
