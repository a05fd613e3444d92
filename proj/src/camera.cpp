#include "mf/camera.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mf {

Mat3 rotation_from_quat(Quat q) {
    double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 r;
    r(0, 0) = 1 - 2 * (y * y + z * z);
    r(0, 1) = 2 * (x * y - w * z);
    r(0, 2) = 2 * (x * z + w * y);
    r(1, 0) = 2 * (x * y + w * z);
    r(1, 1) = 1 - 2 * (x * x + z * z);
    r(1, 2) = 2 * (y * z - w * x);
    r(2, 0) = 2 * (x * z - w * y);
    r(2, 1) = 2 * (y * z + w * x);
    r(2, 2) = 1 - 2 * (x * x + y * y);
    return r;
}

std::array<Mat3, 4> rotation_quat_jacobian(Quat q) {
    double w = q.w, x = q.x, y = q.y, z = q.z;
    std::array<Mat3, 4> d;
    // dR/dw
    d[0].m = {0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0};
    // dR/dx
    d[1].m = {0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x};
    // dR/dy
    d[2].m = {-4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y};
    // dR/dz
    d[3].m = {-4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0};
    return d;
}

Vec3 world_to_camera(const Pose& pose, Vec3 p) { return pose.rotation * p + pose.translation; }

Vec3 camera_to_world(const Pose& pose, Vec3 p) {
    return transpose(pose.rotation) * (p - pose.translation);
}

Pose inverse(const Pose& pose) {
    Pose inv;
    inv.rotation = transpose(pose.rotation);
    inv.translation = -(inv.rotation * pose.translation);
    return inv;
}

void validate_rotation(const Mat3& r, double tol) {
    Mat3 rtr = transpose(r) * r;
    double err = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) err += std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0));
    double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                 r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                 r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
    if (err > 9 * tol || std::abs(det - 1.0) > 1e-6)
        throw std::invalid_argument("rotation matrix is not orthonormal with det +1");
}

Vec3 Camera::center() const { return camera_to_world(pose, {0, 0, 0}); }

void Camera::validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("focal lengths must be positive");
    if (!(0 < z_near && z_near < z_far))
        throw std::invalid_argument("require 0 < z_near < z_far");
    if (width < 1 || height < 1) throw std::invalid_argument("image size must be >= 1");
    validate_rotation(pose.rotation);
}

Ray ray_through_pixel(const Camera& cam, int px, int py) {
    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
        throw std::invalid_argument("pixel (" + std::to_string(px) + ", " + std::to_string(py) +
                                    ") out of bounds");
    Vec3 dir_cam{(px + 0.5 - cam.cx) / cam.fx, (py + 0.5 - cam.cy) / cam.fy, 1.0};
    Vec3 dir_world = transpose(cam.pose.rotation) * dir_cam;
    return Ray{cam.center(), normalized(dir_world)};
}

Pose look_at(Vec3 eye, Vec3 target, Vec3 up) {
    Vec3 forward = normalized(target - eye);  // camera +z
    Vec3 right = cross(up, forward);
    if (norm(right) < 1e-9) {
        up = {1, 0, 0};
        right = cross(up, forward);
    }
    right = normalized(right);
    Vec3 down = cross(forward, right);  // camera +y
    Pose pose;
    // rows of world->camera rotation are the camera axes in world coordinates
    pose.rotation.m = {right.x, right.y, right.z, down.x, down.y, down.z,
                       forward.x, forward.y, forward.z};
    pose.translation = -(pose.rotation * eye);
    return pose;
}

}  // namespace mf
