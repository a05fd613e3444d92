#include "mf/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace mf {

namespace {

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
void write_f32(std::ostream& out, double v) {
    float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), 4);
}
double read_f32(std::istream& in) {
    float f = 0.0f;
    in.read(reinterpret_cast<char*>(&f), 4);
    return f;
}

void check_magic(std::istream& in, const char* expect, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, expect, 4) != 0)
        throw std::runtime_error("bad checkpoint magic in " + path);
}

}  // namespace

void save_voxel_field(const std::string& path, const VoxelField& field) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write("MFVF", 4);
    write_u32(out, 1);
    write_u32(out, static_cast<uint32_t>(field.nx));
    write_u32(out, static_cast<uint32_t>(field.ny));
    write_u32(out, static_cast<uint32_t>(field.nz));
    write_u32(out, static_cast<uint32_t>(field.channels));
    const Vec3& a = field.box_min;
    const Vec3& b = field.box_max;
    for (double v : {a.x, a.y, a.z, b.x, b.y, b.z}) write_f32(out, v);
    for (double v : field.background) write_f32(out, v);
    for (double v : field.density_raw) write_f32(out, v);
    for (double v : field.features) write_f32(out, v);
    if (!out) throw std::runtime_error("write failed: " + path);
}

VoxelField load_voxel_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    check_magic(in, "MFVF", path);
    uint32_t version = read_u32(in);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version in " + path);
    int nx = static_cast<int>(read_u32(in));
    int ny = static_cast<int>(read_u32(in));
    int nz = static_cast<int>(read_u32(in));
    int ch = static_cast<int>(read_u32(in));
    Vec3 bmin{read_f32(in), read_f32(in), read_f32(in)};
    Vec3 bmax{read_f32(in), read_f32(in), read_f32(in)};
    VoxelField field(nx, ny, nz, ch, bmin, bmax);
    for (double& v : field.background) v = read_f32(in);
    for (double& v : field.density_raw) v = read_f32(in);
    for (double& v : field.features) v = read_f32(in);
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return field;
}

void save_splat_scene(const std::string& path, const SplatScene& scene) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write("MFSP", 4);
    write_u32(out, 1);
    write_u32(out, static_cast<uint32_t>(scene.gaussians.size()));
    write_u32(out, static_cast<uint32_t>(scene.channels()));
    for (double v : scene.background) write_f32(out, v);
    for (const Gaussian3D& g : scene.gaussians) {
        for (int i = 0; i < 3; ++i) write_f32(out, g.mean[i]);
        for (int i = 0; i < 3; ++i) write_f32(out, g.scale[i]);
        for (int i = 0; i < 4; ++i) write_f32(out, g.rotation[i]);
        write_f32(out, g.opacity_raw);
        for (double v : g.feature) write_f32(out, v);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

SplatScene load_splat_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    check_magic(in, "MFSP", path);
    uint32_t version = read_u32(in);
    if (version != 1) throw std::runtime_error("unsupported checkpoint version in " + path);
    uint32_t count = read_u32(in);
    uint32_t ch = read_u32(in);
    SplatScene scene;
    scene.background.resize(ch);
    for (double& v : scene.background) v = read_f32(in);
    scene.gaussians.resize(count);
    for (Gaussian3D& g : scene.gaussians) {
        for (int i = 0; i < 3; ++i) g.mean[i] = read_f32(in);
        for (int i = 0; i < 3; ++i) g.scale[i] = read_f32(in);
        for (int i = 0; i < 4; ++i) g.rotation[i] = read_f32(in);
        g.opacity_raw = read_f32(in);
        g.feature.resize(ch);
        for (double& v : g.feature) v = read_f32(in);
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return scene;
}

}  // namespace mf
