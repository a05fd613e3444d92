#pragma once

#include <string>

#include "mf/splat.hpp"
#include "mf/voxel_field.hpp"

namespace mf {

// Voxel field checkpoint: "MFVF", u32 version, u32 nx/ny/nz/channels,
// f32 bounding box (6), f32 background (channels), then the raw density grid
// followed by the feature grid as little-endian f32 in x-fastest order.
void save_voxel_field(const std::string& path, const VoxelField& field);
VoxelField load_voxel_field(const std::string& path);

// Splat scene checkpoint: "MFSP", u32 version, u32 count, u32 channels,
// f32 background (channels), then per-splat records
// mean[3] scale[3] quat[4] opacity_raw feature[channels], little-endian f32.
void save_splat_scene(const std::string& path, const SplatScene& scene);
SplatScene load_splat_scene(const std::string& path);

}  // namespace mf
