#pragma once

#include <string>

#include "mf/image.hpp"

namespace mf {

// 8-bit binary PPM (P6). 1-channel images are replicated to gray; values
// clamped to [0, 1].
void write_ppm(const std::string& path, const FeatureImage& img);

// 32-bit float PFM, little-endian (scale -1.0), bottom-to-top rows.
// 1 channel -> Pf, 3 channels -> PF.
void write_pfm(const std::string& path, const FeatureImage& img);
FeatureImage read_pfm(const std::string& path);

// Tone map for heavy-tailed variance images: v -> v / (v + m), m the median
// of the positive values (identity when all zero).
FeatureImage tonemap_variance(const FeatureImage& img);

}  // namespace mf
