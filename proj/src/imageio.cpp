#include "mf/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace mf {

static void open_or_throw(std::ofstream& out, const std::string& path) {
    out.open(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
}

void write_ppm(const std::string& path, const FeatureImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("PPM supports 1 or 3 channels");
    std::ofstream out;
    open_or_throw(out, path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = img.at(x, y, img.channels == 1 ? 0 : c);
                v = std::clamp(v, 0.0, 1.0);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_pfm(const std::string& path, const FeatureImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("PFM supports 1 or 3 channels");
    std::ofstream out;
    open_or_throw(out, path);
    out << (img.channels == 3 ? "PF" : "Pf") << "\n"
        << img.width << " " << img.height << "\n-1.0\n";
    std::vector<float> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {  // bottom-to-top
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                row[static_cast<size_t>(x) * img.channels + c] =
                    static_cast<float>(img.at(x, y, c));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

FeatureImage read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0)
        throw std::runtime_error("not a PFM file: " + path);
    if (scale > 0) throw std::runtime_error("big-endian PFM unsupported: " + path);
    in.get();  // single whitespace after scale
    int channels = magic == "PF" ? 3 : 1;
    FeatureImage img(w, h, channels);
    std::vector<float> row(static_cast<size_t>(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw std::runtime_error("truncated PFM: " + path);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(x, y, c) = row[static_cast<size_t>(x) * channels + c];
    }
    return img;
}

FeatureImage tonemap_variance(const FeatureImage& img) {
    std::vector<double> positives;
    positives.reserve(img.data.size());
    for (double v : img.data)
        if (v > 0.0) positives.push_back(v);
    FeatureImage out(img.width, img.height, img.channels);
    if (positives.empty()) return out;
    std::nth_element(positives.begin(), positives.begin() + positives.size() / 2,
                     positives.end());
    double median = positives[positives.size() / 2];
    if (median <= 0.0) median = 1e-12;
    for (size_t i = 0; i < img.data.size(); ++i) {
        double v = std::max(0.0, img.data[i]);
        out.data[i] = v / (v + median);
    }
    return out;
}

}  // namespace mf
