#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace depthscale {

// H x W float raster plus a per-pixel validity mask. Valid pixels are
// finite and strictly positive.
struct DepthRaster {
    int height = 0;
    int width = 0;
    std::vector<float> values;   // row-major, top row first
    std::vector<uint8_t> valid;  // 0/1, same layout

    float& at(int r, int c) { return values[static_cast<size_t>(r) * width + c]; }
    float at(int r, int c) const { return values[static_cast<size_t>(r) * width + c]; }
    bool is_valid(int r, int c) const { return valid[static_cast<size_t>(r) * width + c] != 0; }
    size_t pixel_count() const { return static_cast<size_t>(height) * width; }

    static DepthRaster filled(int h, int w, float v);
};

// RGB image, channels interleaved, values in [0,1].
struct ImageRaster {
    int height = 0;
    int width = 0;
    std::vector<float> rgb;  // 3 * H * W, pixel-interleaved

    float at(int r, int c, int ch) const {
        return rgb[(static_cast<size_t>(r) * width + c) * 3 + ch];
    }
    float& at(int r, int c, int ch) {
        return rgb[(static_cast<size_t>(r) * width + c) * 3 + ch];
    }
};

struct SampleManifestEntry {
    std::string id;
    std::string image_path;
    std::string rel_path;
    std::string gt_path;
    std::string tokens_path;
    std::string domain;  // indoor / outdoor / surgical
};

// PFM, grayscale "Pf": header "Pf\n<W> <H>\n<scale>\n", then H*W 32-bit
// floats bottom-row-first; negative scale marks little-endian. Stored
// values <= 0 or non-finite come back as invalid-mask pixels.
DepthRaster read_pfm(const std::string& path);
void write_pfm(const DepthRaster& raster, const std::string& path);

// PFM as a plain matrix (no validity semantics); used for embedding files.
std::vector<double> read_pfm_matrix(const std::string& path, int expected_rows,
                                    int expected_cols);
void write_pfm_matrix(const std::vector<double>& data, int rows, int cols,
                      const std::string& path);

// binary P6, maxval 255, scaled to [0,1]
ImageRaster read_ppm(const std::string& path);
void write_ppm(const ImageRaster& image, const std::string& path);

// pixel valid iff finite and d_lo <= value <= d_hi
std::vector<uint8_t> make_valid_mask(const DepthRaster& gt, float d_lo, float d_hi);

// Tab-separated lines: id, image, rel, gt, tokens, domain. Paths are
// resolved relative to the manifest's directory.
std::vector<SampleManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<SampleManifestEntry>& entries, const std::string& path);

std::vector<std::string> read_tokens(const std::string& path);
void write_tokens(const std::vector<std::string>& tokens, const std::string& path);

}  // namespace depthscale
