#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthscale/io.hpp"

namespace depthscale {

// One generated scene with its ground-truth rescale maps. The metric depth
// equals 1/(scale_map * rel + shift_map) at every valid pixel by
// construction, so the maps double as an oracle for the rescale transform.
struct SynthScene {
    ImageRaster image;
    DepthRaster rel;        // disparity-like relative depth
    DepthRaster gt;         // metric depth, metres
    DepthRaster scale_map;  // A*
    DepthRaster shift_map;  // B*
    std::vector<std::string> tokens;
    std::string domain;  // indoor / outdoor
};

struct SynthConfig {
    int height = 32;
    int width = 32;
    // fraction of GT pixels dropped (stored as 0 -> invalid), mimicking
    // sparse depth supervision
    double gt_sparsity = 0.10;
};

// Deterministic per (seed, index); scenes are piecewise-planar disparity
// layouts. A*/B* are a token-determined base level times one low-frequency
// sinusoid (amplitude 15%), so the token set and pixel position together
// determine the rescale maps up to a small per-scene jitter. Outdoor scenes
// have much smaller A*/B*, hence larger metric depths, than indoor ones.
SynthScene synth_scene(std::uint64_t seed, std::uint64_t index, const SynthConfig& cfg = {});

std::vector<SynthScene> synth_generate(std::uint64_t seed, int count, int height, int width);

// Writes image.ppm / rel.pfm / gt.pfm / scale.pfm / shift.pfm / tokens.txt
// per scene under out_dir/<id>/ plus a manifest.tsv binding them.
void synth_write_dataset(const std::vector<SynthScene>& scenes, const std::string& out_dir);

}  // namespace depthscale
