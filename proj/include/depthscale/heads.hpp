#pragma once

#include <cstdint>

#include "depthscale/tensor.hpp"

namespace depthscale {

// DPT-style lightweight decoder: one 3x3 projection convolution, two
// resample blocks (x2 bilinear upsample + 3x3 convolution + rectifier), a
// 1x1 convolution to a single channel, a bilinear resize to the exact image
// resolution, and an exponential to keep the output strictly positive.
struct DecoderHead {
    int in_dim = 64;
    int width = 64;

    Tensor conv_proj_w, conv_proj_b;  // width x in_dim x 3 x 3
    Tensor conv_up1_w, conv_up1_b;    // width x width x 3 x 3
    Tensor conv_up2_w, conv_up2_b;    // width x width x 3 x 3
    Tensor conv_out_w, conv_out_b;    // 1 x width x 1 x 1

    static DecoderHead random_init(int in_dim, int width, std::uint64_t seed);

    // f_out is the HW_p x D fused token map; grid is the patch layout.
    // Returns a strictly positive out_h x out_w map.
    Tensor decode(const Tensor& f_out, int grid_h, int grid_w, int out_h, int out_w) const;
};

// Core rescaling map: metric = 1/(A * rel + B), denominator
// clamped at kEps. rel is a constant raster tensor; A and B carry gradients.
Tensor rescale_depth(const Tensor& rel, const Tensor& scale_map, const Tensor& shift_map);

}  // namespace depthscale
