#pragma once

#include <cstdint>
#include <vector>

#include "depthscale/io.hpp"
#include "depthscale/optim.hpp"
#include "depthscale/tensor.hpp"

namespace depthscale {

// Per-pixel depth-bin indices at reduced resolution. Indices are clamped to
// [0, num_classes-1]; larger index = nearer surface.
struct ClassMap {
    int height = 0;
    int width = 0;
    int num_classes = 0;
    std::vector<int> classes;
    std::vector<uint8_t> valid;

    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
};

// Y = round((d_max - D) / (d_max - d_min) * |C|), clamped. The depth raster
// is reduced to out_h x out_w by nearest-neighbor sampling before binning;
// invalid depth pixels stay out of the map.
ClassMap depth_to_classes(const DepthRaster& depth, int num_classes, float d_min, float d_max,
                          int out_h, int out_w);

// per-image [d_min, d_max] over valid pixels
std::pair<float, float> depth_range(const DepthRaster& depth);

// Projector head: two 1x1 convolutions with rectifiers, spatial max pooling,
// then per-pixel L2 normalization so cosine similarity is a dot product.
struct ProjectorParams {
    int in_dim = 64;
    int mid_dim = 64;
    int out_dim = 128;
    int pool_factor = 2;

    Tensor conv1_w, conv1_b;
    Tensor conv2_w, conv2_b;

    static ProjectorParams random_init(int in_dim, int mid_dim, int out_dim, int pool_factor,
                                       std::uint64_t seed);

    // f_out tokens (grid_h*grid_w x D) -> (h*w x out_dim), rows unit-norm.
    // Rows whose pre-normalization norm is ~0 come back as zero vectors;
    // row_valid (optional out) flags them.
    Tensor project(const Tensor& f_out, int grid_h, int grid_w,
                   std::vector<uint8_t>* row_valid = nullptr) const;
};

struct SocKey {
    Tensor features;  // (h*w) x D_c, unit rows (momentum branch output)
    ClassMap classes;
};

// Contrastive loss over query pixels with at least one positive and one
// negative: -log(exp(Sp) / (exp(Sp) + exp(Sn))). Sp is the mean cosine
// similarity over all positives across key maps; Sn sums the per-key-map
// mean negative similarity (set per_map_negatives=false for a global mean).
// Returns a constant 0 when no pixel is eligible.
Tensor soc_loss(const Tensor& f_q, const ClassMap& y_q, const std::vector<SocKey>& keys,
                bool per_map_negatives = true);

// theta_k <- m * theta_k + (1 - m) * theta_q, parameter by parameter
void ema_update(ParamStore& momentum, const ParamStore& regular, double m);

// Key pairing for one step: partner[i] != i for every i (seeded derangement)
// whenever batch_size >= 2; a singleton batch pairs with itself.
std::vector<int> select_key_partners(int batch_size, std::uint64_t seed, long step);

}  // namespace depthscale
