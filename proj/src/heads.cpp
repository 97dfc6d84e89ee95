#include "depthscale/heads.hpp"

#include <cmath>

#include "depthscale/errors.hpp"
#include "depthscale/rng.hpp"

namespace depthscale {

namespace {

Tensor conv_weight(int co, int ci, int k, double std, Rng& rng) {
    std::vector<double> w(static_cast<size_t>(co) * ci * k * k);
    for (auto& v : w) v = std * rng.normal();
    return Tensor::from_data({co, ci, k, k}, std::move(w), true);
}

}  // namespace

DecoderHead DecoderHead::random_init(int in_dim, int width, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "decoder"));
    DecoderHead h;
    h.in_dim = in_dim;
    h.width = width;
    h.conv_proj_w = conv_weight(width, in_dim, 3, 1.0 / std::sqrt(9.0 * in_dim), rng);
    h.conv_proj_b = Tensor::zeros({width}, true);
    h.conv_up1_w = conv_weight(width, width, 3, 1.0 / std::sqrt(9.0 * width), rng);
    h.conv_up1_b = Tensor::zeros({width}, true);
    h.conv_up2_w = conv_weight(width, width, 3, 1.0 / std::sqrt(9.0 * width), rng);
    h.conv_up2_b = Tensor::zeros({width}, true);
    // small final projection keeps exp() near 1 at the start
    h.conv_out_w = conv_weight(1, width, 1, 0.01, rng);
    h.conv_out_b = Tensor::zeros({1}, true);
    return h;
}

Tensor DecoderHead::decode(const Tensor& f_out, int grid_h, int grid_w, int out_h,
                           int out_w) const {
    if (f_out.shape().size() != 2 || f_out.dim(0) != grid_h * grid_w ||
        f_out.dim(1) != in_dim)
        throw DimensionError("DecoderHead: token map does not match the patch grid");
    // tokens (HW_p x D) -> feature planes (D x h_p x w_p)
    Tensor planes = reshape(transpose2d(f_out), {in_dim, grid_h, grid_w});
    Tensor x = relu(conv2d(planes, conv_proj_w, conv_proj_b, 1, 1));
    x = bilinear_resize(x, grid_h * 2, grid_w * 2);
    x = relu(conv2d(x, conv_up1_w, conv_up1_b, 1, 1));
    x = bilinear_resize(x, grid_h * 4, grid_w * 4);
    x = relu(conv2d(x, conv_up2_w, conv_up2_b, 1, 1));
    x = conv2d(x, conv_out_w, conv_out_b, 1, 0);
    x = bilinear_resize(x, out_h, out_w);
    return exp_op(reshape(x, {out_h, out_w}));
}

Tensor rescale_depth(const Tensor& rel, const Tensor& scale_map, const Tensor& shift_map) {
    if (rel.shape() != scale_map.shape() || rel.shape() != shift_map.shape())
        throw DimensionError("rescale_depth: raster shapes disagree");
    return reciprocal(add(mul(scale_map, rel), shift_map));
}

}  // namespace depthscale
