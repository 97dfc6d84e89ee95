#include "depthscale/losses.hpp"

#include <cmath>

#include "depthscale/errors.hpp"

namespace depthscale {

Tensor si_log(const Tensor& pred, const DepthRaster& target, const std::vector<uint8_t>& mask,
              double lambda) {
    if (pred.size() != static_cast<int>(target.pixel_count()) ||
        mask.size() != target.pixel_count())
        throw DimensionError("si_log: raster sizes disagree");
    std::vector<double> log_target(target.pixel_count());
    std::vector<double> m(target.pixel_count());
    for (size_t i = 0; i < target.pixel_count(); ++i) {
        const bool ok = mask[i] && target.valid[i];
        m[i] = ok ? 1.0 : 0.0;
        log_target[i] = ok ? std::log(static_cast<double>(target.values[i])) : 0.0;
    }
    Tensor eps = sub(log_op(pred), Tensor::from_data(pred.shape(), std::move(log_target)));
    Tensor mean_sq = masked_mean(mul(eps, eps), m);
    Tensor mean_eps = masked_mean(eps, m);
    return sub(mean_sq, mul_scalar(mul(mean_eps, mean_eps), lambda));
}

Tensor tp_si(const Tensor& pred, const DepthRaster& pseudo, const std::vector<uint8_t>& mask,
             double delta1_value, double rho, double lambda) {
    if (!(delta1_value > rho)) return Tensor::scalar(0.0);
    std::vector<uint8_t> gated(mask.size());
    for (size_t i = 0; i < mask.size(); ++i) gated[i] = mask[i] && pseudo.valid[i] ? 1 : 0;
    return si_log(pred, pseudo, gated, lambda);
}

Tensor edge_smooth(const Tensor& map2d, const ImageRaster& image) {
    if (map2d.shape().size() != 2 || map2d.dim(0) != image.height ||
        map2d.dim(1) != image.width)
        throw DimensionError("edge_smooth: map and image sizes disagree");
    const int h = image.height, w = image.width;

    Tensor normalized = divide(map2d, mean(map2d));

    // e^{-|forward difference|} of the channel-mean intensity, as constants
    std::vector<double> wx(static_cast<size_t>(h) * (w - 1));
    std::vector<double> wy(static_cast<size_t>(h - 1) * w);
    auto intensity = [&](int r, int c) {
        return (image.at(r, c, 0) + image.at(r, c, 1) + image.at(r, c, 2)) / 3.0;
    };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c + 1 < w; ++c)
            wx[static_cast<size_t>(r) * (w - 1) + c] =
                std::exp(-std::fabs(intensity(r, c + 1) - intensity(r, c)));
    for (int r = 0; r + 1 < h; ++r)
        for (int c = 0; c < w; ++c)
            wy[static_cast<size_t>(r) * w + c] =
                std::exp(-std::fabs(intensity(r + 1, c) - intensity(r, c)));

    Tensor dx = abs_op(sub(slice2d(normalized, 0, h, 1, w), slice2d(normalized, 0, h, 0, w - 1)));
    Tensor dy = abs_op(sub(slice2d(normalized, 1, h, 0, w), slice2d(normalized, 0, h - 1, 0, w)));
    Tensor term_x = mean(mul(dx, Tensor::from_data({h, w - 1}, std::move(wx))));
    Tensor term_y = mean(mul(dy, Tensor::from_data({h - 1, w}, std::move(wy))));
    return add(term_x, term_y);
}

Tensor total_loss(const Tensor& l_si, const Tensor& l_tp_si, const Tensor& l_soc,
                  const Tensor& l_smooth, const LossWeights& weights) {
    const char* names[4] = {"si", "tp-si", "soc", "smooth"};
    const Tensor* comps[4] = {&l_si, &l_tp_si, &l_soc, &l_smooth};
    for (int i = 0; i < 4; ++i)
        if (!std::isfinite(comps[i]->item()))
            throw NumericError(std::string("total_loss: non-finite component '") + names[i] +
                               "'");
    Tensor total = mul_scalar(l_si, weights.w_si);
    total = add(total, mul_scalar(l_tp_si, weights.w_tp_si));
    total = add(total, mul_scalar(l_soc, weights.w_soc));
    total = add(total, mul_scalar(l_smooth, weights.w_smooth));
    return total;
}

}  // namespace depthscale
