#include "depthscale/align.hpp"

#include <cmath>

#include "depthscale/errors.hpp"

namespace depthscale {

std::pair<double, double> lsq_align(const DepthRaster& rel, const DepthRaster& gt,
                                    const std::vector<uint8_t>& mask, AlignMode mode) {
    if (rel.pixel_count() != gt.pixel_count() || mask.size() != rel.pixel_count())
        throw DimensionError("lsq_align: raster sizes disagree");
    // normal equations over v = (rel, 1): [s_xx s_x; s_x n] h = [s_xy; s_y]
    double s_xx = 0.0, s_x = 0.0, s_xy = 0.0, s_y = 0.0;
    long n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i] || !rel.valid[i] || !gt.valid[i]) continue;
        const double x = rel.values[i];
        double y = gt.values[i];
        if (mode == AlignMode::Disparity) y = 1.0 / y;
        s_xx += x * x;
        s_x += x;
        s_xy += x * y;
        s_y += y;
        ++n;
    }
    if (n < 2) throw DegenerateAlignmentError("lsq_align: fewer than 2 valid pixels");
    const double nd = static_cast<double>(n);
    const double det = s_xx * nd - s_x * s_x;
    // det = n * sum((x - mean)^2); zero iff rel is constant on the valid set
    if (std::fabs(det) <= 1e-12 * std::max(1.0, s_xx * nd))
        throw DegenerateAlignmentError("lsq_align: singular normal matrix (constant input)");
    const double alpha = (s_xy * nd - s_x * s_y) / det;
    const double beta = (s_xx * s_y - s_x * s_xy) / det;
    return {alpha, beta};
}

DepthRaster pseudo_depth(const DepthRaster& rel, double alpha, double beta, AlignMode mode) {
    if (!std::isfinite(alpha) || !std::isfinite(beta))
        throw NumericError("pseudo_depth: non-finite alignment");
    DepthRaster out;
    out.height = rel.height;
    out.width = rel.width;
    out.values.resize(rel.pixel_count());
    out.valid.resize(rel.pixel_count());
    for (size_t i = 0; i < rel.pixel_count(); ++i) {
        double v = alpha * rel.values[i] + beta;
        if (mode == AlignMode::Disparity) v = v > 1e-8 ? 1.0 / v : 0.0;
        out.values[i] = static_cast<float>(v);
        out.valid[i] = (rel.valid[i] && std::isfinite(v) && v > 0.0) ? 1 : 0;
    }
    return out;
}

double delta1(const DepthRaster& pred, const DepthRaster& gt,
              const std::vector<uint8_t>& mask) {
    if (pred.pixel_count() != gt.pixel_count() || mask.size() != pred.pixel_count())
        throw DimensionError("delta1: raster sizes disagree");
    long hits = 0, n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i] || !gt.valid[i]) continue;
        ++n;
        if (!pred.valid[i]) continue;  // invalid prediction never passes
        const double p = pred.values[i], g = gt.values[i];
        const double ratio = std::max(p / g, g / p);
        if (ratio < 1.25) ++hits;
    }
    if (n == 0) throw EmptyMaskError("delta1: no valid pixels");
    return static_cast<double>(hits) / static_cast<double>(n);
}

bool gate(double delta1_value, double rho) { return delta1_value > rho; }

AlignedPseudo align_and_gate(const DepthRaster& rel, const DepthRaster& gt,
                             const std::vector<uint8_t>& mask, double rho, AlignMode mode) {
    auto [alpha, beta] = lsq_align(rel, gt, mask, mode);
    AlignedPseudo out;
    out.pseudo = pseudo_depth(rel, alpha, beta, mode);
    out.result.alpha = alpha;
    out.result.beta = beta;
    out.result.delta1 = delta1(out.pseudo, gt, mask);
    out.result.credible = gate(out.result.delta1, rho);
    return out;
}

}  // namespace depthscale
