#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "depthscale/io.hpp"

namespace depthscale {

// Whether the affine fit runs directly in depth space or against inverse
// depth (with the fitted map inverted back afterwards). Relative estimators
// differ in which quantity they emit, so both are exposed.
enum class AlignMode { Literal, Disparity };

struct AlignmentResult {
    double alpha = 0.0;
    double beta = 0.0;
    double delta1 = 0.0;
    bool credible = false;
};

// Exact normal-equations minimizer of sum((alpha*rel + beta - target)^2)
// over valid pixels; sums accumulate in double precision. Throws
// DegenerateAlignmentError when rel is constant on the valid set or fewer
// than 2 pixels are valid.
std::pair<double, double> lsq_align(const DepthRaster& rel, const DepthRaster& gt,
                                    const std::vector<uint8_t>& mask,
                                    AlignMode mode = AlignMode::Literal);

// alpha*rel + beta per pixel (inverted afterwards in Disparity mode);
// non-positive results are marked invalid.
DepthRaster pseudo_depth(const DepthRaster& rel, double alpha, double beta,
                         AlignMode mode = AlignMode::Literal);

// fraction of valid pixels with max(pred/gt, gt/pred) < 1.25
double delta1(const DepthRaster& pred, const DepthRaster& gt,
              const std::vector<uint8_t>& mask);

// strict inequality, per the indicator of the gated pseudo loss
bool gate(double delta1_value, double rho);

// convenience: align, build pseudo depth, score it and apply the gate
struct AlignedPseudo {
    AlignmentResult result;
    DepthRaster pseudo;
};
AlignedPseudo align_and_gate(const DepthRaster& rel, const DepthRaster& gt,
                             const std::vector<uint8_t>& mask, double rho,
                             AlignMode mode = AlignMode::Literal);

}  // namespace depthscale
