#pragma once

#include <cstdint>
#include <vector>

#include "depthscale/io.hpp"
#include "depthscale/tensor.hpp"

namespace depthscale {

struct LossWeights {
    double lambda_si_var = 0.15;  // lambda inside the scale-invariant loss
    double w_si = 1.0;
    double w_tp_si = 0.5;
    double w_soc = 0.1;
    double w_smooth = 0.01;
};

// Scale-invariant log loss: with eps_i = log pred(i) - log target(i) over
// valid pixels, mean(eps^2) - lambda * (mean eps)^2. Masked means stand in
// for the 1/HW factors because ground truth is sparse.
Tensor si_log(const Tensor& pred, const DepthRaster& target, const std::vector<uint8_t>& mask,
              double lambda);

// Threshold-gated pseudo supervision: si_log against the pseudo depth when
// delta1 > rho, else a constant zero that contributes no gradient.
Tensor tp_si(const Tensor& pred, const DepthRaster& pseudo, const std::vector<uint8_t>& mask,
             double delta1_value, double rho, double lambda);

// Edge-aware smoothness: the map is normalized by its spatial mean, forward
// differences are weighted by exp(-|image gradient|) of the channel-mean
// intensity, and the x/y terms are averaged over their difference rasters.
Tensor edge_smooth(const Tensor& map2d, const ImageRaster& image);

// w_si*L_si + w_tp*L_tp + w_soc*L_soc + w_smooth*L_es. Throws NumericError
// naming the offending component if one is non-finite.
Tensor total_loss(const Tensor& l_si, const Tensor& l_tp_si, const Tensor& l_soc,
                  const Tensor& l_smooth, const LossWeights& weights);

}  // namespace depthscale
