#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "depthscale/io.hpp"
#include "depthscale/tensor.hpp"

namespace depthscale {

// Frozen patch encoder: each PxPx3 patch is flattened, multiplied by a
// seeded random projection with orthonormal rows, and offset by a fixed
// sinusoidal positional term. Output is (H/P * W/P) x D with no gradient.
class ToyImageEncoder {
  public:
    ToyImageEncoder(int patch, int dim, std::uint64_t seed);

    Tensor encode(const ImageRaster& image) const;
    // projection only, no positional term; used by locality tests
    Tensor encode_no_positional(const ImageRaster& image) const;

    int patch() const { return patch_; }
    int dim() const { return dim_; }
    // digest of the frozen projection, for freeze-invariance checks
    std::uint64_t weight_hash() const;

  private:
    int patch_;
    int dim_;
    std::vector<double> projection_;  // dim x (3*patch*patch), orthonormal rows
};

// Frozen bag-of-tokens encoder: mean of seeded hash embeddings,
// L2-normalized; order-invariant.
class ToyTextEncoder {
  public:
    ToyTextEncoder(int dim, std::uint64_t seed);

    Tensor encode(const std::vector<std::string>& tokens) const;  // 1 x dim

    int dim() const { return dim_; }

  private:
    int dim_;
    std::uint64_t seed_;
};

// Trainable affine map from the raw text dimension D' to the image
// dimension D. Identity init is available for tests when D == D'.
struct TextAlign {
    Tensor weight;  // D' x D
    Tensor bias;    // 1 x D

    static TextAlign random_init(int d_in, int d_out, std::uint64_t seed);
    static TextAlign identity_init(int d);

    Tensor apply(const Tensor& raw) const;  // 1 x D' -> 1 x D
};

// Externally precomputed embedding matrix (PFM convention), returned frozen.
Tensor load_embeddings(const std::string& path, int rows, int cols);

}  // namespace depthscale
