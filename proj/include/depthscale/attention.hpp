#pragma once

#include <cstdint>

#include "depthscale/tensor.hpp"

namespace depthscale {

// Projections for the two-branch attention block. The image query is shared
// between the self-attention branch and the text branch; keys/values are
// per-modality. All matrices are D x D with heads as column blocks.
struct AttentionParams {
    int heads = 4;
    int dim = 64;  // D; head width is dim / heads
    bool pre_norm = false;

    Tensor wq;      // image query
    Tensor wk_img;  // image keys
    Tensor wv_img;  // image values
    Tensor wk_txt;  // text keys
    Tensor wv_txt;  // text values
    Tensor wo;      // output projection, applied to each branch

    static AttentionParams random_init(int dim, int heads, std::uint64_t seed);
    static AttentionParams zero_init(int dim, int heads);

    int head_dim() const { return dim / heads; }
};

// F_out = F_I + Attn(image self) + Attn(image query, single text key/value),
// per-head scaled dot-product with 1/sqrt(d), heads concatenated and
// output-projected. With zero projections the block is the identity on F_I.
Tensor cross_modality_attention(const Tensor& f_img, const Tensor& f_txt,
                                const AttentionParams& params);

// the two branch outputs before the residual sum, for diagnostics/tests
struct AttentionBranches {
    Tensor self_branch;
    Tensor text_branch;
};
AttentionBranches cross_modality_attention_branches(const Tensor& f_img, const Tensor& f_txt,
                                                    const AttentionParams& params);

}  // namespace depthscale
