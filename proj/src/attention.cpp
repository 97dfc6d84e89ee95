#include "depthscale/attention.hpp"

#include <cmath>

#include "depthscale/errors.hpp"
#include "depthscale/rng.hpp"

namespace depthscale {

namespace {

Tensor random_matrix(int rows, int cols, double std, Rng& rng) {
    std::vector<double> w(static_cast<size_t>(rows) * cols);
    for (auto& v : w) v = std * rng.normal();
    return Tensor::from_data({rows, cols}, std::move(w), true);
}

// non-learned per-row normalization, used only when pre_norm is on
Tensor normalize_rows(const Tensor& x) {
    const int cols = x.dim(1);
    Tensor col_ones = Tensor::full({cols, 1}, 1.0 / cols);
    Tensor row_ones = Tensor::full({1, cols}, 1.0);
    Tensor mu = matmul(x, col_ones);                       // rows x 1
    Tensor centered = sub(x, matmul(mu, row_ones));        // rows x cols
    Tensor var = matmul(mul(centered, centered), col_ones);  // rows x 1
    Tensor inv_std = reciprocal(sqrt_op(add_scalar(var, 1e-6)));
    return mul(centered, matmul(inv_std, row_ones));
}

// scaled dot-product over column-block heads, concatenated
Tensor headed_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    const int dim = q.dim(1);
    const int hd = dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Tensor> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice2d(q, 0, q.dim(0), h * hd, (h + 1) * hd);
        Tensor kh = slice2d(k, 0, k.dim(0), h * hd, (h + 1) * hd);
        Tensor vh = slice2d(v, 0, v.dim(0), h * hd, (h + 1) * hd);
        Tensor logits = mul_scalar(matmul(qh, transpose2d(kh)), scale);
        outs.push_back(matmul(softmax_lastdim(logits), vh));
    }
    return concat_cols(outs);
}

}  // namespace

AttentionParams AttentionParams::random_init(int dim, int heads, std::uint64_t seed) {
    if (dim % heads != 0) throw DimensionError("AttentionParams: dim not divisible by heads");
    Rng rng(derive_seed(seed, "attention"));
    const double std = 1.0 / std::sqrt(static_cast<double>(dim));
    AttentionParams p;
    p.heads = heads;
    p.dim = dim;
    p.wq = random_matrix(dim, dim, std, rng);
    p.wk_img = random_matrix(dim, dim, std, rng);
    p.wv_img = random_matrix(dim, dim, std, rng);
    p.wk_txt = random_matrix(dim, dim, std, rng);
    p.wv_txt = random_matrix(dim, dim, std, rng);
    p.wo = random_matrix(dim, dim, std, rng);
    return p;
}

AttentionParams AttentionParams::zero_init(int dim, int heads) {
    if (dim % heads != 0) throw DimensionError("AttentionParams: dim not divisible by heads");
    AttentionParams p;
    p.heads = heads;
    p.dim = dim;
    p.wq = Tensor::zeros({dim, dim}, true);
    p.wk_img = Tensor::zeros({dim, dim}, true);
    p.wv_img = Tensor::zeros({dim, dim}, true);
    p.wk_txt = Tensor::zeros({dim, dim}, true);
    p.wv_txt = Tensor::zeros({dim, dim}, true);
    p.wo = Tensor::zeros({dim, dim}, true);
    return p;
}

AttentionBranches cross_modality_attention_branches(const Tensor& f_img, const Tensor& f_txt,
                                                    const AttentionParams& params) {
    if (f_img.shape().size() != 2 || f_img.dim(1) != params.dim)
        throw DimensionError("cross_modality_attention: image feature width != D");
    if (f_txt.shape().size() != 2 || f_txt.dim(0) != 1 || f_txt.dim(1) != params.dim)
        throw DimensionError("cross_modality_attention: text feature must be 1 x D");

    Tensor img_in = params.pre_norm ? normalize_rows(f_img) : f_img;
    Tensor txt_in = params.pre_norm ? normalize_rows(f_txt) : f_txt;

    Tensor q = matmul(img_in, params.wq);
    Tensor self_branch = headed_attention(q, matmul(img_in, params.wk_img),
                                          matmul(img_in, params.wv_img), params.heads);
    Tensor text_branch = headed_attention(q, matmul(txt_in, params.wk_txt),
                                          matmul(txt_in, params.wv_txt), params.heads);
    return {matmul(self_branch, params.wo), matmul(text_branch, params.wo)};
}

Tensor cross_modality_attention(const Tensor& f_img, const Tensor& f_txt,
                                const AttentionParams& params) {
    AttentionBranches b = cross_modality_attention_branches(f_img, f_txt, params);
    return add(add(f_img, b.self_branch), b.text_branch);
}

}  // namespace depthscale
