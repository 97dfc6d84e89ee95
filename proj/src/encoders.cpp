#include "depthscale/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "depthscale/errors.hpp"
#include "depthscale/rng.hpp"

namespace depthscale {

namespace {

// Gram-Schmidt over seeded Gaussian rows; requires rows <= cols.
std::vector<double> orthonormal_rows(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> m(static_cast<size_t>(rows) * cols);
    for (auto& v : m) v = rng.normal();
    for (int r = 0; r < rows; ++r) {
        double* row = &m[static_cast<size_t>(r) * cols];
        for (int p = 0; p < r; ++p) {
            const double* prev = &m[static_cast<size_t>(p) * cols];
            double dot = 0.0;
            for (int c = 0; c < cols; ++c) dot += row[c] * prev[c];
            for (int c = 0; c < cols; ++c) row[c] -= dot * prev[c];
        }
        double norm = 0.0;
        for (int c = 0; c < cols; ++c) norm += row[c] * row[c];
        norm = std::sqrt(std::max(norm, 1e-12));
        for (int c = 0; c < cols; ++c) row[c] /= norm;
    }
    return m;
}

double positional_term(int token, int channel, int dim) {
    const double rate = std::pow(10000.0, -static_cast<double>(channel / 2 * 2) / dim);
    return (channel % 2 == 0) ? std::sin(token * rate) : std::cos(token * rate);
}

}  // namespace

ToyImageEncoder::ToyImageEncoder(int patch, int dim, std::uint64_t seed)
    : patch_(patch), dim_(dim) {
    const int patch_len = 3 * patch * patch;
    if (dim > patch_len)
        throw DimensionError("ToyImageEncoder: dim exceeds patch length " +
                             std::to_string(patch_len));
    projection_ = orthonormal_rows(dim, patch_len, derive_seed(seed, "image-encoder"));
}

Tensor ToyImageEncoder::encode_no_positional(const ImageRaster& image) const {
    if (image.height % patch_ != 0 || image.width % patch_ != 0)
        throw DimensionError("ToyImageEncoder: image dims not divisible by patch size");
    const int gh = image.height / patch_, gw = image.width / patch_;
    const int patch_len = 3 * patch_ * patch_;
    std::vector<double> tokens(static_cast<size_t>(gh) * gw * dim_, 0.0);
    std::vector<double> flat(static_cast<size_t>(patch_len));
    for (int pr = 0; pr < gh; ++pr)
        for (int pc = 0; pc < gw; ++pc) {
            int k = 0;
            for (int r = 0; r < patch_; ++r)
                for (int c = 0; c < patch_; ++c)
                    for (int ch = 0; ch < 3; ++ch)
                        flat[static_cast<size_t>(k++)] =
                            image.at(pr * patch_ + r, pc * patch_ + c, ch);
            const int t = pr * gw + pc;
            for (int d = 0; d < dim_; ++d) {
                double acc = 0.0;
                const double* row = &projection_[static_cast<size_t>(d) * patch_len];
                for (int i = 0; i < patch_len; ++i) acc += row[i] * flat[static_cast<size_t>(i)];
                tokens[static_cast<size_t>(t) * dim_ + d] = acc;
            }
        }
    return Tensor::from_data({gh * gw, dim_}, std::move(tokens));
}

Tensor ToyImageEncoder::encode(const ImageRaster& image) const {
    Tensor base = encode_no_positional(image);
    const int n = base.dim(0);
    auto data = base.value();
    for (int t = 0; t < n; ++t)
        for (int d = 0; d < dim_; ++d)
            data[static_cast<size_t>(t) * dim_ + d] += positional_term(t, d, dim_);
    return Tensor::from_data({n, dim_}, std::move(data));
}

std::uint64_t ToyImageEncoder::weight_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (double v : projection_) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        __builtin_memcpy(&bits, &v, sizeof(bits));
        h = mix64(h ^ bits);
    }
    return h;
}

ToyTextEncoder::ToyTextEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

Tensor ToyTextEncoder::encode(const std::vector<std::string>& tokens) const {
    if (tokens.empty()) throw InputError("ToyTextEncoder: empty token list");
    // accumulate in sorted order so the embedding is exactly order-invariant
    std::vector<std::string> sorted(tokens);
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> acc(static_cast<size_t>(dim_), 0.0);
    for (const auto& tok : sorted) {
        Rng rng(derive_seed(seed_, "text-token-" + tok));
        for (int d = 0; d < dim_; ++d) acc[static_cast<size_t>(d)] += rng.normal();
    }
    for (auto& v : acc) v /= static_cast<double>(tokens.size());
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(std::max(norm, 1e-12));
    for (auto& v : acc) v /= norm;
    return Tensor::from_data({1, dim_}, std::move(acc));
}

TextAlign TextAlign::random_init(int d_in, int d_out, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "text-align"));
    std::vector<double> w(static_cast<size_t>(d_in) * d_out);
    const double std = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (auto& v : w) v = std * rng.normal();
    TextAlign a;
    a.weight = Tensor::from_data({d_in, d_out}, std::move(w), true);
    a.bias = Tensor::zeros({1, d_out}, true);
    return a;
}

TextAlign TextAlign::identity_init(int d) {
    std::vector<double> w(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) w[static_cast<size_t>(i) * d + i] = 1.0;
    TextAlign a;
    a.weight = Tensor::from_data({d, d}, std::move(w), true);
    a.bias = Tensor::zeros({1, d}, true);
    return a;
}

Tensor TextAlign::apply(const Tensor& raw) const {
    return add(matmul(raw, weight), bias);
}

Tensor load_embeddings(const std::string& path, int rows, int cols) {
    return Tensor::from_data({rows, cols}, read_pfm_matrix(path, rows, cols));
}

}  // namespace depthscale
