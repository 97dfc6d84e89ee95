#include "depthscale/soc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "depthscale/errors.hpp"
#include "depthscale/rng.hpp"

namespace depthscale {

ClassMap depth_to_classes(const DepthRaster& depth, int num_classes, float d_min, float d_max,
                          int out_h, int out_w) {
    if (!(d_min < d_max)) throw InputError("depth_to_classes: degenerate depth range");
    if (num_classes < 1) throw InputError("depth_to_classes: need at least one class");
    ClassMap map;
    map.height = out_h;
    map.width = out_w;
    map.num_classes = num_classes;
    map.classes.assign(static_cast<size_t>(out_h) * out_w, 0);
    map.valid.assign(map.classes.size(), 0);
    const double range = static_cast<double>(d_max) - d_min;
    for (int r = 0; r < out_h; ++r)
        for (int c = 0; c < out_w; ++c) {
            // nearest-neighbor reduction of the depth raster
            const int sr = std::min(static_cast<int>((r + 0.5) * depth.height / out_h),
                                    depth.height - 1);
            const int sc = std::min(static_cast<int>((c + 0.5) * depth.width / out_w),
                                    depth.width - 1);
            const size_t o = static_cast<size_t>(r) * out_w + c;
            if (!depth.is_valid(sr, sc)) continue;
            const double d = depth.at(sr, sc);
            int cls = static_cast<int>(std::lround((d_max - d) / range * num_classes));
            cls = std::max(0, std::min(cls, num_classes - 1));
            map.classes[o] = cls;
            map.valid[o] = 1;
        }
    return map;
}

std::pair<float, float> depth_range(const DepthRaster& depth) {
    float lo = 1e30f, hi = -1e30f;
    for (size_t i = 0; i < depth.pixel_count(); ++i) {
        if (!depth.valid[i]) continue;
        lo = std::min(lo, depth.values[i]);
        hi = std::max(hi, depth.values[i]);
    }
    if (hi < lo) throw EmptyMaskError("depth_range: no valid pixels");
    return {lo, hi};
}

ProjectorParams ProjectorParams::random_init(int in_dim, int mid_dim, int out_dim,
                                             int pool_factor, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "projector"));
    auto conv1x1 = [&](int co, int ci) {
        std::vector<double> w(static_cast<size_t>(co) * ci);
        const double std = 1.0 / std::sqrt(static_cast<double>(ci));
        for (auto& v : w) v = std * rng.normal();
        return Tensor::from_data({co, ci, 1, 1}, std::move(w), true);
    };
    ProjectorParams p;
    p.in_dim = in_dim;
    p.mid_dim = mid_dim;
    p.out_dim = out_dim;
    p.pool_factor = pool_factor;
    p.conv1_w = conv1x1(mid_dim, in_dim);
    p.conv1_b = Tensor::zeros({mid_dim}, true);
    p.conv2_w = conv1x1(out_dim, mid_dim);
    p.conv2_b = Tensor::zeros({out_dim}, true);
    return p;
}

Tensor ProjectorParams::project(const Tensor& f_out, int grid_h, int grid_w,
                                std::vector<uint8_t>* row_valid) const {
    if (f_out.shape().size() != 2 || f_out.dim(0) != grid_h * grid_w || f_out.dim(1) != in_dim)
        throw DimensionError("ProjectorParams: token map does not match the patch grid");
    Tensor planes = reshape(transpose2d(f_out), {in_dim, grid_h, grid_w});
    Tensor x = relu(conv2d(planes, conv1_w, conv1_b, 1, 0));
    x = relu(conv2d(x, conv2_w, conv2_b, 1, 0));
    x = maxpool2d(x, pool_factor);
    const int h = grid_h / pool_factor, w = grid_w / pool_factor;
    Tensor rows = transpose2d(reshape(x, {out_dim, h * w}));  // (h*w) x D_c

    // unit rows; the kEps clamp inside reciprocal(sqrt(.)) maps an all-zero
    // row to the zero vector instead of dividing by zero
    Tensor norm_sq = matmul(mul(rows, rows), Tensor::full({out_dim, 1}, 1.0));
    Tensor inv_norm = reciprocal(sqrt_op(norm_sq));
    Tensor unit = mul(rows, matmul(inv_norm, Tensor::full({1, out_dim}, 1.0)));
    if (row_valid) {
        row_valid->assign(static_cast<size_t>(h) * w, 0);
        for (int i = 0; i < h * w; ++i)
            (*row_valid)[static_cast<size_t>(i)] =
                norm_sq.value()[static_cast<size_t>(i)] > kEps ? 1 : 0;
    }
    return unit;
}

Tensor soc_loss(const Tensor& f_q, const ClassMap& y_q, const std::vector<SocKey>& keys,
                bool per_map_negatives) {
    const int n = f_q.dim(0);
    if (static_cast<size_t>(n) != y_q.pixel_count())
        throw DimensionError("soc_loss: query feature/class resolutions disagree");

    // constant per-pixel positive/negative bookkeeping across all key maps
    std::vector<double> pos_count(static_cast<size_t>(n), 0.0);
    std::vector<Tensor> pos_sums;   // n x 1 each
    std::vector<Tensor> neg_means;  // n x 1 each (per-map mean) or sums for global mode
    std::vector<double> neg_count_global(static_cast<size_t>(n), 0.0);

    for (const auto& key : keys) {
        const int m = key.features.dim(0);
        if (static_cast<size_t>(m) != key.classes.pixel_count())
            throw DimensionError("soc_loss: key feature/class resolutions disagree");
        Tensor sim = matmul(f_q, transpose2d(key.features));  // n x m cosine similarities
        std::vector<double> mask_pos(static_cast<size_t>(n) * m, 0.0);
        std::vector<double> mask_neg(static_cast<size_t>(n) * m, 0.0);
        std::vector<double> map_neg_count(static_cast<size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            if (!y_q.valid[static_cast<size_t>(i)]) continue;
            for (int j = 0; j < m; ++j) {
                if (!key.classes.valid[static_cast<size_t>(j)]) continue;
                const bool same = y_q.classes[static_cast<size_t>(i)] ==
                                  key.classes.classes[static_cast<size_t>(j)];
                if (same) {
                    mask_pos[static_cast<size_t>(i) * m + j] = 1.0;
                    pos_count[static_cast<size_t>(i)] += 1.0;
                } else {
                    mask_neg[static_cast<size_t>(i) * m + j] = 1.0;
                    map_neg_count[static_cast<size_t>(i)] += 1.0;
                    neg_count_global[static_cast<size_t>(i)] += 1.0;
                }
            }
        }
        Tensor ones_m = Tensor::full({m, 1}, 1.0);
        pos_sums.push_back(matmul(mul(sim, Tensor::from_data({n, m}, std::move(mask_pos))),
                                  ones_m));
        Tensor neg_sum =
            matmul(mul(sim, Tensor::from_data({n, m}, std::move(mask_neg))), ones_m);
        if (per_map_negatives) {
            std::vector<double> inv(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i)
                inv[static_cast<size_t>(i)] =
                    map_neg_count[static_cast<size_t>(i)] > 0.0
                        ? 1.0 / map_neg_count[static_cast<size_t>(i)]
                        : 0.0;
            neg_means.push_back(mul(neg_sum, Tensor::from_data({n, 1}, std::move(inv))));
        } else {
            neg_means.push_back(neg_sum);
        }
    }

    // eligibility: valid query pixel with >= 1 positive and >= 1 negative
    std::vector<double> eligible(static_cast<size_t>(n), 0.0);
    double eligible_count = 0.0;
    for (int i = 0; i < n; ++i)
        if (y_q.valid[static_cast<size_t>(i)] && pos_count[static_cast<size_t>(i)] > 0.0 &&
            neg_count_global[static_cast<size_t>(i)] > 0.0) {
            eligible[static_cast<size_t>(i)] = 1.0;
            eligible_count += 1.0;
        }
    if (eligible_count == 0.0) return Tensor::scalar(0.0);

    Tensor pos_total = pos_sums[0];
    for (size_t k = 1; k < pos_sums.size(); ++k) pos_total = add(pos_total, pos_sums[k]);
    std::vector<double> inv_pos(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        inv_pos[static_cast<size_t>(i)] = pos_count[static_cast<size_t>(i)] > 0.0
                                              ? 1.0 / pos_count[static_cast<size_t>(i)]
                                              : 0.0;
    Tensor s_pos = mul(pos_total, Tensor::from_data({n, 1}, std::move(inv_pos)));

    Tensor s_neg = neg_means[0];
    for (size_t k = 1; k < neg_means.size(); ++k) s_neg = add(s_neg, neg_means[k]);
    if (!per_map_negatives) {
        std::vector<double> inv_neg(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            inv_neg[static_cast<size_t>(i)] =
                neg_count_global[static_cast<size_t>(i)] > 0.0
                    ? 1.0 / neg_count_global[static_cast<size_t>(i)]
                    : 0.0;
        s_neg = mul(s_neg, Tensor::from_data({n, 1}, std::move(inv_neg)));
    }

    // -log(exp(Sp)/(exp(Sp)+exp(Sn))) == log(1 + exp(Sn - Sp))
    Tensor per_pixel = log_op(add_scalar(exp_op(sub(s_neg, s_pos)), 1.0));
    return masked_mean(per_pixel, eligible);
}

void ema_update(ParamStore& momentum, const ParamStore& regular, double m) {
    for (size_t i = 0; i < momentum.count(); ++i) {
        const auto it =
            std::find(regular.names.begin(), regular.names.end(), momentum.names[i]);
        if (it == regular.names.end())
            throw DimensionError("ema_update: no online parameter named " + momentum.names[i]);
        auto& k = momentum.params[i].raw_value();
        const auto& q = regular.params[it - regular.names.begin()].value();
        if (k.size() != q.size()) throw DimensionError("ema_update: parameter shapes disagree");
        for (size_t j = 0; j < k.size(); ++j) k[j] = m * k[j] + (1.0 - m) * q[j];
    }
}

std::vector<int> select_key_partners(int batch_size, std::uint64_t seed, long step) {
    if (batch_size < 1) throw InputError("select_key_partners: empty batch");
    std::vector<int> partner(static_cast<size_t>(batch_size));
    if (batch_size == 1) {
        partner[0] = 0;  // self-key only; caller logs the warning
        return partner;
    }
    Rng rng(derive_seed(seed, "key-partners", static_cast<std::uint64_t>(step)));
    // Fisher-Yates until no fixed point; expected a handful of tries
    std::iota(partner.begin(), partner.end(), 0);
    for (;;) {
        for (int i = batch_size - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i + 1)));
            std::swap(partner[static_cast<size_t>(i)], partner[static_cast<size_t>(j)]);
        }
        bool derangement = true;
        for (int i = 0; i < batch_size; ++i)
            if (partner[static_cast<size_t>(i)] == i) {
                derangement = false;
                break;
            }
        if (derangement) return partner;
    }
}

}  // namespace depthscale
