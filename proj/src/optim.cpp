#include "depthscale/optim.hpp"

#include <cmath>

#include "depthscale/errors.hpp"

namespace depthscale {

void AdamW::attach(ParamStore& store) {
    m_.clear();
    v_.clear();
    for (auto& p : store.params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
    t_ = 0;
}

bool AdamW::step(ParamStore& store, double lr_override) {
    if (m_.size() != store.count())
        throw DimensionError("AdamW::step: optimizer not attached to this store");
    for (size_t pi = 0; pi < store.count(); ++pi) {
        const auto& g = store.params[pi].grad();
        for (double gv : g)
            if (!std::isfinite(gv)) return false;
    }
    const double lr = lr_override >= 0.0 ? lr_override : cfg_.lr;
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t pi = 0; pi < store.count(); ++pi) {
        auto& w = store.params[pi].raw_value();
        const auto& g = store.params[pi].grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[i]);
        }
    }
    return true;
}

}  // namespace depthscale
