#pragma once

#include <string>
#include <vector>

#include "depthscale/tensor.hpp"

namespace depthscale {

// Named trainable parameters in a fixed registration order, so that
// checkpointing and reductions stay deterministic.
struct ParamStore {
    std::vector<std::string> names;
    std::vector<Tensor> params;

    Tensor& add(const std::string& name, Tensor t) {
        names.push_back(name);
        params.push_back(std::move(t));
        return params.back();
    }
    size_t count() const { return params.size(); }
};

struct AdamWConfig {
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled-weight-decay Adam. State moments are per-parameter and updated
// in place; a step with any non-finite gradient is rejected as a whole.
class AdamW {
  public:
    explicit AdamW(const AdamWConfig& cfg = {}) : cfg_(cfg) {}

    void attach(ParamStore& store);

    // Returns false (and leaves params and state untouched) if any gradient
    // is non-finite.
    bool step(ParamStore& store, double lr_override = -1.0);

    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }

    std::vector<std::vector<double>>& moments1() { return m_; }
    std::vector<std::vector<double>>& moments2() { return v_; }
    const AdamWConfig& config() const { return cfg_; }

  private:
    AdamWConfig cfg_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace depthscale
