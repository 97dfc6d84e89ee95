#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace depthscale {

// Argument/denominator guard for log, div and reciprocal.
inline constexpr double kEps = 1e-8;

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized on demand, zero-initialized
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    int size() const {
        int n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantics handle to a node of the reverse-mode tape. A Tensor's
// value is immutable once produced by an op; only leaf parameters are
// mutated (by the optimizer, between steps).
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int size() const { return node_->size(); }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }

    const std::vector<double>& value() const { return node_->value; }
    std::vector<double>& raw_value() { return node_->value; }  // leaf params only
    const std::vector<double>& grad() const;
    bool requires_grad() const { return node_->requires_grad; }

    double item() const;

    void zero_grad();
    // Reverse sweep from a scalar tensor; each node visited exactly once.
    void backward();

    std::shared_ptr<detail::Node> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  private:
    std::shared_ptr<detail::Node> node_;
};

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);  // denominator clamped at kEps
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);  // argument clamped at kEps
Tensor relu(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor reciprocal(const Tensor& x);  // argument clamped at kEps
Tensor sqrt_op(const Tensor& x);
Tensor abs_op(const Tensor& x);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// --- linear algebra / structure ---
Tensor matmul(const Tensor& a, const Tensor& b);      // [M,K]x[K,N]
Tensor softmax_lastdim(const Tensor& x);              // max-subtracted
Tensor transpose2d(const Tensor& x);                  // [M,N] -> [N,M]
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor slice2d(const Tensor& x, int r0, int r1, int c0, int c1);
Tensor concat_cols(const std::vector<Tensor>& parts);  // 2-d, same row count

// --- spatial (inputs are [C,H,W]) ---
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding);            // bias may be Tensor() for none
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);  // align-corners false
Tensor maxpool2d(const Tensor& x, int factor);

// --- reductions ---
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sum(x*mask)/Sum(mask); mask is treated as a constant. Throws EmptyMaskError.
Tensor masked_mean(const Tensor& x, const std::vector<double>& mask);

// --- gradient checking ---
struct GradCheckReport {
    double max_rel_deviation = 0.0;
    double max_abs_deviation = 0.0;
    bool ok = false;
};

// Compares backward gradients of a scalar-valued function against central
// finite differences at the given step, element by element.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x,
                           double step = 1e-5, double tol = 1e-4);

}  // namespace depthscale
