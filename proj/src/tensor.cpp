#include "depthscale/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "depthscale/errors.hpp"

namespace depthscale {

using detail::Node;

namespace {

std::shared_ptr<Node> make_node(std::vector<int> shape, std::vector<double> value,
                                bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

bool any_grad(const std::vector<Tensor>& parents) {
    for (const auto& p : parents)
        if (p.defined() && p.requires_grad()) return true;
    return false;
}

std::shared_ptr<Node> op_node(std::vector<int> shape, std::vector<double> value,
                              std::vector<Tensor> parents,
                              std::function<void(Node&)> backward) {
    auto n = make_node(std::move(shape), std::move(value), any_grad(parents));
    if (n->requires_grad) {
        for (auto& p : parents)
            if (p.defined()) n->parents.push_back(p.node());
        n->backward_fn = std::move(backward);
    }
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": operand shapes differ");
}

// Binary elementwise with scalar (size-1) broadcast on either side.
Tensor binary_ew(const Tensor& a, const Tensor& b, const char* name,
                 double (*fwd)(double, double),
                 double (*dfa)(double, double),
                 double (*dfb)(double, double)) {
    const bool a_scalar = a.size() == 1;
    const bool b_scalar = b.size() == 1;
    if (!a_scalar && !b_scalar) check_same_shape(a, b, name);
    const auto& av = a.value();
    const auto& bv = b.value();
    const int n = a_scalar ? b.size() : a.size();
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = av[a_scalar ? 0 : static_cast<size_t>(i)];
        double y = bv[b_scalar ? 0 : static_cast<size_t>(i)];
        out[static_cast<size_t>(i)] = fwd(x, y);
    }
    auto an = a.node();
    auto bn = b.node();
    auto shape = (a_scalar && !b_scalar) ? b.shape() : a.shape();
    return Tensor(op_node(shape, std::move(out), {a, b}, [an, bn, a_scalar, b_scalar, n,
                                                          dfa, dfb](Node& self) {
        for (int i = 0; i < n; ++i) {
            double g = self.grad[static_cast<size_t>(i)];
            double x = an->value[a_scalar ? 0 : static_cast<size_t>(i)];
            double y = bn->value[b_scalar ? 0 : static_cast<size_t>(i)];
            if (an->requires_grad) {
                an->ensure_grad();
                an->grad[a_scalar ? 0 : static_cast<size_t>(i)] += g * dfa(x, y);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                bn->grad[b_scalar ? 0 : static_cast<size_t>(i)] += g * dfb(x, y);
            }
        }
    }));
}

Tensor unary_ew(const Tensor& x, double (*fwd)(double), double (*df)(double)) {
    const auto& xv = x.value();
    const int n = x.size();
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = fwd(xv[static_cast<size_t>(i)]);
    auto xn = x.node();
    return Tensor(op_node(x.shape(), std::move(out), {x}, [xn, n, df](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int i = 0; i < n; ++i)
            xn->grad[static_cast<size_t>(i)] +=
                self.grad[static_cast<size_t>(i)] * df(xn->value[static_cast<size_t>(i)]);
    }));
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    int n = 1;
    for (int d : shape) n *= d;
    return Tensor(make_node(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
                            requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
    int n = 1;
    for (int d : shape) n *= d;
    return Tensor(make_node(std::move(shape), std::vector<double>(static_cast<size_t>(n), v),
                            requires_grad));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    int n = 1;
    for (int d : shape) n *= d;
    if (n != static_cast<int>(data.size()))
        throw DimensionError("from_data: shape product != data length");
    return Tensor(make_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(make_node({1}, {v}, requires_grad));
}

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item: tensor is not a scalar");
    return node_->value[0];
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::backward() {
    if (size() != 1) throw DimensionError("backward: root must be scalar");
    // iterative post-order topological sort
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* n;
        size_t next_parent;
    };
    std::vector<Frame> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            Node* p = f.n->parents[f.next_parent++].get();
            if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }
    // interior grads are scratch space for this sweep; leaves accumulate
    for (Node* n : order)
        if (n->backward_fn) n->grad.clear();
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

// --- elementwise ---

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "div", [](double x, double y) { return x / std::max(y, kEps); },
        [](double, double y) { return 1.0 / std::max(y, kEps); },
        [](double x, double y) {
            if (y <= kEps) return 0.0;  // clamped region: constant in y
            return -x / (y * y);
        });
}

Tensor exp_op(const Tensor& x) {
    return unary_ew(x, [](double v) { return std::exp(v); },
                    [](double v) { return std::exp(v); });
}

Tensor log_op(const Tensor& x) {
    return unary_ew(x, [](double v) { return std::log(std::max(v, kEps)); },
                    [](double v) { return v <= kEps ? 0.0 : 1.0 / v; });
}

Tensor relu(const Tensor& x) {
    return unary_ew(x, [](double v) { return v > 0.0 ? v : 0.0; },
                    [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor neg(const Tensor& x) {
    return unary_ew(x, [](double v) { return -v; }, [](double) { return -1.0; });
}

Tensor reciprocal(const Tensor& x) {
    return unary_ew(x, [](double v) { return 1.0 / std::max(v, kEps); },
                    [](double v) { return v <= kEps ? 0.0 : -1.0 / (v * v); });
}

Tensor sqrt_op(const Tensor& x) {
    return unary_ew(x, [](double v) { return std::sqrt(std::max(v, 0.0)); },
                    [](double v) {
                        double s = std::sqrt(std::max(v, kEps));
                        return 0.5 / s;
                    });
}

Tensor abs_op(const Tensor& x) {
    return unary_ew(x, [](double v) { return std::fabs(v); },
                    [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor add_scalar(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }

Tensor mul_scalar(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }

// --- linear algebra / structure ---

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2)
        throw DimensionError("matmul: operands must be 2-d");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) throw DimensionError("matmul: inner dimensions disagree");
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const auto& av = a.value();
    const auto& bv = b.value();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double aip = av[static_cast<size_t>(i) * k + p];
            for (int j = 0; j < n; ++j)
                out[static_cast<size_t>(i) * n + j] += aip * bv[static_cast<size_t>(p) * n + j];
        }
    auto an = a.node();
    auto bn = b.node();
    return Tensor(op_node({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            // dA = dC * B^T
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j)
                        acc += self.grad[static_cast<size_t>(i) * n + j] *
                               bn->value[static_cast<size_t>(p) * n + j];
                    an->grad[static_cast<size_t>(i) * k + p] += acc;
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            // dB = A^T * dC
            for (int p = 0; p < k; ++p)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i)
                        acc += an->value[static_cast<size_t>(i) * k + p] *
                               self.grad[static_cast<size_t>(i) * n + j];
                    bn->grad[static_cast<size_t>(p) * n + j] += acc;
                }
        }
    }));
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.shape().empty() || x.shape().back() < 1)
        throw DimensionError("softmax_lastdim: last dimension must be >= 1");
    const int cols = x.shape().back();
    const int rows = x.size() / cols;
    std::vector<double> out(x.value().size());
    const auto& xv = x.value();
    for (int r = 0; r < rows; ++r) {
        const size_t base = static_cast<size_t>(r) * cols;
        double mx = xv[base];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, xv[base + c]);
        double z = 0.0;
        for (int c = 0; c < cols; ++c) {
            out[base + c] = std::exp(xv[base + c] - mx);
            z += out[base + c];
        }
        for (int c = 0; c < cols; ++c) out[base + c] /= z;
    }
    auto xn = x.node();
    return Tensor(op_node(x.shape(), out, {x}, [xn, rows, cols, out](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const size_t base = static_cast<size_t>(r) * cols;
            double dot = 0.0;
            for (int c = 0; c < cols; ++c) dot += self.grad[base + c] * out[base + c];
            for (int c = 0; c < cols; ++c)
                xn->grad[base + c] += out[base + c] * (self.grad[base + c] - dot);
        }
    }));
}

Tensor transpose2d(const Tensor& x) {
    if (x.shape().size() != 2) throw DimensionError("transpose2d: tensor must be 2-d");
    const int m = x.dim(0), n = x.dim(1);
    std::vector<double> out(x.value().size());
    const auto& xv = x.value();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<size_t>(j) * m + i] = xv[static_cast<size_t>(i) * n + j];
    auto xn = x.node();
    return Tensor(op_node({n, m}, std::move(out), {x}, [xn, m, n](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                xn->grad[static_cast<size_t>(i) * n + j] +=
                    self.grad[static_cast<size_t>(j) * m + i];
    }));
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    int n = 1;
    for (int d : shape) n *= d;
    if (n != x.size()) throw DimensionError("reshape: element count changes");
    auto xn = x.node();
    const int total = n;
    return Tensor(op_node(std::move(shape), x.value(), {x}, [xn, total](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int i = 0; i < total; ++i)
            xn->grad[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i)];
    }));
}

Tensor slice2d(const Tensor& x, int r0, int r1, int c0, int c1) {
    if (x.shape().size() != 2) throw DimensionError("slice2d: tensor must be 2-d");
    const int rows = x.dim(0), cols = x.dim(1);
    if (r0 < 0 || c0 < 0 || r1 > rows || c1 > cols || r0 >= r1 || c0 >= c1)
        throw DimensionError("slice2d: bounds out of range");
    const int oh = r1 - r0, ow = c1 - c0;
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    const auto& xv = x.value();
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j)
            out[static_cast<size_t>(i) * ow + j] =
                xv[static_cast<size_t>(i + r0) * cols + (j + c0)];
    auto xn = x.node();
    return Tensor(op_node({oh, ow}, std::move(out), {x}, [xn, r0, c0, oh, ow, cols](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j)
                xn->grad[static_cast<size_t>(i + r0) * cols + (j + c0)] +=
                    self.grad[static_cast<size_t>(i) * ow + j];
    }));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no operands");
    const int rows = parts[0].dim(0);
    int total_cols = 0;
    for (const auto& p : parts) {
        if (p.shape().size() != 2 || p.dim(0) != rows)
            throw DimensionError("concat_cols: row counts disagree");
        total_cols += p.dim(1);
    }
    std::vector<double> out(static_cast<size_t>(rows) * total_cols);
    int off = 0;
    for (const auto& p : parts) {
        const int pc = p.dim(1);
        const auto& pv = p.value();
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < pc; ++j)
                out[static_cast<size_t>(i) * total_cols + off + j] =
                    pv[static_cast<size_t>(i) * pc + j];
        off += pc;
    }
    std::vector<std::pair<std::shared_ptr<Node>, int>> srcs;
    for (const auto& p : parts) srcs.emplace_back(p.node(), p.dim(1));
    return Tensor(op_node({rows, total_cols}, std::move(out), parts,
                          [srcs, rows, total_cols](Node& self) {
                              int off = 0;
                              for (const auto& [pn, pc] : srcs) {
                                  if (pn->requires_grad) {
                                      pn->ensure_grad();
                                      for (int i = 0; i < rows; ++i)
                                          for (int j = 0; j < pc; ++j)
                                              pn->grad[static_cast<size_t>(i) * pc + j] +=
                                                  self.grad[static_cast<size_t>(i) * total_cols +
                                                            off + j];
                                  }
                                  off += pc;
                              }
                          }));
}

// --- spatial ---

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    if (x.shape().size() != 3 || w.shape().size() != 4)
        throw DimensionError("conv2d: expected [C,H,W] input and [Co,Ci,k,k] weight");
    const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int co = w.dim(0), wci = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (wci != ci) throw DimensionError("conv2d: channel counts disagree");
    if (bias.defined() && bias.size() != co)
        throw DimensionError("conv2d: bias size != out channels");
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (wd + 2 * padding - kw) / stride + 1;
    if (oh <= 0 || ow <= 0) throw DimensionError("conv2d: non-positive output size");

    std::vector<double> out(static_cast<size_t>(co) * oh * ow, 0.0);
    const auto& xv = x.value();
    const auto& wv = w.value();
    auto xat = [&](int c, int i, int j) {
        return xv[(static_cast<size_t>(c) * h + i) * wd + j];
    };
    for (int oc = 0; oc < co; ++oc) {
        const double b = bias.defined() ? bias.value()[static_cast<size_t>(oc)] : 0.0;
        for (int oi = 0; oi < oh; ++oi)
            for (int oj = 0; oj < ow; ++oj) {
                double acc = b;
                for (int c = 0; c < ci; ++c)
                    for (int ki = 0; ki < kh; ++ki) {
                        const int ii = oi * stride - padding + ki;
                        if (ii < 0 || ii >= h) continue;
                        for (int kj = 0; kj < kw; ++kj) {
                            const int jj = oj * stride - padding + kj;
                            if (jj < 0 || jj >= wd) continue;
                            acc += xat(c, ii, jj) *
                                   wv[((static_cast<size_t>(oc) * ci + c) * kh + ki) * kw + kj];
                        }
                    }
                out[(static_cast<size_t>(oc) * oh + oi) * ow + oj] = acc;
            }
    }
    auto xn = x.node();
    auto wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    std::vector<Tensor> parents = {x, w};
    if (bias.defined()) parents.push_back(bias);
    return Tensor(op_node(
        {co, oh, ow}, std::move(out), parents,
        [xn, wn, bn, ci, h, wd, co, kh, kw, oh, ow, stride, padding](Node& self) {
            if (xn->requires_grad) xn->ensure_grad();
            if (wn->requires_grad) wn->ensure_grad();
            if (bn && bn->requires_grad) bn->ensure_grad();
            for (int oc = 0; oc < co; ++oc)
                for (int oi = 0; oi < oh; ++oi)
                    for (int oj = 0; oj < ow; ++oj) {
                        const double g =
                            self.grad[(static_cast<size_t>(oc) * oh + oi) * ow + oj];
                        if (g == 0.0) continue;
                        if (bn && bn->requires_grad) bn->grad[static_cast<size_t>(oc)] += g;
                        for (int c = 0; c < ci; ++c)
                            for (int ki = 0; ki < kh; ++ki) {
                                const int ii = oi * stride - padding + ki;
                                if (ii < 0 || ii >= h) continue;
                                for (int kj = 0; kj < kw; ++kj) {
                                    const int jj = oj * stride - padding + kj;
                                    if (jj < 0 || jj >= wd) continue;
                                    const size_t xi = (static_cast<size_t>(c) * h + ii) * wd + jj;
                                    const size_t wi =
                                        ((static_cast<size_t>(oc) * ci + c) * kh + ki) * kw + kj;
                                    if (xn->requires_grad)
                                        xn->grad[xi] += g * wn->value[wi];
                                    if (wn->requires_grad)
                                        wn->grad[wi] += g * xn->value[xi];
                                }
                            }
                    }
        }));
}

namespace {

struct LerpWeights {
    int lo, hi;
    double w_lo, w_hi;
};

// align-corners-false source coordinate mapping, clamped to the raster
LerpWeights lerp_axis(int out_i, int out_n, int in_n) {
    double scale = static_cast<double>(in_n) / out_n;
    double src = (out_i + 0.5) * scale - 0.5;
    src = std::max(0.0, std::min(src, static_cast<double>(in_n - 1)));
    int lo = static_cast<int>(std::floor(src));
    int hi = std::min(lo + 1, in_n - 1);
    double f = src - lo;
    return {lo, hi, 1.0 - f, f};
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
    if (x.shape().size() != 3) throw DimensionError("bilinear_resize: expected [C,H,W]");
    if (out_h < 1 || out_w < 1) throw DimensionError("bilinear_resize: target size < 1");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    std::vector<double> out(static_cast<size_t>(c) * out_h * out_w);
    const auto& xv = x.value();
    for (int oi = 0; oi < out_h; ++oi) {
        LerpWeights ry = lerp_axis(oi, out_h, h);
        for (int oj = 0; oj < out_w; ++oj) {
            LerpWeights rx = lerp_axis(oj, out_w, w);
            for (int ch = 0; ch < c; ++ch) {
                const size_t base = static_cast<size_t>(ch) * h * w;
                double v = ry.w_lo * (rx.w_lo * xv[base + static_cast<size_t>(ry.lo) * w + rx.lo] +
                                      rx.w_hi * xv[base + static_cast<size_t>(ry.lo) * w + rx.hi]) +
                           ry.w_hi * (rx.w_lo * xv[base + static_cast<size_t>(ry.hi) * w + rx.lo] +
                                      rx.w_hi * xv[base + static_cast<size_t>(ry.hi) * w + rx.hi]);
                out[(static_cast<size_t>(ch) * out_h + oi) * out_w + oj] = v;
            }
        }
    }
    auto xn = x.node();
    return Tensor(op_node({c, out_h, out_w}, std::move(out), {x},
                          [xn, c, h, w, out_h, out_w](Node& self) {
                              if (!xn->requires_grad) return;
                              xn->ensure_grad();
                              for (int oi = 0; oi < out_h; ++oi) {
                                  LerpWeights ry = lerp_axis(oi, out_h, h);
                                  for (int oj = 0; oj < out_w; ++oj) {
                                      LerpWeights rx = lerp_axis(oj, out_w, w);
                                      for (int ch = 0; ch < c; ++ch) {
                                          const size_t base = static_cast<size_t>(ch) * h * w;
                                          const double g =
                                              self.grad[(static_cast<size_t>(ch) * out_h + oi) *
                                                            out_w +
                                                        oj];
                                          xn->grad[base + static_cast<size_t>(ry.lo) * w + rx.lo] +=
                                              g * ry.w_lo * rx.w_lo;
                                          xn->grad[base + static_cast<size_t>(ry.lo) * w + rx.hi] +=
                                              g * ry.w_lo * rx.w_hi;
                                          xn->grad[base + static_cast<size_t>(ry.hi) * w + rx.lo] +=
                                              g * ry.w_hi * rx.w_lo;
                                          xn->grad[base + static_cast<size_t>(ry.hi) * w + rx.hi] +=
                                              g * ry.w_hi * rx.w_hi;
                                      }
                                  }
                              }
                          }));
}

Tensor maxpool2d(const Tensor& x, int factor) {
    if (x.shape().size() != 3) throw DimensionError("maxpool2d: expected [C,H,W]");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (factor < 1 || h % factor != 0 || w % factor != 0)
        throw DimensionError("maxpool2d: dims not divisible by pooling factor");
    const int oh = h / factor, ow = w / factor;
    std::vector<double> out(static_cast<size_t>(c) * oh * ow);
    std::vector<int> argmax(out.size());
    const auto& xv = x.value();
    for (int ch = 0; ch < c; ++ch)
        for (int oi = 0; oi < oh; ++oi)
            for (int oj = 0; oj < ow; ++oj) {
                double best = -1e300;
                int best_idx = 0;
                for (int di = 0; di < factor; ++di)
                    for (int dj = 0; dj < factor; ++dj) {
                        const int ii = oi * factor + di, jj = oj * factor + dj;
                        const int idx = (ch * h + ii) * w + jj;
                        if (xv[static_cast<size_t>(idx)] > best) {
                            best = xv[static_cast<size_t>(idx)];
                            best_idx = idx;
                        }
                    }
                const size_t o = (static_cast<size_t>(ch) * oh + oi) * ow + oj;
                out[o] = best;
                argmax[o] = best_idx;
            }
    auto xn = x.node();
    return Tensor(op_node({c, oh, ow}, std::move(out), {x}, [xn, argmax](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (size_t i = 0; i < argmax.size(); ++i)
            xn->grad[static_cast<size_t>(argmax[i])] += self.grad[i];
    }));
}

// --- reductions ---

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.value()) acc += v;
    auto xn = x.node();
    return Tensor(op_node({1}, {acc}, {x}, [xn](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (auto& g : xn->grad) g += self.grad[0];
    }));
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / x.size()); }

Tensor masked_mean(const Tensor& x, const std::vector<double>& mask) {
    if (static_cast<int>(mask.size()) != x.size())
        throw DimensionError("masked_mean: mask size differs from tensor size");
    double count = 0.0;
    for (double m : mask) count += m;
    if (count <= 0.0) throw EmptyMaskError("masked_mean: no valid elements");
    double acc = 0.0;
    const auto& xv = x.value();
    for (size_t i = 0; i < mask.size(); ++i) acc += xv[i] * mask[i];
    auto xn = x.node();
    const double inv = 1.0 / count;
    return Tensor(op_node({1}, {acc * inv}, {x}, [xn, mask, inv](Node& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (size_t i = 0; i < mask.size(); ++i) xn->grad[i] += self.grad[0] * mask[i] * inv;
    }));
}

// --- gradient checking ---

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x, double step,
                           double tol) {
    Tensor out = f(x);
    x.zero_grad();
    out.backward();
    std::vector<double> analytic = x.grad();

    GradCheckReport report;
    auto& xv = x.raw_value();
    for (size_t i = 0; i < xv.size(); ++i) {
        const double keep = xv[i];
        xv[i] = keep + step;
        const double fp = f(x).item();
        xv[i] = keep - step;
        const double fm = f(x).item();
        xv[i] = keep;
        const double numeric = (fp - fm) / (2.0 * step);
        const double abs_dev = std::fabs(analytic[i] - numeric);
        const double scale = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1.0});
        report.max_abs_deviation = std::max(report.max_abs_deviation, abs_dev);
        report.max_rel_deviation = std::max(report.max_rel_deviation, abs_dev / scale);
    }
    report.ok = report.max_rel_deviation < tol;
    return report;
}

}  // namespace depthscale
