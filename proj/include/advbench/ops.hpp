#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "advbench/tensor.hpp"

namespace advbench {

namespace detail {

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        fail(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
             shape_str(b.shape()));
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("add", a, b);
    std::vector<double> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_op_result(
        "add", a.shape(), std::move(out), {a, b},
        [pa = a.impl(), pb = b.impl()](const TensorImpl& o) {
            if (pa->requires_grad || pa->node) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
            }
            if (pb->requires_grad || pb->node) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i];
            }
        });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("sub", a, b);
    std::vector<double> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_op_result(
        "sub", a.shape(), std::move(out), {a, b},
        [pa = a.impl(), pb = b.impl()](const TensorImpl& o) {
            if (pa->requires_grad || pa->node) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
            }
            if (pb->requires_grad || pb->node) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] -= o.grad[i];
            }
        });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("mul", a, b);
    std::vector<double> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_op_result(
        "mul", a.shape(), std::move(out), {a, b},
        [pa = a.impl(), pb = b.impl()](const TensorImpl& o) {
            if (pa->requires_grad || pa->node) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i)
                    pa->grad[i] += o.grad[i] * pb->data[i];
            }
            if (pb->requires_grad || pb->node) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i)
                    pb->grad[i] += o.grad[i] * pa->data[i];
            }
        });
}

inline Tensor add_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + s;
    return make_op_result("add_scalar", a.shape(), std::move(out), {a},
                          [pa = a.impl()](const TensorImpl& o) {
                              pa->ensure_grad();
                              for (std::size_t i = 0; i < o.grad.size(); ++i)
                                  pa->grad[i] += o.grad[i];
                          });
}

inline Tensor mul_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    return make_op_result("mul_scalar", a.shape(), std::move(out), {a},
                          [pa = a.impl(), s](const TensorImpl& o) {
                              pa->ensure_grad();
                              for (std::size_t i = 0; i < o.grad.size(); ++i)
                                  pa->grad[i] += o.grad[i] * s;
                          });
}

inline Tensor relu(const Tensor& x) {
    std::vector<double> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    return make_op_result("relu", x.shape(), std::move(out), {x},
                          [px = x.impl()](const TensorImpl& o) {
                              px->ensure_grad();
                              for (std::size_t i = 0; i < o.grad.size(); ++i)
                                  if (px->data[i] > 0.0) px->grad[i] += o.grad[i];
                          });
}

inline Tensor tanh_op(const Tensor& x) {
    std::vector<double> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.data()[i]);
    return make_op_result("tanh", x.shape(), std::move(out), {x},
                          [px = x.impl()](const TensorImpl& o) {
                              px->ensure_grad();
                              for (std::size_t i = 0; i < o.grad.size(); ++i)
                                  px->grad[i] += o.grad[i] * (1.0 - o.data[i] * o.data[i]);
                          });
}

inline Tensor sqrt_op(const Tensor& x) {
    std::vector<double> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(x.data()[i]);
    return make_op_result("sqrt", x.shape(), std::move(out), {x},
                          [px = x.impl()](const TensorImpl& o) {
                              px->ensure_grad();
                              for (std::size_t i = 0; i < o.grad.size(); ++i)
                                  px->grad[i] += o.grad[i] * 0.5 / o.data[i];
                          });
}

// ---- reductions over all elements ------------------------------------------

inline Tensor reduce_sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_op_result("reduce_sum", {1}, {s}, {x},
                          [px = x.impl()](const TensorImpl& o) {
                              px->ensure_grad();
                              const double g = o.grad[0];
                              for (auto& gi : px->grad) gi += g;
                          });
}

inline Tensor reduce_mean(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    const double n = static_cast<double>(x.data().size());
    return make_op_result("reduce_mean", {1}, {s / n}, {x},
                          [px = x.impl(), n](const TensorImpl& o) {
                              px->ensure_grad();
                              const double g = o.grad[0] / n;
                              for (auto& gi : px->grad) gi += g;
                          });
}

namespace detail {

inline Tensor reduce_extreme(const char* op, const Tensor& x, bool want_max) {
    check(!x.data().empty(), std::string(op) + ": empty tensor");
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.data().size(); ++i) {
        if (want_max ? x.data()[i] > x.data()[best] : x.data()[i] < x.data()[best])
            best = i;  // strict compare keeps the first extreme on ties
    }
    return make_op_result(op, {1}, {x.data()[best]}, {x},
                          [px = x.impl(), best](const TensorImpl& o) {
                              px->ensure_grad();
                              px->grad[best] += o.grad[0];
                          });
}

}  // namespace detail

inline Tensor reduce_max(const Tensor& x) { return detail::reduce_extreme("reduce_max", x, true); }
inline Tensor reduce_min(const Tensor& x) { return detail::reduce_extreme("reduce_min", x, false); }

// ---- linear algebra ---------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        fail("matmul: shape mismatch ", shape_str(a.shape()), " vs ",
             shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            const double* brow = B + static_cast<std::size_t>(p) * n;
            double* orow = out.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    return make_op_result(
        "matmul", {m, n}, std::move(out), {a, b},
        [pa = a.impl(), pb = b.impl(), m, k, n](const TensorImpl& o) {
            const double* G = o.grad.data();
            if (pa->requires_grad || pa->node) {
                pa->ensure_grad();
                // dA = G * B^T
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double s = 0.0;
                        const double* grow = G + static_cast<std::size_t>(i) * n;
                        const double* brow = pb->data.data() + static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                        pa->grad[static_cast<std::size_t>(i) * k + p] += s;
                    }
            }
            if (pb->requires_grad || pb->node) {
                pb->ensure_grad();
                // dB = A^T * G
                for (int p = 0; p < k; ++p)
                    for (int i = 0; i < m; ++i) {
                        const double av = pa->data[static_cast<std::size_t>(i) * k + p];
                        const double* grow = G + static_cast<std::size_t>(i) * n;
                        double* drow = pb->grad.data() + static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) drow[j] += av * grow[j];
                    }
            }
        });
}

// Dense layer: x[B,in] * W[in,out] + bias[out].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (x.shape().size() != 2 || w.shape().size() != 2 || x.shape()[1] != w.shape()[0])
        fail("linear: shape mismatch ", shape_str(x.shape()), " vs ",
             shape_str(w.shape()));
    if (bias.shape() != Shape{w.shape()[1]})
        fail("linear: bias shape ", shape_str(bias.shape()), " does not match output ",
             w.shape()[1]);
    const int B = x.shape()[0], in = x.shape()[1], out_n = w.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(B) * out_n);
    for (int i = 0; i < B; ++i)
        std::copy(bias.data().begin(), bias.data().end(),
                  out.begin() + static_cast<std::size_t>(i) * out_n);
    const double* X = x.data().data();
    const double* W = w.data().data();
    for (int i = 0; i < B; ++i)
        for (int p = 0; p < in; ++p) {
            const double xv = X[static_cast<std::size_t>(i) * in + p];
            const double* wrow = W + static_cast<std::size_t>(p) * out_n;
            double* orow = out.data() + static_cast<std::size_t>(i) * out_n;
            for (int j = 0; j < out_n; ++j) orow[j] += xv * wrow[j];
        }
    return make_op_result(
        "linear", {B, out_n}, std::move(out), {x, w, bias},
        [px = x.impl(), pw = w.impl(), pbias = bias.impl(), B, in,
         out_n](const TensorImpl& o) {
            const double* G = o.grad.data();
            if (px->requires_grad || px->node) {
                px->ensure_grad();
                for (int i = 0; i < B; ++i)
                    for (int p = 0; p < in; ++p) {
                        double s = 0.0;
                        const double* grow = G + static_cast<std::size_t>(i) * out_n;
                        const double* wrow = pw->data.data() + static_cast<std::size_t>(p) * out_n;
                        for (int j = 0; j < out_n; ++j) s += grow[j] * wrow[j];
                        px->grad[static_cast<std::size_t>(i) * in + p] += s;
                    }
            }
            if (pw->requires_grad || pw->node) {
                pw->ensure_grad();
                for (int i = 0; i < B; ++i)
                    for (int p = 0; p < in; ++p) {
                        const double xv = px->data[static_cast<std::size_t>(i) * in + p];
                        const double* grow = G + static_cast<std::size_t>(i) * out_n;
                        double* drow = pw->grad.data() + static_cast<std::size_t>(p) * out_n;
                        for (int j = 0; j < out_n; ++j) drow[j] += xv * grow[j];
                    }
            }
            if (pbias->requires_grad || pbias->node) {
                pbias->ensure_grad();
                for (int i = 0; i < B; ++i) {
                    const double* grow = G + static_cast<std::size_t>(i) * out_n;
                    for (int j = 0; j < out_n; ++j) pbias->grad[j] += grow[j];
                }
            }
        });
}

// ---- convolution / pooling --------------------------------------------------

enum class Padding { valid, same };

// 2-D convolution, stride 1, NHWC. kernel is [kh,kw,C,OC]; 'same' requires odd
// kernel sides.
inline Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                     Padding padding = Padding::valid) {
    if (x.shape().size() != 4 || kernel.shape().size() != 4 ||
        x.shape()[3] != kernel.shape()[2])
        fail("conv2d: shape mismatch ", shape_str(x.shape()), " vs kernel ",
             shape_str(kernel.shape()));
    const int B = x.shape()[0], H = x.shape()[1], W = x.shape()[2], C = x.shape()[3];
    const int kh = kernel.shape()[0], kw = kernel.shape()[1], OC = kernel.shape()[3];
    if (bias.shape() != Shape{OC})
        fail("conv2d: bias shape ", shape_str(bias.shape()), " does not match ", OC,
             " output channels");
    int pad_y = 0, pad_x = 0;
    if (padding == Padding::same) {
        if (kh % 2 == 0 || kw % 2 == 0)
            fail("conv2d: 'same' padding requires odd kernel, got ",
                 shape_str(kernel.shape()));
        pad_y = (kh - 1) / 2;
        pad_x = (kw - 1) / 2;
    }
    const int OH = H - kh + 1 + 2 * pad_y, OW = W - kw + 1 + 2 * pad_x;
    if (OH <= 0 || OW <= 0)
        fail("conv2d: kernel ", shape_str(kernel.shape()), " larger than input ",
             shape_str(x.shape()));

    std::vector<double> out(static_cast<std::size_t>(B) * OH * OW * OC);
    const double* X = x.data().data();
    const double* K = kernel.data().data();
    const double* bias_v = bias.data().data();
    for (int b = 0; b < B; ++b)
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                double* orow = out.data() +
                               ((static_cast<std::size_t>(b) * OH + oy) * OW + ox) * OC;
                std::copy(bias_v, bias_v + OC, orow);
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy + ky - pad_y;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox + kx - pad_x;
                        if (ix < 0 || ix >= W) continue;
                        const double* xrow =
                            X + ((static_cast<std::size_t>(b) * H + iy) * W + ix) * C;
                        const double* krow =
                            K + (static_cast<std::size_t>(ky) * kw + kx) * C * OC;
                        for (int ic = 0; ic < C; ++ic) {
                            const double xv = xrow[ic];
                            const double* kk = krow + static_cast<std::size_t>(ic) * OC;
                            for (int oc = 0; oc < OC; ++oc) orow[oc] += xv * kk[oc];
                        }
                    }
                }
            }

    return make_op_result(
        "conv2d", {B, OH, OW, OC}, std::move(out), {x, kernel, bias},
        [px = x.impl(), pk = kernel.impl(), pbias = bias.impl(), B, H, W, C, kh, kw,
         OC, OH, OW, pad_y, pad_x](const TensorImpl& o) {
            const double* G = o.grad.data();
            const bool need_dx = px->requires_grad || px->node;
            const bool need_dk = pk->requires_grad || pk->node;
            const bool need_db = pbias->requires_grad || pbias->node;
            if (need_dx) px->ensure_grad();
            if (need_dk) pk->ensure_grad();
            if (need_db) pbias->ensure_grad();
            for (int b = 0; b < B; ++b)
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        const double* grow =
                            G + ((static_cast<std::size_t>(b) * OH + oy) * OW + ox) * OC;
                        if (need_db)
                            for (int oc = 0; oc < OC; ++oc) pbias->grad[oc] += grow[oc];
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy + ky - pad_y;
                            if (iy < 0 || iy >= H) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox + kx - pad_x;
                                if (ix < 0 || ix >= W) continue;
                                const std::size_t xoff =
                                    ((static_cast<std::size_t>(b) * H + iy) * W + ix) * C;
                                const std::size_t koff =
                                    (static_cast<std::size_t>(ky) * kw + kx) * C * OC;
                                for (int ic = 0; ic < C; ++ic) {
                                    const double* kk = pk->data.data() + koff +
                                                       static_cast<std::size_t>(ic) * OC;
                                    if (need_dx) {
                                        double s = 0.0;
                                        for (int oc = 0; oc < OC; ++oc)
                                            s += grow[oc] * kk[oc];
                                        px->grad[xoff + ic] += s;
                                    }
                                    if (need_dk) {
                                        const double xv = px->data[xoff + ic];
                                        double* dk = pk->grad.data() + koff +
                                                     static_cast<std::size_t>(ic) * OC;
                                        for (int oc = 0; oc < OC; ++oc)
                                            dk[oc] += xv * grow[oc];
                                    }
                                }
                            }
                        }
                    }
        });
}

// 2x2 max-pool, stride 2, NHWC; odd trailing row/column is dropped. Gradient
// routes to the first (lowest flat index) maximum of each window.
inline Tensor maxpool2x2(const Tensor& x) {
    if (x.shape().size() != 4)
        fail("maxpool2x2: expected NHWC input, got ", shape_str(x.shape()));
    const int B = x.shape()[0], H = x.shape()[1], W = x.shape()[2], C = x.shape()[3];
    const int OH = H / 2, OW = W / 2;
    if (OH == 0 || OW == 0)
        fail("maxpool2x2: input ", shape_str(x.shape()), " too small to pool");
    std::vector<double> out(static_cast<std::size_t>(B) * OH * OW * C);
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
    const double* X = x.data().data();
    for (int b = 0; b < B; ++b)
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox)
                for (int c = 0; c < C; ++c) {
                    std::int64_t best_idx = -1;
                    double best = 0.0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const std::size_t idx =
                                ((static_cast<std::size_t>(b) * H + 2 * oy + dy) * W +
                                 2 * ox + dx) * C + c;
                            if (best_idx < 0 || X[idx] > best) {
                                best = X[idx];
                                best_idx = static_cast<std::int64_t>(idx);
                            }
                        }
                    const std::size_t oidx =
                        ((static_cast<std::size_t>(b) * OH + oy) * OW + ox) * C + c;
                    out[oidx] = best;
                    (*argmax)[oidx] = best_idx;
                }
    return make_op_result("maxpool2x2", {B, OH, OW, C}, std::move(out), {x},
                          [px = x.impl(), argmax](const TensorImpl& o) {
                              px->ensure_grad();
                              for (std::size_t i = 0; i < o.grad.size(); ++i)
                                  px->grad[static_cast<std::size_t>((*argmax)[i])] +=
                                      o.grad[i];
                          });
}

// ---- classifier heads --------------------------------------------------------

// Row-wise softmax of logits [B,m].
inline Tensor softmax_rows(const Tensor& z) {
    if (z.shape().size() != 2)
        fail("softmax: expected [batch, classes], got ", shape_str(z.shape()));
    const int B = z.shape()[0], m = z.shape()[1];
    std::vector<double> out(z.data().size());
    for (int b = 0; b < B; ++b) {
        const double* row = z.data().data() + static_cast<std::size_t>(b) * m;
        double* orow = out.data() + static_cast<std::size_t>(b) * m;
        double mx = row[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            orow[j] = std::exp(row[j] - mx);
            s += orow[j];
        }
        for (int j = 0; j < m; ++j) orow[j] /= s;
    }
    return make_op_result(
        "softmax", z.shape(), std::move(out), {z},
        [pz = z.impl(), B, m](const TensorImpl& o) {
            pz->ensure_grad();
            for (int b = 0; b < B; ++b) {
                const double* p = o.data.data() + static_cast<std::size_t>(b) * m;
                const double* g = o.grad.data() + static_cast<std::size_t>(b) * m;
                double dot = 0.0;
                for (int j = 0; j < m; ++j) dot += g[j] * p[j];
                double* dz = pz->grad.data() + static_cast<std::size_t>(b) * m;
                for (int j = 0; j < m; ++j) dz[j] += p[j] * (g[j] - dot);
            }
        });
}

// Mean cross-entropy over the batch, fused with a log-sum-exp stabilized
// softmax at temperature T. targets are per-row probability vectors (one-hot
// or soft labels) and are treated as constants.
inline Tensor cross_entropy_with_logits(const Tensor& z, const Tensor& targets,
                                        double temperature = 1.0) {
    detail::check_same_shape("cross_entropy", z, targets);
    check(z.shape().size() == 2, "cross_entropy: expected [batch, classes]");
    check(temperature > 0.0, "cross_entropy: temperature must be positive");
    check(!targets.requires_grad(), "cross_entropy: targets must not require grad");
    const int B = z.shape()[0], m = z.shape()[1];
    double total = 0.0;
    for (int b = 0; b < B; ++b) {
        const double* row = z.data().data() + static_cast<std::size_t>(b) * m;
        const double* t = targets.data().data() + static_cast<std::size_t>(b) * m;
        double mx = row[0] / temperature;
        for (int j = 1; j < m; ++j) mx = std::max(mx, row[j] / temperature);
        double lse = 0.0;
        for (int j = 0; j < m; ++j) lse += std::exp(row[j] / temperature - mx);
        lse = std::log(lse) + mx;
        double l = 0.0;
        for (int j = 0; j < m; ++j) l -= t[j] * (row[j] / temperature - lse);
        total += l;
    }
    return make_op_result(
        "cross_entropy", {1}, {total / B}, {z, targets},
        [pz = z.impl(), pt = targets.impl(), B, m, temperature](const TensorImpl& o) {
            if (!(pz->requires_grad || pz->node)) return;
            pz->ensure_grad();
            const double gscale = o.grad[0] / (B * temperature);
            for (int b = 0; b < B; ++b) {
                const double* row = pz->data.data() + static_cast<std::size_t>(b) * m;
                const double* t = pt->data.data() + static_cast<std::size_t>(b) * m;
                double mx = row[0] / temperature;
                for (int j = 1; j < m; ++j) mx = std::max(mx, row[j] / temperature);
                double s = 0.0;
                std::vector<double> e(static_cast<std::size_t>(m));
                for (int j = 0; j < m; ++j) {
                    e[static_cast<std::size_t>(j)] = std::exp(row[j] / temperature - mx);
                    s += e[static_cast<std::size_t>(j)];
                }
                double* dz = pz->grad.data() + static_cast<std::size_t>(b) * m;
                for (int j = 0; j < m; ++j)
                    dz[j] += gscale * (e[static_cast<std::size_t>(j)] / s - t[j]);
            }
        });
}

// C&W attack loss on one logits row: max(max{z_i : i != t} - z_t, -K).
// Ties in the best-other max break to the first index, as elsewhere.
inline Tensor cw_margin_loss(const Tensor& z, int target, double confidence) {
    const Shape& s = z.shape();
    const bool row = (s.size() == 2 && s[0] == 1) || s.size() == 1;
    check(row, "cw_margin_loss: expected a single logits row");
    const int m = s.size() == 2 ? s[1] : s[0];
    check(target >= 0 && target < m, "cw_margin_loss: target out of range");
    int best_other = target == 0 ? 1 : 0;
    for (int j = 0; j < m; ++j)
        if (j != target && z.data()[j] > z.data()[best_other]) best_other = j;
    const double gap = z.data()[best_other] - z.data()[target];
    const double value = std::max(gap, -confidence);
    return make_op_result("cw_margin_loss", {1}, {value}, {z},
                          [pz = z.impl(), target, best_other, gap,
                           confidence](const TensorImpl& o) {
                              pz->ensure_grad();
                              if (gap > -confidence) {
                                  pz->grad[static_cast<std::size_t>(best_other)] += o.grad[0];
                                  pz->grad[static_cast<std::size_t>(target)] -= o.grad[0];
                              }
                          });
}

// ---- non-graph helpers -------------------------------------------------------

inline int argmax_row(const std::vector<double>& v, std::size_t offset, int m) {
    int best = 0;
    for (int j = 1; j < m; ++j)
        if (v[offset + static_cast<std::size_t>(j)] > v[offset + static_cast<std::size_t>(best)])
            best = j;
    return best;
}

inline std::vector<double> softmax_vec(const std::vector<double>& logits) {
    std::vector<double> p(logits.size());
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
}

inline Tensor one_hot(const std::vector<int>& labels, int num_classes) {
    std::vector<double> data(labels.size() * static_cast<std::size_t>(num_classes), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        check(labels[i] >= 0 && labels[i] < num_classes, "one_hot: label out of range");
        data[i * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    return Tensor::from_data({static_cast<int>(labels.size()), num_classes},
                             std::move(data));
}

}  // namespace advbench
