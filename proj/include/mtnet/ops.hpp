#pragma once
// Differentiable ops over Tensor<T>: broadcast elementwise arithmetic,
// activations, softmax, reductions, batched matmul, shape surgery and the
// fused binary cross-entropy. Convolution and friends live in ops_conv.hpp.

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mtnet/kernels.hpp"
#include "mtnet/tensor.hpp"

namespace mtnet {

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
    int r = std::max(ra, rb);
    Shape out(r);
    for (int i = 0; i < r; ++i) {
        std::int64_t ea = i < r - ra ? 1 : a[i - (r - ra)];
        std::int64_t eb = i < r - rb ? 1 : b[i - (r - rb)];
        if (ea != eb && ea != 1 && eb != 1)
            throw std::runtime_error("broadcast: incompatible shapes " + shape_str(a) + " vs " +
                                     shape_str(b));
        out[i] = std::max(ea, eb);
    }
    return out;
}

// Row-major strides of `s` aligned to (and broadcast against) `out`,
// with stride 0 on broadcast extents.
inline std::vector<std::int64_t> broadcast_strides(const Shape& s, const Shape& out) {
    int rs = static_cast<int>(s.size()), r = static_cast<int>(out.size());
    std::vector<std::int64_t> native(rs);
    std::int64_t acc = 1;
    for (int i = rs - 1; i >= 0; --i) {
        native[i] = acc;
        acc *= s[i];
    }
    std::vector<std::int64_t> st(r, 0);
    for (int i = 0; i < r; ++i) {
        int j = i - (r - rs);
        if (j >= 0 && s[j] != 1) st[i] = native[j];
    }
    return st;
}

// Walks an output shape in row-major order; calls inner(offO, offA, offB,
// count, strideA, strideB) once per innermost run.
template <class F>
void walk2(const Shape& out, const std::vector<std::int64_t>& sa,
           const std::vector<std::int64_t>& sb, F inner) {
    int r = static_cast<int>(out.size());
    if (r == 0) {
        inner(std::int64_t(0), std::int64_t(0), std::int64_t(0), std::int64_t(1), std::int64_t(0),
              std::int64_t(0));
        return;
    }
    std::int64_t last = out[r - 1];
    std::vector<std::int64_t> idx(r - 1, 0);
    std::int64_t off_out = 0;
    while (true) {
        std::int64_t off_a = 0, off_b = 0;
        for (int i = 0; i < r - 1; ++i) {
            off_a += idx[i] * sa[i];
            off_b += idx[i] * sb[i];
        }
        inner(off_out, off_a, off_b, last, sa[r - 1], sb[r - 1]);
        off_out += last;
        int i = r - 2;
        for (; i >= 0; --i) {
            if (++idx[i] < out[i]) break;
            idx[i] = 0;
        }
        if (i < 0) break;
    }
}

}  // namespace detail

enum class BinOp { Add, Sub, Mul };

template <class T>
Tensor<T> binary(BinOp op, const Tensor<T>& a, const Tensor<T>& b) {
    const auto& an = a.node();
    const auto& bn = b.node();
    Shape out_shape = detail::broadcast_shape(an->shape, bn->shape);
    auto n = detail::make_node<T>(out_shape, {an, bn});
    const std::int64_t ne = n->numel();

    const bool same = an->shape == bn->shape && bn->shape == out_shape;
    if (same) {
        switch (op) {
            case BinOp::Add: kernels::add(an->val.data(), bn->val.data(), n->val.data(), ne); break;
            case BinOp::Sub: kernels::sub(an->val.data(), bn->val.data(), n->val.data(), ne); break;
            case BinOp::Mul: kernels::mul(an->val.data(), bn->val.data(), n->val.data(), ne); break;
        }
    } else {
        auto sa = detail::broadcast_strides(an->shape, out_shape);
        auto sb = detail::broadcast_strides(bn->shape, out_shape);
        const T* pa = an->val.data();
        const T* pb = bn->val.data();
        T* po = n->val.data();
        detail::walk2(out_shape, sa, sb,
                      [&](std::int64_t oo, std::int64_t oa, std::int64_t ob, std::int64_t cnt,
                          std::int64_t da, std::int64_t db) {
                          switch (op) {
                              case BinOp::Add:
                                  for (std::int64_t j = 0; j < cnt; ++j)
                                      po[oo + j] = pa[oa + j * da] + pb[ob + j * db];
                                  break;
                              case BinOp::Sub:
                                  for (std::int64_t j = 0; j < cnt; ++j)
                                      po[oo + j] = pa[oa + j * da] - pb[ob + j * db];
                                  break;
                              case BinOp::Mul:
                                  for (std::int64_t j = 0; j < cnt; ++j)
                                      po[oo + j] = pa[oa + j * da] * pb[ob + j * db];
                                  break;
                          }
                      });
    }
    detail::check_finite(*n, op == BinOp::Add ? "add" : op == BinOp::Sub ? "sub" : "mul");

    if (n->requires_grad) {
        auto* out_node = n.get();
        auto shape = out_shape;
        n->backward_fn = [op, out_node, an, bn, shape]() {
            auto sa = detail::broadcast_strides(an->shape, shape);
            auto sb = detail::broadcast_strides(bn->shape, shape);
            const T* g = out_node->grad.data();
            const T* pa = an->val.data();
            const T* pb = bn->val.data();
            T* ga = nullptr;
            T* gb = nullptr;
            if (an->requires_grad) {
                an->ensure_grad();
                ga = an->grad.data();
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                gb = bn->grad.data();
            }
            detail::walk2(shape, sa, sb,
                          [&](std::int64_t oo, std::int64_t oa, std::int64_t ob, std::int64_t cnt,
                              std::int64_t da, std::int64_t db) {
                              for (std::int64_t j = 0; j < cnt; ++j) {
                                  const T gv = g[oo + j];
                                  switch (op) {
                                      case BinOp::Add:
                                          if (ga) ga[oa + j * da] += gv;
                                          if (gb) gb[ob + j * db] += gv;
                                          break;
                                      case BinOp::Sub:
                                          if (ga) ga[oa + j * da] += gv;
                                          if (gb) gb[ob + j * db] -= gv;
                                          break;
                                      case BinOp::Mul:
                                          if (ga) ga[oa + j * da] += gv * pb[ob + j * db];
                                          if (gb) gb[ob + j * db] += gv * pa[oa + j * da];
                                          break;
                                  }
                              }
                          });
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return binary(BinOp::Add, a, b); }
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return binary(BinOp::Sub, a, b); }
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return binary(BinOp::Mul, a, b); }

// ---- unary ops -------------------------------------------------------------

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    auto xn = x.node();
    auto n = detail::make_node<T>(xn->shape, {xn});
    const std::int64_t ne = n->numel();
    for (std::int64_t i = 0; i < ne; ++i) {
        const T v = xn->val[i];
        n->val[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                              : std::exp(v) / (T(1) + std::exp(v));
    }
    detail::check_finite(*n, "sigmoid");
    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn]() {
            xn->ensure_grad();
            for (std::int64_t i = 0; i < on->numel(); ++i) {
                const T y = on->val[i];
                xn->grad[i] += on->grad[i] * y * (T(1) - y);
            }
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
    auto xn = x.node();
    auto n = detail::make_node<T>(xn->shape, {xn});
    kernels::relu(xn->val.data(), n->val.data(), n->numel());
    detail::check_finite(*n, "relu");
    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn]() {
            xn->ensure_grad();
            for (std::int64_t i = 0; i < on->numel(); ++i)
                if (xn->val[i] > T(0)) xn->grad[i] += on->grad[i];
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    auto xn = x.node();
    auto n = detail::make_node<T>(xn->shape, {xn});
    kernels::scale(c, xn->val.data(), n->val.data(), n->numel());
    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, c]() {
            xn->ensure_grad();
            kernels::axpy(c, on->grad.data(), xn->grad.data(), on->numel());
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> add_const(const Tensor<T>& x, T c) {
    auto xn = x.node();
    auto n = detail::make_node<T>(xn->shape, {xn});
    for (std::int64_t i = 0; i < n->numel(); ++i) n->val[i] = xn->val[i] + c;
    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn]() {
            xn->ensure_grad();
            kernels::axpy(T(1), on->grad.data(), xn->grad.data(), on->numel());
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> rsqrt(const Tensor<T>& x) {
    auto xn = x.node();
    auto n = detail::make_node<T>(xn->shape, {xn});
    for (std::int64_t i = 0; i < n->numel(); ++i) n->val[i] = T(1) / std::sqrt(xn->val[i]);
    detail::check_finite(*n, "rsqrt");
    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn]() {
            xn->ensure_grad();
            for (std::int64_t i = 0; i < on->numel(); ++i) {
                const T y = on->val[i];
                xn->grad[i] += on->grad[i] * (T(-0.5) * y * y * y);
            }
        };
    }
    return Tensor<T>(n);
}

// ---- softmax ---------------------------------------------------------------

template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
    auto xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw std::runtime_error("softmax: axis out of range");
    auto n = detail::make_node<T>(xn->shape, {xn});

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= xn->shape[i];
    for (int i = axis + 1; i < r; ++i) inner *= xn->shape[i];
    const std::int64_t len = xn->shape[axis];

    const T* px = xn->val.data();
    T* po = n->val.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * len * inner + in;
            T mx = px[base];
            for (std::int64_t l = 1; l < len; ++l) mx = std::max(mx, px[base + l * inner]);
            T s = T(0);
            for (std::int64_t l = 0; l < len; ++l) {
                const T e = std::exp(px[base + l * inner] - mx);
                po[base + l * inner] = e;
                s += e;
            }
            const T inv = T(1) / s;
            for (std::int64_t l = 0; l < len; ++l) po[base + l * inner] *= inv;
        }
    }
    detail::check_finite(*n, "softmax");

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, outer, inner, len]() {
            xn->ensure_grad();
            const T* y = on->val.data();
            const T* g = on->grad.data();
            T* gx = xn->grad.data();
            for (std::int64_t o = 0; o < outer; ++o) {
                for (std::int64_t in = 0; in < inner; ++in) {
                    const std::int64_t base = o * len * inner + in;
                    T dot = T(0);
                    for (std::int64_t l = 0; l < len; ++l)
                        dot += g[base + l * inner] * y[base + l * inner];
                    for (std::int64_t l = 0; l < len; ++l)
                        gx[base + l * inner] +=
                            y[base + l * inner] * (g[base + l * inner] - dot);
                }
            }
        };
    }
    return Tensor<T>(n);
}

// ---- reductions ------------------------------------------------------------

template <class T>
Tensor<T> reduce_mean(const Tensor<T>& x, int axis, bool keepdim = true) {
    auto xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw std::runtime_error("reduce_mean: axis out of range");
    Shape out_shape = xn->shape;
    if (keepdim) out_shape[axis] = 1; else out_shape.erase(out_shape.begin() + axis);
    auto n = detail::make_node<T>(out_shape, {xn});

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= xn->shape[i];
    for (int i = axis + 1; i < r; ++i) inner *= xn->shape[i];
    const std::int64_t len = xn->shape[axis];
    const T inv = T(1) / T(len);

    const T* px = xn->val.data();
    T* po = n->val.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t in = 0; in < inner; ++in) {
            T s = T(0);
            for (std::int64_t l = 0; l < len; ++l) s += px[(o * len + l) * inner + in];
            po[o * inner + in] = s * inv;
        }

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, outer, inner, len, inv]() {
            xn->ensure_grad();
            const T* g = on->grad.data();
            T* gx = xn->grad.data();
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t in = 0; in < inner; ++in) {
                    const T gv = g[o * inner + in] * inv;
                    for (std::int64_t l = 0; l < len; ++l) gx[(o * len + l) * inner + in] += gv;
                }
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> reduce_max(const Tensor<T>& x, int axis, bool keepdim = true) {
    auto xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw std::runtime_error("reduce_max: axis out of range");
    Shape out_shape = xn->shape;
    if (keepdim) out_shape[axis] = 1; else out_shape.erase(out_shape.begin() + axis);
    auto n = detail::make_node<T>(out_shape, {xn});

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= xn->shape[i];
    for (int i = axis + 1; i < r; ++i) inner *= xn->shape[i];
    const std::int64_t len = xn->shape[axis];

    auto argmax = std::make_shared<std::vector<std::int64_t>>(outer * inner);
    const T* px = xn->val.data();
    T* po = n->val.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t in = 0; in < inner; ++in) {
            std::int64_t best = 0;
            T bv = px[o * len * inner + in];
            for (std::int64_t l = 1; l < len; ++l) {
                const T v = px[(o * len + l) * inner + in];
                if (v > bv) { bv = v; best = l; }
            }
            po[o * inner + in] = bv;
            (*argmax)[o * inner + in] = best;
        }

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, argmax, outer, inner, len]() {
            xn->ensure_grad();
            const T* g = on->grad.data();
            T* gx = xn->grad.data();
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t in = 0; in < inner; ++in) {
                    const std::int64_t l = (*argmax)[o * inner + in];
                    gx[(o * len + l) * inner + in] += g[o * inner + in];
                }
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
    auto xn = x.node();
    auto n = detail::make_node<T>(Shape{}, {xn});
    n->val[0] = kernels::scalar::sum(xn->val.data(), xn->numel());  // fixed serial order
    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn]() {
            xn->ensure_grad();
            const T g = on->grad[0];
            for (std::int64_t i = 0; i < xn->numel(); ++i) xn->grad[i] += g;
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
    return scale(sum_all(x), T(1) / T(x.numel()));
}

// ---- shape surgery ---------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    auto xn = x.node();
    if (shape_numel(shape) != xn->numel())
        throw std::runtime_error("reshape: element count mismatch " + shape_str(xn->shape) +
                                 " -> " + shape_str(shape));
    auto n = detail::make_node<T>(shape, {xn});
    n->val = xn->val;
    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn]() {
            xn->ensure_grad();
            kernels::axpy(T(1), on->grad.data(), xn->grad.data(), on->numel());
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm) {
    auto xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (static_cast<int>(perm.size()) != r) throw std::runtime_error("permute: rank mismatch");
    Shape out_shape(r);
    for (int i = 0; i < r; ++i) out_shape[i] = xn->shape[perm[i]];
    auto n = detail::make_node<T>(out_shape, {xn});

    std::vector<std::int64_t> in_strides(r, 1);
    for (int i = r - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * xn->shape[i + 1];
    std::vector<std::int64_t> gather(r);  // stride in input for each output dim
    for (int i = 0; i < r; ++i) gather[i] = in_strides[perm[i]];

    const T* px = xn->val.data();
    T* po = n->val.data();
    std::vector<std::int64_t> idx(r, 0);
    std::int64_t off_in = 0;
    for (std::int64_t o = 0; o < n->numel(); ++o) {
        po[o] = px[off_in];
        for (int i = r - 1; i >= 0; --i) {
            off_in += gather[i];
            if (++idx[i] < out_shape[i]) break;
            idx[i] = 0;
            off_in -= gather[i] * out_shape[i];
        }
    }

    if (n->requires_grad) {
        auto* on = n.get();
        auto shp = out_shape;
        n->backward_fn = [on, xn, gather, shp, r]() {
            xn->ensure_grad();
            const T* g = on->grad.data();
            T* gx = xn->grad.data();
            std::vector<std::int64_t> idx(r, 0);
            std::int64_t off_in = 0;
            for (std::int64_t o = 0; o < on->numel(); ++o) {
                gx[off_in] += g[o];
                for (int i = r - 1; i >= 0; --i) {
                    off_in += gather[i];
                    if (++idx[i] < shp[i]) break;
                    idx[i] = 0;
                    off_in -= gather[i] * shp[i];
                }
            }
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
    if (xs.empty()) throw std::runtime_error("concat: empty input list");
    const int r = xs[0].rank();
    if (axis < 0) axis += r;
    Shape out_shape = xs[0].shape();
    std::int64_t total = 0;
    for (const auto& x : xs) {
        if (x.rank() != r) throw std::runtime_error("concat: rank mismatch");
        for (int i = 0; i < r; ++i)
            if (i != axis && x.shape()[i] != out_shape[i])
                throw std::runtime_error("concat: extent mismatch off the concat axis");
        total += x.shape()[axis];
    }
    out_shape[axis] = total;

    std::vector<std::shared_ptr<Node<T>>> parents;
    for (const auto& x : xs) parents.push_back(x.node());
    auto n = detail::make_node<T>(out_shape, parents);

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= out_shape[i];
    for (int i = axis + 1; i < r; ++i) inner *= out_shape[i];

    T* po = n->val.data();
    std::int64_t axis_off = 0;
    for (const auto& x : xs) {
        const std::int64_t len = x.shape()[axis];
        const T* px = x.data();
        for (std::int64_t o = 0; o < outer; ++o)
            std::memcpy(po + (o * total + axis_off) * inner, px + o * len * inner,
                        sizeof(T) * len * inner);
        axis_off += len;
    }

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, parents, outer, inner, total, axis_s = axis]() {
            const T* g = on->grad.data();
            std::int64_t axis_off = 0;
            for (auto& p : parents) {
                const std::int64_t len = p->shape[axis_s];
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::int64_t o = 0; o < outer; ++o)
                        kernels::axpy(T(1), g + (o * total + axis_off) * inner,
                                      p->grad.data() + o * len * inner, len * inner);
                }
                axis_off += len;
            }
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::int64_t start, std::int64_t len) {
    auto xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r || start < 0 || start + len > xn->shape[axis])
        throw std::runtime_error("slice: range out of bounds");
    Shape out_shape = xn->shape;
    out_shape[axis] = len;
    auto n = detail::make_node<T>(out_shape, {xn});

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= xn->shape[i];
    for (int i = axis + 1; i < r; ++i) inner *= xn->shape[i];
    const std::int64_t full = xn->shape[axis];

    for (std::int64_t o = 0; o < outer; ++o)
        std::memcpy(n->val.data() + o * len * inner,
                    xn->val.data() + (o * full + start) * inner, sizeof(T) * len * inner);

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, outer, inner, full, start, len]() {
            xn->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o)
                kernels::axpy(T(1), on->grad.data() + o * len * inner,
                              xn->grad.data() + (o * full + start) * inner, len * inner);
        };
    }
    return Tensor<T>(n);
}

// Split into equal parts along an axis; exact inverse of concat.
template <class T>
std::vector<Tensor<T>> split(const Tensor<T>& x, int axis, int parts) {
    if (axis < 0) axis += x.rank();
    const std::int64_t len = x.shape()[axis];
    if (parts <= 0 || len % parts != 0)
        throw std::runtime_error("split: axis extent not divisible by part count");
    const std::int64_t step = len / parts;
    std::vector<Tensor<T>> out;
    for (int i = 0; i < parts; ++i) out.push_back(slice(x, axis, i * step, step));
    return out;
}

// Zero-pads the last two axes.
template <class T>
Tensor<T> pad2d(const Tensor<T>& x, std::int64_t top, std::int64_t bottom, std::int64_t left,
                std::int64_t right) {
    auto xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (r < 2) throw std::runtime_error("pad2d: rank must be >= 2");
    Shape out_shape = xn->shape;
    const std::int64_t H = out_shape[r - 2], W = out_shape[r - 1];
    out_shape[r - 2] = H + top + bottom;
    out_shape[r - 1] = W + left + right;
    auto n = detail::make_node<T>(out_shape, {xn});

    std::int64_t outer = 1;
    for (int i = 0; i < r - 2; ++i) outer *= xn->shape[i];
    const std::int64_t Ho = out_shape[r - 2], Wo = out_shape[r - 1];

    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t y = 0; y < H; ++y)
            std::memcpy(n->val.data() + (o * Ho + y + top) * Wo + left,
                        xn->val.data() + (o * H + y) * W, sizeof(T) * W);

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, outer, H, W, Ho, Wo, top, left]() {
            xn->ensure_grad();
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t y = 0; y < H; ++y)
                    kernels::axpy(T(1), on->grad.data() + (o * Ho + y + top) * Wo + left,
                                  xn->grad.data() + (o * H + y) * W, W);
        };
    }
    return Tensor<T>(n);
}

// ---- matmul ----------------------------------------------------------------

namespace detail {

// C[m,n] (+)= A[m,k] * B[k,n]; saxpy over rows keeps the per-element
// accumulation order fixed.
template <class T>
void gemm(const T* A, const T* B, T* C, std::int64_t m, std::int64_t k, std::int64_t n,
          bool accumulate) {
    if (!accumulate) std::fill(C, C + m * n, T(0));
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t l = 0; l < k; ++l)
            kernels::axpy(A[i * k + l], B + l * n, C + i * n, n);
}

// C[m,n] += A[m,k] * B[n,k]^T
template <class T>
void gemm_abt(const T* A, const T* B, T* C, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            C[i * n + j] += kernels::dot(A + i * k, B + j * k, k);
}

// C[k,n] += A[m,k]^T * B[m,n]
template <class T>
void gemm_atb(const T* A, const T* B, T* C, std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t l = 0; l < m; ++l)
        for (std::int64_t i = 0; i < k; ++i)
            kernels::axpy(A[l * k + i], B + l * n, C + i * n, n);
}

}  // namespace detail

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    auto an = a.node();
    auto bn = b.node();
    const int ra = static_cast<int>(an->shape.size());
    const int rb = static_cast<int>(bn->shape.size());
    if (ra < 2 || rb < 2) throw std::runtime_error("matmul: rank must be >= 2");
    if (ra != rb) throw std::runtime_error("matmul: batch rank mismatch");
    for (int i = 0; i < ra - 2; ++i)
        if (an->shape[i] != bn->shape[i]) throw std::runtime_error("matmul: batch extents differ");
    const std::int64_t m = an->shape[ra - 2], k = an->shape[ra - 1];
    const std::int64_t k2 = bn->shape[rb - 2], nn = bn->shape[rb - 1];
    if (k != k2)
        throw std::runtime_error("matmul: inner extents mismatch " + shape_str(an->shape) +
                                 " vs " + shape_str(bn->shape));
    Shape out_shape(an->shape.begin(), an->shape.end() - 2);
    std::int64_t batch = shape_numel(out_shape);
    out_shape.push_back(m);
    out_shape.push_back(nn);
    auto n = detail::make_node<T>(out_shape, {an, bn});

    for (std::int64_t bidx = 0; bidx < batch; ++bidx)
        detail::gemm(an->val.data() + bidx * m * k, bn->val.data() + bidx * k * nn,
                     n->val.data() + bidx * m * nn, m, k, nn, false);
    detail::check_finite(*n, "matmul");

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, an, bn, batch, m, k, nn]() {
            const T* g = on->grad.data();
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::int64_t bi = 0; bi < batch; ++bi)
                    detail::gemm_abt(g + bi * m * nn, bn->val.data() + bi * k * nn,
                                     an->grad.data() + bi * m * k, m, nn, k);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::int64_t bi = 0; bi < batch; ++bi)
                    detail::gemm_atb(an->val.data() + bi * m * k, g + bi * m * nn,
                                     bn->grad.data() + bi * k * nn, m, k, nn);
            }
        };
    }
    return Tensor<T>(n);
}

// ---- layer norm ------------------------------------------------------------

// Normalizes along `axis` (per remaining position) before the affine.
template <class T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, int axis,
                    T eps = T(1e-5)) {
    auto xn = x.node();
    const int r = static_cast<int>(xn->shape.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw std::runtime_error("layernorm: axis out of range");
    const std::int64_t len = xn->shape[axis];
    if (gamma.numel() != len || beta.numel() != len)
        throw std::runtime_error("layernorm: affine size mismatch");
    auto gn = gamma.node();
    auto btn = beta.node();
    auto n = detail::make_node<T>(xn->shape, {xn, gn, btn});

    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= xn->shape[i];
    for (int i = axis + 1; i < r; ++i) inner *= xn->shape[i];

    // Cache inv-std per position for backward.
    auto inv_std = std::make_shared<std::vector<T>>(outer * inner);
    auto means = std::make_shared<std::vector<T>>(outer * inner);

    const T* px = xn->val.data();
    const T* pg = gn->val.data();
    const T* pb = btn->val.data();
    T* po = n->val.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t pos = o * inner + in;
            T mu = T(0);
            for (std::int64_t l = 0; l < len; ++l) mu += px[(o * len + l) * inner + in];
            mu /= T(len);
            T var = T(0);
            for (std::int64_t l = 0; l < len; ++l) {
                const T d = px[(o * len + l) * inner + in] - mu;
                var += d * d;
            }
            var /= T(len);
            const T is = T(1) / std::sqrt(var + eps);
            (*inv_std)[pos] = is;
            (*means)[pos] = mu;
            for (std::int64_t l = 0; l < len; ++l) {
                const std::int64_t off = (o * len + l) * inner + in;
                po[off] = pg[l] * (px[off] - mu) * is + pb[l];
            }
        }
    detail::check_finite(*n, "layernorm");

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, gn, btn, inv_std, means, outer, inner, len]() {
            const T* g = on->grad.data();
            const T* px = xn->val.data();
            const T* pg = gn->val.data();
            T* gx = nullptr;
            T* gg = nullptr;
            T* gb = nullptr;
            if (xn->requires_grad) { xn->ensure_grad(); gx = xn->grad.data(); }
            if (gn->requires_grad) { gn->ensure_grad(); gg = gn->grad.data(); }
            if (btn->requires_grad) { btn->ensure_grad(); gb = btn->grad.data(); }
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t in = 0; in < inner; ++in) {
                    const std::int64_t pos = o * inner + in;
                    const T is = (*inv_std)[pos];
                    const T mu = (*means)[pos];
                    T sum_gy = T(0), sum_gyx = T(0);
                    for (std::int64_t l = 0; l < len; ++l) {
                        const std::int64_t off = (o * len + l) * inner + in;
                        const T xh = (px[off] - mu) * is;
                        const T gy = g[off] * pg[l];
                        sum_gy += gy;
                        sum_gyx += gy * xh;
                        if (gg) gg[l] += g[off] * xh;
                        if (gb) gb[l] += g[off];
                    }
                    if (gx) {
                        const T inv_len = T(1) / T(len);
                        for (std::int64_t l = 0; l < len; ++l) {
                            const std::int64_t off = (o * len + l) * inner + in;
                            const T xh = (px[off] - mu) * is;
                            gx[off] += is * (g[off] * pg[l] - inv_len * (sum_gy + xh * sum_gyx));
                        }
                    }
                }
        };
    }
    return Tensor<T>(n);
}

// ---- linear ----------------------------------------------------------------

// x [..., in] * w [in, out] + b [out]
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    auto xn = x.node();
    auto wn = w.node();
    if (wn->shape.size() != 2) throw std::runtime_error("linear: weight must be rank 2");
    const std::int64_t in = wn->shape[0], out = wn->shape[1];
    if (xn->shape.empty() || xn->shape.back() != in)
        throw std::runtime_error("linear: input feature extent mismatch");
    const std::int64_t rows = xn->numel() / in;

    Shape out_shape = xn->shape;
    out_shape.back() = out;
    std::vector<std::shared_ptr<Node<T>>> parents = {xn, wn};
    std::shared_ptr<Node<T>> bn;
    if (b.defined()) {
        bn = b.node();
        if (bn->numel() != out) throw std::runtime_error("linear: bias size mismatch");
        parents.push_back(bn);
    }
    auto n = detail::make_node<T>(out_shape, parents);

    detail::gemm(xn->val.data(), wn->val.data(), n->val.data(), rows, in, out, false);
    if (bn)
        for (std::int64_t rix = 0; rix < rows; ++rix)
            kernels::add(n->val.data() + rix * out, bn->val.data(), n->val.data() + rix * out, out);
    detail::check_finite(*n, "linear");

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, wn, bn, rows, in, out]() {
            const T* g = on->grad.data();
            if (xn->requires_grad) {
                xn->ensure_grad();
                detail::gemm_abt(g, wn->val.data(), xn->grad.data(), rows, out, in);
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                detail::gemm_atb(xn->val.data(), g, wn->grad.data(), rows, in, out);
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (std::int64_t rix = 0; rix < rows; ++rix)
                    kernels::axpy(T(1), g + rix * out, bn->grad.data(), out);
            }
        };
    }
    return Tensor<T>(n);
}

// ---- fused binary cross-entropy from logits --------------------------------

// Elementwise loss -(g*ln p + (1-g)*ln(1-p)), p = clamp(sigmoid(z), eps, 1-eps).
// The target carries no gradient.
template <class T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& target, T eps = T(1e-7)) {
    auto zn = logits.node();
    auto tn = target.node();
    if (zn->shape != tn->shape)
        throw std::runtime_error("bce: logits/target shape mismatch " + shape_str(zn->shape) +
                                 " vs " + shape_str(tn->shape));
    auto n = detail::make_node<T>(zn->shape, {zn});

    auto probs = std::make_shared<std::vector<T>>(zn->numel());
    for (std::int64_t i = 0; i < zn->numel(); ++i) {
        const T z = zn->val[i];
        T p = z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
        const T pc = std::clamp(p, eps, T(1) - eps);
        (*probs)[i] = p;
        const T g = tn->val[i];
        n->val[i] = -(g * std::log(pc) + (T(1) - g) * std::log(T(1) - pc));
    }
    detail::check_finite(*n, "bce_with_logits");

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, zn, tn, probs, eps]() {
            zn->ensure_grad();
            for (std::int64_t i = 0; i < on->numel(); ++i) {
                const T p = (*probs)[i];
                T d;
                if (p < eps || p > T(1) - eps) {
                    // Clamp active: d(loss)/dp vanishes through the clamp.
                    d = T(0);
                } else {
                    d = p - tn->val[i];
                }
                zn->grad[i] += on->grad[i] * d;
            }
        };
    }
    return Tensor<T>(n);
}

}  // namespace mtnet
