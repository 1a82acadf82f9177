#pragma once
// Spatial ops on [N,C,H,W] tensors: grouped conv2d (im2col + gemm), window
// pooling, and bilinear upsampling with half-pixel centers.

#include "mtnet/ops.hpp"

namespace mtnet {

namespace detail {

// col layout: [Cg*kh*kw, Ho*Wo], zero-filled where the kernel overhangs.
template <class T>
void im2col(const T* x, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t kh,
            std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
            std::int64_t Wo, T* col) {
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t ky = 0; ky < kh; ++ky)
            for (std::int64_t kx = 0; kx < kw; ++kx) {
                T* row = col + ((c * kh + ky) * kw + kx) * Ho * Wo;
                for (std::int64_t oy = 0; oy < Ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ky;
                    T* dst = row + oy * Wo;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + Wo, T(0));
                        continue;
                    }
                    const T* src = x + (c * H + iy) * W;
                    if (stride == 1) {
                        for (std::int64_t ox = 0; ox < Wo; ++ox) {
                            const std::int64_t ix = ox - pad + kx;
                            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                        }
                    } else {
                        for (std::int64_t ox = 0; ox < Wo; ++ox) {
                            const std::int64_t ix = ox * stride - pad + kx;
                            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                        }
                    }
                }
            }
}

template <class T>
void col2im_accum(const T* col, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t kh,
                  std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t Ho,
                  std::int64_t Wo, T* gx) {
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t ky = 0; ky < kh; ++ky)
            for (std::int64_t kx = 0; kx < kw; ++kx) {
                const T* row = col + ((c * kh + ky) * kw + kx) * Ho * Wo;
                for (std::int64_t oy = 0; oy < Ho; ++oy) {
                    const std::int64_t iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = gx + (c * H + iy) * W;
                    const T* src = row + oy * Wo;
                    for (std::int64_t ox = 0; ox < Wo; ++ox) {
                        const std::int64_t ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
}

}  // namespace detail

// x [N,Cin,H,W], w [Cout,Cin/groups,kh,kw], optional b [Cout].
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::int64_t stride,
                 std::int64_t pad, std::int64_t groups = 1) {
    auto xn = x.node();
    auto wn = w.node();
    if (xn->shape.size() != 4 || wn->shape.size() != 4)
        throw std::runtime_error("conv2d: expects rank-4 input and weight");
    const std::int64_t N = xn->shape[0], Cin = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
    const std::int64_t Cout = wn->shape[0], Cg = wn->shape[1], kh = wn->shape[2], kw = wn->shape[3];
    if (groups <= 0 || Cin % groups != 0 || Cout % groups != 0 || Cg != Cin / groups)
        throw std::runtime_error("conv2d: channel/group bookkeeping mismatch");
    if (H + 2 * pad < kh || W + 2 * pad < kw)
        throw std::runtime_error("conv2d: kernel does not fit padded input");
    if ((H + 2 * pad - kh) % stride != 0 || (W + 2 * pad - kw) % stride != 0)
        throw std::runtime_error("conv2d: non-integral output extent");
    const std::int64_t Ho = (H + 2 * pad - kh) / stride + 1;
    const std::int64_t Wo = (W + 2 * pad - kw) / stride + 1;
    const std::int64_t Coutg = Cout / groups;
    const std::int64_t K = Cg * kh * kw;

    std::vector<std::shared_ptr<Node<T>>> parents = {xn, wn};
    std::shared_ptr<Node<T>> bn;
    if (b.defined()) {
        bn = b.node();
        if (bn->numel() != Cout) throw std::runtime_error("conv2d: bias size mismatch");
        parents.push_back(bn);
    }
    auto n = detail::make_node<T>({N, Cout, Ho, Wo}, parents);

    std::vector<T> col(K * Ho * Wo);
    for (std::int64_t s = 0; s < N; ++s)
        for (std::int64_t g = 0; g < groups; ++g) {
            detail::im2col(xn->val.data() + (s * Cin + g * Cg) * H * W, Cg, H, W, kh, kw, stride,
                           pad, Ho, Wo, col.data());
            detail::gemm(wn->val.data() + g * Coutg * K, col.data(),
                         n->val.data() + (s * Cout + g * Coutg) * Ho * Wo, Coutg, K, Ho * Wo,
                         false);
        }
    if (bn) {
        T* po = n->val.data();
        for (std::int64_t s = 0; s < N; ++s)
            for (std::int64_t c = 0; c < Cout; ++c) {
                const T bias = bn->val[c];
                T* plane = po + (s * Cout + c) * Ho * Wo;
                for (std::int64_t i = 0; i < Ho * Wo; ++i) plane[i] += bias;
            }
    }
    detail::check_finite(*n, "conv2d");

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, wn, bn, N, Cin, H, W, Cout, Cg, kh, kw, stride, pad, Ho, Wo,
                          groups, Coutg, K]() {
            const T* g = on->grad.data();
            std::vector<T> col(K * Ho * Wo);
            std::vector<T> dcol(K * Ho * Wo);
            const bool need_x = xn->requires_grad;
            const bool need_w = wn->requires_grad;
            if (need_x) xn->ensure_grad();
            if (need_w) wn->ensure_grad();
            for (std::int64_t s = 0; s < N; ++s)
                for (std::int64_t gi = 0; gi < groups; ++gi) {
                    const T* gout = g + (s * Cout + gi * Coutg) * Ho * Wo;
                    if (need_w) {
                        detail::im2col(xn->val.data() + (s * Cin + gi * Cg) * H * W, Cg, H, W, kh,
                                       kw, stride, pad, Ho, Wo, col.data());
                        detail::gemm_abt(gout, col.data(), wn->grad.data() + gi * Coutg * K, Coutg,
                                         Ho * Wo, K);
                    }
                    if (need_x) {
                        std::fill(dcol.begin(), dcol.end(), T(0));
                        detail::gemm_atb(wn->val.data() + gi * Coutg * K, gout, dcol.data(), Coutg,
                                         K, Ho * Wo);
                        detail::col2im_accum(dcol.data(), Cg, H, W, kh, kw, stride, pad, Ho, Wo,
                                             xn->grad.data() + (s * Cin + gi * Cg) * H * W);
                    }
                }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (std::int64_t s = 0; s < N; ++s)
                    for (std::int64_t c = 0; c < Cout; ++c) {
                        const T* plane = g + (s * Cout + c) * Ho * Wo;
                        bn->grad[c] += kernels::scalar::sum(plane, Ho * Wo);
                    }
            }
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::int64_t stride, std::int64_t pad,
                 std::int64_t groups = 1) {
    return conv2d(x, w, Tensor<T>(), stride, pad, groups);
}

// ---- pooling ---------------------------------------------------------------

template <class T>
Tensor<T> avgpool(const Tensor<T>& x, std::int64_t window) {
    auto xn = x.node();
    if (xn->shape.size() != 4) throw std::runtime_error("avgpool: expects rank-4 input");
    const std::int64_t N = xn->shape[0], C = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
    if (window > H || window > W) throw std::runtime_error("avgpool: window larger than input");
    const std::int64_t Ho = H / window, Wo = W / window;
    auto n = detail::make_node<T>({N, C, Ho, Wo}, {xn});
    const T inv = T(1) / T(window * window);

    const T* px = xn->val.data();
    T* po = n->val.data();
    for (std::int64_t nc = 0; nc < N * C; ++nc)
        for (std::int64_t oy = 0; oy < Ho; ++oy)
            for (std::int64_t ox = 0; ox < Wo; ++ox) {
                T s = T(0);
                for (std::int64_t ky = 0; ky < window; ++ky)
                    for (std::int64_t kx = 0; kx < window; ++kx)
                        s += px[(nc * H + oy * window + ky) * W + ox * window + kx];
                po[(nc * Ho + oy) * Wo + ox] = s * inv;
            }

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, N, C, H, W, Ho, Wo, window, inv]() {
            xn->ensure_grad();
            const T* g = on->grad.data();
            T* gx = xn->grad.data();
            for (std::int64_t nc = 0; nc < N * C; ++nc)
                for (std::int64_t oy = 0; oy < Ho; ++oy)
                    for (std::int64_t ox = 0; ox < Wo; ++ox) {
                        const T gv = g[(nc * Ho + oy) * Wo + ox] * inv;
                        for (std::int64_t ky = 0; ky < window; ++ky)
                            for (std::int64_t kx = 0; kx < window; ++kx)
                                gx[(nc * H + oy * window + ky) * W + ox * window + kx] += gv;
                    }
        };
    }
    return Tensor<T>(n);
}

template <class T>
Tensor<T> maxpool(const Tensor<T>& x, std::int64_t window) {
    auto xn = x.node();
    if (xn->shape.size() != 4) throw std::runtime_error("maxpool: expects rank-4 input");
    const std::int64_t N = xn->shape[0], C = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
    if (window > H || window > W) throw std::runtime_error("maxpool: window larger than input");
    const std::int64_t Ho = H / window, Wo = W / window;
    auto n = detail::make_node<T>({N, C, Ho, Wo}, {xn});
    auto arg = std::make_shared<std::vector<std::int64_t>>(n->numel());

    const T* px = xn->val.data();
    T* po = n->val.data();
    for (std::int64_t nc = 0; nc < N * C; ++nc)
        for (std::int64_t oy = 0; oy < Ho; ++oy)
            for (std::int64_t ox = 0; ox < Wo; ++ox) {
                std::int64_t best = (nc * H + oy * window) * W + ox * window;
                T bv = px[best];
                for (std::int64_t ky = 0; ky < window; ++ky)
                    for (std::int64_t kx = 0; kx < window; ++kx) {
                        const std::int64_t off =
                            (nc * H + oy * window + ky) * W + ox * window + kx;
                        if (px[off] > bv) { bv = px[off]; best = off; }
                    }
                const std::int64_t oo = (nc * Ho + oy) * Wo + ox;
                po[oo] = bv;
                (*arg)[oo] = best;
            }

    if (n->requires_grad) {
        auto* on = n.get();
        n->backward_fn = [on, xn, arg]() {
            xn->ensure_grad();
            for (std::int64_t i = 0; i < on->numel(); ++i)
                xn->grad[(*arg)[i]] += on->grad[i];
        };
    }
    return Tensor<T>(n);
}

// GAP over the spatial axes: [N,C,H,W] -> [N,C,1,1]
template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    return reduce_mean(reduce_mean(x, 3), 2);
}

template <class T>
Tensor<T> global_max_pool(const Tensor<T>& x) {
    return reduce_max(reduce_max(x, 3), 2);
}

// ---- bilinear upsampling ---------------------------------------------------

// Integer scale, align-corners=false (half-pixel centers).
template <class T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, std::int64_t scale) {
    if (scale < 1) throw std::runtime_error("upsample_bilinear: scale must be >= 1");
    auto xn = x.node();
    if (xn->shape.size() != 4) throw std::runtime_error("upsample_bilinear: expects rank-4 input");
    if (scale == 1) return reshape(x, xn->shape);
    const std::int64_t N = xn->shape[0], C = xn->shape[1], H = xn->shape[2], W = xn->shape[3];
    const std::int64_t Ho = H * scale, Wo = W * scale;
    auto n = detail::make_node<T>({N, C, Ho, Wo}, {xn});

    // Per-output-coordinate source index and weight, shared by every plane.
    std::vector<std::int64_t> y0(Ho), x0(Wo);
    std::vector<T> fy(Ho), fx(Wo);
    auto setup = [&](std::int64_t out_len, std::int64_t in_len, std::vector<std::int64_t>& i0,
                     std::vector<T>& f) {
        for (std::int64_t o = 0; o < out_len; ++o) {
            double s = (static_cast<double>(o) + 0.5) / static_cast<double>(scale) - 0.5;
            if (s < 0) s = 0;
            if (s > static_cast<double>(in_len - 1)) s = static_cast<double>(in_len - 1);
            std::int64_t i = static_cast<std::int64_t>(std::floor(s));
            if (i > in_len - 2) i = std::max<std::int64_t>(0, in_len - 2);
            i0[o] = i;
            f[o] = in_len == 1 ? T(0) : static_cast<T>(s - static_cast<double>(i));
        }
    };
    setup(Ho, H, y0, fy);
    setup(Wo, W, x0, fx);

    const T* px = xn->val.data();
    T* po = n->val.data();
    for (std::int64_t nc = 0; nc < N * C; ++nc) {
        const T* in = px + nc * H * W;
        T* out = po + nc * Ho * Wo;
        for (std::int64_t oy = 0; oy < Ho; ++oy) {
            const std::int64_t iy = y0[oy];
            const T wy = fy[oy];
            const std::int64_t iy1 = (H == 1) ? iy : iy + 1;
            for (std::int64_t ox = 0; ox < Wo; ++ox) {
                const std::int64_t ix = x0[ox];
                const T wx = fx[ox];
                const std::int64_t ix1 = (W == 1) ? ix : ix + 1;
                out[oy * Wo + ox] = (T(1) - wy) * ((T(1) - wx) * in[iy * W + ix] +
                                                   wx * in[iy * W + ix1]) +
                                    wy * ((T(1) - wx) * in[iy1 * W + ix] + wx * in[iy1 * W + ix1]);
            }
        }
    }
    detail::check_finite(*n, "upsample_bilinear");

    if (n->requires_grad) {
        auto* on = n.get();
        auto y0s = std::make_shared<std::vector<std::int64_t>>(std::move(y0));
        auto x0s = std::make_shared<std::vector<std::int64_t>>(std::move(x0));
        auto fys = std::make_shared<std::vector<T>>(std::move(fy));
        auto fxs = std::make_shared<std::vector<T>>(std::move(fx));
        n->backward_fn = [on, xn, y0s, x0s, fys, fxs, N, C, H, W, Ho, Wo]() {
            xn->ensure_grad();
            const T* g = on->grad.data();
            T* gx = xn->grad.data();
            for (std::int64_t nc = 0; nc < N * C; ++nc) {
                T* gin = gx + nc * H * W;
                const T* gout = g + nc * Ho * Wo;
                for (std::int64_t oy = 0; oy < Ho; ++oy) {
                    const std::int64_t iy = (*y0s)[oy];
                    const T wy = (*fys)[oy];
                    const std::int64_t iy1 = (H == 1) ? iy : iy + 1;
                    for (std::int64_t ox = 0; ox < Wo; ++ox) {
                        const std::int64_t ix = (*x0s)[ox];
                        const T wx = (*fxs)[ox];
                        const std::int64_t ix1 = (W == 1) ? ix : ix + 1;
                        const T gv = gout[oy * Wo + ox];
                        gin[iy * W + ix] += (T(1) - wy) * (T(1) - wx) * gv;
                        gin[iy * W + ix1] += (T(1) - wy) * wx * gv;
                        gin[iy1 * W + ix] += wy * (T(1) - wx) * gv;
                        gin[iy1 * W + ix1] += wy * wx * gv;
                    }
                }
            }
        };
    }
    return Tensor<T>(n);
}

}  // namespace mtnet
