#include "dehaze/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace dehaze {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

void require_nchw(const Tensor& x, const char* what) {
    if (x.ndim() != 4) throw DimensionError(std::string(what) + ": expected N×C×H×W");
}

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// x: one sample [C,H,W] -> cols [C*K*K, Ho*Wo], zero padding.
void im2col(const double* x, int C, int H, int W, int k, int stride, int pad, double* cols) {
    const int Ho = conv_out(H, k, stride, pad);
    const int Wo = conv_out(W, k, stride, pad);
    const int plane = Ho * Wo;
    for (int c = 0; c < C; ++c) {
        const double* xc = x + static_cast<std::size_t>(c) * H * W;
        for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
                double* row = cols + (static_cast<std::size_t>(c) * k * k + u * k + v) * plane;
                for (int oi = 0; oi < Ho; ++oi) {
                    const int i = oi * stride - pad + u;
                    if (i < 0 || i >= H) {
                        std::fill(row + oi * Wo, row + (oi + 1) * Wo, 0.0);
                        continue;
                    }
                    const double* src = xc + static_cast<std::size_t>(i) * W;
                    for (int oj = 0; oj < Wo; ++oj) {
                        const int j = oj * stride - pad + v;
                        row[oi * Wo + oj] = (j >= 0 && j < W) ? src[j] : 0.0;
                    }
                }
            }
        }
    }
}

// Scatter-add of cols back into x (the adjoint of im2col).
void col2im(const double* cols, int C, int H, int W, int k, int stride, int pad, double* x) {
    const int Ho = conv_out(H, k, stride, pad);
    const int Wo = conv_out(W, k, stride, pad);
    const int plane = Ho * Wo;
    for (int c = 0; c < C; ++c) {
        double* xc = x + static_cast<std::size_t>(c) * H * W;
        for (int u = 0; u < k; ++u) {
            for (int v = 0; v < k; ++v) {
                const double* row = cols + (static_cast<std::size_t>(c) * k * k + u * k + v) * plane;
                for (int oi = 0; oi < Ho; ++oi) {
                    const int i = oi * stride - pad + u;
                    if (i < 0 || i >= H) continue;
                    double* dst = xc + static_cast<std::size_t>(i) * W;
                    for (int oj = 0; oj < Wo; ++oj) {
                        const int j = oj * stride - pad + v;
                        if (j >= 0 && j < W) dst[j] += row[oi * Wo + oj];
                    }
                }
            }
        }
    }
}

// Elementwise unary helper: fwd(value) and dx = gy * dfn(x_value, y_value).
template <typename F, typename DF>
Var pointwise(Tape& t, Var x, F fwd, DF dfn) {
    const Tensor& vx = t.value(x);
    Tensor out = vx;
    for (double& v : out.raw()) v = fwd(v);
    const bool track = t.tracked(x);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, self, dfn](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            const Tensor& vin = tp.value(x);
            const Tensor& vout = tp.value(self);
            Tensor& gx = tp.grad(x);
            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * dfn(vin[i], vout[i]);
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

}  // namespace

Var Tape::leaf(Tensor value, bool track) { return emit(std::move(value), track, nullptr); }

Var Tape::emit(Tensor value, bool track, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.track = track;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
}

Tensor& Tape::grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v)];
    if (!n.grad_alloc) {
        n.grad = Tensor(n.value.shape());
        n.grad_alloc = true;
    }
    return n.grad;
}

void Tape::backward(Var root) {
    if (nodes_[static_cast<std::size_t>(root)].value.size() != 1)
        throw DimensionError("backward: root must be scalar");
    grad(root)[0] += 1.0;
    for (int i = root; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad_alloc && n.back) n.back(*this);
    }
}

Var detach(Tape& t, Var x) { return t.leaf(t.value(x), false); }

Var concat_channels(Tape& t, Var a, Var b) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    require_nchw(va, "concat_channels");
    require_nchw(vb, "concat_channels");
    if (va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2) || va.dim(3) != vb.dim(3))
        throw DimensionError("concat_channels: mismatched N/H/W");
    const int N = va.dim(0), Ca = va.dim(1), Cb = vb.dim(1), H = va.dim(2), W = va.dim(3);
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out({N, Ca + Cb, H, W});
    for (int n = 0; n < N; ++n) {
        std::copy_n(va.data() + n * Ca * plane, Ca * plane, out.data() + n * (Ca + Cb) * plane);
        std::copy_n(vb.data() + n * Cb * plane, Cb * plane,
                    out.data() + (n * (Ca + Cb) + Ca) * plane);
    }
    const bool track = t.tracked(a) || t.tracked(b);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [a, b, self, N, Ca, Cb, plane](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            if (tp.tracked(a)) {
                Tensor& ga = tp.grad(a);
                for (int n = 0; n < N; ++n)
                    for (std::size_t i = 0; i < Ca * plane; ++i)
                        ga[n * Ca * plane + i] += gy[n * (Ca + Cb) * plane + i];
            }
            if (tp.tracked(b)) {
                Tensor& gb = tp.grad(b);
                for (int n = 0; n < N; ++n)
                    for (std::size_t i = 0; i < Cb * plane; ++i)
                        gb[n * Cb * plane + i] += gy[(n * (Ca + Cb) + Ca) * plane + i];
            }
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad) {
    const Tensor& vx = t.value(x);
    const Tensor& vw = t.value(w);
    const Tensor& vb = t.value(b);
    require_nchw(vx, "conv2d input");
    require_nchw(vw, "conv2d weight");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    const int Cout = vw.dim(0), k = vw.dim(2);
    if (vw.dim(1) != C) throw DimensionError("conv2d: weight Cin mismatch");
    if (vw.dim(3) != k) throw DimensionError("conv2d: non-square kernel");
    if (vb.size() != static_cast<std::size_t>(Cout)) throw DimensionError("conv2d: bias size");
    const int Ho = conv_out(H, k, stride, pad);
    const int Wo = conv_out(W, k, stride, pad);
    if (Ho <= 0 || Wo <= 0) throw DimensionError("conv2d: output collapsed to zero size");

    const int ckk = C * k * k;
    const int plane = Ho * Wo;
    Tensor out({N, Cout, Ho, Wo});
    {
        AlignedVec cols(static_cast<std::size_t>(ckk) * plane);
        CMapM Wm(vw.data(), Cout, ckk);
        for (int n = 0; n < N; ++n) {
            im2col(vx.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, k, stride, pad,
                   cols.data());
            CMapM colm(cols.data(), ckk, plane);
            MapM ym(out.data() + static_cast<std::size_t>(n) * Cout * plane, Cout, plane);
            ym.noalias() = Wm * colm;
            for (int co = 0; co < Cout; ++co) ym.row(co).array() += vb[static_cast<std::size_t>(co)];
        }
    }

    const bool track = t.tracked(x) || t.tracked(w) || t.tracked(b);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, w, b, stride, pad, self, N, C, H, W, Cout, k, Ho, Wo](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            const Tensor& vx2 = tp.value(x);
            const Tensor& vw2 = tp.value(w);
            const int ckk2 = C * k * k;
            const int plane2 = Ho * Wo;
            const bool need_x = tp.tracked(x);
            const bool need_w = tp.tracked(w);
            const bool need_b = tp.tracked(b);
            AlignedVec cols(static_cast<std::size_t>(ckk2) * plane2);
            AlignedVec dcols(need_x ? cols.size() : 0);
            CMapM Wm(vw2.data(), Cout, ckk2);
            for (int n = 0; n < N; ++n) {
                CMapM gym(gy.data() + static_cast<std::size_t>(n) * Cout * plane2, Cout, plane2);
                if (need_w) {
                    im2col(vx2.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, k,
                           stride, pad, cols.data());
                    CMapM colm(cols.data(), ckk2, plane2);
                    MapM gwm(tp.grad(w).data(), Cout, ckk2);
                    gwm.noalias() += gym * colm.transpose();
                }
                if (need_b) {
                    Tensor& gb = tp.grad(b);
                    for (int co = 0; co < Cout; ++co) gb[co] += gym.row(co).sum();
                }
                if (need_x) {
                    MapM dcolm(dcols.data(), ckk2, plane2);
                    dcolm.noalias() = Wm.transpose() * gym;
                    col2im(dcols.data(), C, H, W, k, stride, pad,
                           tp.grad(x).data() + static_cast<std::size_t>(n) * C * H * W);
                }
            }
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

Var conv_transpose2d(Tape& t, Var x, Var w, Var b, int stride, int pad, int out_pad) {
    const Tensor& vx = t.value(x);
    const Tensor& vw = t.value(w);
    const Tensor& vb = t.value(b);
    require_nchw(vx, "conv_transpose2d input");
    require_nchw(vw, "conv_transpose2d weight");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    const int Cout = vw.dim(1), k = vw.dim(2);
    if (vw.dim(0) != C) throw DimensionError("conv_transpose2d: weight Cin mismatch");
    if (vb.size() != static_cast<std::size_t>(Cout))
        throw DimensionError("conv_transpose2d: bias size");
    if (out_pad >= stride) throw DimensionError("conv_transpose2d: out_pad must be < stride");
    const int Ho = (H - 1) * stride - 2 * pad + k + out_pad;
    const int Wo = (W - 1) * stride - 2 * pad + k + out_pad;
    if (Ho <= 0 || Wo <= 0) throw DimensionError("conv_transpose2d: output collapsed");

    // Forward = adjoint of a conv over the output: cols = W^T x, then scatter.
    const int okk = Cout * k * k;
    const int in_plane = H * W;
    Tensor out({N, Cout, Ho, Wo});
    {
        AlignedVec cols(static_cast<std::size_t>(okk) * in_plane);
        CMapM Wm(vw.data(), C, okk);
        for (int n = 0; n < N; ++n) {
            CMapM xm(vx.data() + static_cast<std::size_t>(n) * C * in_plane, C, in_plane);
            MapM colm(cols.data(), okk, in_plane);
            colm.noalias() = Wm.transpose() * xm;
            double* yn = out.data() + static_cast<std::size_t>(n) * Cout * Ho * Wo;
            col2im(cols.data(), Cout, Ho, Wo, k, stride, pad, yn);
            for (int co = 0; co < Cout; ++co) {
                double* plane_ptr = yn + static_cast<std::size_t>(co) * Ho * Wo;
                for (int i = 0; i < Ho * Wo; ++i) plane_ptr[i] += vb[static_cast<std::size_t>(co)];
            }
        }
    }

    const bool track = t.tracked(x) || t.tracked(w) || t.tracked(b);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, w, b, stride, pad, self, N, C, H, W, Cout, k, Ho, Wo](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            const Tensor& vx2 = tp.value(x);
            const Tensor& vw2 = tp.value(w);
            const int okk2 = Cout * k * k;
            const int in_plane2 = H * W;
            const bool need_x = tp.tracked(x);
            const bool need_w = tp.tracked(w);
            const bool need_b = tp.tracked(b);
            AlignedVec dcols(static_cast<std::size_t>(okk2) * in_plane2);
            CMapM Wm(vw2.data(), C, okk2);
            for (int n = 0; n < N; ++n) {
                im2col(gy.data() + static_cast<std::size_t>(n) * Cout * Ho * Wo, Cout, Ho, Wo, k,
                       stride, pad, dcols.data());
                CMapM dcolm(dcols.data(), okk2, in_plane2);
                if (need_x) {
                    MapM gxm(tp.grad(x).data() + static_cast<std::size_t>(n) * C * in_plane2, C,
                             in_plane2);
                    gxm.noalias() += Wm * dcolm;
                }
                if (need_w) {
                    CMapM xm(vx2.data() + static_cast<std::size_t>(n) * C * in_plane2, C,
                             in_plane2);
                    MapM gwm(tp.grad(w).data(), C, okk2);
                    gwm.noalias() += xm * dcolm.transpose();
                }
                if (need_b) {
                    Tensor& gb = tp.grad(b);
                    const double* gn = gy.data() + static_cast<std::size_t>(n) * Cout * Ho * Wo;
                    for (int co = 0; co < Cout; ++co) {
                        double s = 0.0;
                        const double* p = gn + static_cast<std::size_t>(co) * Ho * Wo;
                        for (int i = 0; i < Ho * Wo; ++i) s += p[i];
                        gb[co] += s;
                    }
                }
            }
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

Var instance_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
    const Tensor& vx = t.value(x);
    const Tensor& vg = t.value(gamma);
    const Tensor& vbe = t.value(beta);
    require_nchw(vx, "instance_norm");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    if (vg.size() != static_cast<std::size_t>(C) || vbe.size() != static_cast<std::size_t>(C))
        throw DimensionError("instance_norm: gamma/beta size mismatch");
    const int hw = H * W;

    Tensor out({N, C, H, W});
    // Per-(n,c) statistics are cheap to keep for the backward pass.
    auto stats = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N) * C * 2);
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const double* xp = vx.data() + (static_cast<std::size_t>(n) * C + c) * hw;
            double mu = 0.0;
            for (int i = 0; i < hw; ++i) mu += xp[i];
            mu /= hw;
            double var = 0.0;
            for (int i = 0; i < hw; ++i) var += (xp[i] - mu) * (xp[i] - mu);
            var /= hw;
            const double inv_std = 1.0 / std::sqrt(var + eps);
            (*stats)[(static_cast<std::size_t>(n) * C + c) * 2] = mu;
            (*stats)[(static_cast<std::size_t>(n) * C + c) * 2 + 1] = inv_std;
            double* yp = out.data() + (static_cast<std::size_t>(n) * C + c) * hw;
            const double g = vg[static_cast<std::size_t>(c)];
            const double be = vbe[static_cast<std::size_t>(c)];
            for (int i = 0; i < hw; ++i) yp[i] = g * (xp[i] - mu) * inv_std + be;
        }
    }

    const bool track = t.tracked(x) || t.tracked(gamma) || t.tracked(beta);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, gamma, beta, self, N, C, hw, stats](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            const Tensor& vx2 = tp.value(x);
            const Tensor& vg2 = tp.value(gamma);
            const bool need_x = tp.tracked(x);
            const bool need_g = tp.tracked(gamma);
            const bool need_b = tp.tracked(beta);
            for (int n = 0; n < N; ++n) {
                for (int c = 0; c < C; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(n) * C + c) * hw;
                    const double mu = (*stats)[(static_cast<std::size_t>(n) * C + c) * 2];
                    const double inv_std = (*stats)[(static_cast<std::size_t>(n) * C + c) * 2 + 1];
                    const double* xp = vx2.data() + base;
                    const double* gp = gy.data() + base;
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (int i = 0; i < hw; ++i) {
                        const double xh = (xp[i] - mu) * inv_std;
                        sum_g += gp[i];
                        sum_gx += gp[i] * xh;
                    }
                    if (need_g) tp.grad(gamma)[c] += sum_gx;
                    if (need_b) tp.grad(beta)[c] += sum_g;
                    if (need_x) {
                        double* gxp = tp.grad(x).data() + base;
                        const double g = vg2[static_cast<std::size_t>(c)];
                        const double mean_g = sum_g / hw;
                        const double mean_gx = sum_gx / hw;
                        for (int i = 0; i < hw; ++i) {
                            const double xh = (xp[i] - mu) * inv_std;
                            gxp[i] += g * inv_std * (gp[i] - mean_g - xh * mean_gx);
                        }
                    }
                }
            }
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

Var relu(Tape& t, Var x) {
    return pointwise(
        t, x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double xin, double) { return xin > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Tape& t, Var x, double slope) {
    return pointwise(
        t, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double xin, double) { return xin > 0.0 ? 1.0 : slope; });
}

Var tanh_op(Tape& t, Var x) {
    return pointwise(
        t, x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Var affine(Tape& t, Var x, double scale, double shift) {
    return pointwise(
        t, x, [scale, shift](double v) { return scale * v + shift; },
        [scale](double, double) { return scale; });
}

Var abs_op(Tape& t, Var x) {
    return pointwise(
        t, x, [](double v) { return std::fabs(v); },
        [](double xin, double) { return xin > 0.0 ? 1.0 : (xin < 0.0 ? -1.0 : 0.0); });
}

Var square(Tape& t, Var x) {
    return pointwise(
        t, x, [](double v) { return v * v; }, [](double xin, double) { return 2.0 * xin; });
}

namespace {

Var binary_op(Tape& t, Var a, Var b, double (*fwd)(double, double), double da_sign, double db_sign,
              bool is_mul) {
    const Tensor& va = t.value(a);
    const Tensor& vb = t.value(b);
    if (!va.same_shape(vb)) throw DimensionError("elementwise op: shape mismatch");
    Tensor out = va;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(va[i], vb[i]);
    const bool track = t.tracked(a) || t.tracked(b);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [a, b, self, da_sign, db_sign, is_mul](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            if (tp.tracked(a)) {
                Tensor& ga = tp.grad(a);
                if (is_mul) {
                    const Tensor& vb2 = tp.value(b);
                    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * vb2[i];
                } else {
                    for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * da_sign;
                }
            }
            if (tp.tracked(b)) {
                Tensor& gb = tp.grad(b);
                if (is_mul) {
                    const Tensor& va2 = tp.value(a);
                    for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * va2[i];
                } else {
                    for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * db_sign;
                }
            }
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
    return binary_op(t, a, b, [](double x, double y) { return x + y; }, 1.0, 1.0, false);
}

Var sub(Tape& t, Var a, Var b) {
    return binary_op(t, a, b, [](double x, double y) { return x - y; }, 1.0, -1.0, false);
}

Var mul(Tape& t, Var a, Var b) {
    return binary_op(t, a, b, [](double x, double y) { return x * y; }, 0.0, 0.0, true);
}

Var upsample_nearest2x(Tape& t, Var x) {
    const Tensor& vx = t.value(x);
    require_nchw(vx, "upsample_nearest2x");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    Tensor out({N, C, 2 * H, 2 * W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    const double v = vx(n, c, i, j);
                    out(n, c, 2 * i, 2 * j) = v;
                    out(n, c, 2 * i, 2 * j + 1) = v;
                    out(n, c, 2 * i + 1, 2 * j) = v;
                    out(n, c, 2 * i + 1, 2 * j + 1) = v;
                }
    const bool track = t.tracked(x);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, self, N, C, H, W](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            Tensor& gx = tp.grad(x);
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int i = 0; i < H; ++i)
                        for (int j = 0; j < W; ++j)
                            gx(n, c, i, j) += gy(n, c, 2 * i, 2 * j) + gy(n, c, 2 * i, 2 * j + 1) +
                                              gy(n, c, 2 * i + 1, 2 * j) +
                                              gy(n, c, 2 * i + 1, 2 * j + 1);
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

namespace {

struct LerpCoef {
    int lo, hi;
    double w_hi;
};

LerpCoef lerp_coef(int out_idx, int out_size, int in_size) {
    // Half-pixel centers; exact identity when sizes match.
    const double src = (out_idx + 0.5) * static_cast<double>(in_size) / out_size - 0.5;
    const double clamped = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(clamped));
    const int hi = std::min(lo + 1, in_size - 1);
    return {lo, hi, clamped - lo};
}

}  // namespace

Var resize_bilinear(Tape& t, Var x, int out_h, int out_w) {
    const Tensor& vx = t.value(x);
    require_nchw(vx, "resize_bilinear");
    if (out_h <= 0 || out_w <= 0) throw DimensionError("resize_bilinear: bad output size");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    Tensor out({N, C, out_h, out_w});
    for (int i = 0; i < out_h; ++i) {
        const LerpCoef ci = lerp_coef(i, out_h, H);
        for (int j = 0; j < out_w; ++j) {
            const LerpCoef cj = lerp_coef(j, out_w, W);
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const double top =
                        vx(n, c, ci.lo, cj.lo) * (1 - cj.w_hi) + vx(n, c, ci.lo, cj.hi) * cj.w_hi;
                    const double bot =
                        vx(n, c, ci.hi, cj.lo) * (1 - cj.w_hi) + vx(n, c, ci.hi, cj.hi) * cj.w_hi;
                    out(n, c, i, j) = top * (1 - ci.w_hi) + bot * ci.w_hi;
                }
        }
    }
    const bool track = t.tracked(x);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, self, N, C, H, W, out_h, out_w](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            Tensor& gx = tp.grad(x);
            for (int i = 0; i < out_h; ++i) {
                const LerpCoef ci = lerp_coef(i, out_h, H);
                for (int j = 0; j < out_w; ++j) {
                    const LerpCoef cj = lerp_coef(j, out_w, W);
                    for (int n = 0; n < N; ++n)
                        for (int c = 0; c < C; ++c) {
                            const double g = gy(n, c, i, j);
                            gx(n, c, ci.lo, cj.lo) += g * (1 - ci.w_hi) * (1 - cj.w_hi);
                            gx(n, c, ci.lo, cj.hi) += g * (1 - ci.w_hi) * cj.w_hi;
                            gx(n, c, ci.hi, cj.lo) += g * ci.w_hi * (1 - cj.w_hi);
                            gx(n, c, ci.hi, cj.hi) += g * ci.w_hi * cj.w_hi;
                        }
                }
            }
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

Var mean_all(Tape& t, Var x) {
    const Tensor& vx = t.value(x);
    double s = 0.0;
    for (double v : vx.raw()) s += v;
    const double n = static_cast<double>(vx.size());
    Tensor out({1});
    out[0] = s / n;
    const bool track = t.tracked(x);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, self, n](Tape& tp) {
            const double g = tp.grad(self)[0] / n;
            Tensor& gx = tp.grad(x);
            for (double& v : gx.raw()) v += g;
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

Var weighted_sum(Tape& t, const std::vector<Var>& terms, const std::vector<double>& weights) {
    if (terms.size() != weights.size() || terms.empty())
        throw DimensionError("weighted_sum: term/weight count mismatch");
    double s = 0.0;
    bool track = false;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const Tensor& v = t.value(terms[i]);
        if (v.size() != 1) throw DimensionError("weighted_sum: terms must be scalars");
        s += weights[i] * v[0];
        track = track || t.tracked(terms[i]);
    }
    Tensor out({1});
    out[0] = s;
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        std::vector<Var> ts = terms;
        std::vector<double> ws = weights;
        back = [ts, ws, self](Tape& tp) {
            const double g = tp.grad(self)[0];
            for (std::size_t i = 0; i < ts.size(); ++i)
                if (tp.tracked(ts[i])) tp.grad(ts[i])[0] += g * ws[i];
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

Var window_channel_min(Tape& t, Var x, int patch, bool soft, double sharpness) {
    const Tensor& vx = t.value(x);
    require_nchw(vx, "window_channel_min");
    if (patch <= 0 || patch % 2 == 0)
        throw DomainError("window_channel_min: patch must be odd positive");
    if (soft && !(sharpness > 0.0)) throw DomainError("window_channel_min: sharpness must be > 0");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    const int r = patch / 2;

    Tensor out({N, 1, H, W});
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                double m = vx(n, 0, i, j);
                for (int c = 0; c < C; ++c)
                    for (int di = -r; di <= r; ++di) {
                        const int ii = std::clamp(i + di, 0, H - 1);
                        for (int dj = -r; dj <= r; ++dj) {
                            const int jj = std::clamp(j + dj, 0, W - 1);
                            m = std::min(m, vx(n, c, ii, jj));
                        }
                    }
                if (soft) {
                    double denom = 0.0;
                    for (int c = 0; c < C; ++c)
                        for (int di = -r; di <= r; ++di) {
                            const int ii = std::clamp(i + di, 0, H - 1);
                            for (int dj = -r; dj <= r; ++dj) {
                                const int jj = std::clamp(j + dj, 0, W - 1);
                                denom += std::exp(-sharpness * (vx(n, c, ii, jj) - m));
                            }
                        }
                    out(n, 0, i, j) = m - std::log(denom) / sharpness;
                } else {
                    out(n, 0, i, j) = m;
                }
            }

    const bool track = t.tracked(x);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, self, N, C, H, W, r, soft, sharpness](Tape& tp) {
            const Tensor& gy = tp.grad(self);
            const Tensor& vx2 = tp.value(x);
            Tensor& gx = tp.grad(x);
            for (int n = 0; n < N; ++n)
                for (int i = 0; i < H; ++i)
                    for (int j = 0; j < W; ++j) {
                        const double g = gy(n, 0, i, j);
                        if (g == 0.0) continue;
                        double m = vx2(n, 0, i, j);
                        for (int c = 0; c < C; ++c)
                            for (int di = -r; di <= r; ++di) {
                                const int ii = std::clamp(i + di, 0, H - 1);
                                for (int dj = -r; dj <= r; ++dj) {
                                    const int jj = std::clamp(j + dj, 0, W - 1);
                                    m = std::min(m, vx2(n, c, ii, jj));
                                }
                            }
                        if (soft) {
                            double denom = 0.0;
                            for (int c = 0; c < C; ++c)
                                for (int di = -r; di <= r; ++di) {
                                    const int ii = std::clamp(i + di, 0, H - 1);
                                    for (int dj = -r; dj <= r; ++dj) {
                                        const int jj = std::clamp(j + dj, 0, W - 1);
                                        denom += std::exp(-sharpness * (vx2(n, c, ii, jj) - m));
                                    }
                                }
                            for (int c = 0; c < C; ++c)
                                for (int di = -r; di <= r; ++di) {
                                    const int ii = std::clamp(i + di, 0, H - 1);
                                    for (int dj = -r; dj <= r; ++dj) {
                                        const int jj = std::clamp(j + dj, 0, W - 1);
                                        gx(n, c, ii, jj) +=
                                            g * std::exp(-sharpness * (vx2(n, c, ii, jj) - m)) /
                                            denom;
                                    }
                                }
                        } else {
                            bool routed = false;
                            for (int c = 0; c < C && !routed; ++c)
                                for (int di = -r; di <= r && !routed; ++di) {
                                    const int ii = std::clamp(i + di, 0, H - 1);
                                    for (int dj = -r; dj <= r; ++dj) {
                                        const int jj = std::clamp(j + dj, 0, W - 1);
                                        if (vx2(n, c, ii, jj) == m) {
                                            gx(n, c, ii, jj) += g;
                                            routed = true;
                                            break;
                                        }
                                    }
                                }
                        }
                    }
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

Var tv_l1(Tape& t, Var x) {
    const Tensor& vx = t.value(x);
    require_nchw(vx, "tv_l1");
    const int N = vx.dim(0), C = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    if (H < 2 || W < 2) throw DimensionError("tv_l1: image too small for forward differences");
    const double nh = static_cast<double>(N) * C * H * (W - 1);
    const double nv = static_cast<double>(N) * C * (H - 1) * W;
    double sh = 0.0, sv = 0.0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j) {
                    if (j + 1 < W) sh += std::fabs(vx(n, c, i, j + 1) - vx(n, c, i, j));
                    if (i + 1 < H) sv += std::fabs(vx(n, c, i + 1, j) - vx(n, c, i, j));
                }
    Tensor out({1});
    out[0] = sh / nh + sv / nv;
    const bool track = t.tracked(x);
    const Var self = static_cast<Var>(t.node_count());
    std::function<void(Tape&)> back;
    if (track) {
        back = [x, self, N, C, H, W, nh, nv](Tape& tp) {
            const double g = tp.grad(self)[0];
            const Tensor& vx2 = tp.value(x);
            Tensor& gx = tp.grad(x);
            auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int i = 0; i < H; ++i)
                        for (int j = 0; j < W; ++j) {
                            if (j + 1 < W) {
                                const double s = sgn(vx2(n, c, i, j + 1) - vx2(n, c, i, j));
                                gx(n, c, i, j + 1) += g * s / nh;
                                gx(n, c, i, j) -= g * s / nh;
                            }
                            if (i + 1 < H) {
                                const double s = sgn(vx2(n, c, i + 1, j) - vx2(n, c, i, j));
                                gx(n, c, i + 1, j) += g * s / nv;
                                gx(n, c, i, j) -= g * s / nv;
                            }
                        }
        };
    }
    return t.emit(std::move(out), track, std::move(back));
}

}  // namespace dehaze
