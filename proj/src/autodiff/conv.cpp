#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"

namespace asd::ad {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

[[noreturn]] void fail(const Graph& g, const char* op, const std::string& msg) {
    throw ShapeError("node #" + std::to_string(g.next_index()) + " (" + op + "): " + msg);
}

// Geometry of a 2-D convolution; conv1d is the H = KH = 1 special case with
// padding applied only along the width.
struct ConvGeom {
    std::size_t batch, cin, cout, h, w, kh, kw, stride, pad_h, pad_w, hout, wout;

    std::size_t col_rows() const { return cin * kh * kw; }
    std::size_t col_cols() const { return hout * wout; }
};

void im2col(const ConvGeom& c, const double* x, double* col) {
    const std::size_t cols = c.col_cols();
    for (std::size_t ch = 0; ch < c.cin; ++ch) {
        const double* plane = x + ch * c.h * c.w;
        for (std::size_t ki = 0; ki < c.kh; ++ki) {
            for (std::size_t kj = 0; kj < c.kw; ++kj) {
                double* row = col + ((ch * c.kh + ki) * c.kw + kj) * cols;
                for (std::size_t oh = 0; oh < c.hout; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * c.stride + ki) -
                                    static_cast<std::ptrdiff_t>(c.pad_h);
                    double* dst = row + oh * c.wout;
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(c.h)) {
                        std::fill_n(dst, c.wout, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(ih) * c.w;
                    for (std::size_t ow = 0; ow < c.wout; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * c.stride + kj) -
                                        static_cast<std::ptrdiff_t>(c.pad_w);
                        dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(c.w)) ? 0.0
                                                                                     : src[iw];
                    }
                }
            }
        }
    }
}

void col2im_add(const ConvGeom& c, const double* col, double* dx) {
    const std::size_t cols = c.col_cols();
    for (std::size_t ch = 0; ch < c.cin; ++ch) {
        double* plane = dx + ch * c.h * c.w;
        for (std::size_t ki = 0; ki < c.kh; ++ki) {
            for (std::size_t kj = 0; kj < c.kw; ++kj) {
                const double* row = col + ((ch * c.kh + ki) * c.kw + kj) * cols;
                for (std::size_t oh = 0; oh < c.hout; ++oh) {
                    const auto ih = static_cast<std::ptrdiff_t>(oh * c.stride + ki) -
                                    static_cast<std::ptrdiff_t>(c.pad_h);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(c.h)) continue;
                    double* dst = plane + static_cast<std::size_t>(ih) * c.w;
                    const double* src = row + oh * c.wout;
                    for (std::size_t ow = 0; ow < c.wout; ++ow) {
                        const auto iw = static_cast<std::ptrdiff_t>(ow * c.stride + kj) -
                                        static_cast<std::ptrdiff_t>(c.pad_w);
                        if (iw >= 0 && iw < static_cast<std::ptrdiff_t>(c.w)) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

NodeId conv_impl(Graph& g, const char* op, NodeId x, NodeId weight, NodeId bias, const ConvGeom& c,
                 bool one_dimensional) {
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(weight);
    const Tensor& bv = g.value(bias);
    const std::size_t in_size = c.cin * c.h * c.w;
    const std::size_t out_plane = c.col_cols();

    Tensor out(one_dimensional ? Shape{c.batch, c.cout, c.wout} : Shape{c.batch, c.cout, c.hout, c.wout});
    std::vector<double> col(c.col_rows() * c.col_cols());
    CMapR wmat(wv.raw(), c.cout, c.col_rows());
    for (std::size_t b = 0; b < c.batch; ++b) {
        im2col(c, xv.raw() + b * in_size, col.data());
        MapR y(out.raw() + b * c.cout * out_plane, c.cout, out_plane);
        y.noalias() = wmat * CMapR(col.data(), c.col_rows(), c.col_cols());
        for (std::size_t o = 0; o < c.cout; ++o) y.row(o).array() += bv[o];
    }

    return g.record(op, {x, weight, bias}, std::move(out), [c, in_size, out_plane](const BackwardContext& ctx) {
        const Tensor& xv = ctx.operand(0);
        const Tensor& wv = ctx.operand(1);
        const Tensor& go = ctx.grad_output();
        Tensor* gx = ctx.grad(0);
        Tensor* gw = ctx.grad(1);
        Tensor* gb = ctx.grad(2);
        std::vector<double> col(c.col_rows() * c.col_cols());
        CMapR wmat(wv.raw(), c.cout, c.col_rows());
        for (std::size_t b = 0; b < c.batch; ++b) {
            CMapR gy(go.raw() + b * c.cout * out_plane, c.cout, out_plane);
            if (gb) {
                // Plain loop: Eigen's vectorised sum peels by address, which made
                // results depend on where the buffer happened to be allocated.
                for (std::size_t o = 0; o < c.cout; ++o) {
                    const double* row = go.raw() + (b * c.cout + o) * out_plane;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < out_plane; ++j) acc += row[j];
                    (*gb)[o] += acc;
                }
            }
            if (gw) {
                im2col(c, xv.raw() + b * in_size, col.data());
                MapR(gw->raw(), c.cout, c.col_rows()).noalias() +=
                    gy * CMapR(col.data(), c.col_rows(), c.col_cols()).transpose();
            }
            if (gx) {
                MapR(col.data(), c.col_rows(), c.col_cols()).noalias() = wmat.transpose() * gy;
                col2im_add(c, col.data(), gx->raw() + b * in_size);
            }
        }
    });
}

}  // namespace

NodeId conv1d(Graph& g, NodeId x, NodeId weight, NodeId bias, std::size_t stride, std::size_t padding) {
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(weight);
    const Tensor& bv = g.value(bias);
    if (xv.rank() != 3) fail(g, "conv1d", "input must be [B, Cin, L], got " + to_string(xv.shape()));
    if (wv.rank() != 3) fail(g, "conv1d", "weight must be [Cout, Cin, K], got " + to_string(wv.shape()));
    if (wv.dim(1) != xv.dim(1)) {
        fail(g, "conv1d", "input channels " + std::to_string(xv.dim(1)) + " vs weight " + to_string(wv.shape()));
    }
    if (bv.rank() != 1 || bv.dim(0) != wv.dim(0)) fail(g, "conv1d", "bias must be [Cout]");
    if (stride == 0) fail(g, "conv1d", "stride must be positive");
    const std::size_t padded = xv.dim(2) + 2 * padding;
    if (padded < wv.dim(2)) fail(g, "conv1d", "kernel longer than padded input");
    ConvGeom c{xv.dim(0), xv.dim(1), wv.dim(0), 1, xv.dim(2), 1, wv.dim(2), stride, 0, padding, 1,
               (padded - wv.dim(2)) / stride + 1};
    return conv_impl(g, "conv1d", x, weight, bias, c, true);
}

NodeId conv2d(Graph& g, NodeId x, NodeId weight, NodeId bias, std::size_t stride, std::size_t padding) {
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(weight);
    const Tensor& bv = g.value(bias);
    if (xv.rank() != 4) fail(g, "conv2d", "input must be [B, Cin, H, W], got " + to_string(xv.shape()));
    if (wv.rank() != 4) fail(g, "conv2d", "weight must be [Cout, Cin, KH, KW], got " + to_string(wv.shape()));
    if (wv.dim(1) != xv.dim(1)) {
        fail(g, "conv2d", "input channels " + std::to_string(xv.dim(1)) + " vs weight " + to_string(wv.shape()));
    }
    if (bv.rank() != 1 || bv.dim(0) != wv.dim(0)) fail(g, "conv2d", "bias must be [Cout]");
    if (stride == 0) fail(g, "conv2d", "stride must be positive");
    const std::size_t ph = xv.dim(2) + 2 * padding;
    const std::size_t pw = xv.dim(3) + 2 * padding;
    if (ph < wv.dim(2) || pw < wv.dim(3)) fail(g, "conv2d", "kernel larger than padded input");
    ConvGeom c{xv.dim(0), xv.dim(1), wv.dim(0), xv.dim(2), xv.dim(3), wv.dim(2), wv.dim(3), stride, padding,
               padding, (ph - wv.dim(2)) / stride + 1, (pw - wv.dim(3)) / stride + 1};
    return conv_impl(g, "conv2d", x, weight, bias, c, false);
}

NodeId channel_norm(Graph& g, NodeId x, NodeId gamma, NodeId beta, double eps) {
    const Tensor& xv = g.value(x);
    const Tensor& gv = g.value(gamma);
    const Tensor& bv = g.value(beta);
    if (xv.rank() < 3) fail(g, "channel_norm", "input must be [B, C, ...], got " + to_string(xv.shape()));
    const std::size_t batch = xv.dim(0), channels = xv.dim(1);
    if (gv.shape() != Shape{channels} || bv.shape() != Shape{channels}) {
        fail(g, "channel_norm", "gamma/beta must be [" + std::to_string(channels) + "]");
    }
    const std::size_t n = xv.size() / (batch * channels);
    Tensor out(xv.shape());
    std::vector<double> inv_std(batch * channels);
    for (std::size_t bc = 0; bc < batch * channels; ++bc) {
        const double* src = xv.raw() + bc * n;
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += src[i];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (src[i] - mu) * (src[i] - mu);
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[bc] = inv;
        const std::size_t ch = bc % channels;
        double* dst = out.raw() + bc * n;
        for (std::size_t i = 0; i < n; ++i) dst[i] = gv[ch] * (src[i] - mu) * inv + bv[ch];
    }
    return g.record(
        "channel_norm", {x, gamma, beta}, std::move(out),
        [batch, channels, n, inv_std = std::move(inv_std)](const BackwardContext& ctx) {
            const Tensor& xv = ctx.operand(0);
            const Tensor& gv = ctx.operand(1);
            const Tensor& go = ctx.grad_output();
            Tensor* gx = ctx.grad(0);
            Tensor* gg = ctx.grad(1);
            Tensor* gbeta = ctx.grad(2);
            std::vector<double> xhat(n);
            const double dn = static_cast<double>(n);
            for (std::size_t bc = 0; bc < batch * channels; ++bc) {
                const std::size_t ch = bc % channels;
                const double* src = xv.raw() + bc * n;
                const double* dy = go.raw() + bc * n;
                double mu = 0.0;
                for (std::size_t i = 0; i < n; ++i) mu += src[i];
                mu /= dn;
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    xhat[i] = (src[i] - mu) * inv_std[bc];
                    sum_dy += dy[i];
                    sum_dy_xhat += dy[i] * xhat[i];
                }
                if (gg) (*gg)[ch] += sum_dy_xhat;
                if (gbeta) (*gbeta)[ch] += sum_dy;
                if (gx) {
                    const double scale = gv[ch] * inv_std[bc] / dn;
                    double* dst = gx->raw() + bc * n;
                    for (std::size_t i = 0; i < n; ++i) {
                        dst[i] += scale * (dn * dy[i] - sum_dy - xhat[i] * sum_dy_xhat);
                    }
                }
            }
        });
}

}  // namespace asd::ad
