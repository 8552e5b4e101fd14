#include "asd/autodiff/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "asd/error.hpp"

namespace asd::ad {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

[[noreturn]] void fail(const Graph& g, const char* op, const std::string& msg) {
    throw ShapeError("node #" + std::to_string(g.next_index()) + " (" + op + "): " + msg);
}

enum class Broadcast { kNone, kScalarA, kScalarB };

Broadcast binary_mode(const Graph& g, const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::kNone;
    if (b.size() == 1) return Broadcast::kScalarB;
    if (a.size() == 1) return Broadcast::kScalarA;
    fail(g, op, "operand shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
}

Shape output_shape(const Tensor& a, const Tensor& b, Broadcast mode) {
    return mode == Broadcast::kScalarA ? b.shape() : a.shape();
}

// Accumulates g (full-size) into target, summing when target is a scalar operand.
void accumulate(Tensor* target, const Tensor& g, double sign = 1.0) {
    if (!target) return;
    if (target->size() == g.size()) {
        for (std::size_t i = 0; i < g.size(); ++i) (*target)[i] += sign * g[i];
    } else {
        double s = 0.0;
        for (double v : g.data()) s += v;
        (*target)[0] += sign * s;
    }
}

struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.n = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
    Shape out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != axis) out.push_back(shape[i]);
    }
    if (out.empty()) out.push_back(1);
    return out;
}

template <class Fwd, class Deriv>
NodeId unary(Graph& g, const char* op, NodeId a, Fwd fwd, Deriv deriv) {
    const Tensor& x = g.value(a);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    return g.record(op, {a}, std::move(y), [deriv](const BackwardContext& ctx) {
        Tensor* ga = ctx.grad(0);
        if (!ga) return;
        const Tensor& x = ctx.operand(0);
        const Tensor& y = ctx.output();
        const Tensor& go = ctx.grad_output();
        for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += go[i] * deriv(x[i], y[i]);
    });
}

}  // namespace

NodeId add(Graph& g, NodeId a, NodeId b) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    const auto mode = binary_mode(g, "add", x, y);
    Tensor out(output_shape(x, y, mode));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[mode == Broadcast::kScalarA ? 0 : i] + y[mode == Broadcast::kScalarB ? 0 : i];
    }
    return g.record("add", {a, b}, std::move(out), [](const BackwardContext& ctx) {
        accumulate(ctx.grad(0), ctx.grad_output());
        accumulate(ctx.grad(1), ctx.grad_output());
    });
}

NodeId sub(Graph& g, NodeId a, NodeId b) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    const auto mode = binary_mode(g, "sub", x, y);
    Tensor out(output_shape(x, y, mode));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[mode == Broadcast::kScalarA ? 0 : i] - y[mode == Broadcast::kScalarB ? 0 : i];
    }
    return g.record("sub", {a, b}, std::move(out), [](const BackwardContext& ctx) {
        accumulate(ctx.grad(0), ctx.grad_output());
        accumulate(ctx.grad(1), ctx.grad_output(), -1.0);
    });
}

NodeId mul(Graph& g, NodeId a, NodeId b) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    const auto mode = binary_mode(g, "mul", x, y);
    Tensor out(output_shape(x, y, mode));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x[mode == Broadcast::kScalarA ? 0 : i] * y[mode == Broadcast::kScalarB ? 0 : i];
    }
    return g.record("mul", {a, b}, std::move(out), [mode](const BackwardContext& ctx) {
        const Tensor& x = ctx.operand(0);
        const Tensor& y = ctx.operand(1);
        const Tensor& go = ctx.grad_output();
        const auto xi = [&](std::size_t i) { return x[mode == Broadcast::kScalarA ? 0 : i]; };
        const auto yi = [&](std::size_t i) { return y[mode == Broadcast::kScalarB ? 0 : i]; };
        if (Tensor* ga = ctx.grad(0)) {
            Tensor t(go.shape());
            for (std::size_t i = 0; i < go.size(); ++i) t[i] = go[i] * yi(i);
            accumulate(ga, t);
        }
        if (Tensor* gb = ctx.grad(1)) {
            Tensor t(go.shape());
            for (std::size_t i = 0; i < go.size(); ++i) t[i] = go[i] * xi(i);
            accumulate(gb, t);
        }
    });
}

NodeId affine(Graph& g, NodeId a, double scale, double shift) {
    return unary(
        g, "affine", a, [=](double x) { return scale * x + shift; },
        [=](double, double) { return scale; });
}

NodeId exp(Graph& g, NodeId a) {
    return unary(
        g, "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

NodeId log(Graph& g, NodeId a) {
    return unary(
        g, "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

NodeId sqrt(Graph& g, NodeId a) {
    return unary(
        g, "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

NodeId sigmoid(Graph& g, NodeId a) {
    return unary(
        g, "sigmoid", a,
        [](double x) {
            if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

NodeId arccos(Graph& g, NodeId a) {
    static constexpr double lo = -1.0 + kArccosEpsilon;
    static constexpr double hi = 1.0 - kArccosEpsilon;
    for (double v : g.value(a).data()) g.note_kink_distance(std::min(std::abs(v - lo), std::abs(v - hi)));
    return unary(
        g, "arccos", a, [](double x) { return std::acos(std::clamp(x, lo, hi)); },
        [](double x, double) {
            if (x < lo || x > hi) return 0.0;
            return -1.0 / std::sqrt(1.0 - x * x);
        });
}

NodeId clamp(Graph& g, NodeId a, double lo, double hi) {
    if (!(lo <= hi)) fail(g, "clamp", "lower bound exceeds upper bound");
    for (double v : g.value(a).data()) g.note_kink_distance(std::min(std::abs(v - lo), std::abs(v - hi)));
    return unary(
        g, "clamp", a, [=](double x) { return std::clamp(x, lo, hi); },
        [=](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

NodeId leaky_relu(Graph& g, NodeId a, double slope) {
    double nearest = std::numeric_limits<double>::infinity();
    for (double v : g.value(a).data()) nearest = std::min(nearest, std::abs(v));
    g.note_kink_distance(nearest);
    return unary(
        g, "leaky_relu", a, [=](double x) { return x > 0 ? x : slope * x; },
        [=](double x, double) { return x > 0 ? 1.0 : slope; });
}

NodeId matmul(Graph& g, NodeId a, NodeId b) {
    const Tensor& x = g.value(a);
    const Tensor& y = g.value(b);
    if (x.rank() != 2 || y.rank() != 2) fail(g, "matmul", "operands must be 2-D");
    if (x.dim(1) != y.dim(0)) {
        fail(g, "matmul", "inner dimensions differ: " + to_string(x.shape()) + " x " + to_string(y.shape()));
    }
    const auto m = x.dim(0), k = x.dim(1), n = y.dim(1);
    Tensor out({m, n});
    MapR(out.raw(), m, n).noalias() = CMapR(x.raw(), m, k) * CMapR(y.raw(), k, n);
    return g.record("matmul", {a, b}, std::move(out), [m, k, n](const BackwardContext& ctx) {
        CMapR go(ctx.grad_output().raw(), m, n);
        if (Tensor* ga = ctx.grad(0)) {
            MapR(ga->raw(), m, k).noalias() += go * CMapR(ctx.operand(1).raw(), k, n).transpose();
        }
        if (Tensor* gb = ctx.grad(1)) {
            MapR(gb->raw(), k, n).noalias() += CMapR(ctx.operand(0).raw(), m, k).transpose() * go;
        }
    });
}

NodeId transpose(Graph& g, NodeId a) {
    const Tensor& x = g.value(a);
    if (x.rank() != 2) fail(g, "transpose", "operand must be 2-D");
    const auto m = x.dim(0), n = x.dim(1);
    Tensor out({n, m});
    MapR(out.raw(), n, m) = CMapR(x.raw(), m, n).transpose();
    return g.record("transpose", {a}, std::move(out), [m, n](const BackwardContext& ctx) {
        if (Tensor* ga = ctx.grad(0)) MapR(ga->raw(), m, n) += CMapR(ctx.grad_output().raw(), n, m).transpose();
    });
}

NodeId reshape(Graph& g, NodeId a, Shape shape) {
    const Tensor& x = g.value(a);
    if (element_count(shape) != x.size()) {
        fail(g, "reshape", "cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
    }
    return g.record("reshape", {a}, x.reshaped(std::move(shape)), [](const BackwardContext& ctx) {
        accumulate(ctx.grad(0), ctx.grad_output());
    });
}

NodeId concat(Graph& g, std::span<const NodeId> parts, std::size_t axis) {
    if (parts.empty()) fail(g, "concat", "no operands");
    const Shape& first = g.value(parts[0]).shape();
    if (axis >= first.size()) fail(g, "concat", "axis out of range for " + to_string(first));
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (auto p : parts) {
        const Shape& s = g.value(p).shape();
        bool ok = s.size() == first.size();
        for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
        if (!ok) fail(g, "concat", "operand shape " + to_string(s) + " incompatible with " + to_string(first));
        out_shape[axis] += s[axis];
    }
    const auto split = split_at(out_shape, axis);
    Tensor out(out_shape);
    std::vector<std::size_t> widths;
    std::size_t offset = 0;
    for (auto p : parts) {
        const Tensor& x = g.value(p);
        const std::size_t w = x.dim(axis) * split.inner;
        for (std::size_t o = 0; o < split.outer; ++o) {
            std::copy_n(x.raw() + o * w, w, out.raw() + o * split.n * split.inner + offset);
        }
        widths.push_back(w);
        offset += w;
    }
    std::vector<NodeId> ops(parts.begin(), parts.end());
    return g.record("concat", std::move(ops), std::move(out), [split, widths](const BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        std::size_t offset = 0;
        for (std::size_t p = 0; p < widths.size(); ++p) {
            const std::size_t w = widths[p];
            if (Tensor* gp = ctx.grad(p)) {
                for (std::size_t o = 0; o < split.outer; ++o) {
                    const double* src = go.raw() + o * split.n * split.inner + offset;
                    double* dst = gp->raw() + o * w;
                    for (std::size_t i = 0; i < w; ++i) dst[i] += src[i];
                }
            }
            offset += w;
        }
    });
}

NodeId expand(Graph& g, NodeId a, std::size_t axis, std::size_t n) {
    const Tensor& x = g.value(a);
    if (axis > x.rank()) fail(g, "expand", "axis out of range for " + to_string(x.shape()));
    if (n == 0) fail(g, "expand", "zero repeat count");
    Shape out_shape = x.shape();
    out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), n);
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (std::size_t i = axis; i < x.rank(); ++i) inner *= x.shape()[i];
    Tensor out(out_shape);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < n; ++j) std::copy_n(x.raw() + o * inner, inner, out.raw() + (o * n + j) * inner);
    }
    return g.record("expand", {a}, std::move(out), [outer, n, inner](const BackwardContext& ctx) {
        Tensor* ga = ctx.grad(0);
        if (!ga) return;
        const Tensor& go = ctx.grad_output();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t j = 0; j < n; ++j) {
                const double* src = go.raw() + (o * n + j) * inner;
                double* dst = ga->raw() + o * inner;
                for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
            }
        }
    });
}

NodeId gather(Graph& g, NodeId a, std::span<const std::size_t> indices) {
    const Tensor& x = g.value(a);
    if (indices.empty()) fail(g, "gather", "no indices");
    const std::size_t rows = x.dim(0);
    const std::size_t width = x.size() / rows;
    Shape out_shape = x.shape();
    out_shape[0] = indices.size();
    Tensor out(out_shape);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= rows) fail(g, "gather", "index " + std::to_string(indices[r]) + " out of range");
        std::copy_n(x.raw() + indices[r] * width, width, out.raw() + r * width);
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return g.record("gather", {a}, std::move(out), [idx = std::move(idx), width](const BackwardContext& ctx) {
        Tensor* ga = ctx.grad(0);
        if (!ga) return;
        const Tensor& go = ctx.grad_output();
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double* src = go.raw() + r * width;
            double* dst = ga->raw() + idx[r] * width;
            for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
        }
    });
}

NodeId sum(Graph& g, NodeId a, std::size_t axis) {
    const Tensor& x = g.value(a);
    if (axis >= x.rank()) fail(g, "sum", "axis out of range for " + to_string(x.shape()));
    const auto s = split_at(x.shape(), axis);
    Tensor out(drop_axis(x.shape(), axis));
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t j = 0; j < s.n; ++j) {
            const double* src = x.raw() + (o * s.n + j) * s.inner;
            double* dst = out.raw() + o * s.inner;
            for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
        }
    }
    return g.record("sum", {a}, std::move(out), [s](const BackwardContext& ctx) {
        Tensor* ga = ctx.grad(0);
        if (!ga) return;
        const Tensor& go = ctx.grad_output();
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t j = 0; j < s.n; ++j) {
                double* dst = ga->raw() + (o * s.n + j) * s.inner;
                const double* src = go.raw() + o * s.inner;
                for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
            }
        }
    });
}

NodeId mean(Graph& g, NodeId a, std::size_t axis) {
    if (axis >= g.value(a).rank()) fail(g, "mean", "axis out of range for " + to_string(g.value(a).shape()));
    const auto n = static_cast<double>(g.value(a).dim(axis));
    return affine(g, sum(g, a, axis), 1.0 / n);
}

NodeId max(Graph& g, NodeId a, std::size_t axis) {
    const Tensor& x = g.value(a);
    if (axis >= x.rank()) fail(g, "max", "axis out of range for " + to_string(x.shape()));
    const auto s = split_at(x.shape(), axis);
    Tensor out(drop_axis(x.shape(), axis));
    std::vector<std::size_t> arg(out.size(), 0);
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t i = 0; i < s.inner; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            double second = -std::numeric_limits<double>::infinity();
            std::size_t best_j = 0;
            for (std::size_t j = 0; j < s.n; ++j) {
                const double v = x[(o * s.n + j) * s.inner + i];
                if (v > best) {
                    second = best;
                    best = v;
                    best_j = j;
                } else if (v > second) {
                    second = v;
                }
            }
            out[o * s.inner + i] = best;
            arg[o * s.inner + i] = best_j;
            if (s.n > 1) gap = std::min(gap, best - second);
        }
    }
    g.note_kink_distance(gap);
    return g.record("max", {a}, std::move(out), [s, arg = std::move(arg)](const BackwardContext& ctx) {
        Tensor* ga = ctx.grad(0);
        if (!ga) return;
        const Tensor& go = ctx.grad_output();
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t i = 0; i < s.inner; ++i) {
                const std::size_t k = o * s.inner + i;
                (*ga)[(o * s.n + arg[k]) * s.inner + i] += go[k];
            }
        }
    });
}

NodeId sum_all(Graph& g, NodeId a) {
    const Tensor& x = g.value(a);
    double total = 0.0;
    for (double v : x.data()) total += v;
    return g.record("sum_all", {a}, Tensor::scalar(total), [](const BackwardContext& ctx) {
        Tensor* ga = ctx.grad(0);
        if (!ga) return;
        const double go = ctx.grad_output()[0];
        for (auto& v : ga->data()) v += go;
    });
}

NodeId mean_all(Graph& g, NodeId a) {
    const auto n = static_cast<double>(g.value(a).size());
    return affine(g, sum_all(g, a), 1.0 / n);
}

NodeId log_softmax(Graph& g, NodeId a) {
    const Tensor& x = g.value(a);
    const std::size_t width = x.shape().back();
    const std::size_t rows = x.size() / width;
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = x.raw() + r * width;
        const double peak = *std::max_element(row, row + width);
        double acc = 0.0;
        for (std::size_t k = 0; k < width; ++k) acc += std::exp(row[k] - peak);
        const double lse = peak + std::log(acc);
        for (std::size_t k = 0; k < width; ++k) out[r * width + k] = row[k] - lse;
    }
    return g.record("log_softmax", {a}, std::move(out), [rows, width](const BackwardContext& ctx) {
        Tensor* ga = ctx.grad(0);
        if (!ga) return;
        const Tensor& y = ctx.output();
        const Tensor& go = ctx.grad_output();
        for (std::size_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (std::size_t k = 0; k < width; ++k) total += go[r * width + k];
            for (std::size_t k = 0; k < width; ++k) {
                const std::size_t i = r * width + k;
                (*ga)[i] += go[i] - std::exp(y[i]) * total;
            }
        }
    });
}

NodeId normalize_rows(Graph& g, NodeId a) {
    const Tensor& x = g.value(a);
    if (x.rank() != 2) fail(g, "normalize_rows", "operand must be 2-D");
    const auto rows = x.dim(0), cols = x.dim(1);
    Tensor out(x.shape());
    std::vector<double> norms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double ss = 0.0;
        for (std::size_t c = 0; c < cols; ++c) ss += x[r * cols + c] * x[r * cols + c];
        norms[r] = std::sqrt(ss);
        if (!(norms[r] > 0.0)) {
            throw Error("node #" + std::to_string(g.next_index()) + " (normalize_rows): row " + std::to_string(r) +
                        " has zero norm and cannot be normalized");
        }
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] / norms[r];
    }
    return g.record("normalize_rows", {a}, std::move(out),
                    [rows, cols, norms = std::move(norms)](const BackwardContext& ctx) {
                        Tensor* ga = ctx.grad(0);
                        if (!ga) return;
                        const Tensor& y = ctx.output();
                        const Tensor& go = ctx.grad_output();
                        for (std::size_t r = 0; r < rows; ++r) {
                            double dot = 0.0;
                            for (std::size_t c = 0; c < cols; ++c) dot += y[r * cols + c] * go[r * cols + c];
                            for (std::size_t c = 0; c < cols; ++c) {
                                const std::size_t i = r * cols + c;
                                (*ga)[i] += (go[i] - y[i] * dot) / norms[r];
                            }
                        }
                    });
}

}  // namespace asd::ad
