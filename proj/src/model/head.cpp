#include "asd/model/head.hpp"

#include <algorithm>
#include <cmath>

#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"

namespace asd::model {
namespace {

constexpr double kLo = -1.0 + ad::kArccosEpsilon;
constexpr double kHi = 1.0 - ad::kArccosEpsilon;

double norm(const double* v, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

}  // namespace

CosineLogits cosine_logits(const ad::Tensor& h, const ProjectionHead& head) {
    const std::size_t d = head.embedding_dim();
    if (h.size() != d) {
        throw ShapeError("embedding has " + std::to_string(h.size()) + " entries, head expects " + std::to_string(d));
    }
    const double hn = norm(h.raw(), d);
    if (!(hn > 0.0)) throw Error("cannot normalise a zero-norm embedding");
    CosineLogits out;
    for (std::size_t k = 0; k < head.classes(); ++k) {
        const double* w = head.weight.raw() + k * d;
        const double wn = norm(w, d);
        if (!(wn > 0.0)) throw Error("class centre " + std::to_string(k) + " has zero norm");
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += w[i] * h[i];
        const double c = std::clamp(dot / (wn * hn), kLo, kHi);
        out.cos.push_back(c);
        out.theta.push_back(std::acos(c));
    }
    return out;
}

ad::NodeId cosine_logits(ad::Graph& g, ad::NodeId h, ad::NodeId weight) {
    const auto hn = ad::normalize_rows(g, h);
    const auto wn = ad::normalize_rows(g, weight);
    return ad::clamp(g, ad::matmul(g, hn, ad::transpose(g, wn)), kLo, kHi);
}

}  // namespace asd::model
