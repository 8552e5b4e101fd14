#include "asd/features/attention.hpp"

#include <array>

#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"

namespace asd::features {

TemporalAttention temporal_attention(const dsp::Spectrogram& x_mel) { return temporal_attention(x_mel.values); }

TemporalAttention temporal_attention(const ad::Tensor& x_mel) {
    ad::Graph g;
    const auto x = g.input("x_mel", x_mel.rank() == 2 ? x_mel.reshaped({1, x_mel.dim(0), x_mel.dim(1)}) : x_mel);
    if (g.value(x).rank() != 3 || g.value(x).dim(0) != 1) {
        throw ShapeError("temporal attention expects an [F, T] spectrogram, got " + ad::to_string(x_mel.shape()));
    }
    const auto n = temporal_attention(g, x);
    const auto& w = g.value(n.weights);
    const auto& a = g.value(n.attended);
    return {w.reshaped({w.dim(1)}), a.reshaped({a.dim(1), a.dim(2)})};
}

AttentionNodes temporal_attention(ad::Graph& g, ad::NodeId x_mel) {
    const auto& v = g.value(x_mel);
    if (v.rank() != 3) throw ShapeError("temporal attention expects [B, F, T], got " + ad::to_string(v.shape()));
    const std::size_t f = v.dim(1);
    const auto pooled = ad::add(g, ad::mean(g, x_mel, 1), ad::max(g, x_mel, 1));  // [B, T]
    const auto w = ad::sigmoid(g, pooled);
    const auto attended = ad::mul(g, ad::expand(g, w, 1, f), x_mel);
    return {w, attended};
}

FeatureStack stack_features(const ad::Tensor& x_ta, const ad::Tensor& x_mel, const ad::Tensor& x_t) {
    if (x_mel.rank() != 2) throw ShapeError("feature channels must be [F, T], got " + ad::to_string(x_mel.shape()));
    if (x_ta.shape() != x_mel.shape() || x_t.shape() != x_mel.shape()) {
        throw ShapeError("feature channel shapes differ: TA " + ad::to_string(x_ta.shape()) + ", S " +
                         ad::to_string(x_mel.shape()) + ", T " + ad::to_string(x_t.shape()));
    }
    const std::size_t n = x_mel.size();
    std::vector<double> out(3 * n);
    std::copy(x_ta.raw(), x_ta.raw() + n, out.begin());
    std::copy(x_mel.raw(), x_mel.raw() + n, out.begin() + n);
    std::copy(x_t.raw(), x_t.raw() + n, out.begin() + 2 * n);
    return FeatureStack{ad::Tensor({3, x_mel.dim(0), x_mel.dim(1)}, std::move(out))};
}

ad::NodeId stack_features(ad::Graph& g, ad::NodeId x_ta, ad::NodeId x_mel, ad::NodeId x_t) {
    const auto& s = g.value(x_mel).shape();
    if (s.size() != 3) throw ShapeError("feature channels must be [B, F, T], got " + ad::to_string(s));
    if (g.value(x_ta).shape() != s || g.value(x_t).shape() != s) {
        throw ShapeError("feature channel shapes differ: TA " + ad::to_string(g.value(x_ta).shape()) + ", S " +
                         ad::to_string(s) + ", T " + ad::to_string(g.value(x_t).shape()));
    }
    const ad::Shape one{s[0], 1, s[1], s[2]};
    const std::array parts{ad::reshape(g, x_ta, one), ad::reshape(g, x_mel, one), ad::reshape(g, x_t, one)};
    return ad::concat(g, parts, 1);
}

}  // namespace asd::features
