#include "asd/losses/mixup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"

namespace asd::losses {
namespace {

void check_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("mixup lambda must lie in [0, 1]");
}

}  // namespace

double beta_from_gammas(double g1, double g2) {
    if (!(g1 >= 0.0) || !(g2 >= 0.0) || !(g1 + g2 > 0.0)) throw Error("gamma draws must be non-negative, not both zero");
    return g1 / (g1 + g2);
}

double sample_lambda(double alpha, std::mt19937_64& rng) {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    std::gamma_distribution<double> gamma(alpha, 1.0);
    for (;;) {
        const double g1 = gamma(rng);
        const double g2 = gamma(rng);
        // Both can underflow to zero for tiny alpha; redraw.
        if (g1 + g2 > 0.0) return beta_from_gammas(g1, g2);
    }
}

MixupDraw draw_mixup(std::size_t batch, double alpha, std::mt19937_64& rng) {
    MixupDraw d;
    d.lambda = sample_lambda(alpha, rng);
    d.partner.resize(batch);
    std::iota(d.partner.begin(), d.partner.end(), std::size_t{0});
    std::shuffle(d.partner.begin(), d.partner.end(), rng);
    return d;
}

ad::Tensor mixup(const ad::Tensor& xi, const ad::Tensor& xj, double lambda) {
    check_lambda(lambda);
    if (xi.shape() != xj.shape()) {
        throw ShapeError("mixup operands differ in shape: " + ad::to_string(xi.shape()) + " vs " +
                         ad::to_string(xj.shape()));
    }
    ad::Tensor out(xi.shape());
    // Written so lambda = 1 and lambda = 0 reproduce the operands exactly.
    for (std::size_t i = 0; i < xi.size(); ++i) out[i] = lambda * xi[i] + (1.0 - lambda) * xj[i];
    return out;
}

ad::NodeId mixup(ad::Graph& g, ad::NodeId x, std::span<const std::size_t> partner, double lambda) {
    check_lambda(lambda);
    if (partner.size() != g.value(x).dim(0)) throw ShapeError("mixup partner list does not match the batch size");
    const auto xj = ad::gather(g, x, partner);
    return ad::add(g, ad::affine(g, x, lambda), ad::affine(g, xj, 1.0 - lambda));
}

}  // namespace asd::losses
