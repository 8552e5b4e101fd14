#include "asd/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "asd/error.hpp"

namespace asd::ad {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    if (!(h > 0.0)) throw ConfigError("finite difference step must be positive");
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NonFiniteError("finite difference probe at coordinate " + std::to_string(i) + " is not finite");
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double relative_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("relative_error: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
    }
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(std::max(na, nb));
    if (denom == 0.0) return 0.0;
    return std::sqrt(diff) / denom;
}

GradCheckResult check_gradients(const GraphBuilder& build, const std::map<std::string, Tensor>& inputs,
                                const GradCheckOptions& opt) {
    const auto evaluate = [&](const std::map<std::string, Tensor>& values, Graph& g) {
        NodeMap nodes;
        for (const auto& [name, t] : values) nodes[name] = g.parameter(name, t);
        return build(g, nodes);
    };

    Graph g;
    const auto out = evaluate(inputs, g);
    const auto grads = g.gradients(out);
    GradCheckResult result;
    result.kink_margin = g.kink_margin();

    std::mt19937_64 rng(opt.seed);
    for (const auto& [name, x] : inputs) {
        std::vector<std::size_t> coords(x.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (opt.max_coordinates > 0 && opt.max_coordinates < coords.size()) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opt.max_coordinates);
        }
        auto values = inputs;
        Tensor& probe = values.at(name);
        const Tensor& analytic_full = grads.at(name);
        Tensor analytic({coords.size()}), numeric({coords.size()});
        for (std::size_t k = 0; k < coords.size(); ++k) {
            const std::size_t i = coords[k];
            const auto at = [&](double v) {
                probe[i] = v;
                Graph gp;
                const auto o = evaluate(values, gp);
                result.kink_margin = std::min(result.kink_margin, gp.kink_margin());
                return gp.value(o).item();
            };
            const double up = at(x[i] + opt.step);
            const double down = at(x[i] - opt.step);
            probe[i] = x[i];
            numeric[k] = (up - down) / (2.0 * opt.step);
            analytic[k] = analytic_full[i];
        }
        const double err = relative_error(analytic, numeric);
        if (err >= result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_input = name;
        }
    }
    return result;
}

}  // namespace asd::ad
