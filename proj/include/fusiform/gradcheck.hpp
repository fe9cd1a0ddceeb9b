#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fusiform/graph.hpp"
#include "fusiform/rng.hpp"

namespace fusiform {

struct GradCheckOptions {
    double tolerance = 1e-6;
    double step = 1e-5;
    /// Relative errors are |a - n| / max(|a|, |n|, floor).
    double denominator_floor = 1e-3;
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool passed = true;
};

using NamedInput = std::pair<std::string, TensorD>;

namespace detail {

template <typename U, typename Op>
double projected_loss(Op& op, const std::vector<NamedInput>& inputs, const TensorD& projection,
                      std::vector<BasicVar<U>>* vars_out, Graph<U>& g, bool requires_grad)
{
    std::vector<BasicVar<U>> vars;
    vars.reserve(inputs.size());
    for (const auto& [name, t] : inputs) vars.push_back(g.input(t.template cast<U>(), requires_grad));
    BasicVar<U> out = op(g, std::as_const(vars));
    if (out.value().size() != projection.size()) {
        throw ShapeError("gradient_check: projection does not match op output", out.shape(), projection.shape());
    }
    BasicVar<U> w = g.input(projection.reshaped(out.shape()).template cast<U>());
    BasicVar<U> loss = sum(mul(out, w));
    if (vars_out) {
        g.backward(loss);
        *vars_out = std::move(vars);
    }
    return static_cast<double>(loss.value()[0]);
}

}  // namespace detail

/// Compares analytic gradients (computed at precision T) against central
/// differences computed in double.
///
/// `op` is a generic callable `(Graph<U>&, const std::vector<BasicVar<U>>&) ->
/// BasicVar<U>` that must be valid for both U = T and U = double. A non-scalar
/// output is reduced with a fixed random projection before differentiation.
template <typename T, typename Op>
GradCheckReport gradient_check(Op op, const std::vector<NamedInput>& inputs, const GradCheckOptions& opts = {})
{
    // Output shape is discovered with one double-precision forward pass.
    TensorD projection;
    {
        Graph<double> g;
        std::vector<BasicVar<double>> vars;
        for (const auto& [name, t] : inputs) vars.push_back(g.input(t));
        const auto out = op(g, std::as_const(vars));
        projection = TensorD(out.shape());
        Rng rng(opts.seed ^ 0x5eedULL);
        for (double& v : projection.data()) v = rng.uniform(-1.0, 1.0);
    }

    Graph<T> analytic_graph;
    std::vector<BasicVar<T>> vars;
    detail::projected_loss<T>(op, inputs, projection, &vars, analytic_graph, true);

    GradCheckReport report;
    std::vector<NamedInput> probe = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        GradCheckEntry entry;
        entry.name = inputs[i].first;
        const auto& analytic = analytic_graph.grad(vars[i]);
        auto& x = probe[i].second;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double saved = x[k];
            x[k] = saved + opts.step;
            Graph<double> gp;
            const double lp = detail::projected_loss<double>(op, probe, projection, nullptr, gp, false);
            x[k] = saved - opts.step;
            Graph<double> gm;
            const double lm = detail::projected_loss<double>(op, probe, projection, nullptr, gm, false);
            x[k] = saved;
            const double numeric = (lp - lm) / (2.0 * opts.step);
            const double a = static_cast<double>(analytic[k]);
            const double denom = std::max({std::abs(a), std::abs(numeric), opts.denominator_floor});
            entry.max_rel_error = std::max(entry.max_rel_error, std::abs(a - numeric) / denom);
        }
        entry.passed = entry.max_rel_error < opts.tolerance;
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.passed = report.passed && entry.passed;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace fusiform
