#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fusiform/graph.hpp"
#include "fusiform/rng.hpp"
#include "fusiform/tensor.hpp"

namespace fusiform {

/// He-uniform initialisation: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename T = float>
BasicTensor<T> he_uniform(const Shape& shape, std::size_t fan_in, Rng& rng)
{
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    BasicTensor<T> t(shape);
    for (T& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
    return t;
}

/// How a model's parameters enter a graph: as tracked leaves (training) or
/// as constants (inference on a shared, read-only model).
template <typename T>
using ParamBinder = std::function<BasicVar<T>(std::size_t index)>;

template <typename T>
ParamBinder<T> bind_trainable(Graph<T>& g, std::vector<BasicParameter<T>>& params)
{
    return [&g, &params](std::size_t i) { return g.parameter(params[i]); };
}

template <typename T>
ParamBinder<T> bind_constant(Graph<T>& g, const std::vector<BasicParameter<T>>& params)
{
    return [&g, &params](std::size_t i) { return g.input(params[i].value); };
}

/// Stacks CHW images into one NCHW tensor. All images must share a shape.
Tensor stack_images(std::span<const Tensor> images);

/// Splits the first axis of `batch` into individual tensors.
std::vector<Tensor> unstack(const Tensor& batch);

std::vector<Parameter*> parameter_pointers(std::vector<Parameter>& params);
std::vector<const Parameter*> parameter_pointers(const std::vector<Parameter>& params);

/// Epoch-shuffled minibatch indices over [0, n). Deterministic for a seed.
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed);
    std::vector<std::size_t> next();

private:
    void reshuffle();

    std::vector<std::size_t> order_;
    std::size_t batch_;
    std::size_t cursor_ = 0;
    Rng rng_;
};

/// Index of a parameter by name, or throws std::out_of_range.
std::size_t find_parameter(const std::vector<Parameter>& params, const std::string& name);

}  // namespace fusiform
