#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fusiform/tensor.hpp"

namespace fusiform {

/// Adam hyperparameters. The default step size is the 1e-4 preset; the moment
/// constants are the usual Kingma & Ba values.
struct AdamHyper {
    double alpha = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <typename T>
struct BasicAdamState {
    BasicTensor<T> m;
    BasicTensor<T> v;
    std::uint64_t t = 0;
    AdamHyper hyper;

    BasicAdamState() = default;
    BasicAdamState(const Shape& shape, AdamHyper h) : m(shape), v(shape), hyper(h) {}
};

using AdamState = BasicAdamState<float>;

/// One bias-corrected Adam update for every trainable parameter, using the
/// gradient accumulated in `param.grad`. Frozen parameters and their states
/// are left untouched.
template <typename T>
void adam_step(std::span<BasicParameter<T>* const> params, std::span<BasicAdamState<T>> states);

/// Owns one AdamState per parameter.
template <typename T>
class BasicAdam {
public:
    BasicAdam(std::vector<BasicParameter<T>*> params, AdamHyper hyper);

    void zero_grad();
    void step();

    const std::vector<BasicAdamState<T>>& states() const noexcept { return states_; }
    const AdamHyper& hyper() const noexcept { return hyper_; }

private:
    std::vector<BasicParameter<T>*> params_;
    std::vector<BasicAdamState<T>> states_;
    AdamHyper hyper_;
};

using Adam = BasicAdam<float>;

/// FNV-1a over the raw bytes of every parameter value, in order.
std::uint64_t parameter_checksum(std::span<const Parameter* const> params);

}  // namespace fusiform
