#include "fusiform/optim.hpp"

#include <cmath>
#include <cstring>

namespace fusiform {

template <typename T>
void adam_step(std::span<BasicParameter<T>* const> params, std::span<BasicAdamState<T>> states)
{
    if (params.size() != states.size()) {
        throw UsageError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(states.size()) + " states");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        BasicParameter<T>& p = *params[i];
        BasicAdamState<T>& s = states[i];
        if (s.m.shape() != p.value.shape() || s.v.shape() != p.value.shape()) {
            throw ShapeError("adam_step: state shape mismatch for '" + p.name + "'", s.m.shape(), p.value.shape());
        }
        if (p.grad.shape() != p.value.shape()) {
            throw ShapeError("adam_step: grad shape mismatch for '" + p.name + "'", p.grad.shape(), p.value.shape());
        }
        if (!p.trainable) continue;

        s.t += 1;
        const auto& h = s.hyper;
        const T b1 = static_cast<T>(h.beta1);
        const T b2 = static_cast<T>(h.beta2);
        const T c1 = static_cast<T>(1.0 - std::pow(h.beta1, static_cast<double>(s.t)));
        const T c2 = static_cast<T>(1.0 - std::pow(h.beta2, static_cast<double>(s.t)));
        const T alpha = static_cast<T>(h.alpha);
        const T eps = static_cast<T>(h.epsilon);

        auto w = p.value.data();
        const auto g = p.grad.data();
        auto m = s.m.data();
        auto v = s.v.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = b1 * m[k] + (T{1} - b1) * g[k];
            v[k] = b2 * v[k] + (T{1} - b2) * g[k] * g[k];
            const T mhat = m[k] / c1;
            const T vhat = v[k] / c2;
            w[k] -= alpha * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template <typename T>
BasicAdam<T>::BasicAdam(std::vector<BasicParameter<T>*> params, AdamHyper hyper)
  : params_(std::move(params)), hyper_(hyper)
{
    states_.reserve(params_.size());
    for (auto* p : params_) states_.emplace_back(p->value.shape(), hyper_);
}

template <typename T>
void BasicAdam<T>::zero_grad()
{
    for (auto* p : params_) p->zero_grad();
}

template <typename T>
void BasicAdam<T>::step()
{
    adam_step<T>(std::span<BasicParameter<T>* const>(params_), std::span<BasicAdamState<T>>(states_));
}

std::uint64_t parameter_checksum(std::span<const Parameter* const> params)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    auto feed = [&](const unsigned char* bytes, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= bytes[i];
            hash *= 0x100000001b3ULL;
        }
    };
    for (const Parameter* p : params) {
        feed(reinterpret_cast<const unsigned char*>(p->name.data()), p->name.size());
        const auto data = p->value.data();
        feed(reinterpret_cast<const unsigned char*>(data.data()), data.size_bytes());
    }
    return hash;
}

template void adam_step<float>(std::span<BasicParameter<float>* const>, std::span<BasicAdamState<float>>);
template void adam_step<double>(std::span<BasicParameter<double>* const>, std::span<BasicAdamState<double>>);
template class BasicAdam<float>;
template class BasicAdam<double>;

}  // namespace fusiform
