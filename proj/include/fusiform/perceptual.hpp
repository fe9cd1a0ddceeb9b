#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusiform/graph.hpp"
#include "fusiform/layers.hpp"
#include "fusiform/optim.hpp"
#include "fusiform/synth.hpp"
#include "fusiform/tensor.hpp"

namespace fusiform {

enum class Provenance { proxy_pretrained, random_frozen };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct PerceptualConfig {
    std::size_t image_size = 32;
    std::size_t image_channels = 3;
    std::vector<std::size_t> channels{16, 32, 64};
    std::vector<int> strides{1, 2, 2};

    /// Length of the pooled feature vector.
    std::size_t feature_dim() const { return channels.empty() ? 0 : channels.back(); }
};

/// Frozen conv backbone whose globally average-pooled last block is the
/// perceptual embedding.
class PerceptualModel {
public:
    /// Randomly initialised and frozen (the random_frozen control).
    PerceptualModel(PerceptualConfig config, std::uint64_t seed);
    PerceptualModel(PerceptualConfig config, std::vector<Parameter> params, Provenance provenance);

    static std::vector<std::pair<std::string, Shape>> parameter_layout(const PerceptualConfig& config);

    const PerceptualConfig& config() const noexcept { return config_; }
    std::size_t feature_dim() const { return config_.feature_dim(); }
    Provenance provenance() const noexcept { return provenance_; }
    void set_provenance(Provenance p) noexcept { provenance_ = p; }

    bool frozen() const;
    void set_frozen(bool frozen);

    /// CHW image -> [feature_dim]. Requires a frozen model.
    Tensor perceive(const Tensor& image) const;
    std::vector<Tensor> perceive_batch(std::span<const Tensor> images) const;

    /// Records the backbone on `g` with tracked parameters; returns [N, D_p].
    Var forward(Graph<float>& g, Var images);

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }

private:
    Var backbone(Var images, const ParamBinder<float>& bind) const;
    void check_image(const Shape& chw) const;

    PerceptualConfig config_;
    std::vector<Parameter> params_;
    Provenance provenance_ = Provenance::random_frozen;
};

struct PretrainHyper {
    AdamHyper adam{1e-3};
    std::size_t batch = 64;
    std::size_t steps = 1500;
    std::uint64_t seed = 0;
    /// Tail fraction of the class set held out for the accuracy measurement.
    double holdout_fraction = 0.2;
};

struct PretrainResult {
    std::vector<double> loss_history;
    double heldout_accuracy = 0.0;
    std::size_t heldout_count = 0;
};

/// Trains the backbone plus a temporary softmax head on the proxy classes,
/// measures held-out accuracy, then discards the head and freezes the
/// backbone. Throws DivergenceError on a non-finite loss.
PretrainResult pretrain_proxy(PerceptualModel& model, const ClassSet& data, const PretrainHyper& hyper);

}  // namespace fusiform
