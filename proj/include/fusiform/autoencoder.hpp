#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusiform/graph.hpp"
#include "fusiform/layers.hpp"
#include "fusiform/optim.hpp"
#include "fusiform/tensor.hpp"

namespace fusiform {

/// An image plus the latent it was reconstructed from.
struct Reconstruction {
    Tensor image;   // CHW, same shape as the input
    Tensor latent;  // [latent_dim]
};

/// Anything that maps an image to a (reconstruction, latent) pair. The
/// autoencoder is the production implementation; tests substitute stubs.
class ImageCodec {
public:
    virtual ~ImageCodec() = default;

    virtual std::size_t latent_dim() const = 0;
    virtual std::size_t image_size() const = 0;
    virtual bool frozen() const = 0;

    /// Batched reconstruction of NCHW input.
    virtual std::vector<Reconstruction> reconstruct_batch(std::span<const Tensor> images) const = 0;

    Reconstruction reconstruct(const Tensor& image) const;
};

struct AutoencoderConfig {
    std::size_t image_size = 32;
    std::size_t image_channels = 3;
    /// Encoder conv widths; each block halves the spatial extent. The decoder
    /// mirrors them with stride-2 transposed convolutions.
    std::vector<std::size_t> channels{16, 32, 64};
    std::size_t bottleneck_dim = 64;
};

/// Convolutional bottleneck autoencoder.
///
///   encoder: [conv3x3/s2 + relu] x depth -> flatten -> dense -> relu = latent
///   decoder: dense -> relu -> reshape -> [tconv4x4/s2 + relu] x (depth-1)
///            -> tconv4x4/s2 -> sigmoid
///
/// The latent is the post-activation bottleneck output.
class AutoencoderModel : public ImageCodec {
public:
    AutoencoderModel(AutoencoderConfig config, std::uint64_t seed);
    /// Restores a model from named parameters (e.g. a checkpoint); shapes are
    /// validated against the config.
    AutoencoderModel(AutoencoderConfig config, std::vector<Parameter> params);

    static std::vector<std::pair<std::string, Shape>> parameter_layout(const AutoencoderConfig& config);

    const AutoencoderConfig& config() const noexcept { return config_; }
    std::size_t latent_dim() const override { return config_.bottleneck_dim; }
    std::size_t image_size() const override { return config_.image_size; }
    bool frozen() const override;
    void set_frozen(bool frozen);

    /// CHW image -> latent [bottleneck_dim].
    Tensor encode(const Tensor& image) const;
    /// Latent [bottleneck_dim] -> CHW image in (0, 1).
    Tensor decode(const Tensor& latent) const;
    std::vector<Reconstruction> reconstruct_batch(std::span<const Tensor> images) const override;

    struct Forward {
        Var latent;  // [N, bottleneck_dim]
        Var output;  // [N, C, H, W]
    };
    /// Records encoder and decoder on `g`, with parameters as tracked leaves.
    Forward forward(Graph<float>& g, Var images);

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }

private:
    Var encode_graph(Graph<float>& g, Var images, const ParamBinder<float>& bind) const;
    Var decode_graph(Graph<float>& g, Var latent, const ParamBinder<float>& bind) const;
    void check_image(const Shape& chw) const;

    AutoencoderConfig config_;
    std::vector<Parameter> params_;
    std::size_t latent_spatial_ = 0;
};

struct AutoencoderHyper {
    AdamHyper adam{1e-3};
    std::size_t batch = 64;
    std::size_t steps = 2000;
    std::uint64_t seed = 0;
    /// Images used for the before/after loss measurement.
    std::size_t eval_images = 256;
    /// If non-zero, `on_checkpoint` fires every this many steps.
    std::size_t checkpoint_every = 0;
    std::function<void(std::size_t step, const AutoencoderModel&)> on_checkpoint;
    std::function<void(std::size_t step, double loss)> on_step;
};

struct AutoencoderTrainResult {
    std::vector<double> loss_history;  // per-step minibatch loss
    double initial_loss = 0.0;         // pixel loss on the eval subset before training
    double final_loss = 0.0;           // and after
};

/// Minimises the pixel loss with Adam over shuffled minibatches. Throws
/// DivergenceError if the loss becomes non-finite.
AutoencoderTrainResult train_autoencoder(AutoencoderModel& model, std::span<const Tensor> dataset,
                                         const AutoencoderHyper& hyper);

/// Mean pixel loss of the model over `images` (batched, no gradient).
double evaluate_pixel_loss(const ImageCodec& codec, std::span<const Tensor> images);

}  // namespace fusiform
