#include "fusiform/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fusiform {

namespace {

constexpr int kEncKernel = 3;
constexpr int kDecKernel = 4;
constexpr std::size_t kInferenceChunk = 64;

std::size_t spatial_after_encoder(const AutoencoderConfig& c)
{
    if (c.channels.empty()) throw UsageError("autoencoder needs at least one conv block");
    std::size_t s = c.image_size;
    for (std::size_t i = 0; i < c.channels.size(); ++i) {
        if (s % 2 != 0) {
            throw UsageError("autoencoder image size " + std::to_string(c.image_size) +
                             " is not divisible by 2^" + std::to_string(c.channels.size()));
        }
        s /= 2;
    }
    return s;
}

}  // namespace

Reconstruction ImageCodec::reconstruct(const Tensor& image) const
{
    auto out = reconstruct_batch(std::span<const Tensor>(&image, 1));
    return std::move(out.front());
}

std::vector<std::pair<std::string, Shape>> AutoencoderModel::parameter_layout(const AutoencoderConfig& c)
{
    const std::size_t s = spatial_after_encoder(c);
    const std::size_t depth = c.channels.size();
    const std::size_t flat = c.channels.back() * s * s;
    const auto k = static_cast<std::size_t>(kEncKernel);
    const auto kd = static_cast<std::size_t>(kDecKernel);

    std::vector<std::pair<std::string, Shape>> out;
    std::size_t in = c.image_channels;
    for (std::size_t i = 0; i < depth; ++i) {
        const std::string p = "enc" + std::to_string(i);
        out.emplace_back(p + ".weight", Shape{c.channels[i], in, k, k});
        out.emplace_back(p + ".bias", Shape{c.channels[i]});
        in = c.channels[i];
    }
    out.emplace_back("bottleneck.weight", Shape{flat, c.bottleneck_dim});
    out.emplace_back("bottleneck.bias", Shape{c.bottleneck_dim});
    out.emplace_back("expand.weight", Shape{c.bottleneck_dim, flat});
    out.emplace_back("expand.bias", Shape{flat});
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t from = c.channels[depth - 1 - i];
        const std::size_t to = i + 1 < depth ? c.channels[depth - 2 - i] : c.image_channels;
        const std::string p = "dec" + std::to_string(i);
        out.emplace_back(p + ".weight", Shape{from, to, kd, kd});
        out.emplace_back(p + ".bias", Shape{to});
    }
    return out;
}

AutoencoderModel::AutoencoderModel(AutoencoderConfig config, std::uint64_t seed)
  : config_(std::move(config)), latent_spatial_(spatial_after_encoder(config_))
{
    Rng rng(seed);
    for (auto& [name, shape] : parameter_layout(config_)) {
        const bool is_bias = name.ends_with(".bias");
        if (is_bias) {
            params_.emplace_back(name, Tensor(shape));
            continue;
        }
        std::size_t fan_in = 0;
        if (name.starts_with("enc")) {
            fan_in = shape[1] * shape[2] * shape[3];
        } else if (name.starts_with("dec")) {
            // Each output pixel of a stride-2, 4x4 transposed conv sees 2x2 taps per input channel.
            fan_in = shape[0] * 4;
        } else {
            fan_in = shape[0];
        }
        params_.emplace_back(name, he_uniform<float>(shape, fan_in, rng));
    }
}

AutoencoderModel::AutoencoderModel(AutoencoderConfig config, std::vector<Parameter> params)
  : config_(std::move(config)), latent_spatial_(spatial_after_encoder(config_))
{
    const auto layout = parameter_layout(config_);
    if (params.size() != layout.size()) {
        throw ShapeError("autoencoder expects " + std::to_string(layout.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    for (const auto& [name, shape] : layout) {
        const std::size_t i = find_parameter(params, name);
        if (params[i].value.shape() != shape) {
            throw ShapeError("autoencoder parameter '" + name + "' has the wrong shape", shape, params[i].value.shape());
        }
        Parameter p(name, params[i].value, params[i].trainable);
        params_.push_back(std::move(p));
    }
}

bool AutoencoderModel::frozen() const
{
    return std::none_of(params_.begin(), params_.end(), [](const Parameter& p) { return p.trainable; });
}

void AutoencoderModel::set_frozen(bool frozen)
{
    for (auto& p : params_) p.trainable = !frozen;
}

void AutoencoderModel::check_image(const Shape& chw) const
{
    const Shape want{config_.image_channels, config_.image_size, config_.image_size};
    if (chw != want) throw ShapeError("autoencoder input has the wrong size", want, chw);
}

Var AutoencoderModel::encode_graph(Graph<float>& g, Var images, const ParamBinder<float>& bind) const
{
    (void)g;
    const std::size_t depth = config_.channels.size();
    Var h = images;
    for (std::size_t i = 0; i < depth; ++i) {
        h = relu(add_channel_bias(conv2d(h, bind(2 * i), 2, 1), bind(2 * i + 1)));
    }
    const std::size_t n = images.shape()[0];
    h = reshape(h, Shape{n, config_.channels.back() * latent_spatial_ * latent_spatial_});
    return relu(dense(h, bind(2 * depth), bind(2 * depth + 1)));
}

Var AutoencoderModel::decode_graph(Graph<float>& g, Var latent, const ParamBinder<float>& bind) const
{
    (void)g;
    const std::size_t depth = config_.channels.size();
    const std::size_t base = 2 * depth + 2;
    const std::size_t n = latent.shape()[0];
    Var h = relu(dense(latent, bind(base), bind(base + 1)));
    h = reshape(h, Shape{n, config_.channels.back(), latent_spatial_, latent_spatial_});
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t w = base + 2 + 2 * i;
        h = add_channel_bias(conv_transpose2d(h, bind(w), 2, 1), bind(w + 1));
        h = i + 1 < depth ? relu(h) : sigmoid(h);
    }
    return h;
}

AutoencoderModel::Forward AutoencoderModel::forward(Graph<float>& g, Var images)
{
    const auto& s = images.shape();
    if (s.size() != 4) throw ShapeError("autoencoder forward expects NCHW input, got " + shape_str(s));
    check_image(Shape(s.begin() + 1, s.end()));
    const auto bind = bind_trainable(g, params_);
    Var latent = encode_graph(g, images, bind);
    Var output = decode_graph(g, latent, bind);
    return {latent, output};
}

Tensor AutoencoderModel::encode(const Tensor& image) const
{
    check_image(image.shape());
    Graph<float> g;
    const auto bind = bind_constant(g, params_);
    Shape batched{1};
    batched.insert(batched.end(), image.shape().begin(), image.shape().end());
    Var latent = encode_graph(g, g.input(image.reshaped(batched)), bind);
    return latent.value().reshaped(Shape{config_.bottleneck_dim});
}

Tensor AutoencoderModel::decode(const Tensor& latent) const
{
    if (latent.size() != config_.bottleneck_dim) {
        throw ShapeError("decode expects a latent of length " + std::to_string(config_.bottleneck_dim) + ", got " +
                         shape_str(latent.shape()));
    }
    Graph<float> g;
    const auto bind = bind_constant(g, params_);
    Var out = decode_graph(g, g.input(latent.reshaped(Shape{1, config_.bottleneck_dim})), bind);
    return out.value().reshaped(Shape{config_.image_channels, config_.image_size, config_.image_size});
}

std::vector<Reconstruction> AutoencoderModel::reconstruct_batch(std::span<const Tensor> images) const
{
    std::vector<Reconstruction> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += kInferenceChunk) {
        const auto chunk = images.subspan(start, std::min(kInferenceChunk, images.size() - start));
        for (const auto& img : chunk) check_image(img.shape());
        Graph<float> g;
        const auto bind = bind_constant(g, params_);
        Var latent = encode_graph(g, g.input(stack_images(chunk)), bind);
        Var recon = decode_graph(g, latent, bind);
        auto latents = unstack(latent.value());
        auto recons = unstack(recon.value());
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            out.push_back({std::move(recons[i]), std::move(latents[i])});
        }
    }
    return out;
}

double evaluate_pixel_loss(const ImageCodec& codec, std::span<const Tensor> images)
{
    if (images.empty()) throw UsageError("evaluate_pixel_loss: empty image set");
    double total = 0.0;
    for (std::size_t start = 0; start < images.size(); start += kInferenceChunk) {
        const auto chunk = images.subspan(start, std::min(kInferenceChunk, images.size() - start));
        const auto recon = codec.reconstruct_batch(chunk);
        std::vector<Tensor> outputs;
        outputs.reserve(recon.size());
        for (const auto& r : recon) outputs.push_back(r.image);
        Graph<float> g;
        Var loss = mse_pixel_loss(g.input(stack_images(chunk)), g.input(stack_images(outputs)));
        total += static_cast<double>(loss.value()[0]) * static_cast<double>(chunk.size());
    }
    return total / static_cast<double>(images.size());
}

AutoencoderTrainResult train_autoencoder(AutoencoderModel& model, std::span<const Tensor> dataset,
                                         const AutoencoderHyper& hyper)
{
    if (dataset.empty()) throw UsageError("train_autoencoder: empty dataset");
    const auto eval_set = dataset.first(std::min(hyper.eval_images, dataset.size()));

    AutoencoderTrainResult result;
    result.initial_loss = evaluate_pixel_loss(model, eval_set);

    Adam adam(parameter_pointers(model.parameters()), hyper.adam);
    BatchSampler sampler(dataset.size(), hyper.batch, derive_seed(hyper.seed, 0xae));
    result.loss_history.reserve(hyper.steps);
    std::vector<Tensor> batch;
    for (std::size_t step = 1; step <= hyper.steps; ++step) {
        batch.clear();
        for (std::size_t i : sampler.next()) batch.push_back(dataset[i]);

        adam.zero_grad();
        Graph<float> g;
        Var images = g.input(stack_images(batch));
        auto fwd = model.forward(g, images);
        Var loss = mse_pixel_loss(images, fwd.output);
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
            throw DivergenceError("autoencoder loss became non-finite at step " + std::to_string(step));
        }
        g.backward(loss);
        adam.step();

        result.loss_history.push_back(value);
        if (hyper.on_step) hyper.on_step(step, value);
        if (hyper.checkpoint_every != 0 && step % hyper.checkpoint_every == 0 && hyper.on_checkpoint) {
            hyper.on_checkpoint(step, model);
        }
    }
    result.final_loss = evaluate_pixel_loss(model, eval_set);
    return result;
}

}  // namespace fusiform
