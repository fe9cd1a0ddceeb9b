#include "fusiform/perceptual.hpp"

#include <algorithm>
#include <cmath>

namespace fusiform {

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kInferenceChunk = 64;

}  // namespace

std::string to_string(Provenance p)
{
    return p == Provenance::proxy_pretrained ? "proxy_pretrained" : "random_frozen";
}

Provenance provenance_from_string(const std::string& s)
{
    if (s == "proxy_pretrained") return Provenance::proxy_pretrained;
    if (s == "random_frozen") return Provenance::random_frozen;
    throw std::invalid_argument("unknown provenance '" + s + "'");
}

std::vector<std::pair<std::string, Shape>> PerceptualModel::parameter_layout(const PerceptualConfig& c)
{
    if (c.channels.empty() || c.channels.size() != c.strides.size()) {
        throw UsageError("perceptual config needs one stride per conv block");
    }
    std::vector<std::pair<std::string, Shape>> out;
    std::size_t in = c.image_channels;
    for (std::size_t i = 0; i < c.channels.size(); ++i) {
        const std::string p = "block" + std::to_string(i);
        out.emplace_back(p + ".weight", Shape{c.channels[i], in, kKernel, kKernel});
        out.emplace_back(p + ".bias", Shape{c.channels[i]});
        in = c.channels[i];
    }
    return out;
}

PerceptualModel::PerceptualModel(PerceptualConfig config, std::uint64_t seed) : config_(std::move(config))
{
    Rng rng(seed);
    for (auto& [name, shape] : parameter_layout(config_)) {
        if (name.ends_with(".bias")) {
            params_.emplace_back(name, Tensor(shape), false);
        } else {
            params_.emplace_back(name, he_uniform<float>(shape, shape[1] * shape[2] * shape[3], rng), false);
        }
    }
}

PerceptualModel::PerceptualModel(PerceptualConfig config, std::vector<Parameter> params, Provenance provenance)
  : config_(std::move(config)), provenance_(provenance)
{
    const auto layout = parameter_layout(config_);
    if (params.size() != layout.size()) {
        throw ShapeError("perceptual model expects " + std::to_string(layout.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    for (const auto& [name, shape] : layout) {
        const std::size_t i = find_parameter(params, name);
        if (params[i].value.shape() != shape) {
            throw ShapeError("perceptual parameter '" + name + "' has the wrong shape", shape, params[i].value.shape());
        }
        params_.emplace_back(name, params[i].value, false);
    }
}

bool PerceptualModel::frozen() const
{
    return std::none_of(params_.begin(), params_.end(), [](const Parameter& p) { return p.trainable; });
}

void PerceptualModel::set_frozen(bool frozen)
{
    for (auto& p : params_) p.trainable = !frozen;
}

void PerceptualModel::check_image(const Shape& chw) const
{
    const Shape want{config_.image_channels, config_.image_size, config_.image_size};
    if (chw != want) throw ShapeError("perceptual input has the wrong size", want, chw);
}

Var PerceptualModel::backbone(Var images, const ParamBinder<float>& bind) const
{
    Var h = images;
    for (std::size_t i = 0; i < config_.channels.size(); ++i) {
        h = relu(add_channel_bias(conv2d(h, bind(2 * i), config_.strides[i], 1), bind(2 * i + 1)));
    }
    return global_avg_pool(h);
}

Var PerceptualModel::forward(Graph<float>& g, Var images)
{
    const auto& s = images.shape();
    if (s.size() != 4) throw ShapeError("perceptual forward expects NCHW input, got " + shape_str(s));
    check_image(Shape(s.begin() + 1, s.end()));
    return backbone(images, bind_trainable(g, params_));
}

Tensor PerceptualModel::perceive(const Tensor& image) const
{
    return std::move(perceive_batch(std::span<const Tensor>(&image, 1)).front());
}

std::vector<Tensor> PerceptualModel::perceive_batch(std::span<const Tensor> images) const
{
    if (!frozen()) throw UsageError("perceive requires a frozen perceptual model");
    std::vector<Tensor> out;
    out.reserve(images.size());
    for (std::size_t start = 0; start < images.size(); start += kInferenceChunk) {
        const auto chunk = images.subspan(start, std::min(kInferenceChunk, images.size() - start));
        for (const auto& img : chunk) check_image(img.shape());
        Graph<float> g;
        Var features = backbone(g.input(stack_images(chunk)), bind_constant(g, params_));
        for (auto& f : unstack(features.value())) out.push_back(std::move(f));
    }
    return out;
}

PretrainResult pretrain_proxy(PerceptualModel& model, const ClassSet& data, const PretrainHyper& hyper)
{
    if (data.images.size() != data.labels.size() || data.images.size() < 2) {
        throw UsageError("pretrain_proxy needs a labeled set with at least two images");
    }
    const int classes = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
    const auto holdout = static_cast<std::size_t>(std::floor(hyper.holdout_fraction * static_cast<double>(data.images.size())));
    const std::size_t train_count = data.images.size() - holdout;
    if (train_count == 0) throw UsageError("pretrain_proxy: holdout leaves no training images");

    Rng init(derive_seed(hyper.seed, 0x9e));
    const std::size_t d = model.feature_dim();
    const auto k = static_cast<std::size_t>(classes);
    std::vector<Parameter> head;
    head.emplace_back("head.weight", he_uniform<float>(Shape{d, k}, d, init));
    head.emplace_back("head.bias", Tensor(Shape{k}));

    model.set_frozen(false);
    std::vector<Parameter*> trainable = parameter_pointers(model.parameters());
    for (auto& p : head) trainable.push_back(&p);
    Adam adam(trainable, hyper.adam);
    BatchSampler sampler(train_count, hyper.batch, derive_seed(hyper.seed, 0x5a));

    PretrainResult result;
    result.loss_history.reserve(hyper.steps);
    std::vector<Tensor> batch;
    std::vector<int> labels;
    for (std::size_t step = 1; step <= hyper.steps; ++step) {
        batch.clear();
        labels.clear();
        for (std::size_t i : sampler.next()) {
            batch.push_back(data.images[i]);
            labels.push_back(data.labels[i]);
        }
        adam.zero_grad();
        Graph<float> g;
        Var features = model.forward(g, g.input(stack_images(batch)));
        Var logits = dense(features, g.parameter(head[0]), g.parameter(head[1]));
        Var loss = softmax_cross_entropy(logits, std::span<const int>(labels));
        const double value = loss.value()[0];
        if (!std::isfinite(value)) {
            model.set_frozen(true);
            throw DivergenceError("proxy pretraining loss became non-finite at step " + std::to_string(step));
        }
        g.backward(loss);
        adam.step();
        result.loss_history.push_back(value);
    }

    model.set_frozen(true);
    model.set_provenance(Provenance::proxy_pretrained);

    if (holdout > 0) {
        const std::span<const Tensor> held(data.images.data() + train_count, holdout);
        const auto features = model.perceive_batch(held);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < holdout; ++i) {
            const auto& f = features[i];
            int best = 0;
            double best_logit = -1e300;
            for (std::size_t c = 0; c < k; ++c) {
                double z = head[1].value[c];
                for (std::size_t j = 0; j < d; ++j) z += static_cast<double>(f[j]) * head[0].value[j * k + c];
                if (z > best_logit) {
                    best_logit = z;
                    best = static_cast<int>(c);
                }
            }
            if (best == data.labels[train_count + i]) ++correct;
        }
        result.heldout_accuracy = static_cast<double>(correct) / static_cast<double>(holdout);
        result.heldout_count = holdout;
    }
    return result;
}

}  // namespace fusiform
