#include "fusiform/layers.hpp"

#include <algorithm>
#include <stdexcept>

namespace fusiform {

Tensor stack_images(std::span<const Tensor> images)
{
    if (images.empty()) throw UsageError("stack_images: empty batch");
    const Shape& first = images.front().shape();
    Shape shape{images.size()};
    shape.insert(shape.end(), first.begin(), first.end());
    Tensor out(shape);
    const std::size_t each = images.front().size();
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].shape() != first) throw ShapeError("stack_images: mixed image shapes", first, images[i].shape());
        std::copy_n(images[i].data().data(), each, out.data().data() + i * each);
    }
    return out;
}

std::vector<Tensor> unstack(const Tensor& batch)
{
    if (batch.rank() < 2) throw ShapeError("unstack expects rank >= 2, got " + shape_str(batch.shape()));
    const Shape inner(batch.shape().begin() + 1, batch.shape().end());
    const std::size_t each = shape_numel(inner);
    std::vector<Tensor> out;
    out.reserve(batch.dim(0));
    for (std::size_t i = 0; i < batch.dim(0); ++i) {
        std::vector<float> data(batch.data().begin() + static_cast<std::ptrdiff_t>(i * each),
                                batch.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * each));
        out.emplace_back(inner, std::move(data));
    }
    return out;
}

std::vector<Parameter*> parameter_pointers(std::vector<Parameter>& params)
{
    std::vector<Parameter*> out;
    for (auto& p : params) out.push_back(&p);
    return out;
}

std::vector<const Parameter*> parameter_pointers(const std::vector<Parameter>& params)
{
    std::vector<const Parameter*> out;
    for (const auto& p : params) out.push_back(&p);
    return out;
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
  : order_(n), batch_(std::min(batch, n)), rng_(seed)
{
    if (n == 0 || batch == 0) throw UsageError("BatchSampler needs a nonempty dataset and batch");
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    reshuffle();
}

void BatchSampler::reshuffle()
{
    // Fisher-Yates with the platform-stable generator.
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.index(i)]);
    cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next()
{
    if (cursor_ + batch_ > order_.size()) reshuffle();
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_));
    cursor_ += batch_;
    return out;
}

std::size_t find_parameter(const std::vector<Parameter>& params, const std::string& name)
{
    const auto it = std::find_if(params.begin(), params.end(), [&](const Parameter& p) { return p.name == name; });
    if (it == params.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return static_cast<std::size_t>(it - params.begin());
}

}  // namespace fusiform
