#include "fusiform/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fusiform {

namespace {

void require_chw(const Tensor& image, const char* op)
{
    if (image.rank() != 3) throw ShapeError(std::string(op) + " expects a CHW image, got " + shape_str(image.shape()));
}

}  // namespace

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width)
{
    require_chw(image, "resize_bilinear");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (h == height && w == width) return image;
    Tensor out(Shape{c, height, width});
    const double sy = static_cast<double>(h) / static_cast<double>(height);
    const double sx = static_cast<double>(w) / static_cast<double>(width);
    auto src = [&](std::size_t ch, std::size_t y, std::size_t x) { return image[(ch * h + y) * w + x]; };
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const float ty = static_cast<float>(fy - static_cast<double>(y0));
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const float tx = static_cast<float>(fx - static_cast<double>(x0));
            for (std::size_t ch = 0; ch < c; ++ch) {
                // lerp form keeps constant regions exactly constant
                const float top = src(ch, y0, x0) + tx * (src(ch, y0, x1) - src(ch, y0, x0));
                const float bot = src(ch, y1, x0) + tx * (src(ch, y1, x1) - src(ch, y1, x0));
                out[(ch * height + y) * width + x] = top + ty * (bot - top);
            }
        }
    }
    return out;
}

Tensor gaussian_blur(const Tensor& image, double sigma)
{
    require_chw(image, "gaussian_blur");
    if (sigma <= 0.0) return image;
    const long radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (long k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = v;
        total += v;
    }
    for (double& v : kernel) v /= total;

    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const long hl = static_cast<long>(h), wl = static_cast<long>(w);
    Tensor tmp(image.shape());
    Tensor out(image.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* in = image.data().data() + ch * h * w;
        float* mid = tmp.data().data() + ch * h * w;
        float* dst = out.data().data() + ch * h * w;
        for (long y = 0; y < hl; ++y) {
            for (long x = 0; x < wl; ++x) {
                double acc = 0.0;
                for (long k = -radius; k <= radius; ++k) {
                    const long xx = std::clamp(x + k, 0L, wl - 1);
                    acc += kernel[static_cast<std::size_t>(k + radius)] * in[y * wl + xx];
                }
                mid[y * wl + x] = static_cast<float>(acc);
            }
        }
        for (long y = 0; y < hl; ++y) {
            for (long x = 0; x < wl; ++x) {
                double acc = 0.0;
                for (long k = -radius; k <= radius; ++k) {
                    const long yy = std::clamp(y + k, 0L, hl - 1);
                    acc += kernel[static_cast<std::size_t>(k + radius)] * mid[yy * wl + x];
                }
                dst[y * wl + x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

BandSplit band_split(const Tensor& image, double sigma)
{
    BandSplit split{gaussian_blur(image, sigma), image};
    auto hi = split.high.data();
    const auto lo = split.low.data();
    for (std::size_t i = 0; i < hi.size(); ++i) hi[i] -= lo[i];
    return split;
}

double mean_energy(const Tensor& t)
{
    double acc = 0.0;
    for (float v : t.data()) acc += static_cast<double>(v) * v;
    return t.empty() ? 0.0 : acc / static_cast<double>(t.size());
}

double laplacian_energy(const Tensor& image)
{
    require_chw(image, "laplacian_energy");
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const long hl = static_cast<long>(h), wl = static_cast<long>(w);
    double acc = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float* p = image.data().data() + ch * h * w;
        auto at = [&](long y, long x) {
            return static_cast<double>(p[std::clamp(y, 0L, hl - 1) * wl + std::clamp(x, 0L, wl - 1)]);
        };
        for (long y = 0; y < hl; ++y) {
            for (long x = 0; x < wl; ++x) {
                const double lap = at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4.0 * at(y, x);
                acc += lap * lap;
            }
        }
    }
    return acc / static_cast<double>(image.size());
}

}  // namespace fusiform
