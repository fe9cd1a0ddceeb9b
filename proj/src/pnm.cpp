#include "fusiform/pnm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <vector>

namespace fusiform {

namespace {

class PnmReader {
public:
    explicit PnmReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    // Header token, skipping whitespace and '#' comments.
    std::string token()
    {
        for (;;) {
            while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
            if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
                continue;
            }
            break;
        }
        std::string out;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) out += bytes_[pos_++];
        if (out.empty()) throw std::runtime_error("unexpected end of PNM header");
        return out;
    }

    std::size_t number()
    {
        const std::string t = token();
        if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            throw std::runtime_error("malformed PNM number '" + t + "'");
        }
        return std::stoul(t);
    }

    void skip_single_space() { ++pos_; }

    unsigned sample(bool wide)
    {
        if (pos_ + (wide ? 2 : 1) > bytes_.size()) throw std::runtime_error("truncated PNM raster");
        unsigned v = static_cast<unsigned char>(bytes_[pos_++]);
        if (wide) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_++]);
        return v;
    }

private:
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

Tensor read_pnm(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image '" + path + "'");
    PnmReader r{std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>())};

    const std::string magic = r.token();
    if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6") {
        throw std::runtime_error("'" + path + "' is not a PGM/PPM image");
    }
    const bool colour = magic == "P3" || magic == "P6";
    const bool binary = magic == "P5" || magic == "P6";
    const std::size_t w = r.number(), h = r.number(), maxval = r.number();
    if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw std::runtime_error("invalid PNM header in '" + path + "'");
    const std::size_t c = colour ? 3 : 1;

    Tensor out(Shape{c, h, w});
    if (binary) r.skip_single_space();
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t v = binary ? r.sample(maxval > 255) : r.number();
                out[(ch * h + y) * w + x] = static_cast<float>(v);
            }
        }
    }
    return out;
}

void write_pnm(const std::string& path, const Tensor& image)
{
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
        throw ShapeError("write_pnm expects a 1- or 3-channel CHW image, got " + shape_str(image.shape()));
    }
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write image '" + path + "'");
    out << (c == 3 ? "P6" : "P5") << '\n' << w << ' ' << h << "\n255\n";
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double v = std::clamp(static_cast<double>(image[(ch * h + y) * w + x]), 0.0, 1.0);
                out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
            }
        }
    }
}

}  // namespace fusiform
