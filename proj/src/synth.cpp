#include "fusiform/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fusiform/image_ops.hpp"

namespace fusiform {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double draw(Rng& rng, Range r) { return rng.uniform(r.lo, r.hi); }

Rgb draw(Rng& rng, const std::array<Range, 3>& r)
{
    return {draw(rng, r[0]), draw(rng, r[1]), draw(rng, r[2])};
}

bool rgb_within(const Rgb& c, const std::array<Range, 3>& r)
{
    return r[0].contains(c[0]) && r[1].contains(c[1]) && r[2].contains(c[2]);
}

/// Anti-aliased coverage of a shape given its signed distance in pixels.
double cover(double dist_px) { return std::clamp(0.5 - dist_px, 0.0, 1.0); }

void blend(Rgb& px, const Rgb& color, double alpha)
{
    for (int k = 0; k < 3; ++k) px[k] += alpha * (color[k] - px[k]);
}

Rgb scaled(const Rgb& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

struct Freckle {
    double u, v;
};

/// Identity-fixed skin texture: a few plane waves with seeded orientation and
/// phase at the identity's frequency.
struct SkinTexture {
    std::array<double, 3> dir_u{}, dir_v{}, phase{};
    double cycles_per_unit = 0.0;
    double amplitude = 0.0;

    double operator()(double u, double v) const
    {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) {
            acc += std::cos(kTwoPi * cycles_per_unit * (dir_u[k] * u + dir_v[k] * v) + phase[k]);
        }
        return amplitude * acc / std::sqrt(3.0);
    }
};

// Pixels per face unit at the 32 px reference canvas.
constexpr double kRefPxPerUnit = 16.0;

}  // namespace

IdentitySpec sample_identity(Rng& rng, int id)
{
    const TraitRanges& r = kTraitRanges;
    IdentitySpec s;
    s.id = id;
    GeneralTraits& g = s.general;
    g.oval_ax = draw(rng, r.oval_ax);
    g.oval_ay = draw(rng, r.oval_ay);
    g.eye_y = draw(rng, r.eye_y);
    g.eye_dx = draw(rng, r.eye_dx);
    g.eye_radius = draw(rng, r.eye_radius);
    g.nose_length = draw(rng, r.nose_length);
    g.nose_width = draw(rng, r.nose_width);
    g.mouth_y = draw(rng, r.mouth_y);
    g.mouth_width = draw(rng, r.mouth_width);
    g.mouth_curvature = draw(rng, r.mouth_curvature);
    g.skin = draw(rng, r.skin);
    g.eye = draw(rng, r.eye);
    g.lip = draw(rng, r.lip);

    LocalTraits& l = s.local;
    l.eye_corner_angle = draw(rng, r.eye_corner_angle);
    l.brow_offset_px = draw(rng, r.brow_offset_px);
    l.freckle_seed = rng.next();
    l.freckle_density = draw(rng, r.freckle_density);
    l.texture_frequency = draw(rng, r.texture_frequency);
    l.texture_amplitude = draw(rng, r.texture_amplitude);
    return s;
}

Nuisance sample_nuisance(Rng& rng)
{
    const TraitRanges& r = kTraitRanges;
    Nuisance n;
    n.shift_x_px = draw(rng, r.shift_px);
    n.shift_y_px = draw(rng, r.shift_px);
    n.scale = draw(rng, r.scale);
    n.brightness = draw(rng, r.brightness);
    n.light_angle = draw(rng, r.light_angle);
    n.background = {draw(rng, r.background), draw(rng, r.background), draw(rng, r.background)};
    return n;
}

bool within_ranges(const IdentitySpec& s)
{
    const TraitRanges& r = kTraitRanges;
    const GeneralTraits& g = s.general;
    const LocalTraits& l = s.local;
    return r.oval_ax.contains(g.oval_ax) && r.oval_ay.contains(g.oval_ay) && r.eye_y.contains(g.eye_y) &&
           r.eye_dx.contains(g.eye_dx) && r.eye_radius.contains(g.eye_radius) &&
           r.nose_length.contains(g.nose_length) && r.nose_width.contains(g.nose_width) &&
           r.mouth_y.contains(g.mouth_y) && r.mouth_width.contains(g.mouth_width) &&
           r.mouth_curvature.contains(g.mouth_curvature) && rgb_within(g.skin, r.skin) &&
           rgb_within(g.eye, r.eye) && rgb_within(g.lip, r.lip) && r.eye_corner_angle.contains(l.eye_corner_angle) &&
           r.brow_offset_px.contains(l.brow_offset_px) && r.freckle_density.contains(l.freckle_density) &&
           r.texture_frequency.contains(l.texture_frequency) && r.texture_amplitude.contains(l.texture_amplitude);
}

bool within_ranges(const Nuisance& n)
{
    const TraitRanges& r = kTraitRanges;
    return r.shift_px.contains(n.shift_x_px) && r.shift_px.contains(n.shift_y_px) && r.scale.contains(n.scale) &&
           r.brightness.contains(n.brightness) && r.light_angle.contains(n.light_angle) &&
           r.background.contains(n.background[0]) && r.background.contains(n.background[1]) &&
           r.background.contains(n.background[2]);
}

Tensor render(const IdentitySpec& spec, const Nuisance& nuisance, std::size_t size, RenderOptions options)
{
    if (size < kMinRenderSize) {
        throw std::invalid_argument("render: size " + std::to_string(size) + " is below the minimum of " +
                                    std::to_string(kMinRenderSize));
    }
    const GeneralTraits& g = spec.general;
    const LocalTraits& l = spec.local;
    const double sz = static_cast<double>(size);
    const double ref = sz / 32.0;                       // nuisance/micro offsets are given at 32 px
    const double px_per_unit = 0.5 * sz * nuisance.scale;
    const double cx = 0.5 * sz + nuisance.shift_x_px * ref;
    const double cy = 0.5 * sz + nuisance.shift_y_px * ref;

    // Identity-fixed local detail, seeded from the spec only.
    Rng local_rng(l.freckle_seed);
    SkinTexture texture;
    for (int k = 0; k < 3; ++k) {
        const double angle = local_rng.uniform(0.0, kTwoPi);
        texture.dir_u[k] = std::cos(angle);
        texture.dir_v[k] = std::sin(angle);
        texture.phase[k] = local_rng.uniform(0.0, kTwoPi);
    }
    texture.cycles_per_unit = l.texture_frequency * kRefPxPerUnit;
    texture.amplitude = options.texture ? l.texture_amplitude : 0.0;

    const auto freckle_count = static_cast<std::size_t>(std::lround(l.freckle_density * kMaxFreckles));
    std::vector<Freckle> freckles(kMaxFreckles);
    for (Freckle& f : freckles) {
        const double side = local_rng.uniform() < 0.5 ? -1.0 : 1.0;
        f.u = side * local_rng.uniform(0.12, 0.5);
        f.v = local_rng.uniform(-0.08, 0.3);
    }
    freckles.resize(freckle_count);
    constexpr double freckle_sigma = 0.045;

    const double brow_shift = l.brow_offset_px / kRefPxPerUnit;
    const double brow_half = 1.2 * g.eye_radius;
    const double brow_thick_px = 0.55 * ref;
    const double mouth_thick = 0.05;
    const Rgb sclera{0.95, 0.95, 0.93};
    const Rgb brow_color = scaled(g.skin, 0.3);
    const Rgb nose_color = scaled(g.skin, 0.8);

    Tensor out(Shape{3, size, size});
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double px = static_cast<double>(x) + 0.5;
            const double py = static_cast<double>(y) + 0.5;
            const double u = (px - cx) / px_per_unit;
            const double v = (py - cy) / px_per_unit;
            Rgb c = nuisance.background;

            // Face oval with skin texture and freckles.
            const double q = std::sqrt((u / g.oval_ax) * (u / g.oval_ax) + (v / g.oval_ay) * (v / g.oval_ay));
            const double face = cover((q - 1.0) * std::min(g.oval_ax, g.oval_ay) * px_per_unit);
            if (face > 0.0) {
                Rgb skin = g.skin;
                const double t = texture(u, v);
                for (double& ch : skin) ch += t;
                double dark = 0.0;
                for (const Freckle& f : freckles) {
                    const double du = u - f.u, dv = v - f.v;
                    dark += std::exp(-0.5 * (du * du + dv * dv) / (freckle_sigma * freckle_sigma));
                }
                skin = scaled(skin, 1.0 - 0.4 * std::min(dark, 1.0));
                blend(c, skin, face);
            }

            // Nose: narrow shaded wedge below the eye line.
            {
                const double v0 = g.eye_y + 0.12;
                const double t = (v - v0) / g.nose_length;
                const double d = std::max({std::abs(u) - 0.5 * g.nose_width * std::clamp(t, 0.0, 1.0), v0 - v,
                                           v - v0 - g.nose_length});
                const double a = cover(d * px_per_unit);
                if (a > 0.0) blend(c, nose_color, a);
            }

            // Mouth: parabolic arc.
            {
                const double half = 0.5 * g.mouth_width;
                const double uc = std::clamp(u, -half, half);
                const double vc = g.mouth_y + g.mouth_curvature * (1.0 - (uc / half) * (uc / half));
                const double d = std::hypot(u - uc, v - vc) - mouth_thick;
                const double a = cover(d * px_per_unit);
                if (a > 0.0) blend(c, g.lip, a);
            }

            for (const double side : {-1.0, 1.0}) {
                // Eye: tilted ellipse with an iris.
                const double ex = side * g.eye_dx, ey = g.eye_y;
                const double ang = side * l.eye_corner_angle;
                const double du = u - ex, dv = v - ey;
                const double ru = std::cos(ang) * du + std::sin(ang) * dv;
                const double rv = -std::sin(ang) * du + std::cos(ang) * dv;
                const double rx = g.eye_radius, ry = 0.55 * g.eye_radius;
                const double qe = std::sqrt((ru / rx) * (ru / rx) + (rv / ry) * (rv / ry));
                const double eye = cover((qe - 1.0) * ry * px_per_unit);
                if (eye > 0.0) {
                    blend(c, sclera, eye);
                    const double iris = cover((std::hypot(du, dv) - 0.45 * rx) * px_per_unit);
                    blend(c, g.eye, std::min(iris, eye));
                }

                // Eyebrow: thin bar whose height carries the micro-offset.
                const double by = ey - 0.06 - 1.6 * g.eye_radius + brow_shift;
                const double bdx = std::max(std::abs(u - ex) - brow_half, 0.0);
                const double bd = std::hypot(bdx, v - by) * px_per_unit - brow_thick_px;
                const double brow = cover(bd);
                if (brow > 0.0) blend(c, brow_color, brow);
            }

            // Illumination gradient and global brightness.
            const double xn = 2.0 * px / sz - 1.0, yn = 2.0 * py / sz - 1.0;
            const double light =
                1.0 + kLightStrength * (std::cos(nuisance.light_angle) * xn + std::sin(nuisance.light_angle) * yn);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                out[(ch * size + y) * size + x] =
                    static_cast<float>(std::clamp(c[ch] * light + nuisance.brightness, 0.0, 1.0));
            }
        }
    }
    return out;
}

Tensor preprocess(const Tensor& image, std::size_t size)
{
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
        throw ShapeError("preprocess expects a 1- or 3-channel CHW image, got " + shape_str(image.shape()));
    }
    if (size == 0) throw std::invalid_argument("preprocess: target size must be positive");
    Tensor rgb = image;
    if (image.dim(0) == 1) {
        const std::size_t plane = image.dim(1) * image.dim(2);
        rgb = Tensor(Shape{3, image.dim(1), image.dim(2)});
        for (std::size_t c = 0; c < 3; ++c) std::copy_n(image.data().data(), plane, rgb.data().data() + c * plane);
    }
    const auto [lo_it, hi_it] = std::minmax_element(rgb.data().begin(), rgb.data().end());
    const float lo = *lo_it, hi = *hi_it;
    if (lo < 0.0f || hi > 1.0f) {
        if (lo >= 0.0f && hi <= 255.0f) {
            for (float& v : rgb.data()) v /= 255.0f;
        } else {
            const float span = hi - lo;
            for (float& v : rgb.data()) v = span > 0.0f ? (v - lo) / span : 0.0f;
        }
    }
    Tensor out = resize_bilinear(rgb, size, size);
    for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

void pair_images(PairSet& set, Rng& rng, std::size_t blocks_requested)
{
    // Group image indices by identity, keeping first-appearance order.
    std::vector<int> ids;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        const int id = set.images[i].identity;
        const auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end()) {
            ids.push_back(id);
            members.push_back({i});
        } else {
            members[static_cast<std::size_t>(it - ids.begin())].push_back(i);
        }
    }
    const std::size_t identities = ids.size();
    if (identities < 2) throw std::invalid_argument("pair_images: need at least 2 identities");
    for (const auto& m : members) {
        if (m.size() < 2) throw std::invalid_argument("pair_images: every identity needs at least 2 images");
    }

    // Identities are split into contiguous blocks of at least two; impostor
    // partners are drawn inside the block.
    const std::size_t blocks = std::clamp<std::size_t>(blocks_requested, 1, identities / 2);
    auto block_bounds = [&](std::size_t i) {
        const std::size_t b = i * blocks / identities;
        const std::size_t lo = (b * identities + blocks - 1) / blocks;
        const std::size_t hi = ((b + 1) * identities + blocks - 1) / blocks;
        return std::pair{lo, hi};
    };

    set.pairs.clear();
    set.pairs.reserve(2 * set.images.size());
    for (std::size_t i = 0; i < identities; ++i) {
        const auto& mine = members[i];
        const std::size_t n = mine.size();
        for (std::size_t k = 0; k < n; ++k) {
            LabeledPair p;
            p.image_a = mine[k];
            p.image_b = mine[(k + 1) % n];
            p.label = 1;
            p.id_a = p.id_b = ids[i];
            set.pairs.push_back(p);
        }
        const auto [lo, hi] = block_bounds(i);
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t other = lo + rng.index(hi - lo - 1);
            if (other >= i) ++other;
            LabeledPair p;
            p.image_a = mine[k];
            p.image_b = members[other][rng.index(members[other].size())];
            p.label = 0;
            p.id_a = ids[i];
            p.id_b = ids[other];
            set.pairs.push_back(p);
        }
    }
}

PairSet build_pair_set(std::size_t identities, std::size_t images_per_id, Rng& rng, const PairSetOptions& options)
{
    if (identities < 2) throw std::invalid_argument("build_pair_set: need at least 2 identities, got " + std::to_string(identities));
    if (images_per_id < 2) throw std::invalid_argument("build_pair_set: need at least 2 images per identity");

    PairSet set;
    set.identities.reserve(identities);
    for (std::size_t i = 0; i < identities; ++i) {
        set.identities.push_back(sample_identity(rng, options.first_id + static_cast<int>(i)));
    }

    set.images.reserve(identities * images_per_id);
    for (std::size_t i = 0; i < identities; ++i) {
        for (std::size_t k = 0; k < images_per_id; ++k) {
            FaceImage img;
            img.identity = set.identities[i].id;
            img.nuisance = sample_nuisance(rng);
            img.pixels = render(set.identities[i], img.nuisance, options.image_size);
            set.images.push_back(std::move(img));
        }
    }

    pair_images(set, rng, options.blocks);
    return set;
}

// ---------------------------------------------------------------------------

Tensor render_proxy(int label, Rng& rng, std::size_t size)
{
    if (label < 0 || label >= kProxyClasses) throw std::invalid_argument("render_proxy: label out of range");
    if (size < kMinRenderSize) throw std::invalid_argument("render_proxy: size too small");
    const int shape = label / kProxyTextures;
    const int texture = label % kProxyTextures;
    const double sz = static_cast<double>(size);

    const Rgb bg{rng.uniform(), rng.uniform(), rng.uniform()};
    const Rgb fg{rng.uniform(), rng.uniform(), rng.uniform()};
    const double cx = rng.uniform(-0.3, 0.3), cy = rng.uniform(-0.3, 0.3);
    const double radius = rng.uniform(0.35, 0.6);
    const double rot = rng.uniform(0.0, kTwoPi);
    const double brightness = rng.uniform(-0.1, 0.1);
    const double light_angle = rng.uniform(0.0, kTwoPi);

    const double stripe_freq = rng.uniform(0.22, 0.45) * kRefPxPerUnit;
    const double stripe_dir = rng.uniform(0.0, kTwoPi);
    const double stripe_amp = rng.uniform(0.15, 0.3);
    std::vector<std::pair<double, double>> specks(10 + rng.index(16));
    for (auto& s : specks) s = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const double noise_amp = rng.uniform(0.1, 0.25);

    const double px_per_unit = 0.5 * sz;
    Tensor out(Shape{3, size, size});
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
            const double u0 = (px - 0.5 * sz) / px_per_unit - cx;
            const double v0 = (py - 0.5 * sz) / px_per_unit - cy;
            const double u = std::cos(rot) * u0 + std::sin(rot) * v0;
            const double v = -std::sin(rot) * u0 + std::cos(rot) * v0;

            double d = 0.0;  // signed distance in face units
            switch (shape) {
            case 0: d = std::hypot(u, v) - radius; break;
            case 1: d = std::max(std::abs(u), std::abs(v)) - 0.8 * radius; break;
            case 2: {
                // equilateral triangle
                const double k = std::sqrt(3.0);
                d = std::max({v - 0.5 * radius, (k * u - v) * 0.5 - 0.5 * radius, (-k * u - v) * 0.5 - 0.5 * radius});
                break;
            }
            case 3: d = std::abs(std::hypot(u, v) - 0.75 * radius) - 0.2 * radius; break;
            default: {
                const double bar = 0.25 * radius;
                const double h1 = std::max(std::abs(u) - radius, std::abs(v) - bar);
                const double h2 = std::max(std::abs(u) - bar, std::abs(v) - radius);
                d = std::min(h1, h2);
            }
            }
            const double a = cover(d * px_per_unit);

            Rgb col = fg;
            double mod = 0.0;
            switch (texture) {
            case 1:
                mod = stripe_amp * std::cos(kTwoPi * stripe_freq * (std::cos(stripe_dir) * u + std::sin(stripe_dir) * v));
                break;
            case 2:
                for (const auto& [su, sv] : specks) {
                    const double du = u - su * radius, dv = v - sv * radius;
                    mod -= 0.5 * std::exp(-0.5 * (du * du + dv * dv) / (0.045 * 0.045));
                }
                break;
            case 3: mod = noise_amp * rng.uniform(-1.0, 1.0); break;
            default: break;
            }
            for (double& ch : col) ch += mod;

            Rgb c = bg;
            blend(c, col, a);
            const double xn = 2.0 * px / sz - 1.0, yn = 2.0 * py / sz - 1.0;
            const double light = 1.0 + kLightStrength * (std::cos(light_angle) * xn + std::sin(light_angle) * yn);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                out[(ch * size + y) * size + x] = static_cast<float>(std::clamp(c[ch] * light + brightness, 0.0, 1.0));
            }
        }
    }
    return out;
}

ClassSet build_proxy_set(std::size_t count, std::size_t size, Rng& rng)
{
    ClassSet set;
    set.images.reserve(count);
    set.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<int>(i % kProxyClasses);
        set.images.push_back(render_proxy(label, rng, size));
        set.labels.push_back(label);
    }
    return set;
}

std::vector<Tensor> build_face_images(std::size_t count, std::size_t images_per_identity, std::size_t size, Rng& rng)
{
    if (images_per_identity == 0) throw std::invalid_argument("build_face_images: images_per_identity must be positive");
    std::vector<Tensor> images;
    images.reserve(count);
    IdentitySpec spec;
    for (std::size_t i = 0; i < count; ++i) {
        if (i % images_per_identity == 0) spec = sample_identity(rng, static_cast<int>(i / images_per_identity));
        images.push_back(render(spec, sample_nuisance(rng), size));
    }
    return images;
}

}  // namespace fusiform
