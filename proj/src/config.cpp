#include "fusiform/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace fusiform {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v)
{
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v)
{
    std::istringstream in(v);
    in.imbue(std::locale::classic());
    double out = 0.0;
    in >> out;
    if (in.fail() || !in.eof()) throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

template <typename Int>
std::vector<Int> parse_list(const std::string& key, const std::string& v)
{
    std::vector<Int> out;
    std::stringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(parse_int<Int>(key, trim(item)));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

template <typename Int>
std::string join(const std::vector<Int>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

RunConfig RunConfig::toy() { return RunConfig{}; }

RunConfig RunConfig::paper_scale()
{
    RunConfig c;
    c.preset = "paper-scale";
    c.image_size = 224;
    c.bottleneck_dim = 2048;
    c.ae_channels = {32, 64, 128, 256, 512};
    c.perceptual_channels = {64, 128, 256, 512, 2048};
    c.perceptual_strides = {2, 2, 2, 2, 2};
    c.verifier_hidden = 1024;
    c.ae_steps = 80000;
    c.ae_batch = 600;
    c.ae_lr = 1e-4;
    c.verifier_steps = 80000;
    c.verifier_batch = 600;
    c.verifier_lr = 1e-4;
    return c;
}

RunConfig RunConfig::from_preset(const std::string& name)
{
    if (name == "toy") return toy();
    if (name == "paper-scale") return paper_scale();
    throw ConfigError("unknown preset '" + name + "' (expected toy or paper-scale)");
}

void RunConfig::set(const std::string& key, const std::string& raw)
{
    const std::string v = trim(raw);
    using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
    auto size = [](std::size_t RunConfig::*m) -> Setter {
        return [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_int<std::size_t>(k, v); };
    };
    auto real = [](double RunConfig::*m) -> Setter {
        return [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); };
    };
    auto flag = [](bool RunConfig::*m) -> Setter {
        return [m](RunConfig& c, const std::string& k, const std::string& v) { c.*m = parse_bool(k, v); };
    };
    static const std::map<std::string, Setter> setters = {
        {"preset",
         [](RunConfig& c, const std::string&, const std::string& v) {
             if (v != "toy" && v != "paper-scale") throw ConfigError("unknown preset '" + v + "'");
             c.preset = v;
         }},
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_int<std::uint64_t>(k, v); }},
        {"image_size", size(&RunConfig::image_size)},
        {"bottleneck_dim", size(&RunConfig::bottleneck_dim)},
        {"ae_channels",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.ae_channels = parse_list<std::size_t>(k, v); }},
        {"perceptual_channels",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.perceptual_channels = parse_list<std::size_t>(k, v);
         }},
        {"perceptual_strides",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.perceptual_strides = parse_list<int>(k, v); }},
        {"verifier_hidden", size(&RunConfig::verifier_hidden)},
        {"ae_images", size(&RunConfig::ae_images)},
        {"ae_images_per_identity", size(&RunConfig::ae_images_per_identity)},
        {"ae_steps", size(&RunConfig::ae_steps)},
        {"ae_batch", size(&RunConfig::ae_batch)},
        {"ae_lr", real(&RunConfig::ae_lr)},
        {"proxy_images", size(&RunConfig::proxy_images)},
        {"proxy_steps", size(&RunConfig::proxy_steps)},
        {"proxy_batch", size(&RunConfig::proxy_batch)},
        {"proxy_lr", real(&RunConfig::proxy_lr)},
        {"verifier_steps", size(&RunConfig::verifier_steps)},
        {"verifier_batch", size(&RunConfig::verifier_batch)},
        {"verifier_lr", real(&RunConfig::verifier_lr)},
        {"identities", size(&RunConfig::identities)},
        {"images_per_id", size(&RunConfig::images_per_id)},
        {"identity_blocks", size(&RunConfig::identity_blocks)},
        {"folds", size(&RunConfig::folds)},
        {"eval_seeds",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.eval_seeds = parse_list<std::uint64_t>(k, v); }},
        {"mode",
         [](RunConfig& c, const std::string&, const std::string& v) {
             try {
                 c.mode = fusion_mode_from_string(v);
             } catch (const std::invalid_argument& e) {
                 throw ConfigError(e.what());
             }
         }},
        {"abs_diff", flag(&RunConfig::abs_diff)},
        {"l2_normalize", flag(&RunConfig::l2_normalize)},
        {"threads", size(&RunConfig::threads)},
        {"deterministic", flag(&RunConfig::deterministic)},
    };
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(*this, key, v);
}

std::map<std::string, std::string> RunConfig::to_map() const
{
    return {
        {"preset", preset},
        {"seed", std::to_string(seed)},
        {"image_size", std::to_string(image_size)},
        {"bottleneck_dim", std::to_string(bottleneck_dim)},
        {"ae_channels", join(ae_channels)},
        {"perceptual_channels", join(perceptual_channels)},
        {"perceptual_strides", join(perceptual_strides)},
        {"verifier_hidden", std::to_string(verifier_hidden)},
        {"ae_images", std::to_string(ae_images)},
        {"ae_images_per_identity", std::to_string(ae_images_per_identity)},
        {"ae_steps", std::to_string(ae_steps)},
        {"ae_batch", std::to_string(ae_batch)},
        {"ae_lr", format_double(ae_lr)},
        {"proxy_images", std::to_string(proxy_images)},
        {"proxy_steps", std::to_string(proxy_steps)},
        {"proxy_batch", std::to_string(proxy_batch)},
        {"proxy_lr", format_double(proxy_lr)},
        {"verifier_steps", std::to_string(verifier_steps)},
        {"verifier_batch", std::to_string(verifier_batch)},
        {"verifier_lr", format_double(verifier_lr)},
        {"identities", std::to_string(identities)},
        {"images_per_id", std::to_string(images_per_id)},
        {"identity_blocks", std::to_string(identity_blocks)},
        {"folds", std::to_string(folds)},
        {"eval_seeds", join(eval_seeds)},
        {"mode", to_string(mode)},
        {"abs_diff", abs_diff ? "true" : "false"},
        {"l2_normalize", l2_normalize ? "true" : "false"},
        {"threads", std::to_string(threads)},
        {"deterministic", deterministic ? "true" : "false"},
    };
}

std::string RunConfig::serialize() const
{
    std::string out;
    for (const auto& [k, v] : to_map()) out += k + "=" + v + "\n";
    return out;
}

void RunConfig::apply(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
        }
        set(trim(t.substr(0, eq)), t.substr(eq + 1));
    }
}

RunConfig RunConfig::parse(const std::string& text)
{
    // A preset line selects the base values; other keys then override them.
    RunConfig base;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.rfind("preset", 0) == 0) {
            const auto eq = t.find('=');
            if (eq != std::string::npos && trim(t.substr(0, eq)) == "preset") base = from_preset(trim(t.substr(eq + 1)));
        }
    }
    base.apply(text);
    return base;
}

RunConfig RunConfig::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

AutoencoderConfig RunConfig::autoencoder() const
{
    AutoencoderConfig c;
    c.image_size = image_size;
    c.channels = ae_channels;
    c.bottleneck_dim = bottleneck_dim;
    return c;
}

PerceptualConfig RunConfig::perceptual() const
{
    PerceptualConfig c;
    c.image_size = image_size;
    c.channels = perceptual_channels;
    c.strides = perceptual_strides;
    return c;
}

VerifierConfig RunConfig::verifier() const
{
    VerifierConfig c;
    c.mode = mode;
    c.vc_dim = bottleneck_dim;
    c.vd_dim = perceptual().feature_dim();
    c.hidden = verifier_hidden;
    c.abs_diff = abs_diff;
    return c;
}

AutoencoderHyper RunConfig::autoencoder_hyper() const
{
    AutoencoderHyper h;
    h.adam.alpha = ae_lr;
    h.batch = ae_batch;
    h.steps = ae_steps;
    h.seed = derive_seed(seed, 0xae);
    return h;
}

PretrainHyper RunConfig::pretrain_hyper() const
{
    PretrainHyper h;
    h.adam.alpha = proxy_lr;
    h.batch = proxy_batch;
    h.steps = proxy_steps;
    h.seed = derive_seed(seed, 0x9e);
    return h;
}

VerifierHyper RunConfig::verifier_hyper() const
{
    VerifierHyper h;
    h.adam.alpha = verifier_lr;
    h.batch = verifier_batch;
    h.steps = verifier_steps;
    h.seed = derive_seed(seed, 0xfe);
    return h;
}

PairSetOptions RunConfig::pair_options() const
{
    PairSetOptions o;
    o.image_size = image_size;
    o.blocks = identity_blocks;
    return o;
}

BenchmarkOptions RunConfig::benchmark() const
{
    BenchmarkOptions b;
    b.seeds = eval_seeds;
    b.identities = identities;
    b.images_per_id = images_per_id;
    b.folds = folds;
    b.pair_options = pair_options();
    b.ablation.hidden = verifier_hidden;
    b.ablation.abs_diff = abs_diff;
    b.ablation.hyper = verifier_hyper();
    b.ablation.threads = threads;
    b.ablation.deterministic = deterministic;
    b.extract.l2_normalize = l2_normalize;
    return b;
}

}  // namespace fusiform
