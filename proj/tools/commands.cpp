#include "commands.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "dataset_io.hpp"
#include "fusiform/checkpoint.hpp"
#include "fusiform/fusiform.hpp"
#include "fusiform/layers.hpp"
#include "fusiform/pnm.hpp"
#include "model_io.hpp"

namespace fusiform::cli {

namespace fs = std::filesystem;

namespace {

std::vector<Tensor> pixels_of(const PairSet& set)
{
    std::vector<Tensor> out;
    out.reserve(set.images.size());
    for (const auto& im : set.images) out.push_back(im.pixels);
    return out;
}

std::uint64_t checksum(const std::vector<Parameter>& params)
{
    const auto ptrs = parameter_pointers(params);
    return parameter_checksum(ptrs);
}

/// Features for every image of the dataset: reuse features.bin when it
/// matches, otherwise extract with the frozen models.
std::vector<FeatureRecord> dataset_features(const RunConfig& config, const RunPaths& paths, const PairSet& set,
                                            const AutoencoderModel& ae, const PerceptualModel& perceptual)
{
    if (fs::exists(paths.out / "features.bin")) {
        auto cached = load_features(paths.out);
        if (cached.size() == set.images.size() && cached.front().bundle.vc.size() == ae.latent_dim() &&
            cached.front().bundle.vd.size() == perceptual.feature_dim()) {
            spdlog::info("using cached features from {}", (paths.out / "features.bin").string());
            return cached;
        }
        spdlog::warn("ignoring stale features.bin (dimensions or image count differ)");
    }
    ExtractOptions opts;
    opts.l2_normalize = config.l2_normalize;
    return extract_batch(pixels_of(set), ae, perceptual, opts);
}

void write_recon_grid(const fs::path& path, const AutoencoderModel& model, std::span<const Tensor> images)
{
    const std::size_t n = std::min<std::size_t>(8, images.size());
    const std::size_t s = model.image_size();
    const auto recon = model.reconstruct_batch(images.first(n));
    Tensor grid(Shape{3, 2 * s, n * s});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y = 0; y < s; ++y) {
                for (std::size_t x = 0; x < s; ++x) {
                    grid[(c * 2 * s + y) * n * s + i * s + x] = images[i][(c * s + y) * s + x];
                    grid[(c * 2 * s + s + y) * n * s + i * s + x] = recon[i].image[(c * s + y) * s + x];
                }
            }
        }
    }
    write_pnm(path.string(), grid);
}

}  // namespace

RunPaths RunPaths::under(const fs::path& out)
{
    return {out, out / "data", out / "autoencoder.fsfn", out / "perceptual.fsfn", out / "verifier.fsfn"};
}

void cmd_gen_data(const RunConfig& config, const RunPaths& paths, const std::optional<fs::path>& import_dir)
{
    Rng rng(derive_seed(config.seed, 1));
    PairSet set = import_dir ? import_image_tree(*import_dir, config.image_size, rng, config.identity_blocks)
                             : build_pair_set(config.identities, config.images_per_id, rng, config.pair_options());
    save_pair_set(set, paths.data);
    std::ofstream(paths.data / "config.txt") << config.serialize();
    spdlog::info("wrote {} images and {} pairs to {}", set.images.size(), set.pairs.size(), paths.data.string());
}

AutoencoderTrainResult cmd_train_ae(const RunConfig& config, const RunPaths& paths, bool dump_reconstructions)
{
    Rng rng(derive_seed(config.seed, 10));
    const auto images = build_face_images(config.ae_images, config.ae_images_per_identity, config.image_size, rng);
    AutoencoderModel model(config.autoencoder(), derive_seed(config.seed, 11));

    AutoencoderHyper hyper = config.autoencoder_hyper();
    const std::size_t log_every = std::max<std::size_t>(1, config.ae_steps / 20);
    hyper.on_step = [log_every](std::size_t step, double loss) {
        if (step % log_every == 0) spdlog::info("autoencoder step {} loss {:.6f}", step, loss);
    };
    if (dump_reconstructions) {
        fs::create_directories(paths.out / "recon");
        hyper.checkpoint_every = std::max<std::size_t>(1, config.ae_steps / 4);
        hyper.on_checkpoint = [&](std::size_t step, const AutoencoderModel& m) {
            write_recon_grid(paths.out / "recon" / ("step_" + std::to_string(step) + ".ppm"), m, images);
        };
    }
    const auto result = train_autoencoder(model, images, hyper);
    spdlog::info("autoencoder loss {:.6f} -> {:.6f}", result.initial_loss, result.final_loss);
    fs::create_directories(paths.autoencoder.parent_path());
    save_autoencoder(paths.autoencoder, config, model);
    return result;
}

PretrainResult cmd_pretrain_perceptual(const RunConfig& config, const RunPaths& paths)
{
    Rng rng(derive_seed(config.seed, 20));
    const ClassSet data = build_proxy_set(config.proxy_images, config.image_size, rng);
    PerceptualModel model(config.perceptual(), derive_seed(config.seed, 21));
    const auto result = pretrain_proxy(model, data, config.pretrain_hyper());
    spdlog::info("proxy held-out accuracy {:.4f} over {} images", result.heldout_accuracy, result.heldout_count);
    fs::create_directories(paths.perceptual.parent_path());
    save_perceptual(paths.perceptual, config, model);
    return result;
}

VerifierTrainResult cmd_train_verifier(const RunConfig& config, const RunPaths& paths)
{
    const PairSet set = load_pair_set(paths.data);
    const AutoencoderModel ae = load_autoencoder(paths.autoencoder, config);
    const PerceptualModel perceptual = load_perceptual(paths.perceptual, config);
    const std::uint64_t before = checksum(ae.parameters()) ^ mix_seed(checksum(perceptual.parameters()));

    const auto features = dataset_features(config, paths, set, ae, perceptual);
    std::vector<std::size_t> all(set.pairs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const FusedDataset data = build_fused_dataset(set, features, all, config.mode, config.abs_diff);

    VerifierModel model(config.verifier(), derive_seed(config.seed, 30));
    const auto result = train_verifier(model, data, config.verifier_hyper());
    for (const auto& w : result.warnings) spdlog::warn("{}", w);

    const std::uint64_t after = checksum(ae.parameters()) ^ mix_seed(checksum(perceptual.parameters()));
    if (before != after) throw std::logic_error("extractor weights changed during verifier training");
    spdlog::info("verifier ({}) train accuracy {:.4f}", to_string(config.mode), result.train_accuracy);
    save_verifier(paths.verifier, config, model);
    return result;
}

void cmd_extract(const RunConfig& config, const RunPaths& paths)
{
    const PairSet set = load_pair_set(paths.data);
    const AutoencoderModel ae = load_autoencoder(paths.autoencoder, config);
    const PerceptualModel perceptual = load_perceptual(paths.perceptual, config);
    ExtractOptions opts;
    opts.l2_normalize = config.l2_normalize;
    const auto features = extract_batch(pixels_of(set), ae, perceptual, opts);
    save_features(paths.out, set, features);
    spdlog::info("wrote {} feature records to {}", features.size(), (paths.out / "features.bin").string());
}

std::vector<SeedResult> cmd_eval(const RunConfig& config, const RunPaths& paths)
{
    const PairSet set = load_pair_set(paths.data);
    const AutoencoderModel ae = load_autoencoder(paths.autoencoder, config);
    const PerceptualModel perceptual = load_perceptual(paths.perceptual, config);
    const auto features = dataset_features(config, paths, set, ae, perceptual);

    const BenchmarkOptions options = config.benchmark();
    std::vector<SeedResult> runs;
    for (std::uint64_t seed : options.seeds) {
        runs.push_back(ablate_seed(set, features, seed, options));
        for (const auto& s : runs.back().table.summaries) {
            spdlog::info("seed {} {:>14} {:.4f} +- {:.4f}", seed, to_string(s.mode), s.mean, s.std);
        }
    }
    fs::create_directories(paths.out);
    std::ofstream ablation(paths.out / "ablation.csv", std::ios::binary);
    write_ablation_csv(ablation, runs);
    std::ofstream summary(paths.out / "summary.csv", std::ios::binary);
    write_summary_csv(summary, runs);
    if (!ablation || !summary) throw std::runtime_error("failed to write evaluation CSVs");
    return runs;
}

void cmd_inspect(const fs::path& checkpoint, std::ostream& out)
{
    if (!fs::exists(checkpoint)) throw MissingFileError("missing checkpoint '" + checkpoint.string() + "'");
    const Checkpoint ck = load_checkpoint(checkpoint.string());
    out << "format FSFN version " << ck.version << '\n';
    out << "config:\n";
    std::istringstream cfg(ck.config);
    std::string line;
    while (std::getline(cfg, line)) out << "  " << line << '\n';
    out << "tensors: " << ck.tensors.size() << '\n';
    std::size_t total = 0;
    for (const auto& t : ck.tensors) {
        out << "  " << t.name << ' ' << shape_str(t.value.shape()) << ' ' << t.value.size() << '\n';
        total += t.value.size();
    }
    out << "total values: " << total << '\n';
}

// ---------------------------------------------------------------------------

namespace {

struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> preset;
    std::optional<std::string> mode;
    std::string out = "run";
    std::optional<std::size_t> threads;
    bool deterministic = false;
    bool abs_diff = false;
    std::vector<std::string> overrides;
    std::optional<std::string> data, ae, perceptual, verifier;
};

void add_common(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--config", f.config_path, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--preset", f.preset, "toy or paper-scale")->check(CLI::IsMember({"toy", "paper-scale"}));
    cmd->add_option("--mode", f.mode, "both, vc_only, vd_only or perceptual_raw")
        ->check(CLI::IsMember({"both", "vc_only", "vd_only", "perceptual_raw"}));
    cmd->add_option("--out", f.out, "run directory")->capture_default_str();
    cmd->add_option("--threads", f.threads, "fold-level worker threads");
    cmd->add_flag("--deterministic", f.deterministic, "serialise folds");
    cmd->add_flag("--abs-diff", f.abs_diff, "use |a - b| difference blocks");
    cmd->add_option("--set", f.overrides, "extra key=value overrides");
    cmd->add_option("--data", f.data, "dataset directory (default: OUT/data)");
    cmd->add_option("--ae", f.ae, "autoencoder checkpoint (default: OUT/autoencoder.fsfn)");
    cmd->add_option("--perceptual", f.perceptual, "perceptual checkpoint (default: OUT/perceptual.fsfn)");
    cmd->add_option("--verifier", f.verifier, "verifier checkpoint (default: OUT/verifier.fsfn)");
}

RunConfig resolve_config(const Flags& f)
{
    std::string text;
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path, std::ios::binary);
        text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    RunConfig c = RunConfig::parse(text);
    if (f.preset) {
        c = RunConfig::from_preset(*f.preset);
        c.apply(text);
        c.preset = *f.preset;
    }
    if (f.seed) c.seed = *f.seed;
    if (f.mode) c.set("mode", *f.mode);
    if (f.threads) {
        c.threads = *f.threads;
        c.deterministic = false;
    }
    if (f.deterministic) c.deterministic = true;
    if (f.abs_diff) c.abs_diff = true;
    for (const auto& kv : f.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
}

RunPaths resolve_paths(const Flags& f)
{
    RunPaths p = RunPaths::under(f.out);
    if (f.data) p.data = *f.data;
    if (f.ae) p.autoencoder = *f.ae;
    if (f.perceptual) p.perceptual = *f.perceptual;
    if (f.verifier) p.verifier = *f.verifier;
    return p;
}

void configure_logging()
{
    const char* env = std::getenv("FUSIFORM_LOG");
    const std::string level = env ? env : "info";
    if (level == "off") {
        spdlog::set_level(spdlog::level::off);
    } else if (level == "error") {
        spdlog::set_level(spdlog::level::err);
    } else if (level == "warn") {
        spdlog::set_level(spdlog::level::warn);
    } else if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        spdlog::set_level(spdlog::level::info);
    }
}

}  // namespace

int run(int argc, char** argv)
{
    configure_logging();
    CLI::App app{"Two-level facial feature extraction and verification pipeline"};
    app.require_subcommand(1);
    Flags f;
    std::string import_dir;
    bool dump_recon = false;
    std::string inspect_path;

    auto* gen = app.add_subcommand("gen-data", "render a synthetic pair set (or import PNM images)");
    add_common(gen, f);
    gen->add_option("--import", import_dir, "directory laid out as <identity>/<image>.ppm");
    auto* train_ae = app.add_subcommand("train-ae", "train the bottleneck autoencoder");
    add_common(train_ae, f);
    train_ae->add_flag("--dump-recon", dump_recon, "write reconstruction grids under OUT/recon");
    auto* pretrain = app.add_subcommand("pretrain-perceptual", "pretrain and freeze the perceptual extractor");
    add_common(pretrain, f);
    auto* train_ver = app.add_subcommand("train-verifier", "train the verification head on the dataset");
    add_common(train_ver, f);
    auto* extract = app.add_subcommand("extract", "export v_c / v_d features for the dataset");
    add_common(extract, f);
    auto* eval = app.add_subcommand("eval", "k-fold ablation over all fusion modes");
    add_common(eval, f);
    auto* inspect = app.add_subcommand("inspect", "list the contents of a checkpoint");
    inspect->add_option("checkpoint", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (inspect->parsed()) {
            cmd_inspect(inspect_path, std::cout);
            return kExitOk;
        }
        const RunConfig config = resolve_config(f);
        const RunPaths paths = resolve_paths(f);
        fs::create_directories(paths.out);
        if (gen->parsed()) {
            cmd_gen_data(config, paths, import_dir.empty() ? std::nullopt : std::optional<fs::path>(import_dir));
        } else if (train_ae->parsed()) {
            cmd_train_ae(config, paths, dump_recon);
        } else if (pretrain->parsed()) {
            cmd_pretrain_perceptual(config, paths);
        } else if (train_ver->parsed()) {
            cmd_train_verifier(config, paths);
        } else if (extract->parsed()) {
            cmd_extract(config, paths);
        } else if (eval->parsed()) {
            cmd_eval(config, paths);
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kExitUsage;
    } catch (const MissingFileError& e) {
        spdlog::error("missing file: {}", e.what());
        return kExitMissingFile;
    } catch (const CrcMismatchError& e) {
        spdlog::error("CRC error: {}", e.what());
        return kExitCrc;
    } catch (const CheckpointFormatError& e) {
        spdlog::error("format error: {}", e.what());
        return kExitFormat;
    } catch (const CompatibilityError& e) {
        spdlog::error("incompatible checkpoint: {}", e.what());
        return kExitIncompatible;
    } catch (const DivergenceError& e) {
        spdlog::error("training diverged: {}", e.what());
        return kExitDiverged;
    } catch (const ShapeError& e) {
        spdlog::error("incompatible shapes: {}", e.what());
        return kExitIncompatible;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitFailure;
    }
}

}  // namespace fusiform::cli
