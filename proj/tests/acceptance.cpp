// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Writes its CSV artefacts under ./acceptance_out.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "fusiform/autoencoder.hpp"
#include "fusiform/checkpoint.hpp"
#include "fusiform/config.hpp"
#include "fusiform/eval.hpp"
#include "fusiform/fusiform.hpp"
#include "fusiform/image_ops.hpp"
#include "fusiform/perceptual.hpp"
#include "fusiform/synth.hpp"
#include "fusiform/verifier.hpp"
#include "gradient_suite.hpp"
#include "model_io.hpp"
#include "stub_codec.hpp"
#include "test_util.hpp"

using namespace fusiform;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    int id;
    std::string title;
    bool passed;
    std::string detail;
};

std::vector<Outcome> g_outcomes;

void report(int id, const std::string& title, bool passed, const std::string& detail)
{
    g_outcomes.push_back({id, title, passed, detail});
    std::printf("[%s] %2d %s: %s\n", passed ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
}

template <typename... Args>
std::string fmt(const char* f, Args... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::uint64_t checksum(const std::vector<Parameter>& params)
{
    return parameter_checksum(parameter_pointers(params));
}

// ---------------------------------------------------------------------------

void gradient_integrity()
{
    const auto t0 = Clock::now();
    auto cases = fusiform::testing::layer_gradient_cases();
    for (auto& c : fusiform::testing::verifier_gradient_cases()) cases.push_back(std::move(c));
    constexpr std::uint64_t kSeeds = 20;
    double worst64 = 0.0, worst32 = 0.0;
    std::string worst_case;
    bool ok = true;
    for (const auto& c : cases) {
        for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
            const double e64 = c.run(seed, false).max_rel_error;
            const double e32 = c.run(seed, true).max_rel_error;
            if (e64 > worst64) {
                worst64 = e64;
                worst_case = c.name;
            }
            worst32 = std::max(worst32, e32);
            ok = ok && e64 < 1e-6 && e32 < 1e-3;
        }
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 120.0;
    report(1, "gradient integrity", ok,
           fmt("%zu ops x %d seeds, max rel err 64-bit %.2e (%s), 32-bit %.2e, %.1fs", cases.size(), int(kSeeds), worst64,
               worst_case.c_str(), worst32, secs));
}

template <typename T>
T naive_pixel_loss(const BasicTensor<T>& a, const BasicTensor<T>& b)
{
    const std::size_t n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        double acc = 0.0;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t i = ((s * c + ch) * h + y) * w + x;
                    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
                    acc += d * d;
                }
            }
        }
        total += acc / static_cast<double>(h * w);
    }
    return static_cast<T>(total / static_cast<double>(n));
}

void pixel_loss_oracle()
{
    Rng rng(2024);
    std::size_t exact = 0;
    constexpr int kPairs = 50;
    for (int t = 0; t < kPairs; ++t) {
        const Shape s{1 + rng.index(4), 1 + rng.index(3), 2 + rng.index(15), 2 + rng.index(15)};
        const Tensor a = fusiform::testing::random_tensor<float>(s, rng, 0.0, 1.0);
        const Tensor b = fusiform::testing::random_tensor<float>(s, rng, 0.0, 1.0);
        Graph<float> g;
        const float got = mse_pixel_loss(g.input(a), g.input(b)).value()[0];
        if (got == naive_pixel_loss(a, b)) ++exact;
    }
    report(2, "pixel loss oracle", exact == kPairs, fmt("%zu/%d random pairs bit-identical to the triple loop", exact, kPairs));
}

template <typename T>
bool adjoint_instance(Rng& rng)
{
    const std::size_t stride = 1 + rng.index(2), pad = rng.index(2), k = 3 + rng.index(2);
    const std::size_t ho = 2 + rng.index(5), wo = 2 + rng.index(5);
    const std::size_t hi = (ho - 1) * stride + k - 2 * pad, wi = (wo - 1) * stride + k - 2 * pad;
    const std::size_t n = 1 + rng.index(2), cin = 1 + rng.index(3), cout = 1 + rng.index(3);
    const auto w = fusiform::testing::random_tensor<T>({cout, cin, k, k}, rng);
    const auto up = fusiform::testing::random_tensor<T>({n, cout, ho, wo}, rng);

    Graph<T> g;
    auto x = g.input(BasicTensor<T>({n, cin, hi, wi}), true);
    auto y = conv2d(x, g.input(w), stride, pad);
    if (y.shape() != up.shape()) return false;
    g.backward(sum(mul(y, g.input(up))));

    Graph<T> h;
    auto t = conv_transpose2d(h.input(up), h.input(w), stride, pad);
    return t.value() == g.grad(x);
}

void adjoint_property()
{
    Rng rng(77);
    int ok64 = 0, ok32 = 0;
    constexpr int kInstances = 50;
    for (int i = 0; i < kInstances; ++i) {
        ok64 += adjoint_instance<double>(rng);
        ok32 += adjoint_instance<float>(rng);
    }
    report(3, "transposed conv adjoint", ok64 == kInstances && ok32 == kInstances,
           fmt("exact on %d/%d (64-bit) and %d/%d (32-bit) random instances", ok64, kInstances, ok32, kInstances));
}

// ---------------------------------------------------------------------------

struct Extractors {
    AutoencoderModel ae;
    PerceptualModel perceptual;
};

AutoencoderModel autoencoder_convergence(const RunConfig& cfg)
{
    const auto t0 = Clock::now();
    Rng rng(derive_seed(cfg.seed, 10));
    const auto images = build_face_images(cfg.ae_images, cfg.ae_images_per_identity, cfg.image_size, rng);
    AutoencoderModel ae(cfg.autoencoder(), derive_seed(cfg.seed, 11));
    const auto r = train_autoencoder(ae, images, cfg.autoencoder_hyper());
    const double secs = seconds_since(t0);
    const double ratio = r.final_loss / r.initial_loss;
    const bool ok = ratio <= 0.2 && r.loss_history.size() <= 2000 && images.size() == 2000 && cfg.image_size == 32 &&
                    secs < 600.0;
    report(4, "autoencoder convergence", ok,
           fmt("loss %.5f -> %.5f (ratio %.3f) in %zu steps on %zu images, %.0fs", r.initial_loss, r.final_loss, ratio,
               r.loss_history.size(), images.size(), secs));
    ae.set_frozen(true);
    return ae;
}

PerceptualModel pretrain(const RunConfig& cfg)
{
    const auto t0 = Clock::now();
    Rng rng(derive_seed(cfg.seed, 20));
    const ClassSet data = build_proxy_set(cfg.proxy_images, cfg.image_size, rng);
    PerceptualModel p(cfg.perceptual(), derive_seed(cfg.seed, 21));
    const auto r = pretrain_proxy(p, data, cfg.pretrain_hyper());
    std::printf("       perceptual proxy pretraining: held-out accuracy %.3f on %zu images, %.0fs\n", r.heldout_accuracy,
                r.heldout_count, seconds_since(t0));
    return p;
}

/// Sum over feature dimensions of the variance of per-identity mean features.
double cross_identity_variance(const std::vector<Tensor>& features, std::size_t per_identity)
{
    const std::size_t ids = features.size() / per_identity, d = features.front().size();
    std::vector<std::vector<double>> means(ids, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < ids * per_identity; ++i) {
        for (std::size_t j = 0; j < d; ++j) means[i / per_identity][j] += features[i][j] / static_cast<double>(per_identity);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mu = 0.0;
        for (const auto& m : means) mu += m[j];
        mu /= static_cast<double>(ids);
        for (const auto& m : means) total += (m[j] - mu) * (m[j] - mu);
    }
    return total / static_cast<double>(ids - 1);
}

void deidentification(const RunConfig& cfg, const Extractors& ex)
{
    constexpr std::size_t kHeldOut = 500, kPerId = 5;
    Rng rng(derive_seed(cfg.seed, 40));
    const auto images = build_face_images(kHeldOut, kPerId, cfg.image_size, rng);
    const auto recon = ex.ae.reconstruct_batch(images);
    std::vector<Tensor> rimg;
    double lap_o = 0.0, lap_r = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        lap_o += laplacian_energy(images[i]);
        lap_r += laplacian_energy(recon[i].image);
        rimg.push_back(recon[i].image);
    }
    lap_o /= kHeldOut;
    lap_r /= kHeldOut;
    const double var_o = cross_identity_variance(ex.perceptual.perceive_batch(images), kPerId);
    const double var_r = cross_identity_variance(ex.perceptual.perceive_batch(rimg), kPerId);
    report(5, "de-identification", lap_r < lap_o && var_r < var_o,
           fmt("Laplacian energy %.5f -> %.5f; cross-identity perceive variance %.4f -> %.4f on %zu held-out images", lap_o,
               lap_r, var_o, var_r, kHeldOut));
}

void vd_identity_case(const RunConfig& cfg, const Extractors& ex)
{
    fusiform::testing::IdentityCodec codec(cfg.image_size, cfg.bottleneck_dim);
    Rng rng(derive_seed(cfg.seed, 41));
    const auto images = build_face_images(200, 4, cfg.image_size, rng);
    std::size_t zero = 0;
    for (const auto& rec : extract_batch(images, codec, ex.perceptual)) {
        zero += std::all_of(rec.bundle.vd.data().begin(), rec.bundle.vd.data().end(), [](float v) { return v == 0.0f; });
    }
    report(6, "v_d identity case", zero == images.size(), fmt("v_d == 0 exactly for %zu/%zu images", zero, images.size()));
}

// ---------------------------------------------------------------------------

struct Baseline {
    std::map<std::string, double> mean;  // mode -> mean across seeds ("all" rows)
};

Baseline read_baseline(const fs::path& path)
{
    Baseline b;
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string seed, mode, mean;
        std::getline(ss, seed, ',');
        std::getline(ss, mode, ',');
        std::getline(ss, mean, ',');
        if (seed == "all") b.mean[mode] = std::stod(mean);
    }
    return b;
}

BenchmarkResult ablation_ordering(const RunConfig& cfg, const Extractors& ex, const fs::path& out_dir,
                                  const fs::path& baseline_path)
{
    const auto t0 = Clock::now();
    const BenchmarkOptions opts = cfg.benchmark();
    const BenchmarkResult res = run_benchmark(ex.ae, ex.perceptual, opts);
    const double secs = seconds_since(t0);
    {
        std::ofstream a(out_dir / "ablation.csv"), s(out_dir / "summary.csv");
        write_ablation_csv(a, res.runs);
        write_summary_csv(s, res.runs);
    }
    std::map<FusionMode, double> mean(res.mean_across_seeds.begin(), res.mean_across_seeds.end());
    for (const auto& run : res.runs) {
        std::string line = fmt("       seed %llu:", static_cast<unsigned long long>(run.seed));
        for (const auto& s : run.table.summaries) line += fmt(" %s %.4f+-%.4f", to_string(s.mode).c_str(), s.mean, s.std);
        std::printf("%s\n", line.c_str());
    }
    const double both = mean[FusionMode::both], vc = mean[FusionMode::vc_only], vd = mean[FusionMode::vd_only];
    const std::size_t pairs = 2 * opts.identities * opts.images_per_id;
    const bool scale_ok = opts.seeds.size() == 3 && opts.folds == 10 && opts.identities >= 200 && pairs >= 4000;
    const bool ok = both >= vc && both >= vd && both >= 0.85 && scale_ok && secs < 1800.0;
    report(7, "ablation ordering", ok,
           fmt("mean over %zu seeds x %zu folds (%zu pairs): both %.4f, vc_only %.4f, vd_only %.4f, perceptual_raw %.4f; "
               "%.0fs",
               opts.seeds.size(), opts.folds, pairs, both, vc, vd, mean[FusionMode::perceptual_raw], secs));

    // Regression against the committed baseline summary.
    if (fs::exists(baseline_path)) {
        const Baseline b = read_baseline(baseline_path);
        double drift = 0.0;
        bool complete = true;
        for (const auto& [m, v] : res.mean_across_seeds) {
            const auto it = b.mean.find(to_string(m));
            if (it == b.mean.end()) {
                complete = false;
                continue;
            }
            drift = std::max(drift, std::abs(it->second - v));
        }
        std::printf("       baseline %s: max |mean - baseline| = %.4f (tolerance 0.02)%s\n",
                    complete && drift <= 0.02 ? "reproduced" : "DRIFTED", drift, complete ? "" : ", modes missing");
        if (!(complete && drift <= 0.02)) g_outcomes.push_back({7, "baseline regression", false, "drift"});
    } else {
        std::printf("       no committed baseline at %s; wrote %s\n", baseline_path.string().c_str(),
                    (out_dir / "summary.csv").string().c_str());
    }
    return res;
}

bool identity_disjoint_partition(const PairSet& set, const Folds& folds)
{
    std::vector<int> seen(set.pairs.size(), 0);
    std::map<int, std::size_t> owner;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (std::size_t p : folds[f]) {
            if (p >= set.pairs.size()) return false;
            ++seen[p];
            for (int id : {set.pairs[p].id_a, set.pairs[p].id_b}) {
                const auto [it, fresh] = owner.emplace(id, f);
                if (!fresh && it->second != f) return false;
            }
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

void protocol_integrity(const RunConfig& cfg, const BenchmarkResult& res)
{
    const BenchmarkOptions opts = cfg.benchmark();
    bool ok = !res.runs.empty();
    std::size_t checked = 0;
    for (const auto& run : res.runs) {
        Rng data_rng(derive_seed(run.seed, 1));
        const PairSet set = build_pair_set(opts.identities, opts.images_per_id, data_rng, opts.pair_options);
        Rng fold_rng(derive_seed(run.seed, 2));
        const Folds folds = kfold_split(set, opts.folds, fold_rng);
        ok = ok && folds.size() == opts.folds && identity_disjoint_partition(set, folds);
        ok = ok && fold_hash(folds) == run.table.fold_hash;
        ok = ok && run.table.mode_fold_hashes.size() == kAllModes.size();
        for (auto h : run.table.mode_fold_hashes) ok = ok && h == run.table.fold_hash;
        for (const auto& s : run.table.summaries) {
            for (std::size_t f = 0; f < s.folds.size(); ++f) ok = ok && s.folds[f].n_pairs == folds[f].size();
        }
        ++checked;
    }
    report(8, "protocol integrity", ok,
           fmt("%zu seeds: folds exhaustive, disjoint and identity-disjoint; %zu modes share one fold hash per seed", checked,
               kAllModes.size()));
}

VerifierModel freeze_contract(const RunConfig& cfg, const Extractors& ex)
{
    Rng data_rng(derive_seed(cfg.seed, 1));
    const PairSet set = build_pair_set(cfg.identities, cfg.images_per_id, data_rng, cfg.pair_options());
    std::vector<Tensor> images;
    for (const auto& im : set.images) images.push_back(im.pixels);

    const std::uint64_t ae_before = checksum(ex.ae.parameters());
    const std::uint64_t p_before = checksum(ex.perceptual.parameters());
    const auto features = extract_batch(images, ex.ae, ex.perceptual);
    std::vector<std::size_t> all(set.pairs.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const FusedDataset data = build_fused_dataset(set, features, all, cfg.mode, cfg.abs_diff);
    VerifierModel model(cfg.verifier(), derive_seed(cfg.seed, 30));
    const auto r = train_verifier(model, data, cfg.verifier_hyper());
    const std::uint64_t ae_after = checksum(ex.ae.parameters());
    const std::uint64_t p_after = checksum(ex.perceptual.parameters());
    const bool ok = ae_before == ae_after && p_before == p_after && ex.ae.frozen() && ex.perceptual.frozen();
    report(9, "freeze contract", ok,
           fmt("autoencoder %016llx/%016llx, perceptual %016llx/%016llx (before/after %zu verifier steps, train acc %.3f)",
               static_cast<unsigned long long>(ae_before), static_cast<unsigned long long>(ae_after),
               static_cast<unsigned long long>(p_before), static_cast<unsigned long long>(p_after),
               r.loss_history.size(), r.train_accuracy));
    return model;
}

void determinism_and_serialization(const RunConfig& cfg, const Extractors& ex, const VerifierModel& verifier,
                                   const fs::path& out_dir)
{
    const fs::path run = out_dir / "determinism";
    fs::remove_all(run);
    const cli::RunPaths paths = cli::RunPaths::under(run);
    fs::create_directories(run);

    // Checkpoint round-trip of every trained model.
    cli::save_autoencoder(paths.autoencoder, cfg, ex.ae);
    cli::save_perceptual(paths.perceptual, cfg, ex.perceptual);
    cli::save_verifier(paths.verifier, cfg, verifier);
    const AutoencoderModel ae2 = cli::load_autoencoder(paths.autoencoder, cfg);
    const PerceptualModel p2 = cli::load_perceptual(paths.perceptual, cfg);
    const VerifierModel v2 = cli::load_verifier(paths.verifier, cfg);
    Rng rng(derive_seed(cfg.seed, 42));
    const auto images = build_face_images(50, 5, cfg.image_size, rng);
    bool bitwise = true;
    for (std::size_t i = 0; i + 1 < images.size(); ++i) {
        const auto a = ex.ae.reconstruct(images[i]), b = ae2.reconstruct(images[i]);
        bitwise = bitwise && a.image == b.image && a.latent == b.latent;
        bitwise = bitwise && ex.perceptual.perceive(images[i]) == p2.perceive(images[i]);
        bitwise = bitwise && verify(verifier, ex.ae, ex.perceptual, images[i], images[i + 1]).score ==
                                 verify(v2, ae2, p2, images[i], images[i + 1]).score;
    }

    // Corruption anywhere after the magic must surface as a CRC mismatch.
    const auto bytes = read_file(paths.verifier.string());
    std::size_t detected = 0, trials = 0;
    for (std::size_t pos = 4; pos < bytes.size(); pos += 1 + bytes.size() / 257) {
        auto bad = bytes;
        bad[pos] ^= 0x10;
        ++trials;
        try {
            parse_checkpoint(bad);
        } catch (const CrcMismatchError&) {
            ++detected;
        }
    }

    // Same config and seed in deterministic mode: byte-identical summary.csv.
    RunConfig small = cfg;
    small.set("identities", "40");
    small.set("images_per_id", "4");
    small.set("folds", "4");
    small.set("eval_seeds", "1,2");
    small.set("verifier_steps", "300");
    small.deterministic = true;
    cli::cmd_gen_data(small, paths);
    cli::cmd_eval(small, paths);
    const std::string first = slurp(run / "summary.csv");
    fs::remove(run / "features.bin");
    fs::remove(run / "summary.csv");
    cli::cmd_eval(small, paths);
    const std::string second = slurp(run / "summary.csv");
    const bool identical = !first.empty() && first == second;

    report(10, "determinism and serialization", bitwise && detected == trials && identical,
           fmt("summary.csv %s across two runs (%zu bytes); checkpoint forward %s; CRC caught %zu/%zu corruptions",
               identical ? "byte-identical" : "DIFFERS", first.size(), bitwise ? "bit-exact" : "DIFFERS", detected, trials));
}

void interface_contracts(const RunConfig& cfg, const VerifierModel& verifier, const fs::path& out_dir)
{
    // predict stays strictly inside (0, 1), including far outside the training range.
    Rng rng(derive_seed(cfg.seed, 43));
    bool open_interval = true;
    std::size_t scored = 0;
    for (double scale : {1.0, 10.0, 1e3, 1e6}) {
        const Tensor rows = fusiform::testing::random_tensor<float>({500, cfg.verifier().input_width()}, rng, -scale, scale);
        const Tensor s = verifier.predict(rows);
        for (float v : s.data()) open_interval = open_interval && v > 0.0f && v < 1.0f;
        scored += s.size();
    }

    // preprocess lands in [0, 1] for arbitrary shapes and value ranges.
    bool unit = true;
    for (int t = 0; t < 100; ++t) {
        const std::size_t c = rng.uniform() < 0.5 ? 1 : 3;
        const Shape s{c, 8 + rng.index(80), 8 + rng.index(80)};
        const double lo = rng.uniform(-1000.0, 0.0), hi = rng.uniform(0.0, 1000.0);
        const Tensor out = preprocess(fusiform::testing::random_tensor<float>(s, rng, lo, hi), cfg.image_size);
        unit = unit && out.shape() == Shape{3, cfg.image_size, cfg.image_size};
        for (float v : out.data()) unit = unit && v >= 0.0f && v <= 1.0f;
    }

    // Paper-scale preset through config text and a checkpoint + inspect.
    const RunConfig paper = RunConfig::paper_scale();
    const RunConfig reparsed = RunConfig::parse(paper.serialize());
    const fs::path ck = out_dir / "paper_scale_verifier.fsfn";
    cli::save_verifier(ck, paper, VerifierModel(paper.verifier(), 1));
    const VerifierModel loaded = cli::load_verifier(ck, reparsed);
    std::ostringstream listing;
    cli::cmd_inspect(ck, listing);
    const std::string text = listing.str();
    const RunConfig from_ck = cli::parse_blob(load_checkpoint(ck.string()).config).config;
    fs::remove(ck);
    bool preset = reparsed.to_map() == paper.to_map() && from_ck.to_map() == paper.to_map();
    preset = preset && from_ck.image_size == 224 && from_ck.bottleneck_dim == 2048 &&
             from_ck.perceptual().feature_dim() == 2048 && from_ck.ae_batch == 600 && from_ck.verifier_batch == 600 &&
             from_ck.ae_steps == 80000 && from_ck.verifier_steps == 80000 && from_ck.ae_lr == 1e-4 &&
             from_ck.verifier_lr == 1e-4;
    preset = preset && loaded.config().vc_dim == 2048 && loaded.config().vd_dim == 2048;
    for (const char* key : {"image_size=224", "bottleneck_dim=2048", "ae_batch=600", "verifier_batch=600",
                            "ae_steps=80000", "verifier_steps=80000"}) {
        preset = preset && text.find(key) != std::string::npos;
    }

    report(11, "interface contracts", open_interval && unit && preset,
           fmt("%zu scores in (0,1): %s; preprocess in [0,1]: %s; paper-scale preset via config and inspect: %s", scored,
               open_interval ? "yes" : "no", unit ? "yes" : "no", preset ? "round-trips" : "MISMATCH"));
}

}  // namespace

int main(int argc, char** argv)
{
    const fs::path out_dir = "acceptance_out";
    fs::create_directories(out_dir);
    const fs::path baseline = argc > 1 ? fs::path(argv[1]) : fs::path();
    const auto t0 = Clock::now();

    gradient_integrity();
    pixel_loss_oracle();
    adjoint_property();

    const RunConfig cfg = RunConfig::toy();
    Extractors ex{autoencoder_convergence(cfg), pretrain(cfg)};
    deidentification(cfg, ex);
    vd_identity_case(cfg, ex);
    const BenchmarkResult bench = ablation_ordering(cfg, ex, out_dir, baseline);
    protocol_integrity(cfg, bench);
    const VerifierModel verifier = freeze_contract(cfg, ex);
    determinism_and_serialization(cfg, ex, verifier, out_dir);
    interface_contracts(cfg, verifier, out_dir);

    const auto failed = std::count_if(g_outcomes.begin(), g_outcomes.end(), [](const Outcome& o) { return !o.passed; });
    std::printf("acceptance: %zu checks, %td failed, %.0fs total\n", g_outcomes.size(), failed, seconds_since(t0));
    return failed == 0 ? 0 : 1;
}
