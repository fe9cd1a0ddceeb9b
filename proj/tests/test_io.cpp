#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"
#include "fusiform/checkpoint.hpp"
#include "fusiform/config.hpp"
#include "fusiform/pnm.hpp"
#include "model_io.hpp"
#include "test_util.hpp"

using namespace fusiform;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
    {
        path = fs::temp_directory_path() / ("fusiform_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run_cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "fusiform");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<Parameter> sample_tensors()
{
    Rng rng(1);
    std::vector<Parameter> out;
    out.emplace_back("a.weight", fusiform::testing::random_tensor<float>({2, 3, 3, 3}, rng));
    out.emplace_back("a.bias", fusiform::testing::random_tensor<float>({2}, rng));
    out.emplace_back("scalar", Tensor(Shape{1}, 0.25f));
    return out;
}

}  // namespace

TEST_CASE("config: serialize/parse round-trips every key")
{
    RunConfig c = RunConfig::toy();
    c.seed = 99;
    c.set("mode", "vd_only");
    c.set("eval_seeds", "4,5");
    c.set("ae_lr", "0.00025");
    const RunConfig back = RunConfig::parse(c.serialize());
    CHECK(back.to_map() == c.to_map());
    CHECK(back.serialize() == c.serialize());
}

TEST_CASE("config: paper-scale preset carries the full-size hyper-parameters")
{
    const RunConfig p = RunConfig::paper_scale();
    CHECK(p.image_size == 224);
    CHECK(p.bottleneck_dim == 2048);
    CHECK(p.perceptual().feature_dim() == 2048);
    CHECK(p.ae_batch == 600);
    CHECK(p.verifier_batch == 600);
    CHECK(p.ae_steps == 80000);
    CHECK(p.verifier_steps == 80000);
    CHECK(p.ae_lr == 1e-4);
    CHECK(p.verifier_lr == 1e-4);
    CHECK(p.autoencoder_hyper().adam.alpha == 1e-4);
    const RunConfig back = RunConfig::parse(p.serialize());
    CHECK(back.to_map() == p.to_map());
    CHECK(RunConfig::from_preset("paper-scale").to_map() == p.to_map());
}

TEST_CASE("config: bad keys and values raise ConfigError")
{
    RunConfig c;
    CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(c.set("ae_steps", "many"), ConfigError);
    CHECK_THROWS_AS(c.set("mode", "sideways"), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("seed 3\n"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_preset("huge"), ConfigError);
    CHECK(RunConfig::parse("# comment\n\nseed=7\n").seed == 7);
}

TEST_CASE("checkpoint: round-trip is bit-exact")
{
    const auto tensors = sample_tensors();
    const auto bytes = serialize_checkpoint("k=v\n", tensors);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "FSFN");
    const Checkpoint ck = parse_checkpoint(bytes);
    CHECK(ck.version == kCheckpointVersion);
    CHECK(ck.config == "k=v\n");
    REQUIRE(ck.tensors.size() == tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        CHECK(ck.tensors[i].name == tensors[i].name);
        CHECK(ck.tensors[i].value == tensors[i].value);
    }
    CHECK(ck.tensor("a.bias").value == tensors[1].value);
    CHECK_THROWS(ck.tensor("missing"));
    CHECK(serialize_checkpoint(ck.config, ck.tensors) == bytes);
}

TEST_CASE("checkpoint: every single-byte corruption is detected")
{
    const auto bytes = serialize_checkpoint("x=1\n", sample_tensors());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        auto bad = bytes;
        bad[i] ^= 0x40;
        // The magic is checked first; everything after it is covered by the CRC.
        if (i < 4) {
            CHECK_THROWS_AS(parse_checkpoint(bad), CheckpointFormatError);
        } else {
            CHECK_THROWS_AS(parse_checkpoint(bad), CrcMismatchError);
        }
    }
}

TEST_CASE("checkpoint: truncation, bad magic and version are format errors")
{
    const auto bytes = serialize_checkpoint("", sample_tensors());
    CHECK_THROWS_AS(parse_checkpoint(std::span(bytes).first(3)), CheckpointFormatError);
    // Longer truncations lose the trailing checksum.
    CHECK_THROWS_AS(parse_checkpoint(std::span(bytes).first(bytes.size() / 2)), CrcMismatchError);

    // A re-signed file with the wrong magic or version still fails on format.
    auto resign = [](std::vector<std::uint8_t> b) {
        b.resize(b.size() - 4);
        const std::uint32_t crc = crc32_of(b);
        for (int k = 0; k < 4; ++k) b.push_back(static_cast<std::uint8_t>(crc >> (8 * k)));
        return b;
    };
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(parse_checkpoint(resign(magic)), CheckpointFormatError);
    auto version = bytes;
    version[4] = 9;
    CHECK_THROWS_AS(parse_checkpoint(resign(version)), CheckpointFormatError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/file.fsfn"), MissingFileError);
}

TEST_CASE("checkpoint: crc32 matches the standard check value")
{
    const std::string s = "123456789";
    CHECK(crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) == 0xCBF43926u);
}

TEST_CASE("model checkpoints reproduce forward outputs bit for bit")
{
    TempDir dir("models");
    RunConfig cfg = RunConfig::toy();
    cfg.set("image_size", "16");
    cfg.set("ae_channels", "8,16");
    cfg.set("bottleneck_dim", "12");
    cfg.set("perceptual_channels", "8,12");
    cfg.set("perceptual_strides", "2,2");
    cfg.set("verifier_hidden", "8");

    AutoencoderModel ae(cfg.autoencoder(), 1);
    ae.set_frozen(true);
    PerceptualModel p(cfg.perceptual(), 2);
    VerifierModel v(cfg.verifier(), 3);
    cli::save_autoencoder(dir.path / "ae.fsfn", cfg, ae);
    cli::save_perceptual(dir.path / "p.fsfn", cfg, p);
    cli::save_verifier(dir.path / "v.fsfn", cfg, v);

    const AutoencoderModel ae2 = cli::load_autoencoder(dir.path / "ae.fsfn", cfg);
    const PerceptualModel p2 = cli::load_perceptual(dir.path / "p.fsfn", cfg);
    const VerifierModel v2 = cli::load_verifier(dir.path / "v.fsfn", cfg);
    CHECK(p2.provenance() == Provenance::random_frozen);

    Rng rng(4);
    for (const auto& img : build_face_images(4, 2, 16, rng)) {
        CHECK(ae2.reconstruct(img).image == ae.reconstruct(img).image);
        CHECK(p2.perceive(img) == p.perceive(img));
        CHECK(verify(v2, ae2, p2, img, img).score == verify(v, ae, p, img, img).score);
    }

    RunConfig other = cfg;
    other.set("bottleneck_dim", "10");
    CHECK_THROWS_AS(cli::load_autoencoder(dir.path / "ae.fsfn", other), CompatibilityError);
    CHECK_THROWS_AS(cli::load_perceptual(dir.path / "ae.fsfn", cfg), CompatibilityError);
}

TEST_CASE("pnm: write/read round-trip")
{
    TempDir dir("pnm");
    Tensor img(Shape{3, 5, 4});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i % 256) / 255.0f;
    write_pnm((dir.path / "a.ppm").string(), img);
    const Tensor back = read_pnm((dir.path / "a.ppm").string());
    CHECK(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(back[i] == static_cast<float>(i % 256));

    std::ofstream(dir.path / "g.pgm") << "P2\n# grey\n2 2\n15\n0 5 10 15\n";
    const Tensor grey = read_pnm((dir.path / "g.pgm").string());
    CHECK(grey.shape() == Shape{1, 2, 2});
    CHECK(grey[3] == 15.0f);
    CHECK_THROWS(read_pnm((dir.path / "missing.ppm").string()));
}

TEST_CASE("cli: exit codes for usage, missing, corrupt and incompatible inputs")
{
    TempDir dir("cli_codes");
    const std::string out = (dir.path / "run").string();
    CHECK(run_cli({}) == cli::kExitUsage);
    CHECK(run_cli({"frobnicate"}) == cli::kExitUsage);
    CHECK(run_cli({"eval", "--out", out, "--set", "bogus=1"}) == cli::kExitUsage);
    CHECK(run_cli({"inspect", (dir.path / "nothing.fsfn").string()}) == cli::kExitMissingFile);
    CHECK(run_cli({"train-verifier", "--out", out}) == cli::kExitMissingFile);

    const auto bytes = serialize_checkpoint("seed=1\n", sample_tensors());
    auto bad = bytes;
    bad[bytes.size() / 2] ^= 1;
    write_file((dir.path / "bad.fsfn").string(), bad);
    CHECK(run_cli({"inspect", (dir.path / "bad.fsfn").string()}) == cli::kExitCrc);
    write_file((dir.path / "short.fsfn").string(), std::span(bytes).first(2));
    CHECK(run_cli({"inspect", (dir.path / "short.fsfn").string()}) == cli::kExitFormat);
    write_file((dir.path / "good.fsfn").string(), bytes);
    CHECK(run_cli({"inspect", (dir.path / "good.fsfn").string()}) == cli::kExitOk);
}

TEST_CASE("cli: tiny end-to-end pipeline is deterministic")
{
    TempDir dir("cli_e2e");
    const fs::path cfg = dir.path / "tiny.cfg";
    std::ofstream(cfg) << "seed=5\nimage_size=16\nae_channels=8,16\nbottleneck_dim=12\n"
                          "perceptual_channels=8,12\nperceptual_strides=2,2\nverifier_hidden=8\n"
                          "ae_images=32\nae_steps=5\nae_batch=8\nproxy_images=60\nproxy_steps=5\nproxy_batch=8\n"
                          "verifier_steps=10\nverifier_batch=8\nidentities=12\nimages_per_id=2\n"
                          "identity_blocks=6\nfolds=3\neval_seeds=1,2\n";
    const std::string out = (dir.path / "run").string();
    const std::vector<std::string> common{"--config", cfg.string(), "--out", out};
    auto with = [&](std::string cmd, std::vector<std::string> extra = {}) {
        std::vector<std::string> args{std::move(cmd)};
        args.insert(args.end(), common.begin(), common.end());
        args.insert(args.end(), extra.begin(), extra.end());
        return run_cli(args);
    };
    REQUIRE(with("gen-data") == cli::kExitOk);
    REQUIRE(with("train-ae") == cli::kExitOk);
    REQUIRE(with("pretrain-perceptual") == cli::kExitOk);
    REQUIRE(with("train-verifier") == cli::kExitOk);
    REQUIRE(with("extract") == cli::kExitOk);
    REQUIRE(with("eval", {"--deterministic"}) == cli::kExitOk);
    const std::string first = slurp(fs::path(out) / "summary.csv");
    REQUIRE(with("eval", {"--deterministic"}) == cli::kExitOk);
    CHECK(slurp(fs::path(out) / "summary.csv") == first);
    CHECK(first.rfind("seed,mode,mean,std\n", 0) == 0);
    CHECK(fs::exists(fs::path(out) / "ablation.csv"));
    CHECK(fs::exists(fs::path(out) / "features.bin"));
    CHECK(run_cli({"inspect", (fs::path(out) / "verifier.fsfn").string()}) == cli::kExitOk);
    CHECK(with("eval", {"--set", "bottleneck_dim=10"}) == cli::kExitIncompatible);
}
