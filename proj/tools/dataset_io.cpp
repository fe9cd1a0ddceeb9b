#include "dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "fusiform/checkpoint.hpp"
#include "fusiform/pnm.hpp"

namespace fusiform::cli {

namespace fs = std::filesystem;

namespace {

std::string image_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.fsfn", i);
    return buf;
}

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_tabs(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream in(line);
    std::string field;
    while (std::getline(in, field, '\t')) out.push_back(field);
    return out;
}

std::ifstream open_in(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) throw MissingFileError("missing file '" + p.string() + "'");
    return in;
}

std::size_t record_bytes(const std::string& name, const Tensor& t)
{
    return 4 + name.size() + 4 + 4 * t.rank() + 4 * t.size();
}

}  // namespace

void save_pair_set(const PairSet& set, const fs::path& dir)
{
    fs::create_directories(dir / "images");
    std::ofstream index(dir / "index.tsv");
    index << "id\tfile\tshift_x_px\tshift_y_px\tscale\tbrightness\tlight_angle\tbg_r\tbg_g\tbg_b\n";
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        const FaceImage& im = set.images[i];
        const std::string file = "images/" + image_name(i);
        const std::vector<Parameter> tensors{Parameter("pixels", im.pixels)};
        save_checkpoint((dir / file).string(), "id=" + std::to_string(im.identity) + "\n", tensors);
        const Nuisance& n = im.nuisance;
        index << im.identity << '\t' << file << '\t' << num(n.shift_x_px) << '\t' << num(n.shift_y_px) << '\t'
              << num(n.scale) << '\t' << num(n.brightness) << '\t' << num(n.light_angle) << '\t'
              << num(n.background[0]) << '\t' << num(n.background[1]) << '\t' << num(n.background[2]) << '\n';
    }
    std::ofstream pairs(dir / "pairs.tsv");
    pairs << "image_a\timage_b\tlabel\tid_a\tid_b\n";
    for (const auto& p : set.pairs) {
        pairs << p.image_a << '\t' << p.image_b << '\t' << p.label << '\t' << p.id_a << '\t' << p.id_b << '\n';
    }
    if (!index || !pairs) throw std::runtime_error("failed to write dataset manifest in '" + dir.string() + "'");
}

PairSet load_pair_set(const fs::path& dir)
{
    PairSet set;
    auto index = open_in(dir / "index.tsv");
    std::string line;
    std::getline(index, line);  // header
    while (std::getline(index, line)) {
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 10) throw CheckpointFormatError("malformed index.tsv line: " + line);
        FaceImage im;
        im.identity = std::stoi(f[0]);
        im.nuisance.shift_x_px = std::stod(f[2]);
        im.nuisance.shift_y_px = std::stod(f[3]);
        im.nuisance.scale = std::stod(f[4]);
        im.nuisance.brightness = std::stod(f[5]);
        im.nuisance.light_angle = std::stod(f[6]);
        im.nuisance.background = {std::stod(f[7]), std::stod(f[8]), std::stod(f[9])};
        im.pixels = load_checkpoint((dir / f[1]).string()).tensor("pixels").value;
        set.images.push_back(std::move(im));
    }
    auto pairs = open_in(dir / "pairs.tsv");
    std::getline(pairs, line);
    while (std::getline(pairs, line)) {
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 5) throw CheckpointFormatError("malformed pairs.tsv line: " + line);
        LabeledPair p;
        p.image_a = std::stoul(f[0]);
        p.image_b = std::stoul(f[1]);
        p.label = std::stoi(f[2]);
        p.id_a = std::stoi(f[3]);
        p.id_b = std::stoi(f[4]);
        if (p.image_a >= set.images.size() || p.image_b >= set.images.size()) {
            throw CheckpointFormatError("pairs.tsv references a missing image: " + line);
        }
        set.pairs.push_back(p);
    }
    return set;
}

PairSet import_image_tree(const fs::path& root, std::size_t size, Rng& rng, std::size_t blocks)
{
    if (!fs::is_directory(root)) throw MissingFileError("import directory '" + root.string() + "' not found");
    std::vector<fs::path> identities;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) identities.push_back(e.path());
    }
    std::sort(identities.begin(), identities.end());

    PairSet set;
    for (std::size_t id = 0; id < identities.size(); ++id) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(identities[id])) {
            const auto ext = e.path().extension().string();
            if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm" || ext == ".pnm")) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            FaceImage im;
            im.identity = static_cast<int>(id);
            im.pixels = preprocess(read_pnm(f.string()), size);
            set.images.push_back(std::move(im));
        }
    }
    pair_images(set, rng, blocks);
    return set;
}

void save_features(const fs::path& dir, const PairSet& set, std::span<const FeatureRecord> records)
{
    if (records.size() != set.images.size()) throw UsageError("save_features: one record per image is required");
    fs::create_directories(dir);
    std::vector<Parameter> tensors;
    tensors.reserve(3 * records.size());
    const std::string blob = "records=" + std::to_string(records.size()) + "\n";
    std::size_t offset = 4 + 4 + 4 + blob.size() + 4;

    std::ofstream tsv(dir / "features.tsv");
    tsv << "image\tid\toffset\tvc_dim\tvd_dim\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        tsv << i << '\t' << set.images[i].identity << '\t' << offset << '\t' << records[i].bundle.vc.size() << '\t'
            << records[i].bundle.vd.size() << '\n';
        const std::string id = std::to_string(i);
        tensors.emplace_back("vc/" + id, records[i].bundle.vc);
        tensors.emplace_back("vd/" + id, records[i].bundle.vd);
        tensors.emplace_back("raw/" + id, records[i].raw);
        for (std::size_t k = tensors.size() - 3; k < tensors.size(); ++k) {
            offset += record_bytes(tensors[k].name, tensors[k].value);
        }
    }
    save_checkpoint((dir / "features.bin").string(), blob, tensors);
}

std::vector<FeatureRecord> load_features(const fs::path& dir)
{
    const Checkpoint ck = load_checkpoint((dir / "features.bin").string());
    if (ck.tensors.size() % 3 != 0) throw CheckpointFormatError("features.bin does not hold whole records");
    std::vector<FeatureRecord> out(ck.tensors.size() / 3);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::string id = std::to_string(i);
        const Parameter* t = &ck.tensors[3 * i];
        if (t[0].name != "vc/" + id || t[1].name != "vd/" + id || t[2].name != "raw/" + id) {
            throw CheckpointFormatError("features.bin record " + id + " is out of order");
        }
        out[i].bundle.vc = t[0].value;
        out[i].bundle.vd = t[1].value;
        out[i].raw = t[2].value;
    }
    return out;
}

}  // namespace fusiform::cli
