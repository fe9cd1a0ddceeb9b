#include "fusiform/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace fusiform {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'F', 'N'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t checked_u32(std::size_t v, const char* what)
{
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        throw CheckpointFormatError(std::string("checkpoint ") + what + " exceeds 32 bits");
    }
    return static_cast<std::uint32_t>(v);
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    float f32()
    {
        const std::uint32_t bits = u32();
        return std::bit_cast<float>(bits);
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) throw CheckpointFormatError("checkpoint is truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
        crc = crc32(crc, bytes.data() + pos, chunk);
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

const Parameter& Checkpoint::tensor(const std::string& name) const
{
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw CompatibilityError("checkpoint has no tensor named '" + name + "'");
}

std::vector<std::uint8_t> serialize_checkpoint(const std::string& config, std::span<const Parameter> tensors)
{
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, checked_u32(config.size(), "config"));
    out.insert(out.end(), config.begin(), config.end());
    put_u32(out, checked_u32(tensors.size(), "tensor count"));
    for (const auto& t : tensors) {
        put_u32(out, checked_u32(t.name.size(), "name"));
        out.insert(out.end(), t.name.begin(), t.name.end());
        put_u32(out, checked_u32(t.value.rank(), "rank"));
        for (std::size_t d : t.value.shape()) put_u32(out, checked_u32(d, "dim"));
        for (float v : t.value.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    put_u32(out, crc32_of(out));
    return out;
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4 + 4 + 4) throw CheckpointFormatError("checkpoint is truncated");
    if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw CheckpointFormatError("not a checkpoint (bad magic)");

    const auto payload = bytes.first(bytes.size() - 4);
    Reader tail(bytes.last(4));
    const std::uint32_t stored = tail.u32();
    const std::uint32_t actual = crc32_of(payload);
    if (stored != actual) throw CrcMismatchError("checkpoint CRC mismatch: file is corrupted");

    Reader r(payload.subspan(4));
    Checkpoint ck;
    ck.version = r.u32();
    if (ck.version != kCheckpointVersion) {
        throw CheckpointFormatError("unsupported checkpoint version " + std::to_string(ck.version));
    }
    ck.config = r.str(r.u32());
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str(r.u32());
        const std::uint32_t rank = r.u32();
        if (rank == 0 || rank > 8) throw CheckpointFormatError("tensor '" + name + "' has invalid rank");
        Shape shape;
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape.push_back(r.u32());
            numel *= shape.back();
        }
        if (numel == 0 || numel > r.remaining() / 4) throw CheckpointFormatError("tensor '" + name + "' is truncated");
        std::vector<float> data(numel);
        for (auto& v : data) v = r.f32();
        ck.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (r.remaining() != 0) throw CheckpointFormatError("trailing bytes after tensor table");
    return ck;
}

std::vector<std::uint8_t> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("cannot open '" + path + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void save_checkpoint(const std::string& path, const std::string& config, std::span<const Parameter> tensors)
{
    write_file(path, serialize_checkpoint(config, tensors));
}

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path)); }

}  // namespace fusiform
