#include "syncmatrix/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "syncmatrix/errors.hpp"

namespace syncmatrix {

namespace {
constexpr char kMagic[8] = {'S', 'Y', 'N', 'C', 'C', 'K', 'P', 'T'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
}

float read_f32(std::istream& is) {
    std::uint32_t bits = read_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}
}  // namespace

void Checkpoint::put(const std::string& name, const Tensor& t) {
    entries_[name] = t.clone();
}

void Checkpoint::put_vector(const std::string& name, const std::vector<double>& v) {
    entries_[name] = Tensor(Shape{v.size()}, v);
}

bool Checkpoint::contains(const std::string& name) const {
    return entries_.count(name) != 0;
}

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError("checkpoint: missing tensor '" + name + "'");
    return it->second;
}

std::vector<double> Checkpoint::get_vector(const std::string& name) const {
    return get(name).values();
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 8);
    write_u32(os, kVersion);
    for (const auto& [name, t] : entries_) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.ndim()));
        for (std::size_t d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
        for (double v : t.values()) write_f32(os, static_cast<float>(v));
    }
    if (!os) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("checkpoint: bad magic in '" + path + "'");
    const std::uint32_t version = read_u32(is);
    if (version != kVersion) throw IoError("checkpoint: unsupported version");
    Checkpoint ckpt;
    while (true) {
        is.peek();
        if (is.eof()) break;
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw IoError("checkpoint: truncated name");
        const std::uint32_t rank = read_u32(is);
        Shape shape(rank);
        for (std::uint32_t i = 0; i < rank; ++i) shape[i] = read_u32(is);
        std::vector<double> values(shape_numel(shape));
        for (double& v : values) v = static_cast<double>(read_f32(is));
        ckpt.entries_[name] = Tensor(std::move(shape), std::move(values));
    }
    return ckpt;
}

}  // namespace syncmatrix
