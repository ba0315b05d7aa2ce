#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

/// Named tensor table backed by the shared binary container: magic "SYNCCKPT",
/// version u32, then per entry (name-length u32, utf-8 name, rank u32,
/// dims u32[rank], little-endian f32 payload). Entries are written in name
/// order so identical contents produce identical bytes.
class Checkpoint {
public:
    void put(const std::string& name, const Tensor& t);
    /// Stores a plain vector as a rank-1 tensor.
    void put_vector(const std::string& name, const std::vector<double>& v);

    bool contains(const std::string& name) const;
    /// Fetches an entry; throws IoError if missing.
    const Tensor& get(const std::string& name) const;
    std::vector<double> get_vector(const std::string& name) const;

    const std::map<std::string, Tensor>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    static constexpr std::uint32_t kVersion = 1;

private:
    std::map<std::string, Tensor> entries_;
};

}  // namespace syncmatrix
