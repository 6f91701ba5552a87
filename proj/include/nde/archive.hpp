#pragma once

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace nde {

enum class DType : std::uint8_t { F32, F64, I64, U8 };

const char* dtype_name(DType t);
std::size_t dtype_size(DType t);

struct NamedArray {
    DType dtype = DType::F32;
    std::vector<std::int64_t> shape;
    std::vector<std::byte> bytes;

    std::int64_t numel() const;
};

/// Versioned archive of named numeric arrays plus a JSON metadata block.
///
/// On-disk layout (all integers little-endian):
///   8 bytes   magic "NDEARCH\0"
///   u32       format version (kArchiveVersion)
///   u32       reserved (0)
///   u64       header length N
///   N bytes   UTF-8 JSON: {"meta": {...}, "arrays": [{"name", "dtype",
///             "shape", "offset", "nbytes"}, ...]}
///   payload   raw array bytes; offsets are relative to the payload start
///
/// Array names use '/' to separate scopes ("decomposition/enc0.conv1.weight").
class Archive {
public:
    static constexpr std::uint32_t kArchiveVersion = 1;

    nlohmann::json meta = nlohmann::json::object();

    void put(const std::string& name, NamedArray array);
    void put_f32(const std::string& name, std::vector<std::int64_t> shape, std::span<const float> values);
    void put_bytes(const std::string& name, std::span<const std::byte> bytes);

    bool contains(const std::string& name) const { return arrays_.count(name) != 0; }
    const NamedArray& at(const std::string& name) const;
    std::vector<std::string> names(const std::string& prefix = {}) const;
    bool has_scope(const std::string& scope) const;
    std::size_t size() const { return arrays_.size(); }

    void save(const std::filesystem::path& path) const;
    static Archive load(const std::filesystem::path& path);

private:
    std::map<std::string, NamedArray> arrays_;
};

}  // namespace nde
