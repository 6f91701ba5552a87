#include "nde/archive.hpp"

#include "nde/errors.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace nde {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'N', 'D', 'E', 'A', 'R', 'C', 'H', '\0'};

DType dtype_from_name(const std::string& s) {
    if (s == "f32") return DType::F32;
    if (s == "f64") return DType::F64;
    if (s == "i64") return DType::I64;
    if (s == "u8") return DType::U8;
    throw CheckpointError("unknown dtype '" + s + "'");
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CheckpointError("truncated archive header");
    return v;
}

}  // namespace

const char* dtype_name(DType t) {
    switch (t) {
        case DType::F32: return "f32";
        case DType::F64: return "f64";
        case DType::I64: return "i64";
        default: return "u8";
    }
}

std::size_t dtype_size(DType t) {
    switch (t) {
        case DType::F32: return 4;
        case DType::F64: return 8;
        case DType::I64: return 8;
        default: return 1;
    }
}

std::int64_t NamedArray::numel() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void Archive::put(const std::string& name, NamedArray array) {
    if (name.empty()) throw CheckpointError("array name must not be empty");
    if (static_cast<std::size_t>(array.numel()) * dtype_size(array.dtype) != array.bytes.size()) {
        throw CheckpointError("array '" + name + "': byte count does not match shape");
    }
    arrays_[name] = std::move(array);
}

void Archive::put_f32(const std::string& name, std::vector<std::int64_t> shape, std::span<const float> values) {
    NamedArray a;
    a.dtype = DType::F32;
    a.shape = std::move(shape);
    a.bytes.resize(values.size_bytes());
    std::memcpy(a.bytes.data(), values.data(), values.size_bytes());
    put(name, std::move(a));
}

void Archive::put_bytes(const std::string& name, std::span<const std::byte> bytes) {
    NamedArray a;
    a.dtype = DType::U8;
    a.shape = {static_cast<std::int64_t>(bytes.size())};
    a.bytes.assign(bytes.begin(), bytes.end());
    put(name, std::move(a));
}

const NamedArray& Archive::at(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw CheckpointError("archive has no array '" + name + "'");
    return it->second;
}

std::vector<std::string> Archive::names(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = arrays_.lower_bound(prefix); it != arrays_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.push_back(it->first);
    }
    return out;
}

bool Archive::has_scope(const std::string& scope) const {
    return !names(scope + "/").empty();
}

void Archive::save(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["meta"] = meta;
    nlohmann::json table = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, a] : arrays_) {
        table.push_back({{"name", name},
                         {"dtype", dtype_name(a.dtype)},
                         {"shape", a.shape},
                         {"offset", offset},
                         {"nbytes", a.bytes.size()}});
        offset += a.bytes.size();
    }
    header["arrays"] = std::move(table);
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    // Write to a sibling file first so a crash never leaves a torn archive.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot write archive " + path.string());
        os.write(kMagic.data(), kMagic.size());
        write_pod<std::uint32_t>(os, kArchiveVersion);
        write_pod<std::uint32_t>(os, 0);
        write_pod<std::uint64_t>(os, text.size());
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& [name, a] : arrays_) {
            os.write(reinterpret_cast<const char*>(a.bytes.data()), static_cast<std::streamsize>(a.bytes.size()));
        }
        if (!os) throw IoError("failed writing archive " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read archive " + path.string());
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw CheckpointError(path.string() + " is not an nde archive");
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kArchiveVersion) {
        throw CheckpointError("unsupported archive version " + std::to_string(version));
    }
    read_pod<std::uint32_t>(is);
    const auto header_len = read_pod<std::uint64_t>(is);
    std::string text(header_len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!is) throw CheckpointError("truncated archive header");

    Archive ar;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        ar.meta = header.value("meta", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("corrupt archive header: ") + e.what());
    }
    const auto payload_start = is.tellg();
    try {
        for (const auto& entry : header.at("arrays")) {
            NamedArray a;
            a.dtype = dtype_from_name(entry.at("dtype").get<std::string>());
            a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
            const auto offset = entry.at("offset").get<std::uint64_t>();
            const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
            a.bytes.resize(nbytes);
            is.seekg(payload_start + static_cast<std::streamoff>(offset));
            is.read(reinterpret_cast<char*>(a.bytes.data()), static_cast<std::streamsize>(nbytes));
            if (!is) throw CheckpointError("truncated archive payload");
            ar.put(entry.at("name").get<std::string>(), std::move(a));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("corrupt archive table: ") + e.what());
    }
    return ar;
}

}  // namespace nde
