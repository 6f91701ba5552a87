#include "nde/checkpoint.hpp"

#include "nde/errors.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cstring>
#include <sstream>

namespace nde {

namespace {

DType dtype_of(const torch::Tensor& t) {
    switch (t.scalar_type()) {
        case torch::kFloat32: return DType::F32;
        case torch::kFloat64: return DType::F64;
        case torch::kInt64: return DType::I64;
        case torch::kUInt8: return DType::U8;
        default: throw CheckpointError("unsupported tensor dtype for archiving");
    }
}

torch::Dtype torch_dtype(DType t) {
    switch (t) {
        case DType::F32: return torch::kFloat32;
        case DType::F64: return torch::kFloat64;
        case DType::I64: return torch::kInt64;
        default: return torch::kUInt8;
    }
}

NamedArray to_array(const torch::Tensor& t) {
    const auto c = t.detach().to(torch::kCPU).contiguous();
    NamedArray a;
    a.dtype = dtype_of(c);
    a.shape.assign(c.sizes().begin(), c.sizes().end());
    a.bytes.resize(static_cast<std::size_t>(c.numel()) * c.element_size());
    if (!a.bytes.empty()) std::memcpy(a.bytes.data(), c.data_ptr(), a.bytes.size());
    return a;
}

torch::Tensor from_array(const NamedArray& a) {
    auto t = torch::empty(a.shape, torch::TensorOptions().dtype(torch_dtype(a.dtype)));
    if (!a.bytes.empty()) std::memcpy(t.data_ptr(), a.bytes.data(), a.bytes.size());
    return t;
}

template <typename Fn>
void for_each_tensor(torch::nn::Module& module, Fn&& fn) {
    for (auto& item : module.named_parameters(true)) fn(item.key(), item.value());
    for (auto& item : module.named_buffers(true)) fn(item.key(), item.value());
}

}  // namespace

void store_module(Archive& ar, const std::string& scope, torch::nn::Module& module) {
    for_each_tensor(module, [&](const std::string& name, const torch::Tensor& t) {
        ar.put(scope + "/" + name, to_array(t));
    });
}

void load_module(const Archive& ar, const std::string& scope, torch::nn::Module& module, bool strict) {
    if (!ar.has_scope(scope)) {
        throw CheckpointError("checkpoint has no '" + scope + "' scope");
    }
    torch::NoGradGuard guard;
    for_each_tensor(module, [&](const std::string& name, torch::Tensor& t) {
        const std::string key = scope + "/" + name;
        if (!ar.contains(key)) {
            if (strict) throw CheckpointError("checkpoint is missing '" + key + "'");
            return;
        }
        const auto src = from_array(ar.at(key));
        if (src.sizes() != t.sizes()) {
            throw CheckpointError("shape mismatch for '" + key + "'");
        }
        t.copy_(src.to(t.dtype()));
    });
}

std::string module_digest(torch::nn::Module& module) {
    std::string text;
    std::vector<std::pair<std::string, NamedArray>> items;
    for_each_tensor(module, [&](const std::string& name, const torch::Tensor& t) { items.emplace_back(name, to_array(t)); });
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [name, a] : items) {
        text += name;
        text.push_back('\0');
        text.append(reinterpret_cast<const char*>(a.bytes.data()), a.bytes.size());
    }
    return fnv1a_hex(text);
}

void store_optimizer(Archive& ar, torch::optim::Optimizer& opt) {
    torch::serialize::OutputArchive out;
    opt.save(out);
    std::ostringstream os;
    out.save_to(os);
    const std::string blob = os.str();
    ar.put_bytes("optimizer/torch_archive",
                 std::span<const std::byte>(reinterpret_cast<const std::byte*>(blob.data()), blob.size()));
}

void load_optimizer(const Archive& ar, torch::optim::Optimizer& opt) {
    const auto& a = ar.at("optimizer/torch_archive");
    std::istringstream is(std::string(reinterpret_cast<const char*>(a.bytes.data()), a.bytes.size()));
    torch::serialize::InputArchive in;
    in.load_from(is);
    opt.load(in);
}

void store_rng(Archive& ar, const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    ar.meta["rng_sampler"] = os.str();
    auto state = torch::globalContext().defaultGenerator(torch::kCPU).get_state();
    ar.put("rng/torch_cpu", to_array(state));
}

void load_rng(const Archive& ar, std::mt19937_64& rng) {
    if (!ar.meta.contains("rng_sampler")) throw CheckpointError("checkpoint has no sampler RNG state");
    std::istringstream is(ar.meta.at("rng_sampler").get<std::string>());
    is >> rng;
    if (!is) throw CheckpointError("corrupt sampler RNG state");
    if (ar.contains("rng/torch_cpu")) {
        auto gen = torch::globalContext().defaultGenerator(torch::kCPU);
        std::lock_guard<std::mutex> lock(gen.mutex());
        gen.set_state(from_array(ar.at("rng/torch_cpu")));
    }
}

void write_info(Archive& ar, const CheckpointInfo& info) {
    ar.meta["stage"] = info.stage;
    ar.meta["step"] = info.step;
    ar.meta["epoch"] = info.epoch;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : info.config.to_kv()) cfg[k] = v;
    ar.meta["config"] = std::move(cfg);
    ar.meta["config_hash"] = info.config.hash();
}

CheckpointInfo read_info(const Archive& ar) {
    CheckpointInfo info;
    try {
        info.stage = ar.meta.at("stage").get<std::string>();
        info.step = ar.meta.value("step", 0);
        info.epoch = ar.meta.value("epoch", 0);
        for (const auto& [k, v] : ar.meta.at("config").items()) info.config.set(k, v.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("checkpoint metadata is incomplete: ") + e.what());
    }
    return info;
}

}  // namespace nde
