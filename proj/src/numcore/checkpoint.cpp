#include "fraudfuse/numcore/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fraudfuse/errors.hpp"

namespace fraudfuse::nc {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const nlohmann::json& meta) {
    nlohmann::json manifest;
    manifest["format"] = kCheckpointMagic;
    manifest["meta"] = meta;
    manifest["tensors"] = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& p : params.all()) {
        manifest["tensors"].push_back({{"name", p.name},
                                       {"shape", p.tensor.shape()},
                                       {"offset", offset},
                                       {"count", p.tensor.size()}});
        offset += p.tensor.size();
    }
    const std::string text = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path.string());
    out.write(kCheckpointMagic, 5);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : params.all()) {
        out.write(reinterpret_cast<const char*>(p.tensor.data().data()),
                  static_cast<std::streamsize>(p.tensor.size() * sizeof(double)));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kCheckpointMagic, 5) != 0) {
        throw DataError("not a CFCK1 checkpoint: " + path.string());
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len > (1ULL << 30)) throw DataError("corrupt checkpoint manifest length");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("truncated checkpoint manifest");

    Checkpoint ckpt;
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint manifest: ") + e.what());
    }
    ckpt.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& t : manifest.at("tensors")) {
        CheckpointEntry e;
        e.name = t.at("name").get<std::string>();
        e.shape = t.at("shape").get<std::vector<std::size_t>>();
        e.values.resize(t.at("count").get<std::size_t>());
        in.read(reinterpret_cast<char*>(e.values.data()),
                static_cast<std::streamsize>(e.values.size() * sizeof(double)));
        if (!in) throw DataError("truncated checkpoint payload at " + e.name);
        ckpt.entries.push_back(std::move(e));
    }
    return ckpt;
}

void apply_checkpoint(const Checkpoint& ckpt, ParameterStore& params) {
    for (auto& p : params.all()) {
        const CheckpointEntry* found = nullptr;
        for (const auto& e : ckpt.entries) {
            if (e.name == p.name) found = &e;
        }
        if (!found) throw DataError("checkpoint lacks parameter " + p.name);
        if (found->shape != p.tensor.shape()) {
            throw DataError("checkpoint shape mismatch for " + p.name);
        }
        std::copy(found->values.begin(), found->values.end(), p.tensor.mutable_data().begin());
    }
}

}  // namespace fraudfuse::nc
