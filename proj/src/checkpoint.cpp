#include "clnet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "clnet/errors.hpp"

namespace clnet {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'N', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IngestError("checkpoint truncated while reading " + what);
    return v;
}

} // namespace

void Checkpoint::put(const std::string& name, const Tensor& t) {
    entries.emplace_back(name, t);
}

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return &t;
    return nullptr;
}

Checkpoint capture(const NamedTensors& named, uint64_t config_hash) {
    Checkpoint ck;
    ck.config_hash = config_hash;
    for (const auto& [name, t] : named) ck.put(name, *t);
    return ck;
}

void restore_into(const Checkpoint& ck, const NamedTensors& named) {
    if (ck.entries.size() != named.size())
        throw IngestError("checkpoint holds " + std::to_string(ck.entries.size()) +
                          " tensors, model expects " + std::to_string(named.size()));
    for (const auto& [name, dst] : named) {
        const Tensor* src = ck.find(name);
        if (!src) throw IngestError("checkpoint is missing tensor '" + name + "'");
        if (!src->same_shape(*dst))
            throw IngestError("checkpoint tensor '" + name + "' has shape " +
                              src->shape_str() + ", model expects " + dst->shape_str());
        *dst = *src;
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_pod(os, kVersion);
    write_pod(os, ck.config_hash);
    write_pod(os, static_cast<uint32_t>(ck.entries.size()));
    for (const auto& [name, t] : ck.entries) {
        write_pod(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(os, static_cast<uint32_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) write_pod(os, static_cast<int32_t>(t.dim(d)));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(sizeof(double)) * t.numel());
    }
    os.flush();
    if (!os) throw InputError("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IngestError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IngestError("not a checkpoint file: " + path);
    uint32_t version = read_pod<uint32_t>(is, "version");
    if (version != kVersion)
        throw IngestError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config_hash = read_pod<uint64_t>(is, "config hash");
    uint32_t count = read_pod<uint32_t>(is, "tensor count");
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = read_pod<uint32_t>(is, "name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw IngestError("checkpoint truncated while reading a name");
        uint32_t ndim = read_pod<uint32_t>(is, "rank");
        if (ndim == 0 || ndim > 8)
            throw IngestError("checkpoint tensor '" + name + "' has bad rank");
        std::vector<int> dims;
        for (uint32_t d = 0; d < ndim; ++d) {
            int32_t v = read_pod<int32_t>(is, "dimension");
            if (v <= 0) throw IngestError("checkpoint tensor '" + name + "' has bad dims");
            dims.push_back(v);
        }
        Tensor t(dims);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(sizeof(double)) * t.numel());
        if (!is) throw IngestError("checkpoint truncated in tensor '" + name + "'");
        ck.entries.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

} // namespace clnet
