#include "core/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace mmgan {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'G', 'A', 'N', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CheckpointError(std::string("checkpoint: truncated file while reading ") + what);
    return v;
}

} // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    std::string meta_str = meta.dump();
    write_pod(os, static_cast<uint64_t>(meta_str.size()));
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    write_pod(os, static_cast<uint64_t>(arrays.size()));
    for (const auto& [name, t] : arrays) {
        write_pod(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(os, static_cast<uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) write_pod(os, static_cast<int64_t>(t.dim(i)));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * sizeof(double)));
    }
    if (!os) throw CheckpointError("checkpoint: write to '" + path + "' failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("checkpoint: '" + path + "' is not a checkpoint file (bad magic)");
    uint32_t version = read_pod<uint32_t>(is, "version");
    if (version != kVersion)
        throw CheckpointError("checkpoint: '" + path + "' has unsupported version " +
                              std::to_string(version) + " (expected " + std::to_string(kVersion) + ")");
    Checkpoint ck;
    uint64_t meta_len = read_pod<uint64_t>(is, "metadata length");
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!is) throw CheckpointError("checkpoint: truncated metadata block");
    try {
        ck.meta = nlohmann::json::parse(meta_str);
    } catch (const std::exception& e) {
        throw CheckpointError(std::string("checkpoint: corrupt metadata: ") + e.what());
    }
    uint64_t count = read_pod<uint64_t>(is, "array count");
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = read_pod<uint32_t>(is, "array name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw CheckpointError("checkpoint: truncated array name");
        uint32_t ndim = read_pod<uint32_t>(is, "array rank");
        if (ndim > 8) throw CheckpointError("checkpoint: implausible array rank");
        std::vector<int64_t> shape(ndim);
        int64_t numel = 1;
        for (uint32_t d = 0; d < ndim; ++d) {
            shape[d] = read_pod<int64_t>(is, "array dim");
            if (shape[d] < 0) throw CheckpointError("checkpoint: negative array dim");
            numel *= shape[d];
        }
        std::vector<double> data(static_cast<size_t>(numel));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(static_cast<size_t>(numel) * sizeof(double)));
        if (!is) throw CheckpointError("checkpoint: truncated data for array '" + name + "'");
        ck.arrays.emplace_back(name, Tensor::from_data(std::move(shape), std::move(data)));
    }
    return ck;
}

} // namespace mmgan
