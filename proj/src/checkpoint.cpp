#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/model.hpp"

static_assert(std::endian::native == std::endian::little);

namespace dstf {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'T', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

struct CkptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <typename T>
void put(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& f, const char* what) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f)
        throw CkptError(std::string("checkpoint: truncated while reading ") + what);
    return v;
}

void put_str(std::ofstream& f, const std::string& s) {
    put<std::uint32_t>(f, static_cast<std::uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_str(std::ifstream& f, const char* what) {
    auto len = take<std::uint32_t>(f, what);
    if (len > 4096)
        throw CkptError(std::string("checkpoint: implausible string length for ") +
                        what);
    std::string s(len, '\0');
    f.read(s.data(), static_cast<std::streamsize>(len));
    if (!f)
        throw CkptError(std::string("checkpoint: truncated while reading ") + what);
    return s;
}

void put_entry(std::ofstream& f, const std::string& name, const Tensor& t) {
    put_str(f, name);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape) put<std::uint64_t>(f, d);
    f.write(reinterpret_cast<const char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
}

// entry order is fixed so identical state always serializes to identical bytes
std::vector<std::pair<std::string, Tensor*>> entry_table(Embedder& e) {
    std::vector<std::pair<std::string, Tensor*>> t = {
        {"spatial.w", &e.spatial_w->val}, {"spatial.b", &e.spatial_b->val},
        {"conv1.w", &e.conv1_w->val},     {"conv1.b", &e.conv1_b->val},
        {"conv2.w", &e.conv2_w->val},     {"conv2.b", &e.conv2_b->val},
        {"fc.w", &e.fc_w->val},           {"fc.b", &e.fc_b->val},
    };
    if (e.config().use_batch_norm) {
        t.push_back({"bn1.gamma", &e.bn1_gamma->val});
        t.push_back({"bn1.beta", &e.bn1_beta->val});
        t.push_back({"bn1.running_mean", &e.bn1_state.running_mean});
        t.push_back({"bn1.running_var", &e.bn1_state.running_var});
        t.push_back({"bn2.gamma", &e.bn2_gamma->val});
        t.push_back({"bn2.beta", &e.bn2_beta->val});
        t.push_back({"bn2.running_mean", &e.bn2_state.running_mean});
        t.push_back({"bn2.running_var", &e.bn2_state.running_var});
    }
    return t;
}

}  // namespace

void save_checkpoint(const Embedder& embedder, const CheckpointMeta& meta,
                     const std::string& path) {
    if (meta.pretext != "rp" && meta.pretext != "ts" && meta.pretext != "fs" &&
        meta.pretext != "none")
        throw std::invalid_argument("checkpoint: pretext must be rp, ts, fs, or none");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CkptError("checkpoint: cannot open " + path + " for writing");

    f.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(f, kVersion);
    const EmbedderConfig& c = embedder.config();
    put<std::uint64_t>(f, c.n_channels);
    put<std::uint64_t>(f, c.n_times);
    put<std::uint64_t>(f, c.n_conv_maps);
    put<std::uint64_t>(f, c.temporal_kernel);
    put<std::uint64_t>(f, c.pool_size);
    put<std::uint64_t>(f, c.embedding_dim);
    put<double>(f, c.dropout_p);
    put<std::uint8_t>(f, c.use_batch_norm ? 1 : 0);

    put_str(f, meta.pretext);
    put<std::uint64_t>(f, meta.seed);
    put<std::uint64_t>(f, meta.epochs_run);
    put<double>(f, meta.final_val_loss);
    put<double>(f, meta.final_val_acc);

    auto entries = entry_table(const_cast<Embedder&>(embedder));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, tensor] : entries) put_entry(f, name, *tensor);
    f.flush();
    if (!f) throw CkptError("checkpoint: write failed for " + path);
}

Embedder load_checkpoint(const std::string& path, CheckpointMeta* meta_out) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CkptError("checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CkptError("checkpoint: bad magic in " + path);
    auto version = take<std::uint32_t>(f, "version");
    if (version != kVersion)
        throw CkptError("checkpoint: unsupported format version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kVersion) + ")");

    EmbedderConfig cfg;
    cfg.n_channels = take<std::uint64_t>(f, "n_channels");
    cfg.n_times = take<std::uint64_t>(f, "n_times");
    cfg.n_conv_maps = take<std::uint64_t>(f, "n_conv_maps");
    cfg.temporal_kernel = take<std::uint64_t>(f, "temporal_kernel");
    cfg.pool_size = take<std::uint64_t>(f, "pool_size");
    cfg.embedding_dim = take<std::uint64_t>(f, "embedding_dim");
    cfg.dropout_p = take<double>(f, "dropout_p");
    cfg.use_batch_norm = take<std::uint8_t>(f, "use_batch_norm") != 0;
    cfg.validate();

    CheckpointMeta meta;
    meta.pretext = take_str(f, "pretext kind");
    if (meta.pretext != "rp" && meta.pretext != "ts" && meta.pretext != "fs" &&
        meta.pretext != "none")
        throw CkptError("checkpoint: unknown pretext kind '" + meta.pretext + "'");
    meta.seed = take<std::uint64_t>(f, "seed");
    meta.epochs_run = take<std::uint64_t>(f, "epochs_run");
    meta.final_val_loss = take<double>(f, "final_val_loss");
    meta.final_val_acc = take<double>(f, "final_val_acc");

    Embedder embedder(cfg, 0);
    auto entries = entry_table(embedder);
    std::map<std::string, Tensor*> by_name(entries.begin(), entries.end());
    std::map<std::string, bool> seen;

    auto n_entries = take<std::uint32_t>(f, "entry count");
    if (n_entries != entries.size())
        throw CkptError("checkpoint: expected " + std::to_string(entries.size()) +
                        " parameter entries, found " + std::to_string(n_entries));
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        std::string name = take_str(f, "parameter name");
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw CkptError("checkpoint: unknown parameter name '" + name + "'");
        if (seen[name])
            throw CkptError("checkpoint: duplicate parameter '" + name + "'");
        seen[name] = true;

        auto ndim = take<std::uint32_t>(f, "parameter rank");
        if (ndim > 8)
            throw CkptError("checkpoint: implausible rank for '" + name + "'");
        std::vector<std::size_t> shape(ndim);
        std::string shape_txt = "(";
        for (std::size_t d = 0; d < ndim; ++d) {
            auto v = take<std::uint64_t>(f, "parameter dim");
            if (v > (1u << 30))
                throw CkptError("checkpoint: implausible dimension for '" + name + "'");
            shape[d] = static_cast<std::size_t>(v);
            shape_txt += (d ? ", " : "") + std::to_string(v);
        }
        shape_txt += ")";
        Tensor* dst = it->second;
        if (shape != dst->shape)
            throw CkptError("checkpoint: parameter '" + name + "' has shape " +
                            shape_txt + " but the config implies " + dst->shape_str());
        f.read(reinterpret_cast<char*>(dst->v.data()),
               static_cast<std::streamsize>(dst->v.size() * sizeof(double)));
        if (!f)
            throw CkptError("checkpoint: truncated while reading data of '" + name +
                            "'");
    }
    f.peek();
    if (!f.eof()) throw CkptError("checkpoint: trailing bytes in " + path);
    if (meta_out) *meta_out = meta;
    return embedder;
}

}  // namespace dstf
