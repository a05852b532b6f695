#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/recording.hpp"

// On-disk layout is little-endian; this desk build assumes a matching host so
// fields can be memcpy'd straight through.
static_assert(std::endian::native == std::endian::little);

namespace dstf {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'T', 'F', 'R', 'A', 'W', '1'};
constexpr std::uint32_t kVersion = 1;

struct RawError : std::runtime_error {
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
    if (!f) throw RawError(std::string("raw: truncated while reading ") + what);
    return v;
}

void put_str(std::ofstream& f, const std::string& s) {
    put<std::uint32_t>(f, static_cast<std::uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string take_str(std::ifstream& f, const char* what) {
    auto len = take<std::uint32_t>(f, what);
    if (len > (1u << 20))
        throw RawError(std::string("raw: implausible string length for ") + what);
    std::string s(len, '\0');
    f.read(s.data(), static_cast<std::streamsize>(len));
    if (!f) throw RawError(std::string("raw: truncated while reading ") + what);
    return s;
}

}  // namespace

void write_raw(const Recording& rec, const std::string& path) {
    rec.validate();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw RawError("raw: cannot open " + path + " for writing");
    f.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(rec.channels.size()));
    put<double>(f, rec.sample_rate);
    put<std::uint64_t>(f, static_cast<std::uint64_t>(rec.n_samples()));
    put_str(f, rec.id);
    for (const auto& label : rec.channels) put_str(f, label);
    for (const auto& ch : rec.data)
        f.write(reinterpret_cast<const char*>(ch.data()),
                static_cast<std::streamsize>(ch.size() * sizeof(float)));
    put<std::uint32_t>(f, static_cast<std::uint32_t>(rec.stage_annotations.size()));
    for (const auto& span : rec.stage_annotations) {
        put<std::uint64_t>(f, static_cast<std::uint64_t>(span.start_sample));
        put<std::uint8_t>(f, static_cast<std::uint8_t>(span.stage));
    }
    f.flush();
    if (!f) throw RawError("raw: write failed for " + path);
}

Recording read_raw(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw RawError("raw: cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw RawError("raw: bad magic in " + path);
    auto version = take<std::uint32_t>(f, "version");
    if (version != kVersion)
        throw RawError("raw: unsupported format version " + std::to_string(version));
    auto n_channels = take<std::uint32_t>(f, "channel count");
    if (n_channels == 0) throw RawError("raw: zero channels");
    auto rate = take<double>(f, "sample rate");
    auto n_samples = take<std::uint64_t>(f, "sample count");

    Recording rec;
    rec.sample_rate = rate;
    rec.id = take_str(f, "recording id");
    rec.channels.resize(n_channels);
    for (auto& label : rec.channels) label = take_str(f, "channel label");
    rec.data.assign(n_channels, std::vector<float>(n_samples));
    for (auto& ch : rec.data) {
        f.read(reinterpret_cast<char*>(ch.data()),
               static_cast<std::streamsize>(ch.size() * sizeof(float)));
        if (!f) throw RawError("raw: truncated sample block in " + path);
    }
    auto n_ann = take<std::uint32_t>(f, "annotation count");
    rec.stage_annotations.resize(n_ann);
    for (auto& span : rec.stage_annotations) {
        span.start_sample =
            static_cast<std::size_t>(take<std::uint64_t>(f, "annotation start"));
        span.stage = stage_from_code(take<std::uint8_t>(f, "annotation stage"));
    }
    f.peek();
    if (!f.eof()) throw RawError("raw: trailing bytes after annotations in " + path);
    rec.validate();
    return rec;
}

}  // namespace dstf
