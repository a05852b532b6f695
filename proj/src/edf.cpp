#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/recording.hpp"

namespace dstf {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(' ');
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(' ');
    return s.substr(a, b - a + 1);
}

struct EdfError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_field(std::ifstream& f, std::size_t width, const char* what) {
    std::string buf(width, '\0');
    f.read(buf.data(), static_cast<std::streamsize>(width));
    if (!f)
        throw EdfError(std::string("edf: header truncated while reading ") + what);
    return buf;
}

long parse_int(const std::string& raw, const char* what) {
    std::string s = trim(raw);
    if (s.empty()) throw EdfError(std::string("edf: empty numeric field ") + what);
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (const std::exception&) {
        throw EdfError(std::string("edf: malformed numeric field ") + what + " ('" +
                       s + "')");
    }
    if (pos != s.size())
        throw EdfError(std::string("edf: malformed numeric field ") + what + " ('" + s +
                       "')");
    return v;
}

double parse_real(const std::string& raw, const char* what) {
    std::string s = trim(raw);
    if (s.empty()) throw EdfError(std::string("edf: empty numeric field ") + what);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw EdfError(std::string("edf: malformed numeric field ") + what + " ('" +
                       s + "')");
    }
    if (pos != s.size())
        throw EdfError(std::string("edf: malformed numeric field ") + what + " ('" + s +
                       "')");
    return v;
}

}  // namespace

Recording read_edf(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw EdfError("edf: cannot open " + path);

    std::string version = trim(read_field(f, 8, "version"));
    if (version != "0")
        throw EdfError("edf: bad version magic '" + version + "' (expected '0')");
    read_field(f, 80, "patient id");
    std::string rec_field = trim(read_field(f, 80, "recording id"));
    read_field(f, 8, "start date");
    read_field(f, 8, "start time");
    long header_bytes = parse_int(read_field(f, 8, "header bytes"), "header bytes");
    std::string reserved = read_field(f, 44, "reserved");
    if (trim(reserved).rfind("EDF+D", 0) == 0)
        throw EdfError("edf: discontinuous EDF+D recordings are not supported");
    long n_records = parse_int(read_field(f, 8, "record count"), "record count");
    if (n_records < 1)
        throw EdfError("edf: record count " + std::to_string(n_records) +
                       " (unknown/empty recordings not supported)");
    double record_s = parse_real(read_field(f, 8, "record duration"),
                                 "record duration");
    if (record_s <= 0.0) throw EdfError("edf: record duration must be positive");
    long ns = parse_int(read_field(f, 4, "signal count"), "signal count");
    if (ns < 1) throw EdfError("edf: signal count must be >= 1");
    if (header_bytes != 256 + ns * 256)
        throw EdfError("edf: header size field " + std::to_string(header_bytes) +
                       " does not match 256 + 256*" + std::to_string(ns));

    auto n = static_cast<std::size_t>(ns);
    std::vector<std::string> labels(n);
    for (auto& l : labels) l = trim(read_field(f, 16, "label"));
    for (const auto& l : labels)
        if (l == "EDF Annotations")
            throw EdfError("edf: EDF+ annotation signals are not supported");
    for (std::size_t i = 0; i < n; ++i) read_field(f, 80, "transducer");
    for (std::size_t i = 0; i < n; ++i) read_field(f, 8, "physical dimension");
    std::vector<double> pmin(n), pmax(n);
    for (auto& v : pmin) v = parse_real(read_field(f, 8, "physical min"), "physical min");
    for (auto& v : pmax) v = parse_real(read_field(f, 8, "physical max"), "physical max");
    std::vector<long> dmin(n), dmax(n);
    for (auto& v : dmin) v = parse_int(read_field(f, 8, "digital min"), "digital min");
    for (auto& v : dmax) v = parse_int(read_field(f, 8, "digital max"), "digital max");
    for (std::size_t i = 0; i < n; ++i) read_field(f, 80, "prefiltering");
    std::vector<long> spr(n);
    for (auto& v : spr)
        v = parse_int(read_field(f, 8, "samples per record"), "samples per record");
    for (std::size_t i = 0; i < n; ++i) read_field(f, 32, "signal reserved");

    for (std::size_t i = 0; i < n; ++i) {
        if (dmax[i] == dmin[i])
            throw EdfError("edf: signal '" + labels[i] + "' has zero digital range");
        if (spr[i] < 1)
            throw EdfError("edf: signal '" + labels[i] +
                           "' has nonpositive samples per record");
        if (spr[i] != spr[0])
            throw EdfError("edf: mixed per-signal sampling rates (" +
                           std::to_string(spr[0]) + " vs " + std::to_string(spr[i]) +
                           " samples per record); a single common rate is required");
    }

    auto per_record = static_cast<std::size_t>(spr[0]);
    std::size_t total_per_signal = per_record * static_cast<std::size_t>(n_records);
    std::size_t want_bytes = n * total_per_signal * 2;

    std::vector<char> payload(want_bytes);
    f.read(payload.data(), static_cast<std::streamsize>(want_bytes));
    if (static_cast<std::size_t>(f.gcount()) != want_bytes)
        throw EdfError("edf: truncated data records (expected " +
                       std::to_string(want_bytes) + " bytes, got " +
                       std::to_string(f.gcount()) + ")");
    f.peek();
    if (!f.eof())
        throw EdfError("edf: trailing bytes after the declared data records");

    Recording rec;
    rec.channels = labels;
    rec.sample_rate = static_cast<double>(per_record) / record_s;
    rec.id = rec_field.empty() ? path : rec_field;
    rec.data.assign(n, std::vector<float>(total_per_signal));
    const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t r = 0; r < static_cast<std::size_t>(n_records); ++r) {
        for (std::size_t s = 0; s < n; ++s) {
            double scale = (pmax[s] - pmin[s]) / static_cast<double>(dmax[s] - dmin[s]);
            std::size_t base = (r * n + s) * per_record * 2;
            for (std::size_t k = 0; k < per_record; ++k) {
                auto lo = static_cast<std::uint16_t>(bytes[base + 2 * k]);
                auto hi = static_cast<std::uint16_t>(bytes[base + 2 * k + 1]);
                auto digital =
                    static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
                double phys = pmin[s] + (static_cast<double>(digital) -
                                         static_cast<double>(dmin[s])) *
                                            scale;
                rec.data[s][r * per_record + k] = static_cast<float>(phys);
            }
        }
    }
    rec.validate();
    return rec;
}

}  // namespace dstf
