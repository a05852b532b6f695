#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dstf/prep.hpp"
#include "dstf/spectral.hpp"

namespace dstf {

enum class PretextKind { rp, ts, fs };

const char* pretext_name(PretextKind k);
PretextKind pretext_from_name(const std::string& name);

struct SamplerConfig {
    double tau_pos_s = 60.0;   // positive-context radius (near-anchor)
    double tau_neg_s = 900.0;  // negative-context radius (far-from-anchor)
    std::size_t examples_per_recording = 2000;
    std::uint64_t seed = 0;
    double fs_tie_epsilon = 1e-9;  // spectral-distance ties are discarded
    double pos_fraction = 0.5;     // probability of drawing the positive branch

    void validate() const;
};

struct WindowRef {
    std::string recording_id;
    std::size_t start_sample = 0;

    bool operator==(const WindowRef&) const = default;
};

struct PretextExample {
    PretextKind kind = PretextKind::rp;
    std::vector<WindowRef> refs;  // 2 for rp (anchor, other); 3 for ts/fs (t, t', t'')
    int label = 0;

    bool operator==(const PretextExample&) const = default;
};

enum class TernaryLabel : int { zero = 0, one = 1, discard = -1 };

// |t - t'| <= tau_pos -> 1; |t - t'| > tau_neg -> 0; in between -> discard
TernaryLabel label_rp(double t_s, double t_prime_s, const SamplerConfig& cfg);

// 1 iff t < t' < t''; requires distinct times with t < t''
int label_ts(double t_s, double t_prime_s, double t_double_prime_s);

// compares mean-channel spectral distances d' = d(anchor, prime) and
// d'' = d(anchor, double_prime): d' < d'' - eps -> 0, d' > d'' + eps -> 1,
// tie -> discard
TernaryLabel label_fs(const PsdEstimate& anchor, const PsdEstimate& prime,
                      const PsdEstimate& double_prime, const SamplerConfig& cfg);

// All samplers take one recording's non-overlapping windows (as produced by
// extract_windows: sorted, evenly spaced) and are deterministic given
// (windows, cfg): the RNG seed is cfg.seed mixed with the recording id, so
// per-recording sampling can run in any order or in parallel.
std::vector<PretextExample> sample_rp(const std::vector<Window>& windows,
                                      double sample_rate, const SamplerConfig& cfg);

std::vector<PretextExample> sample_ts(const std::vector<Window>& windows,
                                      double sample_rate, const SamplerConfig& cfg);

std::vector<PretextExample> sample_fs(const std::vector<Window>& windows,
                                      double sample_rate, const SamplerConfig& cfg,
                                      const WelchConfig& welch = WelchConfig{});

// Compact text index of examples (kind, refs, label); no signal data.
void write_examples(const std::vector<PretextExample>& examples,
                    const std::string& path);
std::vector<PretextExample> read_examples(const std::string& path);

}  // namespace dstf
