#pragma once

#include <cstddef>
#include <vector>

namespace dstf {

struct WelchConfig {
    std::size_t segment_len = 256;
    double overlap = 0.5;        // fraction of segment_len
    bool detrend = true;         // per-segment mean removal
};

struct PsdEstimate {
    std::vector<double> freqs;                 // Hz, 0..Nyquist
    std::vector<std::vector<double>> power;    // per channel, aligned with freqs
    std::size_t segment_len = 0;
    double overlap = 0.0;
};

// In-place complex FFT on interleaved (re, im) pairs. Radix-2 when n is a
// power of two, otherwise a direct DFT (segment lengths are small).
void fft(std::vector<double>& re, std::vector<double>& im);

// Welch PSD of multi-channel samples (channel-major), one-sided density
// scaling 1/(rate * sum(win^2)). Hamming window, periodic form.
PsdEstimate welch_psd(const std::vector<std::vector<double>>& channels,
                      double sample_rate, const WelchConfig& cfg);

// Per-channel normalization of PSD power to probability vectors.
std::vector<std::vector<double>> normalize_psd(const PsdEstimate& p);

double hellinger_distance(const std::vector<double>& p, const std::vector<double>& q);

enum class FsDistance { hellinger, literal_l2 };

// Mean over channels of the distance between normalized PSDs.
// literal_l2 uses (1/sqrt(2))*||p - q||_2 without square roots.
double mean_channel_hd(const PsdEstimate& a, const PsdEstimate& b,
                       FsDistance kind = FsDistance::hellinger);

}  // namespace dstf
