#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dstf/recording.hpp"

namespace dstf {

struct PrepConfig {
    double cutoff_hz = 30.0;
    std::size_t fir_order = 101;  // odd; Hamming-windowed sinc
    std::vector<std::string> keep_channels = {"F3-M2", "F4-M1"};
    double target_rate = 100.0;
    double window_s = 30.0;

    void validate() const;  // throws on broken invariants
};

struct Window {
    std::vector<std::vector<double>> data;  // per-channel, window_s * rate samples
    std::size_t start_sample = 0;           // index into the preprocessed recording
    std::string recording_id;
    std::optional<SleepStage> stage;
    bool degenerate = false;  // some channel had zero variance and was zeroed

    std::size_t n_channels() const { return data.size(); }
    std::size_t n_times() const { return data.empty() ? 0 : data[0].size(); }
};

// Hamming-windowed sinc lowpass, unit DC gain, exactly symmetric taps.
std::vector<double> design_lowpass(double cutoff_hz, std::size_t fir_order,
                                   double sample_rate);

// Zero-phase FIR: convolve with reflection padding and shift out the group
// delay, so y[j] lines up with x[j] and the length is unchanged.
std::vector<double> filter_zero_phase(const std::vector<double>& x,
                                      const std::vector<double>& coeffs);

Recording filter_signal(const Recording& rec, const std::vector<double>& coeffs);

Recording select_channels(const Recording& rec,
                          const std::vector<std::string>& keep_channels);

Recording downsample(const Recording& rec, double target_rate);

// filter -> select -> decimate, per the preprocessing chain
Recording preprocess(const Recording& rec, const PrepConfig& cfg);

std::vector<Window> extract_windows(const Recording& rec, double window_s);

Window normalize_window(const Window& w);

}  // namespace dstf
