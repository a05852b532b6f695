#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/prep.hpp"

namespace dstf {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

void PrepConfig::validate() const {
    if (cutoff_hz <= 0.0 || cutoff_hz >= target_rate / 2.0)
        throw std::invalid_argument(
            "prep: cutoff_hz must lie in (0, target_rate/2) so the passband "
            "survives downsampling");
    if (fir_order < 3 || fir_order % 2 == 0)
        throw std::invalid_argument("prep: fir_order must be odd and >= 3");
    if (target_rate <= 0.0)
        throw std::invalid_argument("prep: target_rate must be positive");
    double wlen = window_s * target_rate;
    if (window_s <= 0.0 || std::abs(wlen - std::round(wlen)) > 1e-9)
        throw std::invalid_argument(
            "prep: window_s * target_rate must be a whole number of samples");
    if (keep_channels.empty())
        throw std::invalid_argument("prep: keep_channels must not be empty");
}

std::vector<double> design_lowpass(double cutoff_hz, std::size_t fir_order,
                                   double sample_rate) {
    if (sample_rate <= 0.0)
        throw std::invalid_argument("design_lowpass: sample_rate must be positive");
    if (cutoff_hz <= 0.0 || cutoff_hz >= sample_rate / 2.0)
        throw std::invalid_argument(
            "design_lowpass: cutoff must lie in (0, sample_rate/2)");
    if (fir_order < 3 || fir_order % 2 == 0)
        throw std::invalid_argument("design_lowpass: order must be odd and >= 3");

    std::size_t m = (fir_order - 1) / 2;
    double fc = cutoff_hz / sample_rate;  // cycles per sample
    std::vector<double> h(fir_order);
    // Evaluate only d >= 0 and mirror, so the taps are bitwise symmetric.
    for (std::size_t d = 0; d <= m; ++d) {
        double sinc = d == 0 ? 2.0 * fc
                             : std::sin(2.0 * kPi * fc * double(d)) / (kPi * double(d));
        // Hamming across the full order, written in terms of the offset from
        // the center tap: 0.54 - 0.46*cos(2*pi*n/(order-1)) with n = m + d.
        double win = 0.54 - 0.46 * std::cos(kPi * (double(d) / double(m) + 1.0));
        h[m + d] = sinc * win;
        h[m - d] = h[m + d];
    }
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) v /= sum;  // unit DC gain
    return h;
}

std::vector<double> filter_zero_phase(const std::vector<double>& x,
                                      const std::vector<double>& coeffs) {
    std::size_t order = coeffs.size();
    if (order < 1 || order % 2 == 0)
        throw std::invalid_argument("filter_zero_phase: coefficient count must be odd");
    std::size_t m = (order - 1) / 2;
    std::size_t n = x.size();
    if (n <= m)
        throw std::invalid_argument(
            "filter_zero_phase: signal shorter than half the filter order (" +
            std::to_string(n) + " <= " + std::to_string(m) + ")");

    // Reflect about the edge samples without repeating them.
    std::vector<double> p(n + 2 * m);
    for (std::size_t k = 0; k < m; ++k) p[m - 1 - k] = x[k + 1];
    std::copy(x.begin(), x.end(), p.begin() + static_cast<std::ptrdiff_t>(m));
    for (std::size_t k = 0; k < m; ++k) p[m + n + k] = x[n - 2 - k];

    std::vector<double> y(n);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        const double* ps = p.data() + j;
        // valid convolution: y[j] = sum_k h[k] * p[j + order - 1 - k]
        for (std::size_t k = 0; k < order; ++k) acc += coeffs[k] * ps[order - 1 - k];
        y[j] = acc;
    }
    return y;
}

Recording filter_signal(const Recording& rec, const std::vector<double>& coeffs) {
    rec.validate();
    Recording out = rec;
    for (std::size_t c = 0; c < rec.data.size(); ++c) {
        std::vector<double> x(rec.data[c].begin(), rec.data[c].end());
        std::vector<double> y = filter_zero_phase(x, coeffs);
        for (std::size_t i = 0; i < y.size(); ++i)
            out.data[c][i] = static_cast<float>(y[i]);
    }
    return out;
}

Recording select_channels(const Recording& rec,
                          const std::vector<std::string>& keep_channels) {
    rec.validate();
    if (keep_channels.empty())
        throw std::invalid_argument("select_channels: empty channel list");
    Recording out;
    out.sample_rate = rec.sample_rate;
    out.stage_annotations = rec.stage_annotations;
    out.id = rec.id;
    for (const auto& label : keep_channels) {
        auto it = std::find(rec.channels.begin(), rec.channels.end(), label);
        if (it == rec.channels.end())
            throw std::invalid_argument("select_channels: recording " + rec.id +
                                        " has no channel '" + label + "'");
        out.channels.push_back(label);
        out.data.push_back(rec.data[static_cast<std::size_t>(it - rec.channels.begin())]);
    }
    return out;
}

Recording downsample(const Recording& rec, double target_rate) {
    rec.validate();
    if (target_rate <= 0.0)
        throw std::invalid_argument("downsample: target_rate must be positive");
    double ratio = rec.sample_rate / target_rate;
    auto k = static_cast<std::size_t>(std::round(ratio));
    if (k < 1 || std::abs(ratio - double(k)) > 1e-9)
        throw std::invalid_argument(
            "downsample: source rate " + std::to_string(rec.sample_rate) +
            " is not an integer multiple of target rate " + std::to_string(target_rate));
    Recording out;
    out.channels = rec.channels;
    out.id = rec.id;
    out.sample_rate = target_rate;
    out.data.resize(rec.data.size());
    for (std::size_t c = 0; c < rec.data.size(); ++c) {
        out.data[c].reserve((rec.data[c].size() + k - 1) / k);
        for (std::size_t i = 0; i < rec.data[c].size(); i += k)
            out.data[c].push_back(rec.data[c][i]);
    }
    out.stage_annotations = rec.stage_annotations;
    for (auto& span : out.stage_annotations) span.start_sample /= k;
    out.validate();
    return out;
}

Recording preprocess(const Recording& rec, const PrepConfig& cfg) {
    cfg.validate();
    // Channel selection commutes with the per-channel filter, so select first
    // and filter less data.
    Recording r = select_channels(rec, cfg.keep_channels);
    r = filter_signal(r, design_lowpass(cfg.cutoff_hz, cfg.fir_order, r.sample_rate));
    return downsample(r, cfg.target_rate);
}

std::vector<Window> extract_windows(const Recording& rec, double window_s) {
    rec.validate();
    double len_real = window_s * rec.sample_rate;
    auto wlen = static_cast<std::size_t>(std::round(len_real));
    if (window_s <= 0.0 || std::abs(len_real - double(wlen)) > 1e-9 || wlen == 0)
        throw std::invalid_argument(
            "extract_windows: window_s * sample_rate must be a whole number of samples");
    if (rec.n_samples() < wlen)
        throw std::invalid_argument("extract_windows: recording " + rec.id + " (" +
                                    std::to_string(rec.n_samples()) +
                                    " samples) is shorter than one window (" +
                                    std::to_string(wlen) + ")");
    std::size_t n_windows = rec.n_samples() / wlen;
    std::vector<Window> out;
    out.reserve(n_windows);
    std::size_t ann = 0;
    for (std::size_t w = 0; w < n_windows; ++w) {
        Window win;
        win.recording_id = rec.id;
        win.start_sample = w * wlen;
        win.data.resize(rec.data.size());
        for (std::size_t c = 0; c < rec.data.size(); ++c)
            win.data[c].assign(rec.data[c].begin() + static_cast<std::ptrdiff_t>(w * wlen),
                               rec.data[c].begin() +
                                   static_cast<std::ptrdiff_t>((w + 1) * wlen));
        if (!rec.stage_annotations.empty()) {
            // stage of the annotation covering the window's start sample
            while (ann + 1 < rec.stage_annotations.size() &&
                   rec.stage_annotations[ann + 1].start_sample <= win.start_sample)
                ++ann;
            win.stage = rec.stage_annotations[ann].stage;
        }
        out.push_back(std::move(win));
    }
    return out;
}

Window normalize_window(const Window& w) {
    Window out = w;
    for (auto& ch : out.data) {
        if (ch.empty()) throw std::invalid_argument("normalize_window: empty channel");
        double mean = 0.0;
        for (double v : ch) mean += v;
        mean /= double(ch.size());
        double var = 0.0;
        for (double v : ch) var += (v - mean) * (v - mean);
        var /= double(ch.size());  // population variance
        double sd = std::sqrt(var);
        if (sd <= 1e-10 * std::max(1.0, std::abs(mean))) {
            // zero-variance channel: zero it out and flag the window
            std::fill(ch.begin(), ch.end(), 0.0);
            out.degenerate = true;
            continue;
        }
        for (double& v : ch) v = (v - mean) / sd;
    }
    return out;
}

}  // namespace dstf
