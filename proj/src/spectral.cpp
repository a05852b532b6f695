#include "dstf/spectral.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dstf {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
    std::size_t n = re.size();
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * kPi / static_cast<double>(len);
        double wr = std::cos(ang), wi = std::sin(ang);
        for (std::size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (std::size_t j = 0; j < len / 2; ++j) {
                double ur = re[i + j], ui = im[i + j];
                double vr = re[i + j + len / 2] * cr - im[i + j + len / 2] * ci;
                double vi = re[i + j + len / 2] * ci + im[i + j + len / 2] * cr;
                re[i + j] = ur + vr;
                im[i + j] = ui + vi;
                re[i + j + len / 2] = ur - vr;
                im[i + j + len / 2] = ui - vi;
                double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

void dft_direct(std::vector<double>& re, std::vector<double>& im) {
    std::size_t n = re.size();
    std::vector<double> or_(n, 0.0), oi(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        double ar = 0.0, ai = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double ang = -2.0 * kPi * static_cast<double>(k) *
                         static_cast<double>(j) / static_cast<double>(n);
            double c = std::cos(ang), s = std::sin(ang);
            ar += re[j] * c - im[j] * s;
            ai += re[j] * s + im[j] * c;
        }
        or_[k] = ar;
        oi[k] = ai;
    }
    re = std::move(or_);
    im = std::move(oi);
}

// periodic Hamming (the spectral-estimation convention; FIR design uses the
// symmetric form)
std::vector<double> hamming_periodic(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                      static_cast<double>(n));
    return w;
}

}  // namespace

void fft(std::vector<double>& re, std::vector<double>& im) {
    if (re.size() != im.size())
        throw std::invalid_argument("fft: re/im length mismatch");
    if (re.empty()) return;
    if (is_pow2(re.size()))
        fft_radix2(re, im);
    else
        dft_direct(re, im);
}

PsdEstimate welch_psd(const std::vector<std::vector<double>>& channels,
                      double sample_rate, const WelchConfig& cfg) {
    if (channels.empty()) throw std::invalid_argument("welch_psd: no channels");
    std::size_t n = channels[0].size();
    for (const auto& ch : channels)
        if (ch.size() != n)
            throw std::invalid_argument("welch_psd: ragged channel lengths");
    std::size_t seg = cfg.segment_len;
    if (seg < 1 || seg > n)
        throw std::invalid_argument("welch_psd: segment_len " + std::to_string(seg) +
                                    " not in [1, " + std::to_string(n) + "]");
    if (cfg.overlap < 0.0 || cfg.overlap >= 1.0)
        throw std::invalid_argument("welch_psd: overlap must be in [0,1)");
    if (sample_rate <= 0.0) throw std::invalid_argument("welch_psd: bad sample rate");

    std::size_t noverlap = static_cast<std::size_t>(
        std::floor(static_cast<double>(seg) * cfg.overlap));
    std::size_t hop = seg - noverlap;
    std::size_t n_segments = (n - seg) / hop + 1;

    std::vector<double> win = hamming_periodic(seg);
    double win_ss = 0.0;
    for (double w : win) win_ss += w * w;
    double scale = 1.0 / (sample_rate * win_ss);

    std::size_t n_bins = seg / 2 + 1;
    PsdEstimate out;
    out.segment_len = seg;
    out.overlap = cfg.overlap;
    out.freqs.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k)
        out.freqs[k] = static_cast<double>(k) * sample_rate / static_cast<double>(seg);

    std::vector<double> re(seg), im(seg);
    for (const auto& ch : channels) {
        std::vector<double> acc(n_bins, 0.0);
        for (std::size_t s = 0; s < n_segments; ++s) {
            const double* x = ch.data() + s * hop;
            double mean = 0.0;
            if (cfg.detrend) {
                for (std::size_t i = 0; i < seg; ++i) mean += x[i];
                mean /= static_cast<double>(seg);
            }
            for (std::size_t i = 0; i < seg; ++i) {
                re[i] = (x[i] - mean) * win[i];
                im[i] = 0.0;
            }
            fft(re, im);
            for (std::size_t k = 0; k < n_bins; ++k) {
                double p = (re[k] * re[k] + im[k] * im[k]) * scale;
                bool nyquist = (seg % 2 == 0) && (k == n_bins - 1);
                if (k != 0 && !nyquist) p *= 2.0;
                acc[k] += p;
            }
        }
        for (auto& a : acc) a /= static_cast<double>(n_segments);
        out.power.push_back(std::move(acc));
    }
    return out;
}

std::vector<std::vector<double>> normalize_psd(const PsdEstimate& p) {
    std::vector<std::vector<double>> out;
    out.reserve(p.power.size());
    for (std::size_t c = 0; c < p.power.size(); ++c) {
        double sum = 0.0;
        for (double v : p.power[c]) {
            if (v < 0.0)
                throw std::invalid_argument("normalize_psd: negative power value");
            sum += v;
        }
        if (sum <= 0.0)
            throw std::invalid_argument("normalize_psd: channel " + std::to_string(c) +
                                        " has all-zero power; distance undefined");
        std::vector<double> q(p.power[c]);
        for (auto& v : q) v /= sum;
        out.push_back(std::move(q));
    }
    return out;
}

namespace {

void require_distribution(const std::vector<double>& p, const char* which) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0)
            throw std::invalid_argument(std::string("hellinger_distance: ") + which +
                                        " has a negative entry");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument(std::string("hellinger_distance: ") + which +
                                    " does not sum to 1 (sum=" + std::to_string(sum) +
                                    ")");
}

}  // namespace

double hellinger_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("hellinger_distance: length mismatch " +
                                    std::to_string(p.size()) + " vs " +
                                    std::to_string(q.size()));
    require_distribution(p, "p");
    require_distribution(q, "q");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        acc += d * d;
    }
    double hd = std::sqrt(0.5 * acc);
    return hd > 1.0 ? 1.0 : hd;  // clip FP spill just above 1
}

double mean_channel_hd(const PsdEstimate& a, const PsdEstimate& b, FsDistance kind) {
    if (a.power.size() != b.power.size())
        throw std::invalid_argument("mean_channel_hd: channel count mismatch");
    if (a.freqs != b.freqs)
        throw std::invalid_argument("mean_channel_hd: frequency grid mismatch");
    auto pa = normalize_psd(a);
    auto pb = normalize_psd(b);
    double acc = 0.0;
    for (std::size_t c = 0; c < pa.size(); ++c) {
        if (kind == FsDistance::hellinger) {
            acc += hellinger_distance(pa[c], pb[c]);
        } else {
            double ss = 0.0;
            for (std::size_t i = 0; i < pa[c].size(); ++i) {
                double d = pa[c][i] - pb[c][i];
                ss += d * d;
            }
            acc += std::sqrt(0.5 * ss);
        }
    }
    return acc / static_cast<double>(pa.size());
}

}  // namespace dstf
