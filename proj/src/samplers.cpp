#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/rng.hpp"
#include "dstf/samplers.hpp"

namespace dstf {

namespace {

// guard against degenerate fixtures that would make rejection sampling spin
constexpr std::size_t kMaxRedraws = 1000000;

struct Ctx {
    std::vector<std::string> ids;   // recording id per window (all equal)
    std::vector<double> t;          // window start times, seconds
    std::vector<std::size_t> start; // window start samples

    WindowRef ref(std::size_t i) const { return {ids[i], start[i]}; }
};

Ctx window_context(const std::vector<Window>& windows, double sample_rate) {
    if (windows.empty())
        throw std::invalid_argument("sampler: no windows to sample from");
    if (sample_rate <= 0.0)
        throw std::invalid_argument("sampler: sample_rate must be positive");
    Ctx ctx;
    ctx.ids.reserve(windows.size());
    ctx.t.reserve(windows.size());
    ctx.start.reserve(windows.size());
    for (const auto& w : windows) {
        if (w.recording_id != windows[0].recording_id)
            throw std::invalid_argument(
                "sampler: windows must all come from one recording (got '" +
                w.recording_id + "' and '" + windows[0].recording_id + "')");
        if (!ctx.start.empty() && w.start_sample <= ctx.start.back())
            throw std::invalid_argument(
                "sampler: windows must be sorted by start_sample");
        ctx.ids.push_back(w.recording_id);
        ctx.start.push_back(w.start_sample);
        ctx.t.push_back(double(w.start_sample) / sample_rate);
    }
    return ctx;
}

[[noreturn]] void redraw_exhausted(const char* kind) {
    throw std::runtime_error(std::string("sampler: ") + kind +
                             " rejection sampling exhausted its redraw budget; "
                             "the window set cannot satisfy the requested contexts");
}

}  // namespace

const char* pretext_name(PretextKind k) {
    switch (k) {
        case PretextKind::rp: return "rp";
        case PretextKind::ts: return "ts";
        case PretextKind::fs: return "fs";
    }
    throw std::logic_error("pretext_name: bad kind");
}

PretextKind pretext_from_name(const std::string& name) {
    if (name == "rp") return PretextKind::rp;
    if (name == "ts") return PretextKind::ts;
    if (name == "fs") return PretextKind::fs;
    throw std::invalid_argument("unknown pretext task '" + name +
                                "' (expected rp, ts, or fs)");
}

void SamplerConfig::validate() const {
    if (tau_pos_s <= 0.0 || tau_neg_s <= 0.0)
        throw std::invalid_argument("sampler: tau_pos_s and tau_neg_s must be positive");
    if (tau_pos_s > tau_neg_s)
        throw std::invalid_argument("sampler: tau_pos_s must be <= tau_neg_s");
    if (examples_per_recording < 1)
        throw std::invalid_argument("sampler: examples_per_recording must be >= 1");
    if (fs_tie_epsilon < 0.0)
        throw std::invalid_argument("sampler: fs_tie_epsilon must be >= 0");
    if (pos_fraction <= 0.0 || pos_fraction >= 1.0)
        throw std::invalid_argument("sampler: pos_fraction must be in (0, 1)");
}

TernaryLabel label_rp(double t_s, double t_prime_s, const SamplerConfig& cfg) {
    if (t_s == t_prime_s)
        throw std::invalid_argument("label_rp: the two windows must be distinct");
    double delta = std::abs(t_s - t_prime_s);
    if (delta <= cfg.tau_pos_s) return TernaryLabel::one;
    if (delta > cfg.tau_neg_s) return TernaryLabel::zero;
    return TernaryLabel::discard;
}

int label_ts(double t_s, double t_prime_s, double t_double_prime_s) {
    if (t_s == t_prime_s || t_prime_s == t_double_prime_s || t_s == t_double_prime_s)
        throw std::invalid_argument("label_ts: the three windows must be distinct");
    if (!(t_s < t_double_prime_s))
        throw std::invalid_argument("label_ts: requires t < t''");
    return (t_s < t_prime_s && t_prime_s < t_double_prime_s) ? 1 : 0;
}

TernaryLabel label_fs(const PsdEstimate& anchor, const PsdEstimate& prime,
                      const PsdEstimate& double_prime, const SamplerConfig& cfg) {
    double d_prime = mean_channel_hd(anchor, prime);
    double d_double_prime = mean_channel_hd(anchor, double_prime);
    if (d_prime > d_double_prime + cfg.fs_tie_epsilon) return TernaryLabel::one;
    if (d_prime < d_double_prime - cfg.fs_tie_epsilon) return TernaryLabel::zero;
    return TernaryLabel::discard;
}

std::vector<PretextExample> sample_rp(const std::vector<Window>& windows,
                                      double sample_rate, const SamplerConfig& cfg) {
    cfg.validate();
    Ctx ctx = window_context(windows, sample_rate);
    std::size_t n = ctx.t.size();

    std::vector<std::vector<std::size_t>> pos(n), neg(n);
    bool any_pos = false, any_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            switch (label_rp(ctx.t[i], ctx.t[j], cfg)) {
                case TernaryLabel::one: pos[i].push_back(j); break;
                case TernaryLabel::zero: neg[i].push_back(j); break;
                case TernaryLabel::discard: break;
            }
        }
        any_pos = any_pos || !pos[i].empty();
        any_neg = any_neg || !neg[i].empty();
    }
    if (!any_pos)
        throw std::runtime_error(
            "sample_rp: no window has a positive context (recording too sparse for "
            "tau_pos " + std::to_string(cfg.tau_pos_s) + " s)");
    if (!any_neg)
        throw std::runtime_error(
            "sample_rp: no window has a negative context (recording too short for "
            "tau_neg " + std::to_string(cfg.tau_neg_s) + " s)");

    Rng rng(derive_seed(cfg.seed, "rp/" + ctx.ids[0]));
    std::vector<PretextExample> out;
    out.reserve(cfg.examples_per_recording);
    while (out.size() < cfg.examples_per_recording) {
        // the branch is drawn once per example; only the anchor is redrawn,
        // so rejections cannot skew the class balance
        bool positive = rng.bernoulli(cfg.pos_fraction);
        std::size_t anchor = rng.uniform_int(n);
        for (std::size_t tries = 0; (positive ? pos : neg)[anchor].empty(); ++tries) {
            if (tries > kMaxRedraws) redraw_exhausted("rp");
            anchor = rng.uniform_int(n);
        }
        const auto& branch = positive ? pos[anchor] : neg[anchor];
        std::size_t other = branch[rng.uniform_int(branch.size())];
        out.push_back({PretextKind::rp,
                       {ctx.ref(anchor), ctx.ref(other)},
                       positive ? 1 : 0});
    }
    return out;
}

std::vector<PretextExample> sample_ts(const std::vector<Window>& windows,
                                      double sample_rate, const SamplerConfig& cfg) {
    cfg.validate();
    Ctx ctx = window_context(windows, sample_rate);
    std::size_t n = ctx.t.size();

    // after[i]: windows in (t_i, t_i + tau_pos], the t'' candidates
    // neg[i]:   windows with |t - t_i| > tau_neg on either side
    std::vector<std::vector<std::size_t>> after(n), neg(n);
    bool any_pos_anchor = false, any_neg_anchor = false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double d = ctx.t[j] - ctx.t[i];
            if (d > 0.0 && d <= cfg.tau_pos_s) after[i].push_back(j);
            if (std::abs(d) > cfg.tau_neg_s) neg[i].push_back(j);
        }
        // a positive needs t < t' < t'' <= t + tau_pos: two candidates after
        // the anchor, so the later one has an in-between
        any_pos_anchor = any_pos_anchor || after[i].size() >= 2;
        any_neg_anchor = any_neg_anchor || (!neg[i].empty() && !after[i].empty());
    }
    if (!any_pos_anchor)
        throw std::runtime_error(
            "sample_ts: no window admits an ordered in-between triple within tau_pos " +
            std::to_string(cfg.tau_pos_s) + " s");
    if (!any_neg_anchor)
        throw std::runtime_error(
            "sample_ts: no window has both a t'' candidate and a negative context "
            "beyond tau_neg " + std::to_string(cfg.tau_neg_s) + " s");

    Rng rng(derive_seed(cfg.seed, "ts/" + ctx.ids[0]));
    std::vector<PretextExample> out;
    out.reserve(cfg.examples_per_recording);
    while (out.size() < cfg.examples_per_recording) {
        // as in sample_rp: branch first, then redraw the anchor (and for
        // positives the t'' candidate) until the branch can emit
        bool positive = rng.bernoulli(cfg.pos_fraction);
        std::size_t anchor = rng.uniform_int(n);
        if (positive) {
            for (std::size_t tries = 0; after[anchor].size() < 2; ++tries) {
                if (tries > kMaxRedraws) redraw_exhausted("ts");
                anchor = rng.uniform_int(n);
            }
            // draw t'' within tau_pos after the anchor; if nothing lies
            // strictly between, redraw t''
            std::size_t dpp = after[anchor][rng.uniform_int(after[anchor].size())];
            for (std::size_t tries = 0; ctx.t[dpp] <= ctx.t[after[anchor][0]]; ++tries) {
                if (tries > kMaxRedraws) redraw_exhausted("ts");
                dpp = after[anchor][rng.uniform_int(after[anchor].size())];
            }
            std::vector<std::size_t> between;
            for (std::size_t j : after[anchor])
                if (ctx.t[j] < ctx.t[dpp]) between.push_back(j);
            std::size_t mid = between[rng.uniform_int(between.size())];
            out.push_back({PretextKind::ts,
                           {ctx.ref(anchor), ctx.ref(mid), ctx.ref(dpp)},
                           1});
        } else {
            for (std::size_t tries = 0;
                 neg[anchor].empty() || after[anchor].empty(); ++tries) {
                if (tries > kMaxRedraws) redraw_exhausted("ts");
                anchor = rng.uniform_int(n);
            }
            std::size_t dpp = after[anchor][rng.uniform_int(after[anchor].size())];
            std::size_t far = neg[anchor][rng.uniform_int(neg[anchor].size())];
            out.push_back({PretextKind::ts,
                           {ctx.ref(anchor), ctx.ref(far), ctx.ref(dpp)},
                           0});
        }
    }
    return out;
}

std::vector<PretextExample> sample_fs(const std::vector<Window>& windows,
                                      double sample_rate, const SamplerConfig& cfg,
                                      const WelchConfig& welch) {
    cfg.validate();
    Ctx ctx = window_context(windows, sample_rate);
    std::size_t n = ctx.t.size();
    if (n < 3)
        throw std::runtime_error("sample_fs: needs at least 3 windows, got " +
                                 std::to_string(n));

    // one PSD per window, reused across examples
    std::vector<PsdEstimate> psd;
    psd.reserve(n);
    for (const auto& w : windows) psd.push_back(welch_psd(w.data, sample_rate, welch));

    Rng rng(derive_seed(cfg.seed, "fs/" + ctx.ids[0]));
    std::vector<PretextExample> out;
    out.reserve(cfg.examples_per_recording);
    std::size_t discards = 0;
    while (out.size() < cfg.examples_per_recording) {
        // ordered triple, uniform without replacement
        std::size_t a = rng.uniform_int(n);
        std::size_t b = rng.uniform_int(n - 1);
        if (b >= a) ++b;
        std::size_t c = rng.uniform_int(n - 2);
        if (c >= std::min(a, b)) ++c;
        if (c >= std::max(a, b)) ++c;

        TernaryLabel label = label_fs(psd[a], psd[b], psd[c], cfg);
        if (label == TernaryLabel::discard) {
            if (++discards > kMaxRedraws)
                throw std::runtime_error(
                    "sample_fs: every candidate triple ties within fs_tie_epsilon; "
                    "the windows are spectrally indistinguishable");
            continue;
        }
        out.push_back({PretextKind::fs,
                       {ctx.ref(a), ctx.ref(b), ctx.ref(c)},
                       label == TernaryLabel::one ? 1 : 0});
    }
    return out;
}

void write_examples(const std::vector<PretextExample>& examples,
                    const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("examples: cannot open " + path + " for writing");
    f << "kind,label,refs\n";
    for (const auto& ex : examples) {
        std::size_t want = ex.kind == PretextKind::rp ? 2u : 3u;
        if (ex.refs.size() != want)
            throw std::invalid_argument("examples: ref count does not match kind");
        f << pretext_name(ex.kind) << ',' << ex.label;
        for (const auto& r : ex.refs) {
            if (r.recording_id.find(',') != std::string::npos ||
                r.recording_id.find(':') != std::string::npos)
                throw std::invalid_argument(
                    "examples: recording id '" + r.recording_id +
                    "' contains a reserved character (,:)");
            f << ',' << r.recording_id << ':' << r.start_sample;
        }
        f << '\n';
    }
    f.flush();
    if (!f) throw std::runtime_error("examples: write failed for " + path);
}

std::vector<PretextExample> read_examples(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("examples: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "kind,label,refs")
        throw std::runtime_error("examples: bad header in " + path);
    std::vector<PretextExample> out;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        PretextExample ex;
        if (!std::getline(ss, field, ','))
            throw std::runtime_error("examples: short row at line " +
                                     std::to_string(lineno));
        ex.kind = pretext_from_name(field);
        if (!std::getline(ss, field, ','))
            throw std::runtime_error("examples: missing label at line " +
                                     std::to_string(lineno));
        if (field != "0" && field != "1")
            throw std::runtime_error("examples: label must be 0 or 1 at line " +
                                     std::to_string(lineno));
        ex.label = field == "1" ? 1 : 0;
        while (std::getline(ss, field, ',')) {
            auto colon = field.find(':');
            if (colon == std::string::npos || colon == 0)
                throw std::runtime_error("examples: malformed ref at line " +
                                         std::to_string(lineno));
            WindowRef r;
            r.recording_id = field.substr(0, colon);
            try {
                r.start_sample = std::stoull(field.substr(colon + 1));
            } catch (const std::exception&) {
                throw std::runtime_error("examples: malformed ref offset at line " +
                                         std::to_string(lineno));
            }
            ex.refs.push_back(std::move(r));
        }
        std::size_t want = ex.kind == PretextKind::rp ? 2u : 3u;
        if (ex.refs.size() != want)
            throw std::runtime_error("examples: expected " + std::to_string(want) +
                                     " refs at line " + std::to_string(lineno));
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace dstf
