#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "dstf/recording.hpp"
#include "dstf/rng.hpp"

namespace dstf {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

const char* kChannelNames[] = {"F3-M2", "F4-M1", "C3-M2", "C4-M1", "O1-M2", "O2-M1"};

void check_spec(const SynthSpec& spec) {
    if (spec.sample_rate <= 0.0)
        throw std::invalid_argument("synth: sample_rate must be positive");
    if (spec.n_channels == 0)
        throw std::invalid_argument("synth: n_channels must be >= 1");
    if (spec.epoch_s <= 0.0)
        throw std::invalid_argument("synth: epoch_s must be positive");
    double n_epochs = spec.duration_s / spec.epoch_s;
    if (n_epochs < 1.0 || std::abs(n_epochs - std::round(n_epochs)) > 1e-9)
        throw std::invalid_argument(
            "synth: duration_s must be a whole positive number of epochs");
    double epoch_samples = spec.epoch_s * spec.sample_rate;
    if (std::abs(epoch_samples - std::round(epoch_samples)) > 1e-9)
        throw std::invalid_argument(
            "synth: epoch_s * sample_rate must be a whole number of samples");
    if (spec.markov_self_p < 0.0 || spec.markov_self_p > 1.0)
        throw std::invalid_argument("synth: markov_self_p must be in [0, 1]");
    for (std::size_t s = 0; s < kNumStages; ++s) {
        const StageRecipe& recipe = spec.stage_profile[s];
        if (recipe.noise_amplitude < 0.0)
            throw std::invalid_argument("synth: negative noise amplitude for stage " +
                                        std::string(stage_name(SleepStage(int(s)))));
        for (const BandComponent& band : recipe.bands) {
            double top = band.center_hz + band.bandwidth_hz / 2.0;
            if (band.center_hz <= 0.0 || band.bandwidth_hz < 0.0 ||
                top >= spec.sample_rate / 2.0)
                throw std::invalid_argument(
                    "synth: stage " + std::string(stage_name(SleepStage(int(s)))) +
                    " band at " + std::to_string(band.center_hz) +
                    " Hz falls outside (0, Nyquist)");
        }
    }
}

}  // namespace

std::vector<Recording> generate_synthetic(const SynthSpec& spec) {
    check_spec(spec);
    auto n_epochs = static_cast<std::size_t>(std::round(spec.duration_s / spec.epoch_s));
    auto epoch_samples =
        static_cast<std::size_t>(std::round(spec.epoch_s * spec.sample_rate));

    std::vector<std::string> channels(spec.n_channels);
    for (std::size_t c = 0; c < spec.n_channels; ++c) {
        if (c < sizeof(kChannelNames) / sizeof(kChannelNames[0]))
            channels[c] = kChannelNames[c];
        else
            channels[c] = "EEG" + std::to_string(c + 1);
    }

    std::vector<Recording> out;
    out.reserve(spec.n_recordings);
    for (std::size_t r = 0; r < spec.n_recordings; ++r) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "synth-%03zu", r);
        Recording rec;
        rec.id = idbuf;
        rec.channels = channels;
        rec.sample_rate = spec.sample_rate;
        rec.data.assign(spec.n_channels, std::vector<float>(n_epochs * epoch_samples));
        rec.stage_annotations.resize(n_epochs);

        Rng rng(derive_seed(spec.seed, "synth/" + rec.id));

        // Stage sequence first: first epoch uniform, then a sticky Markov walk.
        std::vector<SleepStage> stages(n_epochs);
        auto cur = static_cast<int>(rng.uniform_int(kNumStages));
        stages[0] = SleepStage(cur);
        for (std::size_t e = 1; e < n_epochs; ++e) {
            if (!rng.bernoulli(spec.markov_self_p)) {
                auto hop = static_cast<int>(rng.uniform_int(kNumStages - 1));
                cur = (cur + 1 + hop) % static_cast<int>(kNumStages);
            }
            stages[e] = SleepStage(cur);
        }

        for (std::size_t e = 0; e < n_epochs; ++e) {
            rec.stage_annotations[e] = {e * epoch_samples, stages[e]};
            const StageRecipe& recipe = spec.stage_profile[static_cast<int>(stages[e])];
            for (std::size_t c = 0; c < spec.n_channels; ++c) {
                // Fresh frequency jitter and phase per epoch, channel, and band.
                std::vector<double> freq(recipe.bands.size());
                std::vector<double> phase(recipe.bands.size());
                for (std::size_t b = 0; b < recipe.bands.size(); ++b) {
                    const BandComponent& band = recipe.bands[b];
                    freq[b] = band.bandwidth_hz > 0.0
                                  ? rng.uniform(band.center_hz - band.bandwidth_hz / 2.0,
                                                band.center_hz + band.bandwidth_hz / 2.0)
                                  : band.center_hz;
                    phase[b] = rng.uniform(0.0, kTwoPi);
                }
                float* dst = rec.data[c].data() + e * epoch_samples;
                for (std::size_t n = 0; n < epoch_samples; ++n) {
                    double t = static_cast<double>(n) / spec.sample_rate;
                    double x = 0.0;
                    for (std::size_t b = 0; b < recipe.bands.size(); ++b)
                        x += recipe.bands[b].amplitude *
                             std::sin(kTwoPi * freq[b] * t + phase[b]);
                    x += recipe.noise_amplitude * rng.normal();
                    dst[n] = static_cast<float>(x);
                }
            }
        }
        rec.validate();
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace dstf
