#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dstf {

enum class SleepStage : int { W = 0, N1 = 1, N2 = 2, N3 = 3, R = 4 };

constexpr std::size_t kNumStages = 5;

const char* stage_name(SleepStage s);
SleepStage stage_from_code(int code);

struct StageSpan {
    std::size_t start_sample = 0;
    SleepStage stage = SleepStage::W;
};

// Samples are stored as 32-bit floats: that is the raw on-disk sample type,
// so in-memory recordings round-trip bit-exactly through write_raw/read_raw.
struct Recording {
    std::vector<std::string> channels;
    double sample_rate = 0.0;
    std::vector<std::vector<float>> data;  // channel-major
    std::vector<StageSpan> stage_annotations;
    std::string id;

    std::size_t n_samples() const { return data.empty() ? 0 : data[0].size(); }
    void validate() const;  // throws on broken invariants
};

struct BandComponent {
    double center_hz = 0.0;
    double bandwidth_hz = 0.0;  // sinusoid frequency drawn uniformly in center +- bw/2
    double amplitude = 0.0;
};

struct StageRecipe {
    std::vector<BandComponent> bands;
    double noise_amplitude = 0.0;
};

struct SynthSpec {
    std::size_t n_recordings = 10;
    double duration_s = 1800.0;
    double sample_rate = 200.0;
    std::size_t n_channels = 2;
    std::array<StageRecipe, kNumStages> stage_profile;  // indexed by stage code
    double epoch_s = 30.0;
    double markov_self_p = 0.85;  // remaining mass spread evenly over other stages
    std::uint64_t seed = 0;
};

// Canonical EEG-band stand-in profile (W alpha-dominant, N1 theta, N2 spindle
// band, N3 high-amplitude delta, R mixed theta/alpha).
std::array<StageRecipe, kNumStages> default_stage_profile();

Recording read_edf(const std::string& path);
Recording read_raw(const std::string& path);
void write_raw(const Recording& rec, const std::string& path);
std::vector<Recording> generate_synthetic(const SynthSpec& spec);

}  // namespace dstf
