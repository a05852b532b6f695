#include "dstf/recording.hpp"

#include <stdexcept>

namespace dstf {

const char* stage_name(SleepStage s) {
    switch (s) {
        case SleepStage::W: return "W";
        case SleepStage::N1: return "N1";
        case SleepStage::N2: return "N2";
        case SleepStage::N3: return "N3";
        case SleepStage::R: return "R";
    }
    throw std::invalid_argument("stage_name: bad stage code");
}

SleepStage stage_from_code(int code) {
    if (code < 0 || code >= static_cast<int>(kNumStages))
        throw std::invalid_argument("stage_from_code: code " + std::to_string(code) +
                                    " outside 0..4");
    return static_cast<SleepStage>(code);
}

void Recording::validate() const {
    if (channels.size() != data.size())
        throw std::invalid_argument("recording " + id + ": label/data count mismatch");
    if (sample_rate <= 0.0)
        throw std::invalid_argument("recording " + id + ": sample_rate must be positive");
    if (data.empty() || data[0].empty())
        throw std::invalid_argument("recording " + id + ": no samples");
    for (const auto& ch : data)
        if (ch.size() != data[0].size())
            throw std::invalid_argument("recording " + id + ": ragged channel lengths");
    if (!stage_annotations.empty()) {
        if (stage_annotations[0].start_sample != 0)
            throw std::invalid_argument("recording " + id +
                                        ": annotations must start at sample 0");
        for (std::size_t i = 1; i < stage_annotations.size(); ++i)
            if (stage_annotations[i].start_sample <=
                stage_annotations[i - 1].start_sample)
                throw std::invalid_argument(
                    "recording " + id + ": annotation starts must strictly increase");
        if (stage_annotations.back().start_sample >= n_samples())
            throw std::invalid_argument("recording " + id +
                                        ": annotation past end of data");
    }
}

std::array<StageRecipe, kNumStages> default_stage_profile() {
    std::array<StageRecipe, kNumStages> p;
    // W: alpha-dominant with a little beta
    p[0] = {{{10.0, 4.0, 1.0}, {20.0, 6.0, 0.3}}, 0.35};
    // N1: theta
    p[1] = {{{5.5, 3.0, 1.0}, {9.0, 2.0, 0.4}}, 0.35};
    // N2: spindle band bursts over theta
    p[2] = {{{13.5, 5.0, 0.9}, {5.0, 2.0, 0.5}}, 0.35};
    // N3: slow high-amplitude delta
    p[3] = {{{2.0, 3.0, 1.6}, {6.0, 2.0, 0.3}}, 0.35};
    // R: mixed theta/alpha
    p[4] = {{{7.0, 6.0, 0.8}, {11.0, 3.0, 0.5}}, 0.35};
    return p;
}

}  // namespace dstf
