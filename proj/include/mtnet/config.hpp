#pragma once
// Architectural and training hyperparameters plus the flat key=value config
// file format. CLI flags override file values.

#include <array>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mtnet {

struct ModelConfig {
    std::array<std::int64_t, 4> stage_channels{16, 32, 64, 128};
    std::int64_t window_m = 8;       // LTTL window side
    std::int64_t sr_ratio3 = 4;      // GTTL key/value reduction, stage 3
    std::int64_t sr_ratio4 = 2;      // stage 4
    std::int64_t heads = 4;
    std::int64_t clip_len = 12;      // inference clip length
    std::int64_t train_clip_len = 3;
    std::int64_t input_side = 512;
    double lambda = 0.5;             // auxiliary loss weight
    std::int64_t mtt_depth = 1;
    bool mtt_enabled = true;
    bool shared_encoder = true;
    bool positional_encoding = false;  // reserved; no encoding is defined
    std::string decoder_norm = "bn";   // "bn" or "ln"

    void validate() const {
        if (input_side <= 0 || input_side % 32 != 0)
            throw std::runtime_error("config: input_side must be a positive multiple of 32");
        for (auto c : stage_channels)
            if (c < 4) throw std::runtime_error("config: stage channels must be >= 4");
        if (window_m < 1) throw std::runtime_error("config: window_m must be >= 1");
        if (heads < 1 || stage_channels[2] % heads != 0 || stage_channels[3] % heads != 0)
            throw std::runtime_error("config: heads must divide stage 3 and 4 channels");
        const std::int64_t s3 = input_side / 16, s4 = input_side / 32;
        if (sr_ratio3 < 1 || s3 % sr_ratio3 != 0)
            throw std::runtime_error("config: sr_ratio3 must divide the stage-3 extent");
        if (sr_ratio4 < 1 || s4 % sr_ratio4 != 0)
            throw std::runtime_error("config: sr_ratio4 must divide the stage-4 extent");
        if (clip_len < 1 || train_clip_len < 1)
            throw std::runtime_error("config: clip lengths must be >= 1");
        if (mtt_depth < 1) throw std::runtime_error("config: mtt_depth must be >= 1");
        if (decoder_norm != "bn" && decoder_norm != "ln")
            throw std::runtime_error("config: decoder_norm must be 'bn' or 'ln'");
        if (lambda < 0) throw std::runtime_error("config: lambda must be >= 0");
    }
};

struct TrainConfig {
    std::uint64_t seed = 7;
    std::int64_t steps = 500;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    bool reverse_augment = true;  // clip reversal with probability 0.5
    // Synthetic task knobs (see synthetic.hpp).
    std::string object_shape = "square";   // square | disc
    std::string trajectory = "linear";     // linear | sinusoidal
    double velocity = 4.0;                 // px/frame
    std::int64_t distractors = 2;
    double noise_sigma = 0.02;
};

// Flat key=value text config; '#' starts a comment.
std::map<std::string, std::string> parse_kv_file(const std::string& path);
std::map<std::string, std::string> parse_kv_string(const std::string& text);

void apply_model_config(ModelConfig& mc, const std::map<std::string, std::string>& kv);
void apply_train_config(TrainConfig& tc, const std::map<std::string, std::string>& kv);

}  // namespace mtnet
