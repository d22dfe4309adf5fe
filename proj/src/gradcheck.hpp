#pragma once

#include <string>
#include <vector>

#include "env.hpp"
#include "micro_model.hpp"

namespace avar {

// Central-difference verification of every analytic gradient path: LM loss,
// each attention loss, the weighted total, and the GRPO objective. Runs on a
// small configuration so the full parameter sweep stays cheap.

struct GradcheckConfig {
    ModelConfig model{.vocab_size = 16,
                      .image_vocab_size = 12,
                      .d_model = 8,
                      .n_layers = 1,
                      .n_heads = 2,
                      .max_seq_len = 24,
                      .seed = 1};
    EnvConfig env;
    std::vector<uint64_t> seeds{1, 2, 3};
    double h = 1e-5;
    double tolerance = 1e-4;  // max relative error, |a-b| / max(1e-8, |a|+|b|)
};

struct GradcheckEntry {
    std::string loss;  // "lm" | "enhance_img" | "suppress_sys" | "total" | "grpo"
    uint64_t seed = 0;
    double max_rel_error = 0.0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    bool pass = false;
    size_t param_count = 0;
};

double rel_error(double a, double b);

GradcheckReport gradcheck_run(const GradcheckConfig& cfg);

}  // namespace avar
