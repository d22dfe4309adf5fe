#pragma once

#include <functional>
#include <string>
#include <vector>

#include "env.hpp"
#include "intervention.hpp"
#include "micro_model.hpp"
#include "objectives.hpp"
#include "rl.hpp"
#include "vas.hpp"

namespace avar {

// Supervised cold-start on grounded-lookup episodes: teacher-forced LM loss
// plus the attention-guided objectives, one episode per step.

struct TrainConfig {
    LossWeights weights;
    double lr = 0.05;
    int steps = 500;
    uint64_t seed = 1;
    QuerySet loss_query = QuerySet::Response;  // Q of the attention losses
    std::vector<int> layers;                   // targeted layers; empty = all
};

struct TrainStepStats {
    int step = 0;
    double lm = 0.0;
    double enhance_img = 0.0;
    double suppress_sys = 0.0;
    double total = 0.0;
    double mean_image_attention_mass = 0.0;
    double vas_model = 0.0;
};

// Mean over layers, heads and query rows of the attention mass on image keys.
double mean_image_mass(const AttentionTensor& a, const TokenSegmentation& seg,
                       const std::vector<int>& query_set);

std::vector<TrainStepStats> train_supervised(
    MicroModelParameters& params, const GroundedLookupEnv& env, const TrainConfig& cfg,
    const std::function<void(const TrainStepStats&)>& on_step = {});

// Fixed-seed evaluation: greedy accuracy/format plus teacher-forced
// response-row attention metrics (same token sequences for every parameter
// set, so VAS differences come from the weights alone). sampled_accuracy is
// the expected accuracy under temperature-1 decoding, the quantity policy
// optimization actually moves; greedy accuracy only tracks the mode.
struct EvalResult {
    double accuracy = 0.0;
    double format = 0.0;
    double mean_vas = 0.0;
    double mean_image_mass = 0.0;
    double sampled_accuracy = 0.0;
    // Response-row VAS of the sampled generations. mean_vas above is blind to
    // which tokens the policy prefers to emit; this is not.
    double rollout_vas = 0.0;
};

EvalResult evaluate(const MicroModelParameters& params, const GroundedLookupEnv& env,
                    int n_episodes, uint64_t seed, int samples_per_episode = 4);

// Live decoding experiment: greedy baseline vs attention-reallocated decoding
// on the same episodes, reporting mean VAS and accuracy for both runs.
struct GenExperimentResult {
    double gamma = 1.0;
    int episodes = 0;
    double vas_before = 0.0;
    double vas_after = 0.0;
    double accuracy_before = 0.0;
    double accuracy_after = 0.0;
};

GenExperimentResult gen_experiment(const MicroModelParameters& params,
                                   const GroundedLookupEnv& env, const InterventionConfig& cfg,
                                   int episodes, uint64_t seed);

// Three staged variants with shared seeds: plain LM cold start, attention-
// guided cold start, and attention-guided cold start followed by RL.
struct CompareConfig {
    ModelConfig model;
    EnvConfig env;
    TrainConfig cold;            // cold.weights used for the guided variant
    RLConfig rl;
    std::vector<uint64_t> seeds{1, 2, 3};
    int eval_episodes = 64;
    uint64_t eval_seed = 9001;
};

struct CompareRow {
    std::string variant;  // "lm" | "attn" | "rl"
    uint64_t seed = 0;
    double vas = 0.0;
    double accuracy = 0.0;
};

std::vector<CompareRow> experiment_compare(const CompareConfig& cfg);

}  // namespace avar
