#pragma once

#include <functional>
#include <span>
#include <vector>

#include "env.hpp"
#include "micro_model.hpp"

namespace avar {

// Visual-anchored reward shaping plus group-relative policy optimization:
// shaped rewards, group-normalized advantages, clipped surrogate with an
// exact per-token categorical KL penalty against a frozen reference policy.

struct RewardWeights {
    double lambda_v = 0.3;
    double lambda_f = 0.1;
    double epsilon = 1e-6;  // stability constant in the visual-reward ratio
};

struct RewardBreakdown {
    double accuracy = 0.0;  // {0,1}
    double visual = 0.0;    // >= 0; forced to 0 when accuracy = 0
    double format = 0.0;    // {0,1}
    double total = 0.0;
};

// 0 when incorrect; otherwise the response-token mean over layers of
// image-key mass over system-key mass (+ epsilon), with heads averaged into
// one attention matrix per layer before the ratio.
double visual_reward(const AttentionTensor& attn, const TokenSegmentation& seg, bool correct,
                     double epsilon = 1e-6);

RewardBreakdown total_reward(int accuracy, double visual, int format,
                             const RewardWeights& w = {});

// A_i = (r_i - mean) / population std; all zeros when std < 1e-8.
std::vector<double> group_advantages(std::span<const double> rewards);

struct Trajectory {
    std::vector<int> tokens;  // prompt + response
    TokenSegmentation seg;    // response span covers the generated suffix
    std::vector<int> response;
    // Per response token: log-prob of the sampled symbol under the behavior
    // policy, frozen at sampling time.
    std::vector<double> logp_old;
    // Per response token: full log-softmax rows (|o| x vocab). ref rows are
    // frozen; theta rows are refreshed before each optimization pass.
    std::vector<double> ref_logp_rows;
    std::vector<double> theta_logp_rows;
    RewardBreakdown reward;
    double vas = 0.0;  // model-level VAS of the generation trace, diagnostic
};

struct RolloutGroup {
    Episode episode;  // the shared prompt
    std::vector<Trajectory> trajectories;
    std::vector<double> advantages;
};

struct RLConfig {
    int group_size = 8;
    double clip_range = 0.2;  // surrogate clip half-width, in (0,1)
    double kl_coeff = 0.01;   // weight of the KL(pi_theta || pi_ref) penalty
    double lr = 0.05;
    int steps = 200;
    int prompts_per_step = 1;  // independent rollout groups averaged per update
    int epochs_per_batch = 1;  // optimizer passes per rollout batch
    int max_new = 5;           // decode budget per episode
    uint64_t seed = 1;
    RewardWeights reward;
};

ValidationResult validate_rl_config(const RLConfig& cfg);

struct GrpoResult {
    double loss = 0.0;       // negated objective
    double surrogate = 0.0;  // mean clipped surrogate term
    double kl = 0.0;         // mean per-token KL
    double mean_ratio = 1.0;
    // d loss / d theta_logp_rows per trajectory, treating the log-prob rows
    // as free variables; callers chain through log-softmax into logits.
    std::vector<std::vector<double>> dlogp_rows;
};

GrpoResult grpo_loss(const RolloutGroup& group, const RLConfig& cfg);

// Sample one episode and G stochastic rollouts from pi_theta (temperature 1),
// score each, freeze behavior log-probs and reference rows, and normalize
// advantages. ref == nullptr means the reference equals the sampling policy.
RolloutGroup rollout(const MicroModelParameters& params, const MicroModelParameters* ref,
                     const GroundedLookupEnv& env, int group_size, int max_new, uint64_t seed,
                     const RewardWeights& weights);

// grpo_loss under current params: refreshes each trajectory's theta rows via
// a fresh forward, then chains the row gradients through log-softmax and
// backward into one parameter gradient.
struct GrpoParamGrad {
    double loss = 0.0;
    GrpoResult detail;
    std::vector<double> grads;
};
GrpoParamGrad grpo_param_grad(const MicroModelParameters& params, RolloutGroup& group,
                              const RLConfig& cfg);

struct RLStepStats {
    int step = 0;
    double mean_reward = 0.0;
    double mean_accuracy = 0.0;
    double mean_visual_reward = 0.0;
    double mean_vas = 0.0;
    double kl = 0.0;
    double loss = 0.0;
};

// rollout -> advantages -> grpo_loss -> backward -> sgd_step, cfg.steps times.
// The reference policy is the parameter state at entry, frozen.
std::vector<RLStepStats> train_rl(MicroModelParameters& params, const GroundedLookupEnv& env,
                                  const RLConfig& cfg,
                                  const std::function<void(const RLStepStats&)>& on_step = {});

}  // namespace avar
