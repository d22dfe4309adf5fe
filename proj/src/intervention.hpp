#pragma once

#include <vector>

#include "attention.hpp"
#include "micro_model.hpp"
#include "segmentation.hpp"

namespace avar {

// Training-free reallocation: scale post-softmax attention on system keys by
// gamma, then renormalize the row. The renormalizer cancels in the
// visual/system ratio, so per-row (and hence per-head and model) VAS scales
// by exactly 1/gamma on modified layers.

struct InterventionConfig {
    double gamma = 0.5;           // in (0, 1]
    std::vector<int> layers;      // layer indices to modify; empty = all
    bool image_only = false;      // route freed mass only to image keys
};

ValidationResult validate_intervention(const InterventionConfig& cfg, int n_layers);

// One row, in place. keys limited to [0, row.size()); zero entries stay zero.
void reallocate_row(std::span<double> row, const TokenSegmentation& seg,
                    const InterventionConfig& cfg);

AttentionTensor reallocate(const AttentionTensor& a, const TokenSegmentation& seg,
                           const InterventionConfig& cfg);

// Rewrites rows of the selected layers during forward. The segmentation is
// captured by reference: generation grows it between forward passes.
AttentionRowHook make_intervention_hook(const TokenSegmentation& seg,
                                        const InterventionConfig& cfg);

struct GenerationResult {
    std::vector<int> tokens;  // prompt + generated
    TokenSegmentation seg;    // response span covers the generated suffix
    ForwardTrace trace;       // final forward pass over the whole sequence
};

// Greedy decoding with the hook applied at every forward pass. Stops at
// eos_symbol (pass a negative id to disable) or after max_new tokens.
// gamma == 1 with no layer restriction reduces to plain greedy decoding.
GenerationResult generate_with_intervention(const MicroModelParameters& params,
                                            const std::vector<int>& prompt,
                                            const TokenSegmentation& prompt_seg,
                                            const InterventionConfig& cfg, int max_new,
                                            int eos_symbol);

// Plain greedy decoding; same contract without the attention rewrite.
GenerationResult generate_greedy(const MicroModelParameters& params,
                                 const std::vector<int>& prompt,
                                 const TokenSegmentation& prompt_seg, int max_new,
                                 int eos_symbol);

}  // namespace avar
