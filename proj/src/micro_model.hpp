#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "attention.hpp"
#include "error.hpp"
#include "segmentation.hpp"

namespace avar {

// Tiny instrumented causal transformer over discrete symbols. Image-span
// positions index a separate embedding table; everything else is text vocab.
// No norms, no biases, no dropout: the point is exact reverse-mode gradients
// through both the logits and the post-softmax attention weights.

struct ModelConfig {
    int vocab_size = 32;        // text symbols, includes specials
    int image_vocab_size = 24;  // discrete image-patch symbols
    int d_model = 32;
    int n_layers = 2;
    int n_heads = 2;
    int max_seq_len = 48;
    uint64_t seed = 1;
};

ValidationResult validate_config(const ModelConfig& cfg);

// Feed-forward hidden width is a fixed 2x expansion.
inline constexpr int kFfnMult = 2;

// Offsets into the flat parameter vector. Traversal order is part of the
// checkpoint format: tok_emb, img_emb, pos_emb, then per layer
// (wq, wk, wv, wo, w1, w2), then the output head. All matrices row-major.
struct ParamLayout {
    struct Layer {
        size_t wq, wk, wv, wo;  // d x d each
        size_t w1;              // d x f
        size_t w2;              // f x d
    };
    size_t tok_emb = 0;  // vocab x d
    size_t img_emb = 0;  // image_vocab x d
    size_t pos_emb = 0;  // max_seq x d
    std::vector<Layer> layers;
    size_t head = 0;  // d x vocab
    size_t total = 0;
};

ParamLayout make_layout(const ModelConfig& cfg);

struct MicroModelParameters {
    ModelConfig config;
    ParamLayout layout;
    std::vector<double> data;
    // Bumped by every mutation; traces remember the value they saw so that
    // backward can reject parameters that changed since the forward pass.
    uint64_t version = 0;

    double* at(size_t offset) { return data.data() + offset; }
    const double* at(size_t offset) const { return data.data() + offset; }
};

MicroModelParameters init_params(const ModelConfig& cfg, uint64_t seed);
MicroModelParameters init_params(const ModelConfig& cfg);  // uses cfg.seed

struct ForwardTrace {
    std::vector<int> tokens;
    TokenSegmentation seg;
    int seq_len = 0;
    std::vector<double> logits;  // seq_len x vocab
    AttentionTensor attention;   // post-softmax (post-hook if one was given)

    struct LayerCache {
        std::vector<double> x_in;    // t x d
        std::vector<double> q, k, v; // t x d
        std::vector<double> mixed;   // t x d, heads concatenated
        std::vector<double> x_mid;   // t x d, after attention residual
        std::vector<double> u;       // t x f, pre-GELU
        std::vector<double> g;       // t x f, post-GELU
    };
    std::vector<LayerCache> layers;
    std::vector<double> x_final;  // t x d

    uint64_t params_version = 0;
    // Set when an attention hook rewrote rows in flight; such traces are
    // analysis-only because the cached activations no longer match the
    // softmax outputs backward would differentiate through.
    bool intervened = false;
};

// Observes or rewrites one post-softmax attention row (keys [0, q] under the
// causal mask; the rest of the row is zero and must stay zero).
using AttentionRowHook =
    std::function<void(int layer, int head, int query, std::span<double> row)>;

ForwardTrace forward(const MicroModelParameters& params, const std::vector<int>& tokens,
                     const TokenSegmentation& seg, const AttentionRowHook* hook = nullptr);

// Mean next-token NLL over the response span. targets[j] is the symbol at
// position seg.response_span.begin + j, predicted from the preceding row.
double lm_loss(const ForwardTrace& trace, const std::vector<int>& targets);

// Same loss plus d loss / d logits (seq_len x vocab, zeros off the span).
struct LmLossGrad {
    double loss = 0.0;
    std::vector<double> dlogits;
};
LmLossGrad lm_loss_grad(const ForwardTrace& trace, const std::vector<int>& targets);

// Tokens the response span holds; the usual teacher-forcing targets.
std::vector<int> response_targets(const ForwardTrace& trace);

// Reverse-mode gradients for any scalar with upstream gradients on logits
// (seq_len x vocab; empty means zero) and on post-softmax attention weights
// (layout of AttentionTensor::weights; empty means zero). Attention gradients
// pass through the exact softmax Jacobian diag(p) - p p^T per row.
std::vector<double> backward(const MicroModelParameters& params, const ForwardTrace& trace,
                             const std::vector<double>& dlogits,
                             const std::vector<double>& dattention);

// Central differences (f(t+h e_i) - f(t-h e_i)) / 2h per coordinate.
std::vector<double> finite_diff_grad(
    const std::function<double(const MicroModelParameters&)>& loss_fn,
    const MicroModelParameters& params, double h);

void sgd_step(MicroModelParameters& params, const std::vector<double>& grads, double lr);

// Probability helpers on trace logits.
std::vector<double> softmax_logits_row(const ForwardTrace& trace, int pos);
std::vector<double> log_softmax_logits_row(const ForwardTrace& trace, int pos);

// Checkpoint: magic, u32 LE header length, JSON header {version, config,
// step, param_count}, then binary64 LE payload in layout traversal order.
inline constexpr char kCheckpointMagic[9] = "AVARCKP1";

struct Checkpoint {
    MicroModelParameters params;
    int64_t step = 0;
};

std::vector<uint8_t> write_checkpoint(const MicroModelParameters& params, int64_t step);
Checkpoint read_checkpoint(std::span<const uint8_t> bytes);
void save_checkpoint_file(const std::string& path, const MicroModelParameters& params,
                          int64_t step);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace avar
