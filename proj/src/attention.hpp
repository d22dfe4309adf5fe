#pragma once

#include <span>
#include <vector>

#include "error.hpp"
#include "segmentation.hpp"

namespace avar {

// Dense L x H x T x T record of row-stochastic attention weights,
// layout [layer][head][query][key]. Masked entries are stored as zeros;
// at desk scale (T up to a few hundred) dense keeps the dump format trivial.
struct AttentionTensor {
    int layers = 0;
    int heads = 0;
    int seq_len = 0;
    bool causal = false;
    std::vector<double> weights;

    AttentionTensor() = default;
    AttentionTensor(int layers, int heads, int seq_len, bool causal)
        : layers(layers), heads(heads), seq_len(seq_len), causal(causal),
          weights(static_cast<size_t>(layers) * heads * seq_len * seq_len, 0.0) {}

    size_t index(int l, int h, int q, int k) const {
        return ((static_cast<size_t>(l) * heads + h) * seq_len + q) * seq_len + k;
    }
    double at(int l, int h, int q, int k) const { return weights[index(l, h, q, k)]; }
    double& at(int l, int h, int q, int k) { return weights[index(l, h, q, k)]; }

    std::span<double> row(int l, int h, int q) {
        return {weights.data() + index(l, h, q, 0), static_cast<size_t>(seq_len)};
    }
    std::span<const double> row(int l, int h, int q) const {
        return {weights.data() + index(l, h, q, 0), static_cast<size_t>(seq_len)};
    }
};

// Default row-sum tolerance: f32 dumps of real softmax rows drift at ~1e-6..1e-7.
inline constexpr double kRowSumTolDefault = 1e-5;

// Checks nonnegativity, causal zeros and row sums within row_tol.
ValidationResult validate_attention(const AttentionTensor& a, double row_tol = kRowSumTolDefault);

// Max-subtracted exponential normalization of one score row. With causal
// masking only keys k <= q are admissible; k == q is always admissible for
// q >= 0, so a fully masked row cannot occur. Output rows sum to 1 within
// 1e-12 in double precision.
void softmax_row(std::span<const double> scores, std::span<double> out, bool causal, int q);

// Row-wise softmax of a T x T score matrix (row-major).
std::vector<double> softmax_rows(const std::vector<double>& scores, int seq_len, bool causal);

// Single-layer single-head tensor from a T x T score matrix; test/dump helper.
AttentionTensor attention_from_scores(const std::vector<double>& scores, int seq_len, bool causal);

}  // namespace avar
