#include "attention.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace avar {

namespace {

std::string entry_str(int l, int h, int q, int k) {
    char buf[80];
    std::snprintf(buf, sizeof(buf), "(l=%d,h=%d,q=%d,k=%d)", l, h, q, k);
    return buf;
}

}  // namespace

ValidationResult validate_attention(const AttentionTensor& a, double row_tol) {
    if (row_tol <= 0.0)
        return ValidationResult::fail(Errc::invalid_argument, "row_tol must be > 0");
    if (a.layers < 1 || a.heads < 1 || a.seq_len < 1)
        return ValidationResult::fail(Errc::invalid_argument, "empty tensor dims");
    const size_t expect =
        static_cast<size_t>(a.layers) * a.heads * a.seq_len * a.seq_len;
    if (a.weights.size() != expect)
        return ValidationResult::fail(Errc::shape_mismatch, "weights size does not match dims");

    for (int l = 0; l < a.layers; ++l) {
        for (int h = 0; h < a.heads; ++h) {
            for (int q = 0; q < a.seq_len; ++q) {
                double sum = 0.0;
                for (int k = 0; k < a.seq_len; ++k) {
                    const double w = a.at(l, h, q, k);
                    if (!(w >= 0.0) || !std::isfinite(w)) {
                        char buf[64];
                        std::snprintf(buf, sizeof(buf), " value %.17g", w);
                        return ValidationResult::fail(
                            Errc::negative_entry,
                            "NegativeEntry at " + entry_str(l, h, q, k) + buf);
                    }
                    if (a.causal && k > q && w != 0.0)
                        return ValidationResult::fail(
                            Errc::causal_violation,
                            "CausalViolation at " + entry_str(l, h, q, k));
                    sum += w;
                }
                if (std::abs(sum - 1.0) > row_tol) {
                    char buf[64];
                    std::snprintf(buf, sizeof(buf), " sum %.17g", sum);
                    return ValidationResult::fail(
                        Errc::row_sum, "RowSumError at " + entry_str(l, h, q, -1) + buf);
                }
            }
        }
    }
    return ValidationResult::valid();
}

void softmax_row(std::span<const double> scores, std::span<double> out, bool causal, int q) {
    const int t = static_cast<int>(scores.size());
    const int limit = causal ? q + 1 : t;
    if (limit <= 0) throw Error(Errc::invalid_argument, "AllMasked: row has no admissible keys");

    double maxv = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < limit; ++k) maxv = std::max(maxv, scores[k]);
    if (!std::isfinite(maxv))
        throw Error(Errc::nonfinite_input, "softmax_row: non-finite score");

    double denom = 0.0;
    for (int k = 0; k < limit; ++k) {
        out[k] = std::exp(scores[k] - maxv);
        denom += out[k];
    }
    for (int k = 0; k < limit; ++k) out[k] /= denom;
    for (int k = limit; k < t; ++k) out[k] = 0.0;
}

std::vector<double> softmax_rows(const std::vector<double>& scores, int seq_len, bool causal) {
    if (seq_len < 1 || scores.size() != static_cast<size_t>(seq_len) * seq_len)
        throw Error(Errc::shape_mismatch, "softmax_rows: scores must be seq_len x seq_len");
    std::vector<double> out(scores.size());
    for (int q = 0; q < seq_len; ++q) {
        std::span<const double> in{scores.data() + static_cast<size_t>(q) * seq_len,
                                   static_cast<size_t>(seq_len)};
        std::span<double> dst{out.data() + static_cast<size_t>(q) * seq_len,
                              static_cast<size_t>(seq_len)};
        softmax_row(in, dst, causal, q);
    }
    return out;
}

AttentionTensor attention_from_scores(const std::vector<double>& scores, int seq_len,
                                      bool causal) {
    AttentionTensor a(1, 1, seq_len, causal);
    a.weights = softmax_rows(scores, seq_len, causal);
    return a;
}

}  // namespace avar
