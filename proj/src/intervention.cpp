#include "intervention.hpp"

#include <algorithm>
#include <cmath>

namespace avar {

namespace {

bool layer_selected(const std::vector<int>& layers, int l) {
    return layers.empty() || std::find(layers.begin(), layers.end(), l) != layers.end();
}

int argmax_row(const ForwardTrace& tr, int pos, int vocab) {
    const double* z = tr.logits.data() + static_cast<size_t>(pos) * vocab;
    int best = 0;
    for (int v = 1; v < vocab; ++v)
        if (z[v] > z[best]) best = v;
    return best;
}

}  // namespace

ValidationResult validate_intervention(const InterventionConfig& cfg, int n_layers) {
    if (!(cfg.gamma > 0.0) || !(cfg.gamma <= 1.0))
        return ValidationResult::fail(Errc::invalid_gamma, "gamma must be in (0, 1]");
    for (int l : cfg.layers)
        if (l < 0 || l >= n_layers)
            return ValidationResult::fail(Errc::out_of_range,
                                          "layer index " + std::to_string(l) +
                                              " outside [0, " + std::to_string(n_layers) + ")");
    return ValidationResult::valid();
}

void reallocate_row(std::span<double> row, const TokenSegmentation& seg,
                    const InterventionConfig& cfg) {
    if (cfg.gamma == 1.0) return;
    const int n = static_cast<int>(row.size());
    const int sys_begin = std::min(seg.system_span.begin, n);
    const int sys_end = std::min(seg.system_span.end, n);

    double sys_mass = 0.0;
    for (int k = sys_begin; k < sys_end; ++k) sys_mass += row[k];
    if (sys_mass == 0.0) return;

    for (int k = sys_begin; k < sys_end; ++k) row[k] *= cfg.gamma;

    if (cfg.image_only) {
        double img_mass = 0.0;
        for (const Span& s : seg.image_spans)
            for (int k = s.begin; k < std::min(s.end, n); ++k) img_mass += row[k];
        if (img_mass > 0.0) {
            const double scale = 1.0 + (1.0 - cfg.gamma) * sys_mass / img_mass;
            for (const Span& s : seg.image_spans)
                for (int k = s.begin; k < std::min(s.end, n); ++k) row[k] *= scale;
            return;
        }
        // No image mass in this row: fall back to proportional renormalization.
    }

    double total = 0.0;
    for (int k = 0; k < n; ++k) total += row[k];
    if (total <= 0.0) return;
    for (int k = 0; k < n; ++k) row[k] /= total;
}

AttentionTensor reallocate(const AttentionTensor& a, const TokenSegmentation& seg,
                           const InterventionConfig& cfg) {
    validate_attention(a).require();
    validate_segmentation(seg).require();
    validate_intervention(cfg, a.layers).require();
    if (seg.total_len != a.seq_len)
        throw Error(Errc::shape_mismatch, "segmentation total_len != attention seq_len");
    if (seg.system_span.empty())
        throw Error(Errc::empty_system_span, "system span is empty");

    AttentionTensor out = a;
    if (cfg.gamma == 1.0) return out;
    for (int l = 0; l < a.layers; ++l) {
        if (!layer_selected(cfg.layers, l)) continue;
        for (int h = 0; h < a.heads; ++h)
            for (int q = 0; q < a.seq_len; ++q) reallocate_row(out.row(l, h, q), seg, cfg);
    }
    return out;
}

AttentionRowHook make_intervention_hook(const TokenSegmentation& seg,
                                        const InterventionConfig& cfg) {
    const TokenSegmentation* segp = &seg;
    return [segp, cfg](int layer, int /*head*/, int /*query*/, std::span<double> row) {
        if (!layer_selected(cfg.layers, layer)) return;
        reallocate_row(row, *segp, cfg);
    };
}

GenerationResult generate_with_intervention(const MicroModelParameters& params,
                                            const std::vector<int>& prompt,
                                            const TokenSegmentation& prompt_seg,
                                            const InterventionConfig& cfg, int max_new,
                                            int eos_symbol) {
    validate_intervention(cfg, params.config.n_layers).require();
    validate_segmentation(prompt_seg).require();
    if (!prompt_seg.response_span.empty())
        throw Error(Errc::invalid_argument,
                    "prompt segmentation must not already contain a response span");
    if (max_new < 0) throw Error(Errc::invalid_argument, "max_new must be >= 0");

    GenerationResult res;
    res.tokens = prompt;
    res.seg = prompt_seg;
    res.seg.response_span = {res.seg.total_len, res.seg.total_len};

    AttentionRowHook hook = make_intervention_hook(res.seg, cfg);
    const AttentionRowHook* hptr = cfg.gamma == 1.0 ? nullptr : &hook;
    const int vocab = params.config.vocab_size;

    for (int step = 0; step < max_new; ++step) {
        if (static_cast<int>(res.tokens.size()) >= params.config.max_seq_len) break;
        ForwardTrace tr = forward(params, res.tokens, res.seg, hptr);
        const int next = argmax_row(tr, tr.seq_len - 1, vocab);
        res.tokens.push_back(next);
        res.seg.total_len += 1;
        res.seg.response_span.end += 1;
        if (next == eos_symbol) break;
    }

    res.trace = forward(params, res.tokens, res.seg, hptr);
    return res;
}

GenerationResult generate_greedy(const MicroModelParameters& params,
                                 const std::vector<int>& prompt,
                                 const TokenSegmentation& prompt_seg, int max_new,
                                 int eos_symbol) {
    InterventionConfig identity;
    identity.gamma = 1.0;
    return generate_with_intervention(params, prompt, prompt_seg, identity, max_new, eos_symbol);
}

}  // namespace avar
