#include "objectives.hpp"

#include <cmath>
#include <numeric>

namespace avar {

namespace {

void check_common(const AttentionTensor& a, const TokenSegmentation& seg,
                  const std::vector<int>& layers, const std::vector<int>& query_set) {
    validate_segmentation(seg).require();
    if (seg.total_len != a.seq_len)
        throw Error(Errc::shape_mismatch, "segmentation total_len != attention seq_len");
    if (layers.empty()) throw Error(Errc::empty_input, "empty layer set");
    for (int l : layers)
        if (l < 0 || l >= a.layers)
            throw Error(Errc::out_of_range, "layer index " + std::to_string(l));
    if (query_set.empty()) throw Error(Errc::empty_query_set, "empty query set");
    for (int q : query_set)
        if (q < 0 || q >= a.seq_len)
            throw Error(Errc::out_of_range, "query index " + std::to_string(q));
}

// Mean of attention mass from query_set onto keys, per (layer, head).
double key_mass_mean(const AttentionTensor& a, int l, int h, const std::vector<int>& query_set,
                     const std::vector<int>& keys) {
    double sum = 0.0;
    for (int q : query_set)
        for (int k : keys) sum += a.at(l, h, q, k);
    return sum / (static_cast<double>(query_set.size()) * static_cast<double>(keys.size()));
}

}  // namespace

std::vector<int> all_layers(int layer_count) {
    std::vector<int> out(static_cast<size_t>(layer_count));
    std::iota(out.begin(), out.end(), 0);
    return out;
}

double enhance_img_loss(const AttentionTensor& a, const TokenSegmentation& seg,
                        const std::vector<int>& layers, const std::vector<int>& query_set,
                        double epsilon) {
    check_common(a, seg, layers, query_set);
    const std::vector<int> keys = seg.image_indices();
    if (keys.empty()) throw Error(Errc::empty_image_span, "enhance loss needs image tokens");

    double acc = 0.0;
    for (int l : layers) {
        double per_layer = 0.0;
        for (int h = 0; h < a.heads; ++h)
            per_layer += std::log(std::max(key_mass_mean(a, l, h, query_set, keys), epsilon));
        acc += per_layer / a.heads;
    }
    return -acc / static_cast<double>(layers.size());
}

double suppress_sys_loss(const AttentionTensor& a, const TokenSegmentation& seg,
                         const std::vector<int>& layers, const std::vector<int>& query_set,
                         double epsilon) {
    check_common(a, seg, layers, query_set);
    const std::vector<int> keys = seg.system_indices();
    if (keys.empty()) throw Error(Errc::empty_system_span, "suppress loss needs system tokens");

    double acc = 0.0;
    for (int l : layers) {
        double per_layer = 0.0;
        for (int h = 0; h < a.heads; ++h)
            per_layer += std::log(key_mass_mean(a, l, h, query_set, keys) + epsilon);
        acc += per_layer / a.heads;
    }
    return acc / static_cast<double>(layers.size());
}

LossBreakdown total_loss(double lm, double enhance, double suppress, const LossWeights& w) {
    if (!std::isfinite(lm) || !std::isfinite(enhance) || !std::isfinite(suppress))
        throw Error(Errc::nonfinite_input, "loss terms must be finite");
    LossBreakdown b;
    b.lm = lm;
    b.enhance_img = enhance;
    b.suppress_sys = suppress;
    b.total = lm + w.alpha * enhance + w.beta * suppress;
    return b;
}

std::vector<double> attention_loss_upstream(const AttentionTensor& a,
                                            const TokenSegmentation& seg,
                                            const std::vector<int>& layers,
                                            const std::vector<int>& query_set,
                                            const LossWeights& w) {
    check_common(a, seg, layers, query_set);
    const std::vector<int> img = seg.image_indices();
    const std::vector<int> sys = seg.system_indices();
    if (w.alpha != 0.0 && img.empty())
        throw Error(Errc::empty_image_span, "enhance gradient needs image tokens");
    if (w.beta != 0.0 && sys.empty())
        throw Error(Errc::empty_system_span, "suppress gradient needs system tokens");

    std::vector<double> grad(a.weights.size(), 0.0);
    const double layer_norm = 1.0 / static_cast<double>(layers.size());
    const double nq = static_cast<double>(query_set.size());

    for (int l : layers) {
        for (int h = 0; h < a.heads; ++h) {
            if (w.alpha != 0.0) {
                const double m = key_mass_mean(a, l, h, query_set, img);
                // Floored log is locally constant below epsilon.
                if (m > w.epsilon) {
                    const double g =
                        -w.alpha * layer_norm / (a.heads * m * nq * static_cast<double>(img.size()));
                    for (int q : query_set)
                        for (int k : img) grad[a.index(l, h, q, k)] += g;
                }
            }
            if (w.beta != 0.0) {
                const double m = key_mass_mean(a, l, h, query_set, sys);
                const double g = w.beta * layer_norm /
                                 (a.heads * (m + w.epsilon) * nq * static_cast<double>(sys.size()));
                for (int q : query_set)
                    for (int k : sys) grad[a.index(l, h, q, k)] += g;
            }
        }
    }
    return grad;
}

}  // namespace avar
