#pragma once

#include <vector>

#include "attention.hpp"
#include "segmentation.hpp"

namespace avar {

// Weights of the attention-guided objectives on top of the LM loss.
// beta here is the suppression-loss weight; the KL coefficient of the RL
// objective is a different beta and lives in RLConfig.
struct LossWeights {
    double alpha = 0.15;
    double beta = 0.15;
    double epsilon = 1e-6;
};

struct LossBreakdown {
    double lm = 0.0;
    double enhance_img = 0.0;
    double suppress_sys = 0.0;
    double total = 0.0;
};

std::vector<int> all_layers(int layer_count);

// -(1/|L|) sum_l (1/H) sum_h log( mean of attention mass on image keys from
// the query rows ). The inner mean is floored at epsilon before the log so a
// batch with zero image attention stays finite; the floor is inactive
// whenever any image attention exists.
double enhance_img_loss(const AttentionTensor& a, const TokenSegmentation& seg,
                        const std::vector<int>& layers, const std::vector<int>& query_set,
                        double epsilon = 1e-6);

// +(1/|L|) sum_l (1/H) sum_h log( mean mass on system keys + epsilon ).
double suppress_sys_loss(const AttentionTensor& a, const TokenSegmentation& seg,
                         const std::vector<int>& layers, const std::vector<int>& query_set,
                         double epsilon = 1e-6);

// total = lm + alpha * enhance + beta * suppress.
LossBreakdown total_loss(double lm, double enhance, double suppress, const LossWeights& w);

// Exact partials of alpha*enhance + beta*suppress with respect to every
// attention entry, laid out like AttentionTensor.weights. Zero outside
// query_set x (K_img u K_sys) and outside the selected layers.
std::vector<double> attention_loss_upstream(const AttentionTensor& a,
                                            const TokenSegmentation& seg,
                                            const std::vector<int>& layers,
                                            const std::vector<int>& query_set,
                                            const LossWeights& w);

}  // namespace avar
