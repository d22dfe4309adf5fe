#include "rl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vas.hpp"

namespace avar {

namespace {

// Guard against overflow in exp(logp_theta - logp_old).
constexpr double kMaxLogRatio = 30.0;

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double visual_reward(const AttentionTensor& attn, const TokenSegmentation& seg, bool correct,
                     double epsilon) {
    if (!correct) return 0.0;
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw Error(Errc::invalid_argument, "epsilon must be finite and >= 0");
    validate_attention(attn).require();
    validate_segmentation(seg).require();
    if (seg.total_len != attn.seq_len)
        throw Error(Errc::shape_mismatch, "segmentation total_len != attention seq_len");
    if (seg.response_span.empty())
        throw Error(Errc::empty_response_span, "correct rollout with empty response span");

    const std::vector<int> img = seg.image_indices();
    const std::vector<int> sys = seg.system_indices();
    const int L = attn.layers;
    const int H = attn.heads;
    const double inv_h = 1.0 / static_cast<double>(H);

    double sum_t = 0.0;
    int count_t = 0;
    for (int t = seg.response_span.begin; t < seg.response_span.end; ++t) {
        double sum_l = 0.0;
        for (int l = 0; l < L; ++l) {
            // Heads averaged into one matrix per layer before the ratio.
            double img_mass = 0.0;
            for (int k : img) {
                double acc = 0.0;
                for (int h = 0; h < H; ++h) acc += attn.at(l, h, t, k);
                img_mass += acc * inv_h;
            }
            double sys_mass = 0.0;
            for (int k : sys) {
                double acc = 0.0;
                for (int h = 0; h < H; ++h) acc += attn.at(l, h, t, k);
                sys_mass += acc * inv_h;
            }
            sum_l += img_mass / (sys_mass + epsilon);
        }
        sum_t += sum_l / static_cast<double>(L);
        ++count_t;
    }
    return sum_t / static_cast<double>(count_t);
}

RewardBreakdown total_reward(int accuracy, double visual, int format, const RewardWeights& w) {
    if ((accuracy != 0 && accuracy != 1) || (format != 0 && format != 1))
        throw Error(Errc::invalid_argument, "accuracy and format must be 0 or 1");
    if (!(visual >= 0.0) || !std::isfinite(visual))
        throw Error(Errc::negative_score, "visual reward must be finite and >= 0");
    if (w.lambda_v < 0.0 || w.lambda_f < 0.0 || w.epsilon < 0.0)
        throw Error(Errc::invalid_argument, "reward weights must be >= 0");
    RewardBreakdown b;
    b.accuracy = accuracy;
    b.visual = accuracy == 0 ? 0.0 : visual;  // correctness gate
    b.format = format;
    b.total = b.accuracy + w.lambda_v * b.visual + w.lambda_f * b.format;
    return b;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
    const size_t n = rewards.size();
    if (n < 2) throw Error(Errc::group_too_small, "need a group of at least 2 rewards");
    double mean = 0.0;
    for (double r : rewards) {
        if (!std::isfinite(r)) throw Error(Errc::nonfinite_input, "non-finite reward");
        mean += r;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(n);  // population variance
    const double sd = std::sqrt(var);
    std::vector<double> adv(n, 0.0);
    if (sd < 1e-8) return adv;  // degenerate group: no signal
    for (size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

ValidationResult validate_rl_config(const RLConfig& cfg) {
    if (cfg.group_size < 2)
        return ValidationResult::fail(Errc::group_too_small, "group_size must be >= 2");
    if (!(cfg.clip_range > 0.0) || !(cfg.clip_range < 1.0))
        return ValidationResult::fail(Errc::invalid_config, "clip_range must be in (0,1)");
    if (!(cfg.kl_coeff >= 0.0))
        return ValidationResult::fail(Errc::invalid_config, "kl_coeff must be >= 0");
    if (!(cfg.lr > 0.0)) return ValidationResult::fail(Errc::invalid_config, "lr must be > 0");
    if (cfg.steps < 0) return ValidationResult::fail(Errc::invalid_config, "steps must be >= 0");
    if (cfg.prompts_per_step < 1)
        return ValidationResult::fail(Errc::invalid_config, "prompts_per_step must be >= 1");
    if (cfg.epochs_per_batch < 1)
        return ValidationResult::fail(Errc::invalid_config, "epochs_per_batch must be >= 1");
    if (cfg.max_new < 1)
        return ValidationResult::fail(Errc::invalid_config, "max_new must be >= 1");
    if (cfg.reward.lambda_v < 0.0 || cfg.reward.lambda_f < 0.0 || cfg.reward.epsilon < 0.0)
        return ValidationResult::fail(Errc::invalid_config, "reward weights must be >= 0");
    return ValidationResult::valid();
}

GrpoResult grpo_loss(const RolloutGroup& group, const RLConfig& cfg) {
    validate_rl_config(cfg).require();
    const size_t g = group.trajectories.size();
    if (g < 2) throw Error(Errc::group_too_small, "group has fewer than 2 trajectories");
    if (group.advantages.size() != g)
        throw Error(Errc::series_length_mismatch, "advantages size != group size");

    GrpoResult res;
    res.dlogp_rows.resize(g);
    double obj = 0.0;
    double surr_total = 0.0;
    double kl_total = 0.0;
    double ratio_total = 0.0;
    size_t token_count = 0;
    const double lo = 1.0 - cfg.clip_range;
    const double hi = 1.0 + cfg.clip_range;

    for (size_t i = 0; i < g; ++i) {
        const Trajectory& tr = group.trajectories[i];
        const size_t n = tr.response.size();
        if (n == 0) throw Error(Errc::empty_output, "trajectory has no response tokens");
        if (tr.logp_old.size() != n || tr.theta_logp_rows.size() % n != 0 ||
            tr.theta_logp_rows.size() != tr.ref_logp_rows.size())
            throw Error(Errc::series_length_mismatch,
                        "log-prob arrays disagree on response length");
        const size_t vocab = tr.theta_logp_rows.size() / n;
        if (vocab == 0)
            throw Error(Errc::series_length_mismatch, "empty log-prob rows");

        const double adv = group.advantages[i];
        const double traj_w = 1.0 / (static_cast<double>(g) * static_cast<double>(n));
        std::vector<double>& dl = res.dlogp_rows[i];
        dl.assign(tr.theta_logp_rows.size(), 0.0);

        double traj_obj = 0.0;
        for (size_t t = 0; t < n; ++t) {
            const double* lt = tr.theta_logp_rows.data() + t * vocab;
            const double* lr = tr.ref_logp_rows.data() + t * vocab;
            const int a = tr.response[t];
            if (a < 0 || static_cast<size_t>(a) >= vocab)
                throw Error(Errc::symbol_out_of_range, "response symbol outside vocab");

            const double dlog = lt[a] - tr.logp_old[t];
            if (!std::isfinite(dlog) || std::abs(dlog) > kMaxLogRatio) {
                char buf[128];
                std::snprintf(buf, sizeof(buf),
                              "log-ratio %.6g at trajectory %zu token %zu (theta %.6g, old %.6g)",
                              dlog, i, t, lt[a], tr.logp_old[t]);
                throw Error(Errc::nonfinite_ratio, buf);
            }
            const double ratio = std::exp(dlog);
            const double unclipped = ratio * adv;
            const double clipped = std::clamp(ratio, lo, hi) * adv;
            const double surr = std::min(unclipped, clipped);

            double kl = 0.0;
            for (size_t v = 0; v < vocab; ++v) kl += std::exp(lt[v]) * (lt[v] - lr[v]);

            traj_obj += surr - cfg.kl_coeff * kl;
            surr_total += surr * traj_w;
            kl_total += kl * traj_w;
            ratio_total += ratio;
            ++token_count;

            // loss = -objective; gradients wrt the theta rows as free variables
            if (unclipped <= clipped) dl[t * vocab + a] -= traj_w * ratio * adv;
            if (cfg.kl_coeff != 0.0) {
                for (size_t v = 0; v < vocab; ++v) {
                    const double p = std::exp(lt[v]);
                    dl[t * vocab + v] += traj_w * cfg.kl_coeff * p * (lt[v] - lr[v] + 1.0);
                }
            }
        }
        obj += traj_obj / static_cast<double>(n);
    }

    obj /= static_cast<double>(g);
    res.loss = -obj;
    res.surrogate = surr_total;
    res.kl = kl_total;
    res.mean_ratio = token_count == 0 ? 1.0 : ratio_total / static_cast<double>(token_count);
    return res;
}

RolloutGroup rollout(const MicroModelParameters& params, const MicroModelParameters* ref,
                     const GroundedLookupEnv& env, int group_size, int max_new, uint64_t seed,
                     const RewardWeights& weights) {
    if (group_size < 2) throw Error(Errc::group_too_small, "group_size must be >= 2");
    if (max_new < 1) throw Error(Errc::invalid_argument, "max_new must be >= 1");
    if (env.text_vocab_needed() > params.config.vocab_size ||
        env.image_vocab_needed() > params.config.image_vocab_size)
        throw Error(Errc::invalid_config, "environment alphabets exceed model vocab");
    if (env.prompt_len() + max_new > params.config.max_seq_len)
        throw Error(Errc::invalid_config, "episode cannot fit in max_seq_len");

    RolloutGroup group;
    {
        Rng ep_rng = Rng::derive(seed, 0);
        group.episode = env.sample_episode(ep_rng);
    }
    const Episode& ep = group.episode;
    const int vocab = params.config.vocab_size;
    const int p_len = ep.prompt_seg.total_len;

    group.trajectories.resize(group_size);
    for (int i = 0; i < group_size; ++i) {
        Trajectory& tr = group.trajectories[i];
        Rng rng = Rng::derive(seed, 1 + static_cast<uint64_t>(i));
        tr.tokens = ep.prompt;
        tr.seg = ep.prompt_seg;

        for (int step = 0; step < max_new; ++step) {
            ForwardTrace ft = forward(params, tr.tokens, tr.seg);
            const std::vector<double> logp = log_softmax_logits_row(ft, ft.seq_len - 1);
            std::vector<double> probs(logp.size());
            for (size_t v = 0; v < logp.size(); ++v) probs[v] = std::exp(logp[v]);
            const int a = rng.categorical(probs);
            tr.logp_old.push_back(logp[a]);
            tr.response.push_back(a);
            tr.tokens.push_back(a);
            tr.seg.total_len += 1;
            tr.seg.response_span.end += 1;
            if (a == GroundedLookupEnv::kEos) break;
        }

        // Causal rows are pass-invariant, so one final forward recovers the
        // generation-time attention and log-probs for every response token.
        ForwardTrace final_tr = forward(params, tr.tokens, tr.seg);
        const size_t n = tr.response.size();
        tr.theta_logp_rows.resize(n * vocab);
        for (size_t t = 0; t < n; ++t) {
            const std::vector<double> row =
                log_softmax_logits_row(final_tr, p_len + static_cast<int>(t) - 1);
            std::copy(row.begin(), row.end(), tr.theta_logp_rows.begin() + t * vocab);
        }
        if (ref != nullptr) {
            ForwardTrace ref_tr = forward(*ref, tr.tokens, tr.seg);
            tr.ref_logp_rows.resize(n * vocab);
            for (size_t t = 0; t < n; ++t) {
                const std::vector<double> row =
                    log_softmax_logits_row(ref_tr, p_len + static_cast<int>(t) - 1);
                std::copy(row.begin(), row.end(), tr.ref_logp_rows.begin() + t * vocab);
            }
        } else {
            tr.ref_logp_rows = tr.theta_logp_rows;
        }

        const bool correct = env.is_correct(ep, tr.response);
        const bool format = env.is_format_ok(ep, tr.response);
        const double visual =
            visual_reward(final_tr.attention, tr.seg, correct, weights.epsilon);
        tr.reward = total_reward(correct ? 1 : 0, visual, format ? 1 : 0, weights);
        VasOptions vo;
        vo.query_set = QuerySet::Response;  // the rows the visual reward looks at
        tr.vas = vas_model(final_tr.attention, tr.seg, vo);
    }

    std::vector<double> totals(group.trajectories.size());
    for (size_t i = 0; i < totals.size(); ++i) totals[i] = group.trajectories[i].reward.total;
    group.advantages = group_advantages(totals);
    return group;
}

GrpoParamGrad grpo_param_grad(const MicroModelParameters& params, RolloutGroup& group,
                              const RLConfig& cfg) {
    const int vocab = params.config.vocab_size;
    std::vector<ForwardTrace> traces;
    traces.reserve(group.trajectories.size());
    for (Trajectory& tr : group.trajectories) {
        ForwardTrace ft = forward(params, tr.tokens, tr.seg);
        const size_t n = tr.response.size();
        tr.theta_logp_rows.resize(n * static_cast<size_t>(vocab));
        const int p_len = tr.seg.response_span.begin;
        for (size_t t = 0; t < n; ++t) {
            const std::vector<double> row =
                log_softmax_logits_row(ft, p_len + static_cast<int>(t) - 1);
            std::copy(row.begin(), row.end(),
                      tr.theta_logp_rows.begin() + t * static_cast<size_t>(vocab));
        }
        traces.push_back(std::move(ft));
    }

    GrpoParamGrad out;
    out.detail = grpo_loss(group, cfg);
    out.loss = out.detail.loss;
    out.grads.assign(params.data.size(), 0.0);

    for (size_t i = 0; i < group.trajectories.size(); ++i) {
        const Trajectory& tr = group.trajectories[i];
        const ForwardTrace& ft = traces[i];
        const std::vector<double>& dl = out.detail.dlogp_rows[i];
        const size_t n = tr.response.size();
        const int p_len = tr.seg.response_span.begin;
        std::vector<double> dlogits(ft.logits.size(), 0.0);
        for (size_t t = 0; t < n; ++t) {
            const double* g_row = dl.data() + t * static_cast<size_t>(vocab);
            const double* l_row = tr.theta_logp_rows.data() + t * static_cast<size_t>(vocab);
            double gsum = 0.0;
            for (int v = 0; v < vocab; ++v) gsum += g_row[v];
            double* dz =
                dlogits.data() + static_cast<size_t>(p_len + static_cast<int>(t) - 1) * vocab;
            // chain rule through log-softmax: dz_v = g_v - p_v * sum(g)
            for (int v = 0; v < vocab; ++v) dz[v] += g_row[v] - std::exp(l_row[v]) * gsum;
        }
        const std::vector<double> g = backward(params, ft, dlogits, {});
        for (size_t j = 0; j < g.size(); ++j) out.grads[j] += g[j];
    }
    return out;
}

std::vector<RLStepStats> train_rl(MicroModelParameters& params, const GroundedLookupEnv& env,
                                  const RLConfig& cfg,
                                  const std::function<void(const RLStepStats&)>& on_step) {
    validate_rl_config(cfg).require();
    const MicroModelParameters ref = params;  // frozen reference policy

    std::vector<RLStepStats> history;
    history.reserve(cfg.steps);
    const int prompts = cfg.prompts_per_step;
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<RolloutGroup> batch;
        batch.reserve(prompts);
        for (int b = 0; b < prompts; ++b) {
            const uint64_t stream = static_cast<uint64_t>(step) * prompts + b;
            batch.push_back(rollout(params, &ref, env, cfg.group_size, cfg.max_new,
                                    Rng::mix_seed(cfg.seed, stream), cfg.reward));
        }

        RLStepStats st;
        st.step = step;
        std::vector<double> rewards, accs, visuals, vases;
        for (const RolloutGroup& group : batch) {
            for (const Trajectory& tr : group.trajectories) {
                rewards.push_back(tr.reward.total);
                accs.push_back(tr.reward.accuracy);
                visuals.push_back(tr.reward.visual);
                vases.push_back(tr.vas);
            }
        }
        st.mean_reward = mean_of(rewards);
        st.mean_accuracy = mean_of(accs);
        st.mean_visual_reward = mean_of(visuals);
        st.mean_vas = mean_of(vases);

        for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
            // Per-prompt group gradients averaged into one update.
            std::vector<double> grads(params.layout.total, 0.0);
            double kl = 0.0, loss = 0.0;
            for (RolloutGroup& group : batch) {
                GrpoParamGrad pg = grpo_param_grad(params, group, cfg);
                kl += pg.detail.kl;
                loss += pg.loss;
                for (size_t i = 0; i < grads.size(); ++i) grads[i] += pg.grads[i];
            }
            const double inv = 1.0 / prompts;
            for (double& g : grads) g *= inv;
            st.kl = kl * inv;
            st.loss = loss * inv;
            sgd_step(params, grads, cfg.lr);
        }
        history.push_back(st);
        if (on_step) on_step(st);
    }
    return history;
}

}  // namespace avar
