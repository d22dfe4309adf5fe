#include "training.hpp"

namespace avar {

namespace {

std::vector<int> query_indices(const TokenSegmentation& seg, QuerySet q) {
    return q == QuerySet::Response ? seg.response_indices() : seg.user_indices();
}

// Teacher-forced episode sequence: prompt followed by the target response.
struct ForcedEpisode {
    std::vector<int> tokens;
    TokenSegmentation seg;
    std::vector<int> targets;
};

ForcedEpisode forced(const Episode& ep) {
    ForcedEpisode f;
    f.tokens = ep.prompt;
    f.tokens.insert(f.tokens.end(), ep.target_response.begin(), ep.target_response.end());
    f.seg = ep.prompt_seg;
    f.seg.total_len = static_cast<int>(f.tokens.size());
    f.seg.response_span = {ep.prompt_seg.total_len, f.seg.total_len};
    f.targets = ep.target_response;
    return f;
}

}  // namespace

double mean_image_mass(const AttentionTensor& a, const TokenSegmentation& seg,
                       const std::vector<int>& query_set) {
    if (query_set.empty()) throw Error(Errc::empty_query_set, "query set is empty");
    const std::vector<int> img = seg.image_indices();
    double acc = 0.0;
    for (int l = 0; l < a.layers; ++l)
        for (int h = 0; h < a.heads; ++h)
            for (int q : query_set)
                for (int k : img) acc += a.at(l, h, q, k);
    return acc / (static_cast<double>(a.layers) * a.heads * query_set.size());
}

std::vector<TrainStepStats> train_supervised(
    MicroModelParameters& params, const GroundedLookupEnv& env, const TrainConfig& cfg,
    const std::function<void(const TrainStepStats&)>& on_step) {
    if (!(cfg.lr > 0.0)) throw Error(Errc::invalid_config, "lr must be > 0");
    if (cfg.steps < 0) throw Error(Errc::invalid_config, "steps must be >= 0");
    if (env.text_vocab_needed() > params.config.vocab_size ||
        env.image_vocab_needed() > params.config.image_vocab_size)
        throw Error(Errc::invalid_config, "environment alphabets exceed model vocab");

    const std::vector<int> layers =
        cfg.layers.empty() ? all_layers(params.config.n_layers) : cfg.layers;
    std::vector<TrainStepStats> history;
    history.reserve(cfg.steps);

    for (int step = 0; step < cfg.steps; ++step) {
        Rng rng = Rng::derive(cfg.seed, static_cast<uint64_t>(step));
        const ForcedEpisode fe = forced(env.sample_episode(rng));
        const ForwardTrace trace = forward(params, fe.tokens, fe.seg);
        const std::vector<int> queries = query_indices(fe.seg, cfg.loss_query);

        const LmLossGrad lm = lm_loss_grad(trace, fe.targets);
        const double enh =
            enhance_img_loss(trace.attention, fe.seg, layers, queries, cfg.weights.epsilon);
        const double sup =
            suppress_sys_loss(trace.attention, fe.seg, layers, queries, cfg.weights.epsilon);
        const LossBreakdown breakdown = total_loss(lm.loss, enh, sup, cfg.weights);

        std::vector<double> dattn;
        if (cfg.weights.alpha != 0.0 || cfg.weights.beta != 0.0)
            dattn = attention_loss_upstream(trace.attention, fe.seg, layers, queries,
                                            cfg.weights);
        const std::vector<double> grads = backward(params, trace, lm.dlogits, dattn);
        sgd_step(params, grads, cfg.lr);

        TrainStepStats st;
        st.step = step;
        st.lm = breakdown.lm;
        st.enhance_img = breakdown.enhance_img;
        st.suppress_sys = breakdown.suppress_sys;
        st.total = breakdown.total;
        st.mean_image_attention_mass = mean_image_mass(trace.attention, fe.seg, queries);
        st.vas_model = vas_model(trace.attention, fe.seg, {cfg.loss_query, false});
        history.push_back(st);
        if (on_step) on_step(st);
    }
    return history;
}

namespace {

struct SampledRollout {
    bool correct = false;
    double vas = 0.0;  // response rows of the finished sequence
};

// One temperature-1 rollout.
SampledRollout sample_rollout(const MicroModelParameters& params, const GroundedLookupEnv& env,
                              const Episode& ep, int max_new, Rng& rng) {
    std::vector<int> tokens = ep.prompt;
    TokenSegmentation seg = ep.prompt_seg;
    std::vector<int> response;
    for (int t = 0; t < max_new; ++t) {
        seg.total_len = static_cast<int>(tokens.size());
        seg.response_span = {ep.prompt_seg.total_len, static_cast<int>(tokens.size())};
        const ForwardTrace trace = forward(params, tokens, seg);
        const std::vector<double> probs =
            softmax_logits_row(trace, static_cast<int>(tokens.size()) - 1);
        const int sym = rng.categorical(probs);
        tokens.push_back(sym);
        response.push_back(sym);
        if (sym == GroundedLookupEnv::kEos) break;
    }
    seg.total_len = static_cast<int>(tokens.size());
    seg.response_span = {ep.prompt_seg.total_len, static_cast<int>(tokens.size())};
    const ForwardTrace trace = forward(params, tokens, seg);
    VasOptions vo;
    vo.query_set = QuerySet::Response;
    return {env.is_correct(ep, response), vas_model(trace.attention, seg, vo)};
}

}  // namespace

EvalResult evaluate(const MicroModelParameters& params, const GroundedLookupEnv& env,
                    int n_episodes, uint64_t seed, int samples_per_episode) {
    if (n_episodes < 1) throw Error(Errc::invalid_argument, "n_episodes must be >= 1");
    if (samples_per_episode < 1)
        throw Error(Errc::invalid_argument, "samples_per_episode must be >= 1");
    EvalResult r;
    const uint64_t sample_seed = Rng::mix_seed(seed, 0xA11CEull);
    const int max_new = env.response_len() + 2;
    for (int i = 0; i < n_episodes; ++i) {
        Rng rng = Rng::derive(seed, static_cast<uint64_t>(i));
        const Episode ep = env.sample_episode(rng);

        const GenerationResult gen = generate_greedy(params, ep.prompt, ep.prompt_seg,
                                                     max_new, GroundedLookupEnv::kEos);
        const std::span<const int> resp{gen.tokens.data() + ep.prompt_seg.total_len,
                                        gen.tokens.size() - ep.prompt_seg.total_len};
        r.accuracy += env.is_correct(ep, resp) ? 1.0 : 0.0;
        r.format += env.is_format_ok(ep, resp) ? 1.0 : 0.0;

        Rng srng = Rng::derive(sample_seed, static_cast<uint64_t>(i));
        for (int s = 0; s < samples_per_episode; ++s) {
            const SampledRollout roll = sample_rollout(params, env, ep, max_new, srng);
            r.sampled_accuracy += roll.correct ? 1.0 : 0.0;
            r.rollout_vas += roll.vas;
        }

        const ForcedEpisode fe = forced(ep);
        const ForwardTrace trace = forward(params, fe.tokens, fe.seg);
        r.mean_vas += vas_model(trace.attention, fe.seg, {QuerySet::Response, false});
        r.mean_image_mass +=
            mean_image_mass(trace.attention, fe.seg, fe.seg.response_indices());
    }
    const double n = static_cast<double>(n_episodes);
    r.accuracy /= n;
    r.format /= n;
    r.mean_vas /= n;
    r.mean_image_mass /= n;
    r.sampled_accuracy /= n * samples_per_episode;
    r.rollout_vas /= n * samples_per_episode;
    return r;
}

GenExperimentResult gen_experiment(const MicroModelParameters& params,
                                   const GroundedLookupEnv& env, const InterventionConfig& cfg,
                                   int episodes, uint64_t seed) {
    if (episodes < 1) throw Error(Errc::invalid_argument, "episodes must be >= 1");
    validate_intervention(cfg, params.config.n_layers).require();

    GenExperimentResult r;
    r.gamma = cfg.gamma;
    r.episodes = episodes;
    const int max_new = env.response_len() + 2;
    for (int i = 0; i < episodes; ++i) {
        Rng rng = Rng::derive(seed, static_cast<uint64_t>(i));
        const Episode ep = env.sample_episode(rng);

        const GenerationResult base = generate_greedy(params, ep.prompt, ep.prompt_seg,
                                                      max_new, GroundedLookupEnv::kEos);
        const GenerationResult mod = generate_with_intervention(
            params, ep.prompt, ep.prompt_seg, cfg, max_new, GroundedLookupEnv::kEos);

        const std::span<const int> base_resp{base.tokens.data() + ep.prompt_seg.total_len,
                                             base.tokens.size() - ep.prompt_seg.total_len};
        const std::span<const int> mod_resp{mod.tokens.data() + ep.prompt_seg.total_len,
                                            mod.tokens.size() - ep.prompt_seg.total_len};
        r.accuracy_before += env.is_correct(ep, base_resp) ? 1.0 : 0.0;
        r.accuracy_after += env.is_correct(ep, mod_resp) ? 1.0 : 0.0;
        r.vas_before += vas_model(base.trace.attention, base.seg);
        r.vas_after += vas_model(mod.trace.attention, mod.seg);
    }
    const double n = static_cast<double>(episodes);
    r.accuracy_before /= n;
    r.accuracy_after /= n;
    r.vas_before /= n;
    r.vas_after /= n;
    return r;
}

std::vector<CompareRow> experiment_compare(const CompareConfig& cfg) {
    std::vector<CompareRow> rows;
    const GroundedLookupEnv env(cfg.env);

    for (uint64_t seed : cfg.seeds) {
        ModelConfig mc = cfg.model;
        mc.seed = seed;

        TrainConfig lm_cfg = cfg.cold;
        lm_cfg.seed = seed;
        lm_cfg.weights.alpha = 0.0;
        lm_cfg.weights.beta = 0.0;
        MicroModelParameters lm_params = init_params(mc);
        train_supervised(lm_params, env, lm_cfg);

        TrainConfig attn_cfg = cfg.cold;
        attn_cfg.seed = seed;
        MicroModelParameters attn_params = init_params(mc);
        train_supervised(attn_params, env, attn_cfg);

        MicroModelParameters rl_params = attn_params;
        RLConfig rl_cfg = cfg.rl;
        rl_cfg.seed = seed;
        train_rl(rl_params, env, rl_cfg);

        const EvalResult lm_eval = evaluate(lm_params, env, cfg.eval_episodes, cfg.eval_seed);
        const EvalResult attn_eval =
            evaluate(attn_params, env, cfg.eval_episodes, cfg.eval_seed);
        const EvalResult rl_eval = evaluate(rl_params, env, cfg.eval_episodes, cfg.eval_seed);
        rows.push_back({"lm", seed, lm_eval.mean_vas, lm_eval.accuracy});
        rows.push_back({"attn", seed, attn_eval.mean_vas, attn_eval.accuracy});
        rows.push_back({"rl", seed, rl_eval.mean_vas, rl_eval.accuracy});
    }
    return rows;
}

}  // namespace avar
