#include "gradcheck.hpp"

#include <cmath>

#include "objectives.hpp"
#include "rl.hpp"

namespace avar {

double rel_error(double a, double b) {
    return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

namespace {

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_error(a[i], b[i]));
    return m;
}

struct Forced {
    std::vector<int> tokens;
    TokenSegmentation seg;
    std::vector<int> targets;
};

Forced forced_episode(const GroundedLookupEnv& env, uint64_t seed) {
    Rng rng = Rng::derive(seed, 17);
    const Episode ep = env.sample_episode(rng);
    Forced f;
    f.tokens = ep.prompt;
    f.tokens.insert(f.tokens.end(), ep.target_response.begin(), ep.target_response.end());
    f.seg = ep.prompt_seg;
    f.seg.total_len = static_cast<int>(f.tokens.size());
    f.seg.response_span = {ep.prompt_seg.total_len, f.seg.total_len};
    f.targets = ep.target_response;
    return f;
}

void refresh_theta_rows(const MicroModelParameters& p, Trajectory& tr) {
    const ForwardTrace ft = forward(p, tr.tokens, tr.seg);
    const int vocab = p.config.vocab_size;
    const int p_len = tr.seg.response_span.begin;
    tr.theta_logp_rows.resize(tr.response.size() * static_cast<size_t>(vocab));
    for (size_t t = 0; t < tr.response.size(); ++t) {
        const std::vector<double> row =
            log_softmax_logits_row(ft, p_len + static_cast<int>(t) - 1);
        std::copy(row.begin(), row.end(),
                  tr.theta_logp_rows.begin() + t * static_cast<size_t>(vocab));
    }
}

}  // namespace

GradcheckReport gradcheck_run(const GradcheckConfig& cfg) {
    validate_config(cfg.model).require();
    if (!(cfg.h > 0.0) || !(cfg.tolerance > 0.0))
        throw Error(Errc::invalid_argument, "h and tolerance must be > 0");
    if (cfg.seeds.empty()) throw Error(Errc::invalid_argument, "need at least one seed");

    const GroundedLookupEnv env(cfg.env);
    if (env.text_vocab_needed() > cfg.model.vocab_size ||
        env.image_vocab_needed() > cfg.model.image_vocab_size)
        throw Error(Errc::invalid_config, "environment alphabets exceed model vocab");

    GradcheckReport rep;
    rep.param_count = make_layout(cfg.model).total;

    for (uint64_t seed : cfg.seeds) {
        ModelConfig mc = cfg.model;
        mc.seed = seed;
        const MicroModelParameters params = init_params(mc);
        const Forced fe = forced_episode(env, seed);
        const std::vector<int> queries = fe.seg.response_indices();
        const std::vector<int> layers = all_layers(mc.n_layers);

        auto check = [&](const char* name, const std::vector<double>& analytic,
                         const std::function<double(const MicroModelParameters&)>& f,
                         const MicroModelParameters& at) {
            const std::vector<double> fd = finite_diff_grad(f, at, cfg.h);
            const double m = max_rel_error(analytic, fd);
            rep.entries.push_back({name, seed, m, m <= cfg.tolerance});
        };

        {
            const ForwardTrace tr = forward(params, fe.tokens, fe.seg);
            const LmLossGrad g = lm_loss_grad(tr, fe.targets);
            check("lm", backward(params, tr, g.dlogits, {}),
                  [&](const MicroModelParameters& p) {
                      return lm_loss(forward(p, fe.tokens, fe.seg), fe.targets);
                  },
                  params);
        }
        {
            LossWeights w;
            w.alpha = 1.0;
            w.beta = 0.0;
            const ForwardTrace tr = forward(params, fe.tokens, fe.seg);
            const std::vector<double> up =
                attention_loss_upstream(tr.attention, fe.seg, layers, queries, w);
            check("enhance_img", backward(params, tr, {}, up),
                  [&](const MicroModelParameters& p) {
                      return enhance_img_loss(forward(p, fe.tokens, fe.seg).attention, fe.seg,
                                              layers, queries, w.epsilon);
                  },
                  params);
        }
        {
            LossWeights w;
            w.alpha = 0.0;
            w.beta = 1.0;
            const ForwardTrace tr = forward(params, fe.tokens, fe.seg);
            const std::vector<double> up =
                attention_loss_upstream(tr.attention, fe.seg, layers, queries, w);
            check("suppress_sys", backward(params, tr, {}, up),
                  [&](const MicroModelParameters& p) {
                      return suppress_sys_loss(forward(p, fe.tokens, fe.seg).attention, fe.seg,
                                               layers, queries, w.epsilon);
                  },
                  params);
        }
        {
            const LossWeights w;  // alpha = beta = 0.15, epsilon = 1e-6
            const ForwardTrace tr = forward(params, fe.tokens, fe.seg);
            const LmLossGrad g = lm_loss_grad(tr, fe.targets);
            const std::vector<double> up =
                attention_loss_upstream(tr.attention, fe.seg, layers, queries, w);
            check("total", backward(params, tr, g.dlogits, up),
                  [&](const MicroModelParameters& p) {
                      const ForwardTrace t2 = forward(p, fe.tokens, fe.seg);
                      const double lm = lm_loss(t2, fe.targets);
                      const double enh = enhance_img_loss(t2.attention, fe.seg, layers,
                                                          queries, w.epsilon);
                      const double sup = suppress_sys_loss(t2.attention, fe.seg, layers,
                                                           queries, w.epsilon);
                      return total_loss(lm, enh, sup, w).total;
                  },
                  params);
        }
        {
            RLConfig rl_cfg;
            rl_cfg.group_size = 4;
            rl_cfg.max_new = 4;
            rl_cfg.steps = 1;
            RolloutGroup group = rollout(params, &params, env, rl_cfg.group_size,
                                         rl_cfg.max_new, Rng::mix_seed(seed, 23), rl_cfg.reward);

            // Move theta off the sampling point so ratios and KL are both
            // active, but keep the ratios well inside the clip band.
            MicroModelParameters theta = params;
            Rng noise = Rng::derive(seed, 29);
            for (double& wgt : theta.data) wgt += noise.uniform(-1e-3, 1e-3);

            GrpoParamGrad pg = grpo_param_grad(theta, group, rl_cfg);
            check("grpo", pg.grads,
                  [&](const MicroModelParameters& p) {
                      RolloutGroup g2 = group;
                      for (Trajectory& t : g2.trajectories) refresh_theta_rows(p, t);
                      return grpo_loss(g2, rl_cfg).loss;
                  },
                  theta);
        }
    }

    rep.pass = !rep.entries.empty();
    for (const GradcheckEntry& e : rep.entries) rep.pass = rep.pass && e.pass;
    return rep;
}

}  // namespace avar
