#include "avar/avar.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dump.hpp"
#include "env.hpp"
#include "error.hpp"
#include "gradcheck.hpp"
#include "intervention.hpp"
#include "micro_model.hpp"
#include "report.hpp"
#include "rl.hpp"
#include "synth.hpp"
#include "training.hpp"
#include "vas.hpp"

using nlohmann::json;

struct avar_dump {
    avar::Dump d;
};

struct avar_model {
    avar::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

int fail(int status, const std::string& msg) {
    g_last_error = msg;
    return status;
}

// avar_status mirrors Errc value-for-value; both lists are append-only.
int to_status(avar::Errc c) { return static_cast<int>(c); }

template <typename Fn>
int guard(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return AVAR_OK;
    } catch (const avar::Error& e) {
        return fail(to_status(e.code()), e.what());
    } catch (const json::exception& e) {
        return fail(AVAR_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(AVAR_INTERNAL_ERROR, "out of memory");
    } catch (const std::exception& e) {
        return fail(AVAR_INTERNAL_ERROR, e.what());
    }
}

json parse_object(const char* s, const char* ctx) {
    if (s == nullptr || *s == '\0') return json::object();
    json j = json::parse(s);  // json::exception maps to InvalidArgument
    if (!j.is_object())
        throw avar::Error(avar::Errc::invalid_argument, std::string(ctx) + ": expected a JSON object");
    return j;
}

void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* ctx) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (item.key() == a) {
                known = true;
                break;
            }
        }
        if (!known)
            throw avar::Error(avar::Errc::invalid_argument,
                              std::string(ctx) + ": unknown key \"" + item.key() + "\"");
    }
}

template <typename T>
T value_or(const json& j, const char* key, T def) {
    if (!j.contains(key)) return def;
    return j.at(key).get<T>();
}

std::vector<int> int_list_or(const json& j, const char* key, std::vector<int> def) {
    if (!j.contains(key)) return def;
    return j.at(key).get<std::vector<int>>();
}

avar::QuerySet query_set_from(const json& j, const char* key, avar::QuerySet def) {
    const std::string s = value_or<std::string>(j, key, "");
    if (s.empty()) return def;
    if (s == "user") return avar::QuerySet::User;
    if (s == "response") return avar::QuerySet::Response;
    throw avar::Error(avar::Errc::invalid_argument,
                      "query_set must be \"user\" or \"response\", got \"" + s + "\"");
}

avar::VasOptions vas_options_from(const json& j) {
    require_keys(j, {"query_set", "strict"}, "options");
    avar::VasOptions opts;
    opts.query_set = query_set_from(j, "query_set", avar::QuerySet::User);
    opts.strict = value_or<bool>(j, "strict", false);
    return opts;
}

avar::EnvConfig env_from(const json& j) {
    require_keys(j, {"n_keys", "n_values", "pairs_per_episode"}, "env");
    avar::EnvConfig cfg;
    cfg.n_keys = value_or<int>(j, "n_keys", cfg.n_keys);
    cfg.n_values = value_or<int>(j, "n_values", cfg.n_values);
    cfg.pairs_per_episode = value_or<int>(j, "pairs_per_episode", cfg.pairs_per_episode);
    return cfg;
}

avar::ModelConfig model_from(const json& j) {
    require_keys(j,
                 {"vocab_size", "image_vocab_size", "d_model", "n_layers", "n_heads",
                  "max_seq_len", "seed"},
                 "model");
    avar::ModelConfig cfg;
    cfg.vocab_size = value_or<int>(j, "vocab_size", cfg.vocab_size);
    cfg.image_vocab_size = value_or<int>(j, "image_vocab_size", cfg.image_vocab_size);
    cfg.d_model = value_or<int>(j, "d_model", cfg.d_model);
    cfg.n_layers = value_or<int>(j, "n_layers", cfg.n_layers);
    cfg.n_heads = value_or<int>(j, "n_heads", cfg.n_heads);
    cfg.max_seq_len = value_or<int>(j, "max_seq_len", cfg.max_seq_len);
    cfg.seed = value_or<uint64_t>(j, "seed", cfg.seed);
    return cfg;
}

json model_to_json(const avar::ModelConfig& cfg) {
    return json{{"vocab_size", cfg.vocab_size},
                {"image_vocab_size", cfg.image_vocab_size},
                {"d_model", cfg.d_model},
                {"n_layers", cfg.n_layers},
                {"n_heads", cfg.n_heads},
                {"max_seq_len", cfg.max_seq_len},
                {"seed", cfg.seed}};
}

void check_env_fits(const avar::ModelConfig& cfg, const avar::GroundedLookupEnv& env,
                    int decode_budget) {
    if (env.text_vocab_needed() > cfg.vocab_size ||
        env.image_vocab_needed() > cfg.image_vocab_size)
        throw avar::Error(avar::Errc::invalid_config,
                          "model vocabulary too small for the task alphabet");
    if (env.prompt_len() + decode_budget > cfg.max_seq_len)
        throw avar::Error(avar::Errc::invalid_config,
                          "max_seq_len cannot hold a prompt plus the decode budget");
}

json eval_to_json(const avar::EvalResult& ev) {
    return json{{"accuracy", ev.accuracy},
                {"format", ev.format},
                {"mean_vas", ev.mean_vas},
                {"mean_image_mass", ev.mean_image_mass},
                {"sampled_accuracy", ev.sampled_accuracy},
                {"rollout_vas", ev.rollout_vas}};
}

}  // namespace

extern "C" {

const char* avar_version(void) { return "0.1.0"; }

const char* avar_status_name(int status) {
    if (status >= AVAR_OK && status <= AVAR_IO_ERROR)
        return avar::errc_name(static_cast<avar::Errc>(status));
    if (status == AVAR_INTERNAL_ERROR) return "InternalError";
    return "UnknownStatus";
}

const char* avar_last_error(void) { return g_last_error.c_str(); }

void avar_string_free(char* s) { delete[] s; }

/* ---- attention dumps ------------------------------------------------- */

int avar_dump_open(const char* path, avar_dump** out) {
    if (!path || !out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        auto d = std::make_unique<avar_dump>();
        d->d = avar::read_dump_file(path);
        *out = d.release();
    });
}

int avar_dump_save(const avar_dump* d, const char* path) {
    if (!d || !path) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] { avar::write_dump_file(path, d->d.attention, d->d.seg, d->d.sample_id); });
}

void avar_dump_free(avar_dump* d) { delete d; }

int avar_dump_info(const avar_dump* d, char** json_out) {
    if (!d || !json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j{{"seq_len", d->d.attention.seq_len},
               {"layers", d->d.attention.layers},
               {"heads", d->d.attention.heads},
               {"causal", d->d.attention.causal},
               {"sample_id", d->d.sample_id}};
        *json_out = dup_string(j.dump());
    });
}

int avar_analyze(const avar_dump* d, const char* options_json, char** json_out) {
    if (!d || !json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        const avar::VasOptions opts = vas_options_from(parse_object(options_json, "options"));
        const avar::VasReport report = avar::vas_report(d->d.attention, d->d.seg, opts);
        const avar::AggregateVas agg = avar::aggregate_vas({d->d}, opts);
        *json_out = dup_string(avar::vas_report_json(report, &agg));
    });
}

int avar_analyze_csv(const avar_dump* d, const char* options_json, char** csv_out) {
    if (!d || !csv_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        const avar::VasOptions opts = vas_options_from(parse_object(options_json, "options"));
        *csv_out = dup_string(avar::vas_report_csv(avar::vas_report(d->d.attention, d->d.seg, opts)));
    });
}

int avar_analyze_svg(const avar_dump* d, const char* options_json, char** svg_out) {
    if (!d || !svg_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        const avar::VasOptions opts = vas_options_from(parse_object(options_json, "options"));
        *svg_out =
            dup_string(avar::vas_heatmap_svg(avar::vas_report(d->d.attention, d->d.seg, opts)));
    });
}

int avar_aggregate(const char* const* paths, size_t n_paths, const char* options_json,
                   char** json_out) {
    if (!paths || !json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        const avar::VasOptions opts = vas_options_from(parse_object(options_json, "options"));
        std::vector<avar::Dump> dumps;
        dumps.reserve(n_paths);
        for (size_t i = 0; i < n_paths; ++i) {
            if (!paths[i]) throw avar::Error(avar::Errc::invalid_argument, "null path");
            dumps.push_back(avar::read_dump_file(paths[i]));
        }
        const avar::AggregateVas agg = avar::aggregate_vas(dumps, opts);
        json samples = json::array();
        for (size_t i = 0; i < agg.per_sample.size(); ++i)
            samples.push_back(json{{"id", agg.sample_ids[i]}, {"vas", agg.per_sample[i]}});
        json j{{"mean", agg.mean},
               {"band", avar::band_name(avar::classify_band(agg.mean))},
               {"samples", samples}};
        *json_out = dup_string(j.dump());
    });
}

int avar_classify_band(double vas, const char** name_out) {
    if (!name_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    if (!std::isfinite(vas)) return fail(AVAR_NONFINITE_INPUT, "vas is not finite");
    return guard([&] { *name_out = avar::band_name(avar::classify_band(vas)); });
}

int avar_pearson(const double* xs, const double* ys, size_t n, double* r_out) {
    if (!r_out || (n > 0 && (!xs || !ys))) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        *r_out = avar::pearson(std::vector<double>(xs, xs + n), std::vector<double>(ys, ys + n));
    });
}

int avar_reallocate(const avar_dump* in, const char* options_json, avar_dump** out,
                    char** summary_json) {
    if (!in || !out || !summary_json) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j = parse_object(options_json, "options");
        require_keys(j, {"gamma", "layers", "image_only", "query_set", "strict"}, "options");
        avar::InterventionConfig cfg;
        cfg.gamma = value_or<double>(j, "gamma", cfg.gamma);
        cfg.layers = int_list_or(j, "layers", cfg.layers);
        cfg.image_only = value_or<bool>(j, "image_only", cfg.image_only);
        avar::VasOptions vopts;
        vopts.query_set = query_set_from(j, "query_set", avar::QuerySet::User);
        vopts.strict = value_or<bool>(j, "strict", false);

        auto result = std::make_unique<avar_dump>();
        result->d.attention = avar::reallocate(in->d.attention, in->d.seg, cfg);
        result->d.seg = in->d.seg;
        result->d.sample_id = in->d.sample_id;

        json summary{{"vas_before", avar::vas_model(in->d.attention, in->d.seg, vopts)},
                     {"vas_after", avar::vas_model(result->d.attention, result->d.seg, vopts)},
                     {"gamma", cfg.gamma}};
        *summary_json = dup_string(summary.dump());
        *out = result.release();
    });
}

/* ---- micro model ------------------------------------------------------ */

int avar_model_init(const char* config_json, avar_model** out) {
    if (!out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        const avar::ModelConfig cfg = model_from(parse_object(config_json, "config"));
        avar::validate_config(cfg).require();
        auto m = std::make_unique<avar_model>();
        m->ckpt.params = avar::init_params(cfg);
        m->ckpt.step = 0;
        *out = m.release();
    });
}

int avar_model_load(const char* path, avar_model** out) {
    if (!path || !out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        auto m = std::make_unique<avar_model>();
        m->ckpt = avar::load_checkpoint_file(path);
        *out = m.release();
    });
}

int avar_model_save(const avar_model* m, const char* path) {
    if (!m || !path) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] { avar::save_checkpoint_file(path, m->ckpt.params, m->ckpt.step); });
}

void avar_model_free(avar_model* m) { delete m; }

int avar_model_info(const avar_model* m, char** json_out) {
    if (!m || !json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j{{"config", model_to_json(m->ckpt.params.config)},
               {"param_count", m->ckpt.params.layout.total},
               {"step", m->ckpt.step}};
        *json_out = dup_string(j.dump());
    });
}

int avar_train(avar_model* m, const char* options_json, char** json_out) {
    if (!m || !json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j = parse_object(options_json, "options");
        require_keys(j,
                     {"steps", "lr", "alpha", "beta", "epsilon", "seed", "query_set", "layers",
                      "env", "eval_episodes", "eval_seed"},
                     "options");
        avar::TrainConfig cfg;
        cfg.steps = value_or<int>(j, "steps", cfg.steps);
        cfg.lr = value_or<double>(j, "lr", cfg.lr);
        cfg.weights.alpha = value_or<double>(j, "alpha", cfg.weights.alpha);
        cfg.weights.beta = value_or<double>(j, "beta", cfg.weights.beta);
        cfg.weights.epsilon = value_or<double>(j, "epsilon", cfg.weights.epsilon);
        cfg.seed = value_or<uint64_t>(j, "seed", cfg.seed);
        cfg.loss_query = query_set_from(j, "query_set", cfg.loss_query);
        cfg.layers = int_list_or(j, "layers", cfg.layers);
        const int eval_episodes = value_or<int>(j, "eval_episodes", 64);
        const uint64_t eval_seed = value_or<uint64_t>(j, "eval_seed", 9001);

        const avar::GroundedLookupEnv env(env_from(j.value("env", json::object())));
        check_env_fits(m->ckpt.params.config, env, env.response_len());

        json history = json::array();
        auto stats = avar::train_supervised(m->ckpt.params, env, cfg);
        for (const auto& s : stats)
            history.push_back(json{{"step", s.step},
                                   {"lm", s.lm},
                                   {"enhance_img", s.enhance_img},
                                   {"suppress_sys", s.suppress_sys},
                                   {"total", s.total},
                                   {"mean_image_attention_mass", s.mean_image_attention_mass},
                                   {"vas_model", s.vas_model}});
        m->ckpt.step += cfg.steps;
        const avar::EvalResult ev = avar::evaluate(m->ckpt.params, env, eval_episodes, eval_seed);
        json result{{"history", history}, {"eval", eval_to_json(ev)}};
        *json_out = dup_string(result.dump());
    });
}

int avar_rl(avar_model* m, const char* options_json, char** json_out) {
    if (!m || !json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j = parse_object(options_json, "options");
        require_keys(j,
                     {"steps", "seed", "group_size", "clip_range", "kl_coeff", "lr", "lambda_v",
                      "lambda_f", "epsilon", "max_new", "prompts_per_step", "epochs_per_batch",
                      "env", "eval_episodes", "eval_seed"},
                     "options");
        avar::RLConfig cfg;
        cfg.steps = value_or<int>(j, "steps", cfg.steps);
        cfg.seed = value_or<uint64_t>(j, "seed", cfg.seed);
        cfg.group_size = value_or<int>(j, "group_size", cfg.group_size);
        cfg.clip_range = value_or<double>(j, "clip_range", cfg.clip_range);
        cfg.kl_coeff = value_or<double>(j, "kl_coeff", cfg.kl_coeff);
        cfg.lr = value_or<double>(j, "lr", cfg.lr);
        cfg.reward.lambda_v = value_or<double>(j, "lambda_v", cfg.reward.lambda_v);
        cfg.reward.lambda_f = value_or<double>(j, "lambda_f", cfg.reward.lambda_f);
        cfg.reward.epsilon = value_or<double>(j, "epsilon", cfg.reward.epsilon);
        cfg.max_new = value_or<int>(j, "max_new", cfg.max_new);
        cfg.prompts_per_step = value_or<int>(j, "prompts_per_step", cfg.prompts_per_step);
        cfg.epochs_per_batch = value_or<int>(j, "epochs_per_batch", cfg.epochs_per_batch);
        avar::validate_rl_config(cfg).require();
        const int eval_episodes = value_or<int>(j, "eval_episodes", 64);
        const uint64_t eval_seed = value_or<uint64_t>(j, "eval_seed", 9001);

        const avar::GroundedLookupEnv env(env_from(j.value("env", json::object())));
        check_env_fits(m->ckpt.params.config, env, cfg.max_new);

        json history = json::array();
        auto stats = avar::train_rl(m->ckpt.params, env, cfg);
        for (const auto& s : stats)
            history.push_back(json{{"step", s.step},
                                   {"mean_reward", s.mean_reward},
                                   {"mean_accuracy", s.mean_accuracy},
                                   {"mean_visual_reward", s.mean_visual_reward},
                                   {"mean_vas", s.mean_vas},
                                   {"kl", s.kl}});
        m->ckpt.step += cfg.steps;
        const avar::EvalResult ev = avar::evaluate(m->ckpt.params, env, eval_episodes, eval_seed);
        json result{{"history", history}, {"eval", eval_to_json(ev)}};
        *json_out = dup_string(result.dump());
    });
}

int avar_gradcheck(const char* options_json, char** json_out) {
    if (!json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j = parse_object(options_json, "options");
        require_keys(j, {"seeds", "h", "tolerance", "model", "env"}, "options");
        avar::GradcheckConfig cfg;
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
        cfg.h = value_or<double>(j, "h", cfg.h);
        cfg.tolerance = value_or<double>(j, "tolerance", cfg.tolerance);
        if (j.contains("model")) cfg.model = model_from(j.at("model"));
        if (j.contains("env")) cfg.env = env_from(j.at("env"));

        const avar::GradcheckReport report = avar::gradcheck_run(cfg);
        json entries = json::array();
        for (const auto& e : report.entries)
            entries.push_back(json{{"loss", e.loss},
                                   {"seed", e.seed},
                                   {"max_rel_error", e.max_rel_error},
                                   {"pass", e.pass}});
        json result{{"pass", report.pass},
                    {"param_count", report.param_count},
                    {"entries", entries}};
        *json_out = dup_string(result.dump());
    });
}

int avar_generate(const avar_model* m, const char* options_json, char** json_out) {
    if (!m || !json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j = parse_object(options_json, "options");
        require_keys(j, {"gamma", "layers", "image_only", "episodes", "seed", "env"}, "options");
        avar::InterventionConfig cfg;
        cfg.gamma = value_or<double>(j, "gamma", cfg.gamma);
        cfg.layers = int_list_or(j, "layers", cfg.layers);
        cfg.image_only = value_or<bool>(j, "image_only", cfg.image_only);
        const int episodes = value_or<int>(j, "episodes", 32);
        const uint64_t seed = value_or<uint64_t>(j, "seed", 1);

        const avar::GroundedLookupEnv env(env_from(j.value("env", json::object())));
        check_env_fits(m->ckpt.params.config, env, env.response_len());

        const avar::GenExperimentResult r =
            avar::gen_experiment(m->ckpt.params, env, cfg, episodes, seed);
        json result{{"vas_before", r.vas_before},
                    {"vas_after", r.vas_after},
                    {"gamma", r.gamma},
                    {"accuracy_before", r.accuracy_before},
                    {"accuracy_after", r.accuracy_after},
                    {"episodes", r.episodes}};
        *json_out = dup_string(result.dump());
    });
}

int avar_compare(const char* options_json, char** json_out) {
    if (!json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j = parse_object(options_json, "options");
        require_keys(j,
                     {"seeds", "cold_steps", "rl_steps", "eval_episodes", "eval_seed", "model",
                      "env", "alpha", "beta", "lambda_v", "lr"},
                     "options");
        avar::CompareConfig cfg;
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<uint64_t>>();
        if (j.contains("model")) cfg.model = model_from(j.at("model"));
        cfg.env = env_from(j.value("env", json::object()));
        cfg.cold.steps = value_or<int>(j, "cold_steps", cfg.cold.steps);
        cfg.rl.steps = value_or<int>(j, "rl_steps", cfg.rl.steps);
        cfg.eval_episodes = value_or<int>(j, "eval_episodes", cfg.eval_episodes);
        cfg.eval_seed = value_or<uint64_t>(j, "eval_seed", cfg.eval_seed);
        cfg.cold.weights.alpha = value_or<double>(j, "alpha", cfg.cold.weights.alpha);
        cfg.cold.weights.beta = value_or<double>(j, "beta", cfg.cold.weights.beta);
        cfg.rl.reward.lambda_v = value_or<double>(j, "lambda_v", cfg.rl.reward.lambda_v);
        cfg.cold.lr = value_or<double>(j, "lr", cfg.cold.lr);
        check_env_fits(cfg.model, avar::GroundedLookupEnv(cfg.env), cfg.rl.max_new);

        json rows = json::array();
        for (const auto& row : avar::experiment_compare(cfg))
            rows.push_back(json{{"variant", row.variant},
                                {"seed", row.seed},
                                {"vas", row.vas},
                                {"accuracy", row.accuracy}});
        json result{{"rows", rows}};
        *json_out = dup_string(result.dump());
    });
}

/* ---- synthesis pipeline ------------------------------------------------ */

int avar_synth(const char* options_json, char** json_out) {
    if (!json_out) return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        json j = parse_object(options_json, "options");
        require_keys(j,
                     {"backend", "endpoint", "in", "out", "n", "concurrency", "seed",
                      "templates_dir", "anchor_every", "max_tokens", "temperature",
                      "anchor_mode"},
                     "options");
        const std::string backend = value_or<std::string>(j, "backend", "mock");
        const std::string out_path = value_or<std::string>(j, "out", "");
        if (out_path.empty())
            throw avar::Error(avar::Errc::invalid_argument, "synth requires \"out\"");
        const std::string anchor_mode = value_or<std::string>(j, "anchor_mode", "rule");
        if (anchor_mode != "rule" && anchor_mode != "client")
            throw avar::Error(avar::Errc::invalid_argument,
                              "anchor_mode must be \"rule\" or \"client\"");

        avar::MockClient mock;
        std::unique_ptr<avar::HttpClient> http;
        avar::GeneratorClient* client = &mock;
        if (backend == "http") {
            avar::HttpClientConfig hc;
            hc.endpoint = value_or<std::string>(j, "endpoint", "");
            if (hc.endpoint.empty())
                throw avar::Error(avar::Errc::invalid_argument,
                                  "http backend requires \"endpoint\"");
            http = std::make_unique<avar::HttpClient>(hc);
            client = http.get();
        } else if (backend != "mock") {
            throw avar::Error(avar::Errc::invalid_argument,
                              "backend must be \"mock\" or \"http\", got \"" + backend + "\"");
        }

        std::vector<avar::SynthesisInput> inputs;
        const std::string in_path = value_or<std::string>(j, "in", "");
        if (!in_path.empty()) {
            std::ifstream in(in_path);
            if (!in) throw avar::Error(avar::Errc::io_error, "cannot open " + in_path);
            inputs = avar::parse_inputs_jsonl(in);
        } else {
            inputs = avar::gen_inputs(value_or<int>(j, "n", 16), value_or<uint64_t>(j, "seed", 1));
        }

        const std::string templates_dir = value_or<std::string>(j, "templates_dir", "");
        const avar::StageTemplates templates = templates_dir.empty()
                                                   ? avar::StageTemplates::builtin()
                                                   : avar::StageTemplates::from_dir(templates_dir);

        avar::StageClients clients;
        clients.describe = client;
        clients.reason = client;
        clients.anchor = (anchor_mode == "client") ? client : nullptr;

        avar::PipelineOptions opts;
        opts.concurrency = value_or<int>(j, "concurrency", 1);
        opts.anchor_every = value_or<int>(j, "anchor_every", 3);
        opts.gen.max_tokens = value_or<int>(j, "max_tokens", opts.gen.max_tokens);
        opts.gen.temperature = value_or<double>(j, "temperature", opts.gen.temperature);

        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw avar::Error(avar::Errc::io_error, "cannot open " + out_path);
        const avar::PipelineSummary summary =
            avar::run_pipeline(inputs, clients, templates, opts, out);
        out.flush();
        if (!out) throw avar::Error(avar::Errc::io_error, "write failed: " + out_path);

        json failures = json::array();
        for (const auto& f : summary.failures) failures.push_back(f);
        json result{{"total", summary.total},
                    {"succeeded", summary.succeeded},
                    {"failed", summary.failed},
                    {"mean_anchor_count", summary.mean_anchor_count},
                    {"failures", failures}};
        *json_out = dup_string(result.dump());
    });
}

int avar_report_svg(const char* history_path, const char* svg_path, char** json_out) {
    if (!history_path || !svg_path || !json_out)
        return fail(AVAR_INVALID_ARGUMENT, "null argument");
    return guard([&] {
        const avar::HistoryData data = avar::load_history_file(history_path);
        const std::string svg = avar::history_svg(data);
        std::ofstream out(svg_path, std::ios::binary);
        if (!out) throw avar::Error(avar::Errc::io_error, "cannot open " + std::string(svg_path));
        out << svg;
        out.flush();
        if (!out) throw avar::Error(avar::Errc::io_error, "write failed: " + std::string(svg_path));
        json result{{"series", data.series_names}, {"points", data.steps.size()}};
        *json_out = dup_string(result.dump());
    });
}

}  // extern "C"
