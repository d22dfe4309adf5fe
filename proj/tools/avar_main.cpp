// avar: command-line front end over the shared-library C API. Every
// subcommand prints its machine-readable JSON report first, then aligned
// human-readable lines. Exit codes: 1 usage, 2 validation/format, 3
// backend/output IO.

#include <avar/avar.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;

int exit_code_for(int status, bool output_phase) {
    if (status == AVAR_BACKEND_ERROR) return kExitBackend;
    if (status == AVAR_IO_ERROR && output_phase) return kExitBackend;
    return kExitValidation;
}

[[noreturn]] void die(int status, bool output_phase = false) {
    std::fprintf(stderr, "avar: %s: %s\n", avar_status_name(status), avar_last_error());
    std::exit(exit_code_for(status, output_phase));
}

[[noreturn]] void die_msg(int code, const std::string& msg) {
    std::fprintf(stderr, "avar: %s\n", msg.c_str());
    std::exit(code);
}

void check(int status, bool output_phase = false) {
    if (status != AVAR_OK) die(status, output_phase);
}

std::string take(char* s) {
    std::string r = s ? s : "";
    avar_string_free(s);
    return r;
}

void kv(const char* key, const std::string& value) {
    std::printf("%-18s %s\n", key, value.c_str());
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct DumpHandle {
    avar_dump* d = nullptr;
    ~DumpHandle() { avar_dump_free(d); }
};

struct ModelHandle {
    avar_model* m = nullptr;
    ~ModelHandle() { avar_model_free(m); }
};

// RunConfig: one JSON document, unknown keys rejected, flags win.
json load_run_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) die_msg(kExitValidation, "cannot open config " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        die_msg(kExitValidation, "config " + path + ": not a JSON object");
    static const char* const kTop[] = {"model", "loss",         "train", "rl",
                                       "env",   "intervention", "paths", "seed"};
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : kTop) known = known || item.key() == k;
        if (!known) die_msg(kExitValidation, "config: unknown key \"" + item.key() + "\"");
    }
    if (j.contains("paths")) {
        static const char* const kPaths[] = {"checkpoint", "out",  "history", "dump",
                                             "svg",        "from", "in"};
        for (const auto& item : j.at("paths").items()) {
            bool known = false;
            for (const char* k : kPaths) known = known || item.key() == k;
            if (!known) die_msg(kExitValidation, "config paths: unknown key \"" + item.key() + "\"");
        }
    }
    return j;
}

json section(const json& cfg, const char* name) {
    return cfg.contains(name) ? cfg.at(name) : json::object();
}

void merge_into(json& dst, const json& src) {
    for (const auto& item : src.items()) dst[item.key()] = item.value();
}

std::string path_from(const json& cfg, const char* key) {
    const json p = section(cfg, "paths");
    return p.contains(key) ? p.at(key).get<std::string>() : "";
}

// Referenced paths are validated before any work begins.
void require_input_path(const std::string& path, const char* what) {
    if (path.empty()) return;
    std::error_code ec;
    if (!std::filesystem::exists(path, ec))
        die_msg(kExitValidation, std::string(what) + " not found: " + path);
}

void require_output_path(const std::string& path, const char* what) {
    if (path.empty()) return;
    const auto parent = std::filesystem::path(path).parent_path();
    if (parent.empty()) return;
    std::error_code ec;
    if (!std::filesystem::is_directory(parent, ec))
        die_msg(kExitValidation, std::string(what) + " directory missing: " + parent.string());
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) die_msg(kExitBackend, "cannot open " + path);
    out << content;
    out.flush();
    if (!out) die_msg(kExitBackend, "write failed: " + path);
}

void write_history_jsonl(const std::string& path, const json& history) {
    std::string text;
    for (const auto& row : history) {
        text += row.dump();
        text += '\n';
    }
    write_text_file(path, text);
}

void load_or_init_model(ModelHandle& mh, const std::string& ckpt, const json& model_cfg) {
    if (!ckpt.empty()) {
        require_input_path(ckpt, "checkpoint");
        check(avar_model_load(ckpt.c_str(), &mh.m));
    } else {
        check(avar_model_init(model_cfg.dump().c_str(), &mh.m));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention analysis, guided training and synthesis toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(avar_version()));

    auto set_if = [](json& j, const char* key, const CLI::Option* opt, const json& value) {
        if (opt->count() > 0) j[key] = value;
    };

    // ---- analyze -------------------------------------------------------
    auto* analyze = app.add_subcommand("analyze", "VAS report over attention dumps");
    std::vector<std::string> an_paths;
    std::string an_query = "user", an_csv, an_svg, an_json;
    bool an_strict = false;
    analyze->add_option("dumps", an_paths, "attention dump files")->required()->expected(-1);
    analyze->add_option("--query-set", an_query, "user|response")
        ->check(CLI::IsMember({"user", "response"}));
    analyze->add_flag("--strict", an_strict, "drop queries whose system span is fully masked");
    analyze->add_option("--csv", an_csv, "write the per-head CSV here (single dump)");
    analyze->add_option("--svg", an_svg, "write the per-head heatmap here (single dump)");
    analyze->add_option("--json", an_json, "also write the JSON report to this file");
    analyze->callback([&] {
        const json opts{{"query_set", an_query}, {"strict", an_strict}};
        for (const auto& p : an_paths) require_input_path(p, "dump");
        require_output_path(an_csv, "--csv");
        require_output_path(an_svg, "--svg");
        require_output_path(an_json, "--json");
        std::string report;
        if (an_paths.size() == 1) {
            DumpHandle dh;
            check(avar_dump_open(an_paths[0].c_str(), &dh.d));
            char* out = nullptr;
            check(avar_analyze(dh.d, opts.dump().c_str(), &out));
            report = take(out);
            if (!an_csv.empty()) {
                char* csv = nullptr;
                check(avar_analyze_csv(dh.d, opts.dump().c_str(), &csv));
                write_text_file(an_csv, take(csv));
            }
            if (!an_svg.empty()) {
                char* svg = nullptr;
                check(avar_analyze_svg(dh.d, opts.dump().c_str(), &svg));
                write_text_file(an_svg, take(svg));
            }
        } else {
            if (!an_csv.empty() || !an_svg.empty())
                die_msg(kExitUsage, "--csv/--svg apply to a single dump");
            std::vector<const char*> ptrs;
            ptrs.reserve(an_paths.size());
            for (const auto& p : an_paths) ptrs.push_back(p.c_str());
            char* out = nullptr;
            check(avar_aggregate(ptrs.data(), ptrs.size(), opts.dump().c_str(), &out));
            report = take(out);
        }
        if (!an_json.empty()) write_text_file(an_json, report + "\n");
        std::printf("%s\n", report.c_str());
        const json r = json::parse(report);
        if (r.contains("model_level")) {
            kv("model_vas", num(r.at("model_level").get<double>()));
            kv("band", r.at("band").get<std::string>());
            kv("query_set", r.at("query_set_kind").get<std::string>());
        } else {
            kv("mean_vas", num(r.at("mean").get<double>()));
            kv("band", r.at("band").get<std::string>());
            kv("dumps", std::to_string(r.at("samples").size()));
        }
    });

    // ---- band ------------------------------------------------------------
    auto* band = app.add_subcommand("band", "classify a model-level VAS value");
    double band_vas = 0.0;
    band->add_option("vas", band_vas, "model-level VAS")->required();
    band->callback([&] {
        const char* name = nullptr;
        check(avar_classify_band(band_vas, &name));
        std::printf("%s\n", name);
    });

    // ---- correlate ---------------------------------------------------------
    auto* corr = app.add_subcommand("correlate", "Pearson r between two series");
    std::vector<double> co_x, co_y;
    std::string co_from;
    auto* o_co_x = corr->add_option("--x", co_x, "comma-separated values")->delimiter(',');
    auto* o_co_y = corr->add_option("--y", co_y, "comma-separated values")->delimiter(',');
    corr->add_option("--from", co_from, "JSON file {\"x\":[...],\"y\":[...]}");
    corr->callback([&] {
        if (!co_from.empty()) {
            if (o_co_x->count() || o_co_y->count())
                die_msg(kExitUsage, "use either --from or --x/--y");
            require_input_path(co_from, "--from");
            std::ifstream in(co_from);
            json j = json::parse(in, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("x") || !j.contains("y"))
                die_msg(kExitValidation, "--from file must be {\"x\":[...],\"y\":[...]}");
            co_x = j.at("x").get<std::vector<double>>();
            co_y = j.at("y").get<std::vector<double>>();
        }
        if (co_x.empty() && co_y.empty()) die_msg(kExitUsage, "correlate needs --x/--y or --from");
        if (co_x.size() != co_y.size())
            die_msg(kExitValidation, "series lengths differ: " + std::to_string(co_x.size()) +
                                         " vs " + std::to_string(co_y.size()));
        double r = 0.0;
        check(avar_pearson(co_x.data(), co_y.data(), co_x.size(), &r));
        const json out{{"r", r}, {"n", co_x.size()}};
        std::printf("%s\n", out.dump().c_str());
        kv("r", num(r));
        kv("n", std::to_string(co_x.size()));
    });

    // ---- train ---------------------------------------------------------
    auto* train = app.add_subcommand("train", "supervised cold start on grounded lookup");
    std::string tr_config, tr_ckpt, tr_out, tr_history, tr_query;
    int tr_steps = 0, tr_eval_episodes = 0;
    double tr_lr = 0, tr_alpha = 0, tr_beta = 0, tr_epsilon = 0;
    std::uint64_t tr_seed = 0, tr_eval_seed = 0;
    train->add_option("--config", tr_config, "RunConfig JSON file");
    auto* o_tr_steps = train->add_option("--steps", tr_steps, "optimizer steps");
    auto* o_tr_lr = train->add_option("--lr", tr_lr, "learning rate");
    auto* o_tr_alpha = train->add_option("--alpha", tr_alpha, "image-enhancement weight");
    auto* o_tr_beta = train->add_option("--beta", tr_beta, "system-suppression weight");
    auto* o_tr_eps = train->add_option("--epsilon", tr_epsilon, "loss stability constant");
    auto* o_tr_seed = train->add_option("--seed", tr_seed, "training seed");
    auto* o_tr_query = train->add_option("--query-set", tr_query, "user|response")
                           ->check(CLI::IsMember({"user", "response"}));
    auto* o_tr_ee = train->add_option("--eval-episodes", tr_eval_episodes, "post-train eval size");
    auto* o_tr_es = train->add_option("--eval-seed", tr_eval_seed, "post-train eval seed");
    train->add_option("--checkpoint", tr_ckpt, "start from this checkpoint");
    train->add_option("--out", tr_out, "write the trained checkpoint here");
    train->add_option("--history", tr_history, "write the per-step JSONL log here");
    train->callback([&] {
        const json cfg = load_run_config(tr_config);
        json opts = section(cfg, "loss");
        merge_into(opts, section(cfg, "train"));
        if (cfg.contains("seed")) opts["seed"] = cfg.at("seed");
        if (cfg.contains("env")) opts["env"] = cfg.at("env");
        set_if(opts, "steps", o_tr_steps, tr_steps);
        set_if(opts, "lr", o_tr_lr, tr_lr);
        set_if(opts, "alpha", o_tr_alpha, tr_alpha);
        set_if(opts, "beta", o_tr_beta, tr_beta);
        set_if(opts, "epsilon", o_tr_eps, tr_epsilon);
        set_if(opts, "seed", o_tr_seed, tr_seed);
        set_if(opts, "query_set", o_tr_query, tr_query);
        set_if(opts, "eval_episodes", o_tr_ee, tr_eval_episodes);
        set_if(opts, "eval_seed", o_tr_es, tr_eval_seed);
        const std::string ckpt = tr_ckpt.empty() ? path_from(cfg, "checkpoint") : tr_ckpt;
        const std::string out = tr_out.empty() ? path_from(cfg, "out") : tr_out;
        const std::string history = tr_history.empty() ? path_from(cfg, "history") : tr_history;
        require_output_path(out, "--out");
        require_output_path(history, "--history");
        ModelHandle mh;
        load_or_init_model(mh, ckpt, section(cfg, "model"));
        char* res = nullptr;
        check(avar_train(mh.m, opts.dump().c_str(), &res));
        const json r = json::parse(take(res));
        if (!history.empty()) write_history_jsonl(history, r.at("history"));
        if (!out.empty()) check(avar_model_save(mh.m, out.c_str()), true);
        const json last =
            r.at("history").empty() ? json::object() : r.at("history").back();
        const json summary{{"steps", r.at("history").size()},
                           {"final", last},
                           {"eval", r.at("eval")}};
        std::printf("%s\n", summary.dump().c_str());
        if (!last.empty()) {
            kv("final_total", num(last.at("total").get<double>()));
            kv("final_vas", num(last.at("vas_model").get<double>()));
            kv("final_img_mass", num(last.at("mean_image_attention_mass").get<double>()));
        }
        kv("eval_accuracy", num(r.at("eval").at("accuracy").get<double>()));
        kv("eval_vas", num(r.at("eval").at("mean_vas").get<double>()));
    });

    // ---- gradcheck -------------------------------------------------------
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_config;
    std::vector<std::uint64_t> gc_seeds;
    double gc_h = 0, gc_tol = 0;
    gc->add_option("--config", gc_config, "RunConfig JSON file");
    auto* o_gc_seeds = gc->add_option("--seeds", gc_seeds, "comma-separated seeds")->delimiter(',');
    auto* o_gc_h = gc->add_option("--step-size", gc_h, "central-difference step h");
    auto* o_gc_tol = gc->add_option("--tolerance", gc_tol, "max relative error");
    gc->callback([&] {
        const json cfg = load_run_config(gc_config);
        json opts = json::object();
        if (cfg.contains("model")) opts["model"] = cfg.at("model");
        if (cfg.contains("env")) opts["env"] = cfg.at("env");
        set_if(opts, "seeds", o_gc_seeds, gc_seeds);
        set_if(opts, "h", o_gc_h, gc_h);
        set_if(opts, "tolerance", o_gc_tol, gc_tol);
        char* res = nullptr;
        check(avar_gradcheck(opts.dump().c_str(), &res));
        const json r = json::parse(take(res));
        std::printf("%s\n", r.dump().c_str());
        for (const auto& e : r.at("entries"))
            std::printf("%-14s seed %-6s max_rel %-12s %s\n",
                        e.at("loss").get<std::string>().c_str(),
                        std::to_string(e.at("seed").get<std::uint64_t>()).c_str(),
                        num(e.at("max_rel_error").get<double>()).c_str(),
                        e.at("pass").get<bool>() ? "PASS" : "FAIL");
        kv("param_count", std::to_string(r.at("param_count").get<std::uint64_t>()));
        kv("pass", r.at("pass").get<bool>() ? "true" : "false");
        if (!r.at("pass").get<bool>()) std::exit(kExitValidation);
    });

    // ---- rl --------------------------------------------------------------
    auto* rl = app.add_subcommand("rl", "GRPO fine-tuning with visual-anchored rewards");
    std::string rl_config, rl_ckpt, rl_out, rl_history;
    int rl_steps = 0, rl_group = 0, rl_max_new = 0, rl_prompts = 0, rl_epochs = 0,
        rl_eval_episodes = 0;
    double rl_clip = 0, rl_kl = 0, rl_lr = 0, rl_lv = 0, rl_lf = 0, rl_eps = 0;
    std::uint64_t rl_seed = 0, rl_eval_seed = 0;
    rl->add_option("--config", rl_config, "RunConfig JSON file");
    auto* o_rl_steps = rl->add_option("--steps", rl_steps, "optimizer steps");
    auto* o_rl_seed = rl->add_option("--seed", rl_seed, "rollout seed");
    auto* o_rl_group = rl->add_option("--group-size", rl_group, "rollouts per prompt");
    auto* o_rl_clip = rl->add_option("--clip-range", rl_clip, "surrogate clip half-width");
    auto* o_rl_kl = rl->add_option("--kl-coeff", rl_kl, "KL penalty coefficient");
    auto* o_rl_lr = rl->add_option("--lr", rl_lr, "learning rate");
    auto* o_rl_lv = rl->add_option("--lambda-v", rl_lv, "visual reward weight");
    auto* o_rl_lf = rl->add_option("--lambda-f", rl_lf, "format reward weight");
    auto* o_rl_eps = rl->add_option("--epsilon", rl_eps, "visual reward stability constant");
    auto* o_rl_mn = rl->add_option("--max-new", rl_max_new, "decode budget per episode");
    auto* o_rl_pp = rl->add_option("--prompts-per-step", rl_prompts, "rollout groups per update");
    auto* o_rl_ep = rl->add_option("--epochs-per-batch", rl_epochs, "passes per rollout batch");
    auto* o_rl_ee = rl->add_option("--eval-episodes", rl_eval_episodes, "post-train eval size");
    auto* o_rl_es = rl->add_option("--eval-seed", rl_eval_seed, "post-train eval seed");
    rl->add_option("--checkpoint", rl_ckpt, "start from this checkpoint");
    rl->add_option("--out", rl_out, "write the tuned checkpoint here");
    rl->add_option("--history", rl_history, "write the per-step JSONL log here");
    rl->callback([&] {
        const json cfg = load_run_config(rl_config);
        json opts = section(cfg, "rl");
        if (cfg.contains("seed")) opts["seed"] = cfg.at("seed");
        if (cfg.contains("env")) opts["env"] = cfg.at("env");
        set_if(opts, "steps", o_rl_steps, rl_steps);
        set_if(opts, "seed", o_rl_seed, rl_seed);
        set_if(opts, "group_size", o_rl_group, rl_group);
        set_if(opts, "clip_range", o_rl_clip, rl_clip);
        set_if(opts, "kl_coeff", o_rl_kl, rl_kl);
        set_if(opts, "lr", o_rl_lr, rl_lr);
        set_if(opts, "lambda_v", o_rl_lv, rl_lv);
        set_if(opts, "lambda_f", o_rl_lf, rl_lf);
        set_if(opts, "epsilon", o_rl_eps, rl_eps);
        set_if(opts, "max_new", o_rl_mn, rl_max_new);
        set_if(opts, "prompts_per_step", o_rl_pp, rl_prompts);
        set_if(opts, "epochs_per_batch", o_rl_ep, rl_epochs);
        set_if(opts, "eval_episodes", o_rl_ee, rl_eval_episodes);
        set_if(opts, "eval_seed", o_rl_es, rl_eval_seed);
        const std::string ckpt = rl_ckpt.empty() ? path_from(cfg, "checkpoint") : rl_ckpt;
        const std::string out = rl_out.empty() ? path_from(cfg, "out") : rl_out;
        const std::string history = rl_history.empty() ? path_from(cfg, "history") : rl_history;
        require_output_path(out, "--out");
        require_output_path(history, "--history");
        ModelHandle mh;
        load_or_init_model(mh, ckpt, section(cfg, "model"));
        char* res = nullptr;
        check(avar_rl(mh.m, opts.dump().c_str(), &res));
        const json r = json::parse(take(res));
        if (!history.empty()) write_history_jsonl(history, r.at("history"));
        if (!out.empty()) check(avar_model_save(mh.m, out.c_str()), true);
        const json last =
            r.at("history").empty() ? json::object() : r.at("history").back();
        const json summary{{"steps", r.at("history").size()},
                           {"final", last},
                           {"eval", r.at("eval")}};
        std::printf("%s\n", summary.dump().c_str());
        if (!last.empty()) {
            kv("final_reward", num(last.at("mean_reward").get<double>()));
            kv("final_accuracy", num(last.at("mean_accuracy").get<double>()));
            kv("final_vas", num(last.at("mean_vas").get<double>()));
            kv("final_kl", num(last.at("kl").get<double>()));
        }
        kv("eval_accuracy", num(r.at("eval").at("accuracy").get<double>()));
        kv("eval_sampled_acc", num(r.at("eval").at("sampled_accuracy").get<double>()));
        kv("eval_vas", num(r.at("eval").at("mean_vas").get<double>()));
        kv("eval_rollout_vas", num(r.at("eval").at("rollout_vas").get<double>()));
    });

    // ---- intervene ---------------------------------------------------------
    auto* iv = app.add_subcommand("intervene", "reallocate system attention inside a dump");
    std::string iv_dump, iv_out, iv_config, iv_query;
    double iv_gamma = 0;
    std::vector<int> iv_layers;
    bool iv_image_only = false, iv_strict = false;
    iv->add_option("dump", iv_dump, "attention dump file")->required();
    iv->add_option("--config", iv_config, "RunConfig JSON file");
    auto* o_iv_gamma = iv->add_option("--gamma", iv_gamma, "system-attention scale in (0,1]");
    auto* o_iv_layers = iv->add_option("--layers", iv_layers, "layer indices")->delimiter(',');
    auto* o_iv_img = iv->add_flag("--image-only", iv_image_only, "route freed mass to image keys");
    auto* o_iv_query = iv->add_option("--query-set", iv_query, "user|response")
                           ->check(CLI::IsMember({"user", "response"}));
    auto* o_iv_strict = iv->add_flag("--strict", iv_strict, "strict VAS in the summary");
    iv->add_option("--out", iv_out, "write the reallocated dump here");
    iv->callback([&] {
        const json cfg = load_run_config(iv_config);
        json opts = section(cfg, "intervention");
        set_if(opts, "gamma", o_iv_gamma, iv_gamma);
        set_if(opts, "layers", o_iv_layers, iv_layers);
        set_if(opts, "image_only", o_iv_img, iv_image_only);
        set_if(opts, "query_set", o_iv_query, iv_query);
        set_if(opts, "strict", o_iv_strict, iv_strict);
        require_input_path(iv_dump, "dump");
        const std::string out = iv_out.empty() ? path_from(cfg, "out") : iv_out;
        require_output_path(out, "--out");
        DumpHandle in, result;
        check(avar_dump_open(iv_dump.c_str(), &in.d));
        char* summary = nullptr;
        check(avar_reallocate(in.d, opts.dump().c_str(), &result.d, &summary));
        if (!out.empty()) check(avar_dump_save(result.d, out.c_str()), true);
        const std::string s = take(summary);
        std::printf("%s\n", s.c_str());
        const json r = json::parse(s);
        kv("vas_before", num(r.at("vas_before").get<double>()));
        kv("vas_after", num(r.at("vas_after").get<double>()));
        kv("gamma", num(r.at("gamma").get<double>()));
    });

    // ---- gen -------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "greedy decoding with and without reallocation");
    std::string gen_config, gen_ckpt;
    double gen_gamma = 0;
    std::vector<int> gen_layers;
    bool gen_image_only = false;
    int gen_episodes = 0;
    std::uint64_t gen_seed = 0;
    gen->add_option("--config", gen_config, "RunConfig JSON file");
    gen->add_option("--checkpoint", gen_ckpt, "decode with this checkpoint");
    auto* o_gen_gamma = gen->add_option("--gamma", gen_gamma, "system-attention scale in (0,1]");
    auto* o_gen_layers = gen->add_option("--layers", gen_layers, "layer indices")->delimiter(',');
    auto* o_gen_img = gen->add_flag("--image-only", gen_image_only, "route freed mass to image keys");
    auto* o_gen_eps = gen->add_option("--episodes", gen_episodes, "episodes to decode");
    auto* o_gen_seed = gen->add_option("--seed", gen_seed, "episode seed");
    gen->callback([&] {
        const json cfg = load_run_config(gen_config);
        json opts = section(cfg, "intervention");
        if (cfg.contains("env")) opts["env"] = cfg.at("env");
        set_if(opts, "gamma", o_gen_gamma, gen_gamma);
        set_if(opts, "layers", o_gen_layers, gen_layers);
        set_if(opts, "image_only", o_gen_img, gen_image_only);
        set_if(opts, "episodes", o_gen_eps, gen_episodes);
        set_if(opts, "seed", o_gen_seed, gen_seed);
        const std::string ckpt = gen_ckpt.empty() ? path_from(cfg, "checkpoint") : gen_ckpt;
        ModelHandle mh;
        load_or_init_model(mh, ckpt, section(cfg, "model"));
        char* res = nullptr;
        check(avar_generate(mh.m, opts.dump().c_str(), &res));
        const std::string s = take(res);
        std::printf("%s\n", s.c_str());
        const json r = json::parse(s);
        kv("vas_before", num(r.at("vas_before").get<double>()));
        kv("vas_after", num(r.at("vas_after").get<double>()));
        kv("gamma", num(r.at("gamma").get<double>()));
        kv("accuracy_before", num(r.at("accuracy_before").get<double>()));
        kv("accuracy_after", num(r.at("accuracy_after").get<double>()));
    });

    // ---- synth -------------------------------------------------------------
    auto* sy = app.add_subcommand("synth", "three-stage reasoning-data synthesis");
    std::string sy_backend = "mock", sy_endpoint, sy_in, sy_out, sy_templates,
                sy_anchor_mode = "rule";
    int sy_n = 16, sy_concurrency = 1, sy_anchor_every = 3, sy_max_tokens = 0;
    double sy_temperature = 0;
    std::uint64_t sy_seed = 1;
    sy->add_option("--backend", sy_backend, "mock|http")
        ->check(CLI::IsMember({"mock", "http"}));
    sy->add_option("--endpoint", sy_endpoint, "completion endpoint URL (http backend)");
    sy->add_option("--in", sy_in, "input JSONL ({id,image_ref,question,answer} per line)");
    sy->add_option("--out", sy_out, "output JSONL path")->required();
    sy->add_option("--n", sy_n, "generated toy inputs when --in is absent");
    sy->add_option("--concurrency", sy_concurrency, "max in-flight records");
    sy->add_option("--seed", sy_seed, "toy-input seed");
    sy->add_option("--templates-dir", sy_templates, "prompt template overrides");
    sy->add_option("--anchor-every", sy_anchor_every, "rule mode: anchor every k-th step");
    sy->add_option("--anchor-mode", sy_anchor_mode, "rule|client")
        ->check(CLI::IsMember({"rule", "client"}));
    auto* o_sy_mt = sy->add_option("--max-tokens", sy_max_tokens, "per-call token budget");
    auto* o_sy_temp = sy->add_option("--temperature", sy_temperature, "sampling temperature");
    sy->callback([&] {
        json opts{{"backend", sy_backend},
                  {"out", sy_out},
                  {"n", sy_n},
                  {"concurrency", sy_concurrency},
                  {"seed", sy_seed},
                  {"anchor_every", sy_anchor_every},
                  {"anchor_mode", sy_anchor_mode}};
        if (!sy_endpoint.empty()) opts["endpoint"] = sy_endpoint;
        if (!sy_in.empty()) opts["in"] = sy_in;
        if (!sy_templates.empty()) opts["templates_dir"] = sy_templates;
        set_if(opts, "max_tokens", o_sy_mt, sy_max_tokens);
        set_if(opts, "temperature", o_sy_temp, sy_temperature);
        require_input_path(sy_in, "--in");
        if (!sy_templates.empty()) require_input_path(sy_templates, "--templates-dir");
        require_output_path(sy_out, "--out");
        char* res = nullptr;
        check(avar_synth(opts.dump().c_str(), &res), true);
        const std::string s = take(res);
        std::printf("%s\n", s.c_str());
        const json r = json::parse(s);
        kv("total", std::to_string(r.at("total").get<int>()));
        kv("succeeded", std::to_string(r.at("succeeded").get<int>()));
        kv("failed", std::to_string(r.at("failed").get<int>()));
        kv("mean_anchors", num(r.at("mean_anchor_count").get<double>()));
        if (r.at("failed").get<int>() > 0) std::exit(3);  // failures are recorded in the output
    });

    // ---- report ------------------------------------------------------------
    auto* rp = app.add_subcommand("report", "render a history JSONL as SVG curves");
    std::string rp_from, rp_svg;
    rp->add_option("--from", rp_from, "history JSONL file")->required();
    rp->add_option("--svg", rp_svg, "output SVG path")->required();
    rp->callback([&] {
        require_input_path(rp_from, "--from");
        require_output_path(rp_svg, "--svg");
        char* res = nullptr;
        check(avar_report_svg(rp_from.c_str(), rp_svg.c_str(), &res), true);
        const std::string s = take(res);
        std::printf("%s\n", s.c_str());
        const json r = json::parse(s);
        std::string names;
        for (const auto& n : r.at("series")) {
            if (!names.empty()) names += ", ";
            names += n.get<std::string>();
        }
        kv("series", names);
        kv("points", std::to_string(r.at("points").get<std::uint64_t>()));
    });

    // ---- compare -----------------------------------------------------------
    auto* cp = app.add_subcommand("compare", "staged lm / attn / rl comparison");
    std::string cp_config, cp_json;
    std::vector<std::uint64_t> cp_seeds;
    int cp_cold = 0, cp_rl = 0, cp_eval = 0;
    double cp_alpha = 0, cp_beta = 0, cp_lv = 0, cp_lr = 0;
    std::uint64_t cp_eval_seed = 0;
    cp->add_option("--config", cp_config, "RunConfig JSON file");
    auto* o_cp_seeds = cp->add_option("--seeds", cp_seeds, "comma-separated seeds")->delimiter(',');
    auto* o_cp_cold = cp->add_option("--cold-steps", cp_cold, "supervised steps per variant");
    auto* o_cp_rl = cp->add_option("--rl-steps", cp_rl, "GRPO steps for the rl variant");
    auto* o_cp_eval = cp->add_option("--eval-episodes", cp_eval, "episodes per evaluation");
    auto* o_cp_es = cp->add_option("--eval-seed", cp_eval_seed, "shared evaluation seed");
    auto* o_cp_alpha = cp->add_option("--alpha", cp_alpha, "image-enhancement weight");
    auto* o_cp_beta = cp->add_option("--beta", cp_beta, "system-suppression weight");
    auto* o_cp_lv = cp->add_option("--lambda-v", cp_lv, "visual reward weight");
    auto* o_cp_lr = cp->add_option("--lr", cp_lr, "cold-start learning rate");
    cp->add_option("--json", cp_json, "also write the row report to this file");
    cp->callback([&] {
        const json cfg = load_run_config(cp_config);
        json opts = json::object();
        if (cfg.contains("model")) opts["model"] = cfg.at("model");
        if (cfg.contains("env")) opts["env"] = cfg.at("env");
        set_if(opts, "seeds", o_cp_seeds, cp_seeds);
        set_if(opts, "cold_steps", o_cp_cold, cp_cold);
        set_if(opts, "rl_steps", o_cp_rl, cp_rl);
        set_if(opts, "eval_episodes", o_cp_eval, cp_eval);
        set_if(opts, "eval_seed", o_cp_es, cp_eval_seed);
        set_if(opts, "alpha", o_cp_alpha, cp_alpha);
        set_if(opts, "beta", o_cp_beta, cp_beta);
        set_if(opts, "lambda_v", o_cp_lv, cp_lv);
        set_if(opts, "lr", o_cp_lr, cp_lr);
        require_output_path(cp_json, "--json");
        char* res = nullptr;
        check(avar_compare(opts.dump().c_str(), &res));
        const std::string s = take(res);
        if (!cp_json.empty()) write_text_file(cp_json, s + "\n");
        std::printf("%s\n", s.c_str());
        const json r = json::parse(s);
        std::printf("%-8s %-6s %-12s %s\n", "variant", "seed", "vas", "accuracy");
        for (const auto& row : r.at("rows"))
            std::printf("%-8s %-6s %-12s %s\n", row.at("variant").get<std::string>().c_str(),
                        std::to_string(row.at("seed").get<std::uint64_t>()).c_str(),
                        num(row.at("vas").get<double>()).c_str(),
                        num(row.at("accuracy").get<double>()).c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::printf("%s", app.help().c_str());
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        std::printf("%s", app.help("", CLI::AppFormatMode::All).c_str());
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::printf("%s\n", avar_version());
        return 0;
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "avar: %s\n", e.what());
        std::fprintf(stderr, "%s", app.help().c_str());
        return kExitUsage;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "avar: %s\n", e.what());
        return kExitValidation;
    }
    return 0;
}
