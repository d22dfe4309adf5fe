// C API coverage: status codes, opaque handles, JSON options and results.
// Reference values come from the C++ core directly, so every comparison here
// crosses the extern-C boundary exactly once.

#include <doctest.h>

#include <avar/avar.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "attention.hpp"
#include "dump.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "vas.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

using nlohmann::json;

namespace {

struct CStr {
    char* p = nullptr;
    ~CStr() { avar_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DumpHandle {
    avar_dump* d = nullptr;
    ~DumpHandle() { avar_dump_free(d); }
};

struct ModelHandle {
    avar_model* m = nullptr;
    ~ModelHandle() { avar_model_free(m); }
};

avar::TokenSegmentation demo_seg() {
    avar::TokenSegmentation seg;
    seg.total_len = 12;
    seg.system_span = {0, 3};
    seg.image_spans = {{3, 7}};
    seg.user_spans = {{7, 9}};
    seg.response_span = {9, 12};
    return seg;
}

std::string write_demo_dump(testutil::TempDir& tmp, const std::string& name, uint64_t seed,
                            const std::string& id) {
    avar::Rng rng(seed);
    const avar::AttentionTensor a = oracle::random_attention(rng, 2, 2, 12, true);
    const std::string path = tmp.file(name);
    avar::write_dump_file(path, a, demo_seg(), id);
    return path;
}

// 1 layer, 2 heads, 8 dims: 1056 parameters, cheap enough for train/rl smokes.
const char* kTinyModel =
    R"({"vocab_size":16,"image_vocab_size":12,"d_model":8,"n_layers":1,"n_heads":2,"max_seq_len":24,"seed":1})";

}  // namespace

TEST_CASE("capi version and status names") {
    REQUIRE(avar_version() != nullptr);
    const std::string v = avar_version();
    CHECK(!v.empty());
    CHECK(v.find('.') != std::string::npos);

    // the enum mirrors Errc value for value
    CHECK(AVAR_OK == static_cast<int>(avar::Errc::ok));
    CHECK(AVAR_INVALID_ARGUMENT == static_cast<int>(avar::Errc::invalid_argument));
    CHECK(AVAR_CAUSAL_VIOLATION == static_cast<int>(avar::Errc::causal_violation));
    CHECK(AVAR_INVALID_CONFIG == static_cast<int>(avar::Errc::invalid_config));
    CHECK(AVAR_NEGATIVE_SCORE == static_cast<int>(avar::Errc::negative_score));
    CHECK(AVAR_NO_ANCHOR_PRODUCED == static_cast<int>(avar::Errc::no_anchor_produced));
    CHECK(AVAR_IO_ERROR == static_cast<int>(avar::Errc::io_error));

    for (int s = AVAR_OK; s <= AVAR_IO_ERROR; ++s)
        CHECK(avar_status_name(s) == std::string(avar::errc_name(static_cast<avar::Errc>(s))));
    CHECK(avar_status_name(AVAR_INTERNAL_ERROR) == std::string("InternalError"));
    CHECK(avar_status_name(AVAR_INTERNAL_ERROR + 5) == std::string("UnknownStatus"));
    CHECK(avar_status_name(-1) == std::string("UnknownStatus"));
}

TEST_CASE("capi last error is set on failure and cleared on success") {
    testutil::TempDir tmp;
    DumpHandle h;
    CHECK(avar_dump_open(tmp.file("missing.dump").c_str(), &h.d) == AVAR_IO_ERROR);
    CHECK(h.d == nullptr);
    CHECK(std::string(avar_last_error()) != "");

    const char* name = nullptr;
    CHECK(avar_classify_band(5.0, &name) == AVAR_OK);
    CHECK(std::string(avar_last_error()) == "");

    CHECK(avar_dump_open(nullptr, &h.d) == AVAR_INVALID_ARGUMENT);
    CHECK(avar_dump_open("x", nullptr) == AVAR_INVALID_ARGUMENT);
}

TEST_CASE("capi dump open, info and save round trip") {
    testutil::TempDir tmp;
    const std::string path = write_demo_dump(tmp, "a.dump", 11, "demo");

    DumpHandle h;
    REQUIRE(avar_dump_open(path.c_str(), &h.d) == AVAR_OK);
    REQUIRE(h.d != nullptr);

    CStr info;
    REQUIRE(avar_dump_info(h.d, &info.p) == AVAR_OK);
    const json j = json::parse(info.str());
    CHECK(j.at("seq_len").get<int>() == 12);
    CHECK(j.at("layers").get<int>() == 2);
    CHECK(j.at("heads").get<int>() == 2);
    CHECK(j.at("causal").get<bool>() == true);
    CHECK(j.at("sample_id").get<std::string>() == "demo");

    // canonical serialization: save of an opened dump is byte-identical
    const std::string copy = tmp.file("b.dump");
    REQUIRE(avar_dump_save(h.d, copy.c_str()) == AVAR_OK);
    CHECK(testutil::read_text(copy) == testutil::read_text(path));

    CHECK(avar_dump_save(h.d, "/nonexistent-dir/x.dump") == AVAR_IO_ERROR);
    CHECK(avar_dump_info(h.d, nullptr) == AVAR_INVALID_ARGUMENT);
}

TEST_CASE("capi analyze emits the report in three formats") {
    testutil::TempDir tmp;
    const std::string path = write_demo_dump(tmp, "a.dump", 12, "s0");
    const avar::Dump ref = avar::read_dump_file(path);

    DumpHandle h;
    REQUIRE(avar_dump_open(path.c_str(), &h.d) == AVAR_OK);

    SUBCASE("json, default options") {
        CStr out;
        REQUIRE(avar_analyze(h.d, "", &out.p) == AVAR_OK);
        const json j = json::parse(out.str());
        CHECK(j.at("model_level").get<double>() ==
              avar::vas_model(ref.attention, ref.seg, avar::VasOptions{}));
        CHECK(j.at("query_set_kind").get<std::string>() == "user");
        CHECK(j.contains("band"));
        CHECK(j.at("per_layer").size() == 2);
        CHECK(j.at("per_head").size() == 2);
        CHECK(j.at("per_head").at(0).size() == 2);
        REQUIRE(j.at("samples").size() == 1);
        CHECK(j.at("samples").at(0).at("id").get<std::string>() == "s0");
    }
    SUBCASE("json, response query set") {
        CStr out;
        REQUIRE(avar_analyze(h.d, R"({"query_set":"response","strict":true})", &out.p) == AVAR_OK);
        avar::VasOptions opts;
        opts.query_set = avar::QuerySet::Response;
        opts.strict = true;
        const json j = json::parse(out.str());
        CHECK(j.at("model_level").get<double>() == avar::vas_model(ref.attention, ref.seg, opts));
        CHECK(j.at("query_set_kind").get<std::string>() == "response");
    }
    SUBCASE("csv") {
        CStr out;
        REQUIRE(avar_analyze_csv(h.d, "", &out.p) == AVAR_OK);
        const std::string csv = out.str();
        CHECK(csv.rfind("layer,head,vas\n", 0) == 0);
        CHECK(csv.find("model,-,") != std::string::npos);
    }
    SUBCASE("svg") {
        CStr out;
        REQUIRE(avar_analyze_svg(h.d, "", &out.p) == AVAR_OK);
        CHECK(out.str().rfind("<svg", 0) == 0);
        CHECK(out.str().find("</svg>") != std::string::npos);
    }
    SUBCASE("options validation") {
        CStr out;
        CHECK(avar_analyze(h.d, R"({"quer_set":"user"})", &out.p) == AVAR_INVALID_ARGUMENT);
        CHECK(std::string(avar_last_error()).find("unknown key") != std::string::npos);
        CHECK(avar_analyze(h.d, "{nope", &out.p) == AVAR_INVALID_ARGUMENT);
        CHECK(avar_analyze(h.d, "[1,2]", &out.p) == AVAR_INVALID_ARGUMENT);
        CHECK(avar_analyze(h.d, R"({"query_set":"bogus"})", &out.p) == AVAR_INVALID_ARGUMENT);
        CHECK(std::string(avar_last_error()).find("query_set") != std::string::npos);
        CHECK(avar_analyze(nullptr, "", &out.p) == AVAR_INVALID_ARGUMENT);
    }
}

TEST_CASE("capi aggregate over dump files") {
    testutil::TempDir tmp;
    std::vector<std::string> paths;
    std::vector<avar::Dump> dumps;
    for (int i = 0; i < 3; ++i) {
        paths.push_back(write_demo_dump(tmp, "d" + std::to_string(i) + ".dump",
                                        100 + static_cast<uint64_t>(i), "s" + std::to_string(i)));
        dumps.push_back(avar::read_dump_file(paths.back()));
    }
    const avar::AggregateVas ref = avar::aggregate_vas(dumps, avar::VasOptions{});

    std::vector<const char*> cpaths;
    for (const auto& p : paths) cpaths.push_back(p.c_str());

    CStr out;
    REQUIRE(avar_aggregate(cpaths.data(), cpaths.size(), "", &out.p) == AVAR_OK);
    const json j = json::parse(out.str());
    CHECK(j.at("mean").get<double>() == ref.mean);
    CHECK(j.at("band").get<std::string>() ==
          avar::band_name(avar::classify_band(ref.mean)));
    REQUIRE(j.at("samples").size() == 3);
    for (size_t i = 0; i < 3; ++i) {
        CHECK(j.at("samples").at(i).at("id").get<std::string>() == ref.sample_ids[i]);
        CHECK(j.at("samples").at(i).at("vas").get<double>() == ref.per_sample[i]);
    }

    CStr bad;
    CHECK(avar_aggregate(cpaths.data(), 0, "", &bad.p) == AVAR_EMPTY_INPUT);
    cpaths[1] = nullptr;
    CHECK(avar_aggregate(cpaths.data(), cpaths.size(), "", &bad.p) == AVAR_INVALID_ARGUMENT);
    const std::string missing = tmp.file("gone.dump");
    cpaths[1] = missing.c_str();
    CHECK(avar_aggregate(cpaths.data(), cpaths.size(), "", &bad.p) == AVAR_IO_ERROR);
}

TEST_CASE("capi band classification and pearson") {
    const struct {
        double vas;
        const char* band;
    } table[] = {{7.5, "Narrow"}, {10.0, "Wide"}, {13.8, "Wide"}, {15.0, "Wide"},
                 {18.9, "Panoramic"}};
    for (const auto& row : table) {
        const char* name = nullptr;
        REQUIRE(avar_classify_band(row.vas, &name) == AVAR_OK);
        CHECK(name == std::string(row.band));  // static string, not freed
    }
    const char* name = nullptr;
    CHECK(avar_classify_band(-0.5, &name) == AVAR_NEGATIVE_SCORE);
    CHECK(avar_classify_band(std::nan(""), &name) == AVAR_NONFINITE_INPUT);
    CHECK(avar_classify_band(HUGE_VAL, &name) == AVAR_NONFINITE_INPUT);
    CHECK(avar_classify_band(5.0, nullptr) == AVAR_INVALID_ARGUMENT);

    const std::vector<double> xs{7.5, 10.1, 13.8, 18.9};
    const std::vector<double> ys{49.3, 51.0, 52.6, 56.1};
    double r = 0.0;
    REQUIRE(avar_pearson(xs.data(), ys.data(), xs.size(), &r) == AVAR_OK);
    CHECK(r == doctest::Approx(oracle::pearson_moments(xs, ys)).epsilon(1e-12));
    CHECK(r > 0.9);

    CHECK(avar_pearson(xs.data(), ys.data(), 1, &r) == AVAR_SERIES_LENGTH_MISMATCH);
    CHECK(avar_pearson(nullptr, nullptr, 0, &r) == AVAR_SERIES_LENGTH_MISMATCH);
    const std::vector<double> flat{3.0, 3.0, 3.0, 3.0};
    CHECK(avar_pearson(flat.data(), ys.data(), 4, &r) == AVAR_DEGENERATE_VARIANCE);
    CHECK(avar_pearson(nullptr, ys.data(), 4, &r) == AVAR_INVALID_ARGUMENT);
    CHECK(avar_pearson(xs.data(), ys.data(), 4, nullptr) == AVAR_INVALID_ARGUMENT);
}

TEST_CASE("capi reallocation produces a derived dump plus summary") {
    testutil::TempDir tmp;
    const std::string path = write_demo_dump(tmp, "a.dump", 13, "s0");
    const avar::Dump ref = avar::read_dump_file(path);

    DumpHandle in;
    REQUIRE(avar_dump_open(path.c_str(), &in.d) == AVAR_OK);

    DumpHandle out;
    CStr summary;
    REQUIRE(avar_reallocate(in.d, R"({"gamma":0.5})", &out.d, &summary.p) == AVAR_OK);
    REQUIRE(out.d != nullptr);

    const json j = json::parse(summary.str());
    CHECK(j.at("gamma").get<double>() == 0.5);
    const double before = j.at("vas_before").get<double>();
    const double after = j.at("vas_after").get<double>();
    CHECK(before == avar::vas_model(ref.attention, ref.seg, avar::VasOptions{}));
    CHECK(after == doctest::Approx(before / 0.5).epsilon(1e-9));

    // the derived dump is a real dump: info works, save works
    CStr info;
    REQUIRE(avar_dump_info(out.d, &info.p) == AVAR_OK);
    CHECK(json::parse(info.str()).at("seq_len").get<int>() == 12);
    REQUIRE(avar_dump_save(out.d, tmp.file("realloc.dump").c_str()) == AVAR_OK);

    DumpHandle bad;
    CStr s2;
    CHECK(avar_reallocate(in.d, R"({"gamma":0.0})", &bad.d, &s2.p) == AVAR_INVALID_GAMMA);
    CHECK(avar_reallocate(in.d, R"({"gama":0.5})", &bad.d, &s2.p) == AVAR_INVALID_ARGUMENT);
    CHECK(avar_reallocate(in.d, R"({"gamma":0.5,"layers":[7]})", &bad.d, &s2.p) ==
          AVAR_OUT_OF_RANGE);
}

TEST_CASE("capi model lifecycle") {
    testutil::TempDir tmp;
    ModelHandle m;
    REQUIRE(avar_model_init(kTinyModel, &m.m) == AVAR_OK);

    CStr info;
    REQUIRE(avar_model_info(m.m, &info.p) == AVAR_OK);
    const json j = json::parse(info.str());
    CHECK(j.at("param_count").get<int>() == 1056);
    CHECK(j.at("step").get<int>() == 0);
    CHECK(j.at("config").at("d_model").get<int>() == 8);
    CHECK(j.at("config").at("n_layers").get<int>() == 1);
    CHECK(j.at("config").at("n_heads").get<int>() == 2);
    CHECK(j.at("config").at("vocab_size").get<int>() == 16);
    CHECK(j.at("config").at("image_vocab_size").get<int>() == 12);
    CHECK(j.at("config").at("max_seq_len").get<int>() == 24);

    const std::string ckpt = tmp.file("m.avar");
    REQUIRE(avar_model_save(m.m, ckpt.c_str()) == AVAR_OK);
    ModelHandle back;
    REQUIRE(avar_model_load(ckpt.c_str(), &back.m) == AVAR_OK);
    CStr info2;
    REQUIRE(avar_model_info(back.m, &info2.p) == AVAR_OK);
    CHECK(info2.str() == info.str());

    ModelHandle bad;
    CHECK(avar_model_init(R"({"d_model":9,"n_heads":2})", &bad.m) == AVAR_INVALID_CONFIG);
    CHECK(avar_model_init("[]", &bad.m) == AVAR_INVALID_ARGUMENT);
    CHECK(avar_model_init(R"({"dmodel":8})", &bad.m) == AVAR_INVALID_ARGUMENT);
    CHECK(avar_model_load(tmp.file("gone.avar").c_str(), &bad.m) == AVAR_IO_ERROR);
    CHECK(avar_model_save(m.m, "/nonexistent-dir/m.avar") == AVAR_IO_ERROR);
}

TEST_CASE("capi supervised training smoke") {
    const char* opts = R"({"steps":3,"lr":0.05,"seed":7,"alpha":0.1,"beta":0.1,
                           "eval_episodes":8,"eval_seed":5})";

    ModelHandle m;
    REQUIRE(avar_model_init(kTinyModel, &m.m) == AVAR_OK);
    CStr out;
    REQUIRE(avar_train(m.m, opts, &out.p) == AVAR_OK);
    const json j = json::parse(out.str());

    REQUIRE(j.at("history").size() == 3);
    for (const char* key : {"step", "lm", "enhance_img", "suppress_sys", "total",
                            "mean_image_attention_mass", "vas_model"})
        CHECK(j.at("history").at(0).contains(key));
    for (const char* key :
         {"accuracy", "format", "mean_vas", "mean_image_mass", "sampled_accuracy", "rollout_vas"})
        CHECK(std::isfinite(j.at("eval").at(key).get<double>()));

    CStr info;
    REQUIRE(avar_model_info(m.m, &info.p) == AVAR_OK);
    CHECK(json::parse(info.str()).at("step").get<int>() == 3);

    // deterministic: a fresh model trained with the same options matches exactly
    ModelHandle m2;
    REQUIRE(avar_model_init(kTinyModel, &m2.m) == AVAR_OK);
    CStr out2;
    REQUIRE(avar_train(m2.m, opts, &out2.p) == AVAR_OK);
    CHECK(out2.str() == out.str());

    CStr bad;
    CHECK(avar_train(m.m, R"({"step":3})", &bad.p) == AVAR_INVALID_ARGUMENT);
    CHECK(avar_train(m.m, R"({"env":{"n_keys":30}})", &bad.p) == AVAR_INVALID_CONFIG);
}

TEST_CASE("capi rl smoke") {
    const char* opts = R"({"steps":2,"seed":3,"group_size":4,"prompts_per_step":1,
                           "max_new":5,"lr":0.05,"eval_episodes":8,"eval_seed":5})";

    ModelHandle m;
    REQUIRE(avar_model_init(kTinyModel, &m.m) == AVAR_OK);
    CStr out;
    REQUIRE(avar_rl(m.m, opts, &out.p) == AVAR_OK);
    const json j = json::parse(out.str());

    REQUIRE(j.at("history").size() == 2);
    for (const char* key : {"step", "mean_reward", "mean_accuracy", "mean_visual_reward",
                            "mean_vas", "kl"})
        CHECK(j.at("history").at(0).contains(key));
    CHECK(std::isfinite(j.at("eval").at("sampled_accuracy").get<double>()));
    CHECK(std::isfinite(j.at("eval").at("rollout_vas").get<double>()));

    CStr bad;
    CHECK(avar_rl(m.m, R"({"group_size":1})", &bad.p) == AVAR_GROUP_TOO_SMALL);
    CHECK(avar_rl(m.m, R"({"groupsize":4})", &bad.p) == AVAR_INVALID_ARGUMENT);
}

TEST_CASE("capi gradcheck") {
    CStr out;
    REQUIRE(avar_gradcheck(R"({"seeds":[1],"h":1e-5,"tolerance":1e-4})", &out.p) == AVAR_OK);
    const json j = json::parse(out.str());
    CHECK(j.at("pass").get<bool>());
    CHECK(j.at("param_count").get<int>() == 1056);
    REQUIRE(j.at("entries").size() == 5);
    for (const auto& e : j.at("entries")) {
        CHECK(e.at("pass").get<bool>());
        CHECK(e.at("max_rel_error").get<double>() < 1e-4);
    }

    CStr bad;
    CHECK(avar_gradcheck(R"({"seed":[1]})", &bad.p) == AVAR_INVALID_ARGUMENT);
}

TEST_CASE("capi generation intervention experiment") {
    ModelHandle m;
    REQUIRE(avar_model_init(kTinyModel, &m.m) == AVAR_OK);
    CStr out;
    REQUIRE(avar_generate(m.m, R"({"gamma":0.5,"episodes":4,"seed":2})", &out.p) == AVAR_OK);
    const json j = json::parse(out.str());
    CHECK(j.at("gamma").get<double>() == 0.5);
    CHECK(j.at("episodes").get<int>() == 4);
    CHECK(j.at("vas_before").get<double>() > 0.0);
    CHECK(std::isfinite(j.at("vas_after").get<double>()));
    CHECK(std::isfinite(j.at("accuracy_before").get<double>()));
    CHECK(std::isfinite(j.at("accuracy_after").get<double>()));

    CStr bad;
    CHECK(avar_generate(m.m, R"({"gamma":1.5})", &bad.p) == AVAR_INVALID_GAMMA);
}

TEST_CASE("capi compare runs all three variants") {
    json opts{{"seeds", {1}},
              {"cold_steps", 5},
              {"rl_steps", 1},
              {"eval_episodes", 4},
              {"eval_seed", 9},
              {"model", json::parse(kTinyModel)}};
    CStr out;
    REQUIRE(avar_compare(opts.dump().c_str(), &out.p) == AVAR_OK);
    const json j = json::parse(out.str());
    REQUIRE(j.at("rows").size() == 3);
    int lm = 0, attn = 0, rl = 0;
    for (const auto& row : j.at("rows")) {
        const std::string variant = row.at("variant").get<std::string>();
        lm += variant == "lm";
        attn += variant == "attn";
        rl += variant == "rl";
        CHECK(row.at("seed").get<int>() == 1);
        CHECK(std::isfinite(row.at("vas").get<double>()));
        CHECK(std::isfinite(row.at("accuracy").get<double>()));
    }
    CHECK(lm == 1);
    CHECK(attn == 1);
    CHECK(rl == 1);
}

TEST_CASE("capi synthesis with the mock backend") {
    testutil::TempDir tmp;
    const std::string out_path = tmp.file("synth.jsonl");

    SUBCASE("generated inputs") {
        json opts{{"backend", "mock"}, {"n", 6}, {"seed", 4}, {"out", out_path},
                  {"concurrency", 2}};
        CStr out;
        REQUIRE(avar_synth(opts.dump().c_str(), &out.p) == AVAR_OK);
        const json j = json::parse(out.str());
        CHECK(j.at("total").get<int>() == 6);
        CHECK(j.at("succeeded").get<int>() == 6);
        CHECK(j.at("failed").get<int>() == 0);
        CHECK(j.at("failures").empty());
        CHECK(j.at("mean_anchor_count").get<double>() > 0.0);

        std::istringstream lines(testutil::read_text(out_path));
        std::string line;
        int n = 0;
        while (std::getline(lines, line)) {
            const json rec = json::parse(line);
            CHECK(rec.at("id").get<std::string>() ==
                  "rec-000" + std::to_string(n));
            CHECK(rec.at("anchor_count").get<int>() > 0);
            ++n;
        }
        CHECK(n == 6);
    }
    SUBCASE("input file with one poisoned record") {
        const std::string in_path = tmp.file("in.jsonl");
        testutil::write_text(in_path,
                             R"({"id":"ok-1","image_ref":"img 1","question":"q1?"})"
                             "\n"
                             R"({"id":"bad-1","image_ref":"","question":"q2?"})"
                             "\n");
        json opts{{"backend", "mock"}, {"in", in_path}, {"out", out_path}};
        CStr out;
        REQUIRE(avar_synth(opts.dump().c_str(), &out.p) == AVAR_OK);
        const json j = json::parse(out.str());
        CHECK(j.at("total").get<int>() == 2);
        CHECK(j.at("succeeded").get<int>() == 1);
        CHECK(j.at("failed").get<int>() == 1);
        REQUIRE(j.at("failures").size() == 1);
        CHECK(j.at("failures").at(0).get<std::string>().rfind("bad-1:", 0) == 0);
    }
    SUBCASE("option validation") {
        CStr out;
        json no_out{{"backend", "mock"}, {"n", 2}};
        CHECK(avar_synth(no_out.dump().c_str(), &out.p) == AVAR_INVALID_ARGUMENT);
        json bad_backend{{"backend", "smoke"}, {"out", out_path}};
        CHECK(avar_synth(bad_backend.dump().c_str(), &out.p) == AVAR_INVALID_ARGUMENT);
        json bad_mode{{"backend", "mock"}, {"out", out_path}, {"anchor_mode", "sometimes"}};
        CHECK(avar_synth(bad_mode.dump().c_str(), &out.p) == AVAR_INVALID_ARGUMENT);
        json no_endpoint{{"backend", "http"}, {"out", out_path}};
        CHECK(avar_synth(no_endpoint.dump().c_str(), &out.p) == AVAR_INVALID_ARGUMENT);
        json gone_in{{"backend", "mock"}, {"in", tmp.file("gone.jsonl")}, {"out", out_path}};
        CHECK(avar_synth(gone_in.dump().c_str(), &out.p) == AVAR_IO_ERROR);
    }
}

TEST_CASE("capi report svg") {
    testutil::TempDir tmp;
    const std::string hist = tmp.file("hist.jsonl");
    testutil::write_text(hist,
                         R"({"step":1,"loss":2.5,"acc":0.1})"
                         "\n"
                         R"({"step":2,"loss":2.0,"acc":0.4})"
                         "\n"
                         R"({"step":3,"loss":1.5,"acc":0.9})"
                         "\n");
    const std::string svg_path = tmp.file("hist.svg");

    CStr out;
    REQUIRE(avar_report_svg(hist.c_str(), svg_path.c_str(), &out.p) == AVAR_OK);
    const json j = json::parse(out.str());
    CHECK(j.at("series") == json({"acc", "loss"}));
    CHECK(j.at("points").get<int>() == 3);
    const std::string svg = testutil::read_text(svg_path);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("acc") != std::string::npos);
    CHECK(svg.find("loss") != std::string::npos);

    CStr bad;
    CHECK(avar_report_svg(tmp.file("gone.jsonl").c_str(), svg_path.c_str(), &bad.p) ==
          AVAR_IO_ERROR);
    const std::string blank = tmp.file("blank.jsonl");
    testutil::write_text(blank, "\n\n");
    CHECK(avar_report_svg(blank.c_str(), svg_path.c_str(), &bad.p) == AVAR_EMPTY_INPUT);
}
