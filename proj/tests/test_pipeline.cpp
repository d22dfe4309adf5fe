#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "helpers.hpp"
#include "report.hpp"
#include "synth.hpp"

using namespace avar;
using nlohmann::json;
using testutil::thrown_code;

namespace {

class CannedClient : public GeneratorClient {
  public:
    explicit CannedClient(std::string reply) : reply_(std::move(reply)) {}
    std::string complete(const std::string& prompt, const GenParams&) override {
        prompts.push_back(prompt);
        return reply_;
    }
    std::string name() const override { return "canned"; }

    std::vector<std::string> prompts;

  private:
    std::string reply_;
};

struct LocalServer {
    httplib::Server srv;
    std::thread th;
    int port = 0;

    void start() {
        port = srv.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        th = std::thread([this] { srv.listen_after_bind(); });
        srv.wait_until_ready();
    }
    ~LocalServer() {
        srv.stop();
        if (th.joinable()) th.join();
    }
    std::string url(const std::string& path) const {
        return "http://127.0.0.1:" + std::to_string(port) + path;
    }
};

}  // namespace

TEST_CASE("mock backend is a pure function of its inputs") {
    MockClient mock;
    GenParams p;
    const std::string a = mock.complete("describe this scene", p);
    const std::string b = mock.complete("describe this scene", p);
    CHECK(a == b);
    CHECK(!a.empty());
    CHECK(a != mock.complete("describe that other scene", p));

    GenParams hotter = p;
    hotter.temperature = 0.7;
    CHECK(a != mock.complete("describe this scene", hotter));
}

TEST_CASE("stage templates keep their dispatch keywords and slots") {
    const StageTemplates t = StageTemplates::builtin();
    CHECK(t.describe.find("{image_doc}") != std::string::npos);
    CHECK(t.reason.find("{description}") != std::string::npos);
    CHECK(t.reason.find("{question}") != std::string::npos);
    CHECK(t.anchor.find("{chain}") != std::string::npos);

    // The reasoning prompt instructs reflection after each deduction.
    CHECK(t.reason.find("reflect") != std::string::npos);
    CHECK(t.reason.find("re-check") != std::string::npos);
    // Keyword dispatch in the mock relies on this separation.
    CHECK(t.describe.find("reflect") == std::string::npos);
    CHECK(t.describe.find("anchor") == std::string::npos);
    CHECK(t.anchor.find("anchor") != std::string::npos);
}

TEST_CASE("templates can be overridden per file from a directory") {
    testutil::TempDir dir;
    testutil::write_text(dir.file("describe.txt"), "custom {image_doc} prompt\n");
    const StageTemplates t = StageTemplates::from_dir(dir.path());
    CHECK(t.describe == "custom {image_doc} prompt\n");
    CHECK(t.reason == StageTemplates::builtin().reason);
    CHECK(t.anchor == StageTemplates::builtin().anchor);

    // Blank override files are ignored.
    testutil::write_text(dir.file("anchor.txt"), "  \n");
    CHECK(StageTemplates::from_dir(dir.path()).anchor == StageTemplates::builtin().anchor);
}

TEST_CASE("render_template substitutes every occurrence verbatim") {
    CHECK(render_template("a {x} b {x}", "x", "Y") == "a Y b Y");
    CHECK(render_template("no slots", "x", "Y") == "no slots");
    CHECK(render_template("{x}", "x", "{x}") == "{x}");  // no re-expansion
}

TEST_CASE("describe and reason stages pass payloads through verbatim") {
    const StageTemplates t = StageTemplates::builtin();
    CannedClient canned("a fine description");

    const std::string d = describe("XDOC-7781", canned, t);
    CHECK(d == "a fine description");
    REQUIRE(canned.prompts.size() == 1);
    CHECK(canned.prompts[0].find("XDOC-7781") != std::string::npos);

    const std::string r = reason(d, "what is left of the cart?", canned, t);
    CHECK(r == "a fine description");
    REQUIRE(canned.prompts.size() == 2);
    CHECK(canned.prompts[1].find("a fine description") != std::string::npos);
    CHECK(canned.prompts[1].find("what is left of the cart?") != std::string::npos);

    MockClient mock;
    CHECK(thrown_code([&] { describe("  ", mock, t); }) == Errc::empty_input);
    CHECK(thrown_code([&] { reason("", "q", mock, t); }) == Errc::empty_input);
    CHECK(thrown_code([&] { reason("d", " ", mock, t); }) == Errc::empty_input);

    CannedClient empty("");
    CHECK(thrown_code([&] { describe("doc", empty, t); }) == Errc::empty_output);
    CHECK(thrown_code([&] { reason("d", "q", empty, t); }) == Errc::empty_output);
}

TEST_CASE("anchor counting fixtures") {
    CHECK(count_anchors("Look back at the triangle") == 1);
    CHECK(count_anchors("") == 0);
    CHECK(count_anchors("Check the image again. Later, check the image again!") == 2);
    CHECK(count_anchors("CHECK THE IMAGE AGAIN") == 1);
    CHECK(count_anchors("looking backward is not an anchor") == 0);
    CHECK(count_anchors("re-examine the image and revisit the image") == 2);

    const std::vector<std::string> tiny = {"aba"};
    CHECK(count_anchors("ababa", tiny) == 1);  // non-overlapping scan
}

TEST_CASE("rule-mode anchoring inserts before every k-th step") {
    const std::string chain =
        "Step 1: a\nStep 2: b\nStep 3: c\nStep 4: d\nStep 5: e\nStep 6: f\n";
    const std::string out = integrate_anchors_rule(chain, 3);
    CHECK(count_anchors(out) == 2);

    std::vector<std::string> lines;
    std::istringstream in(out);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 8);
    CHECK(count_anchors(lines[2]) == 1);  // precedes step 3
    CHECK(lines[3] == "Step 3: c");
    CHECK(count_anchors(lines[6]) == 1);  // precedes step 6
    CHECK(lines[7] == "Step 6: f");

    // Chains shorter than k still get one trailing anchor.
    const std::string brief = integrate_anchors_rule("Step 1: a\nStep 2: b\n", 3);
    CHECK(count_anchors(brief) == 1);
    CHECK(brief.find("Step 2: b") < brief.rfind('\n'));

    CHECK(thrown_code([] { integrate_anchors_rule("", 3); }) == Errc::empty_input);
    CHECK(thrown_code([] { integrate_anchors_rule("x", 0); }) == Errc::invalid_argument);
}

TEST_CASE("client-mode anchoring validates and retries once") {
    const StageTemplates t = StageTemplates::builtin();

    MockClient mock;  // anchor prompts make the mock emit anchored chains
    const std::string out = integrate_anchors("Step 1: look closely.", mock, t);
    CHECK(count_anchors(out) >= 1);

    CannedClient bare("no anchors here, ever");
    CHECK(thrown_code([&] { integrate_anchors("Step 1: x", bare, t); }) ==
          Errc::no_anchor_produced);
    CHECK(bare.prompts.size() == 2);  // one retry

    CannedClient blank("");
    CHECK(thrown_code([&] { integrate_anchors("Step 1: x", blank, t); }) ==
          Errc::empty_output);
    CHECK(thrown_code([&] { integrate_anchors(" ", bare, t); }) == Errc::empty_input);
}

TEST_CASE("records serialize with the documented keys") {
    SynthesisRecord r;
    r.id = "rec-1";
    r.image_ref = "img";
    r.question = "q";
    r.description = "d";
    r.reasoning = "steps";
    r.anchored_reasoning = "anchored steps";
    r.anchor_count = 2;
    r.answer = "cart";
    r.describe_backend = "mock";
    r.reason_backend = "mock";
    r.anchor_backend = "rule";

    const json j = json::parse(record_to_json_line(r));
    CHECK(j.at("id") == "rec-1");
    CHECK(j.at("image_ref") == "img");
    CHECK(j.at("question") == "q");
    CHECK(j.at("description") == "d");
    CHECK(j.at("reasoning") == "steps");
    CHECK(j.at("anchored_reasoning") == "anchored steps");
    CHECK(j.at("anchor_count") == 2);
    CHECK(j.at("answer") == "cart");
    CHECK(j.at("backends").at("describe") == "mock");
    CHECK(j.at("backends").at("anchor") == "rule");
}

TEST_CASE("generated inputs are deterministic") {
    const std::vector<SynthesisInput> a = gen_inputs(5, 11);
    const std::vector<SynthesisInput> b = gen_inputs(5, 11);
    REQUIRE(a.size() == 5);
    CHECK(a[0].id == "rec-0000");
    CHECK(a[4].id == "rec-0004");
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].image_ref == b[i].image_ref);
        CHECK(a[i].question == b[i].question);
        CHECK(!a[i].answer.empty());
    }
    CHECK(gen_inputs(0, 1).empty());
    CHECK(thrown_code([] { gen_inputs(-1, 1); }) == Errc::invalid_argument);
    CHECK(gen_inputs(3, 1)[0].image_ref != gen_inputs(3, 2)[0].image_ref);
}

TEST_CASE("jsonl input parsing") {
    std::istringstream in(
        R"({"id":"a","image_ref":"x","question":"q1","answer":"v"})"
        "\n\n"
        R"({"id":"b","image_ref":"y","question":"q2"})"
        "\n");
    const std::vector<SynthesisInput> got = parse_inputs_jsonl(in);
    REQUIRE(got.size() == 2);
    CHECK(got[0].answer == "v");
    CHECK(got[1].answer.empty());
    CHECK(got[1].image_ref == "y");

    std::istringstream missing(R"({"id":"a","image_ref":"x"})" "\n");
    CHECK(thrown_code([&] { parse_inputs_jsonl(missing); }) == Errc::invalid_argument);
    std::istringstream garbage("not json\n");
    CHECK(thrown_code([&] { parse_inputs_jsonl(garbage); }) == Errc::invalid_argument);
}

TEST_CASE("pipeline keeps input order and isolates failures") {
    MockClient mock;
    StageClients clients;
    clients.describe = &mock;
    clients.reason = &mock;
    const StageTemplates t = StageTemplates::builtin();
    PipelineOptions opts;

    std::vector<SynthesisInput> inputs = gen_inputs(4, 3);
    inputs[2].image_ref = "";  // fails in the describe stage

    std::ostringstream out;
    const PipelineSummary sum = run_pipeline(inputs, clients, t, opts, out);
    CHECK(sum.total == 4);
    CHECK(sum.succeeded == 3);
    CHECK(sum.failed == 1);
    REQUIRE(sum.failures.size() == 1);
    CHECK(sum.failures[0].rfind("rec-0002", 0) == 0);

    std::istringstream lines(out.str());
    std::string line;
    int i = 0;
    double anchor_total = 0.0;
    while (std::getline(lines, line)) {
        const json j = json::parse(line);
        CHECK(j.at("id") == inputs[i].id);
        if (i == 2) {
            CHECK(j.contains("error"));
        } else {
            CHECK(j.at("anchor_count").get<int>() >= 1);
            CHECK(j.at("backends").at("anchor") == "rule");
            CHECK(count_anchors(j.at("anchored_reasoning").get<std::string>()) ==
                  j.at("anchor_count").get<int>());
            anchor_total += j.at("anchor_count").get<int>();
        }
        ++i;
    }
    CHECK(i == 4);
    CHECK(std::abs(sum.mean_anchor_count - anchor_total / 3.0) <= 1e-12);
}

TEST_CASE("pipeline output is identical across concurrency levels") {
    MockClient mock;
    StageClients clients;
    clients.describe = &mock;
    clients.reason = &mock;
    clients.anchor = &mock;
    const StageTemplates t = StageTemplates::builtin();
    const std::vector<SynthesisInput> inputs = gen_inputs(12, 7);

    std::ostringstream serial, parallel;
    PipelineOptions one;
    one.concurrency = 1;
    PipelineOptions eight;
    eight.concurrency = 8;
    const PipelineSummary s1 = run_pipeline(inputs, clients, t, one, serial);
    const PipelineSummary s8 = run_pipeline(inputs, clients, t, eight, parallel);

    CHECK(serial.str() == parallel.str());
    CHECK(s1.succeeded == 12);
    CHECK(s8.succeeded == 12);
    CHECK(s1.mean_anchor_count == s8.mean_anchor_count);
}

TEST_CASE("pipeline rejects bad options") {
    MockClient mock;
    StageClients clients;
    clients.describe = &mock;
    clients.reason = &mock;
    std::ostringstream out;
    PipelineOptions opts;

    opts.concurrency = 0;
    CHECK(thrown_code([&] {
              run_pipeline({}, clients, StageTemplates::builtin(), opts, out);
          }) == Errc::invalid_argument);

    opts = PipelineOptions{};
    StageClients missing;
    missing.describe = &mock;
    CHECK(thrown_code([&] {
              run_pipeline({}, missing, StageTemplates::builtin(), opts, out);
          }) == Errc::invalid_argument);
}

TEST_CASE("http client sends bearer auth from the environment only") {
    LocalServer server;
    std::string seen_auth = "unset";
    std::string seen_body;
    server.srv.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.has_header("Authorization") ? req.get_header_value("Authorization")
                                                    : "";
        seen_body = req.body;
        res.set_content(R"({"text":"pong"})", "application/json");
    });
    server.start();

    HttpClientConfig cfg;
    cfg.endpoint = server.url("/v1/complete");
    cfg.max_retries = 0;
    HttpClient client(cfg);
    CHECK(client.name() == "http");

    setenv("AVAR_API_KEY", "sekrit", 1);
    GenParams p;
    p.max_tokens = 64;
    p.temperature = 0.25;
    CHECK(client.complete("ping", p) == "pong");
    CHECK(seen_auth == "Bearer sekrit");
    const json body = json::parse(seen_body);
    CHECK(body.at("prompt") == "ping");
    CHECK(body.at("max_tokens") == 64);
    CHECK(std::abs(body.at("temperature").get<double>() - 0.25) <= 1e-12);

    unsetenv("AVAR_API_KEY");
    CHECK(client.complete("ping", p) == "pong");
    CHECK(seen_auth == "");
}

TEST_CASE("http client retries transient failures") {
    LocalServer server;
    std::atomic<int> calls{0};
    server.srv.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (calls.fetch_add(1) == 0) {
            res.status = 500;
            return;
        }
        res.set_content(R"({"text":"recovered"})", "application/json");
    });
    server.srv.Post("/broken", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"nope":1})", "application/json");
    });
    server.start();

    HttpClientConfig cfg;
    cfg.endpoint = server.url("/flaky");
    cfg.max_retries = 2;
    HttpClient flaky(cfg);
    CHECK(flaky.complete("x", {}) == "recovered");
    CHECK(calls.load() == 2);

    cfg.endpoint = server.url("/broken");
    cfg.max_retries = 1;
    HttpClient broken(cfg);
    CHECK(thrown_code([&] { broken.complete("x", {}); }) == Errc::backend_error);

    CHECK(thrown_code([] {
              HttpClientConfig bad;
              bad.endpoint = "not-a-url";
              HttpClient c(bad);
          }) == Errc::invalid_argument);
}

TEST_CASE("history parsing fixes the series set on the first record") {
    std::istringstream in(
        R"({"step":0,"loss":2.0,"acc":0.1})" "\n"
        R"({"step":1,"loss":1.5,"acc":0.2})" "\n"
        R"({"step":2,"loss":1.1,"acc":0.5})" "\n");
    const HistoryData d = parse_history_jsonl(in);
    REQUIRE(d.steps.size() == 3);
    REQUIRE(d.series_names.size() == 2);
    CHECK(d.series_names[0] == "acc");  // sorted
    CHECK(d.series_names[1] == "loss");
    CHECK(d.series[1][2] == 1.1);

    std::istringstream missing(
        R"({"step":0,"loss":2.0})" "\n"
        R"({"step":1})" "\n");
    CHECK(thrown_code([&] { parse_history_jsonl(missing); }) ==
          Errc::series_length_mismatch);

    std::istringstream nostep(R"({"loss":2.0})" "\n");
    CHECK(thrown_code([&] { parse_history_jsonl(nostep); }) == Errc::invalid_argument);

    std::istringstream notobj("[1,2]\n");
    CHECK(thrown_code([&] { parse_history_jsonl(notobj); }) == Errc::invalid_argument);

    std::istringstream blank("  \n\n");
    CHECK(thrown_code([&] { parse_history_jsonl(blank); }) == Errc::empty_input);
}

TEST_CASE("history svg names every series") {
    std::istringstream in(
        R"({"step":0,"loss":2.0,"vas":1.0})" "\n"
        R"({"step":1,"loss":1.0,"vas":3.0})" "\n");
    const std::string svg = history_svg(parse_history_jsonl(in));
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("loss") != std::string::npos);
    CHECK(svg.find("vas") != std::string::npos);

    CHECK(thrown_code([] { load_history_file("/nonexistent/h.jsonl"); }) == Errc::io_error);
}
