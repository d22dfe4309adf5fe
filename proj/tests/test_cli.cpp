// End-to-end coverage of the avar binary: argument handling, stdout shape
// (JSON line first, aligned kv lines after), exit codes 1/2/3, file outputs.

#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "attention.hpp"
#include "dump.hpp"
#include "micro_model.hpp"
#include "rng.hpp"
#include "vas.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

using nlohmann::json;
using testutil::CliResult;
using testutil::run_cli;

namespace {

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

json first_json(const std::string& s) { return json::parse(first_line(s)); }

avar::TokenSegmentation demo_seg() {
    avar::TokenSegmentation seg;
    seg.total_len = 12;
    seg.system_span = {0, 3};
    seg.image_spans = {{3, 7}};
    seg.user_spans = {{7, 9}};
    seg.response_span = {9, 12};
    return seg;
}

std::string write_dump(testutil::TempDir& tmp, const std::string& name, uint64_t seed) {
    avar::Rng rng(seed);
    const avar::AttentionTensor a = oracle::random_attention(rng, 2, 2, 12, true);
    const std::string path = tmp.file(name);
    avar::write_dump_file(path, a, demo_seg(), name);
    return path;
}

// small model so train/rl/compare subprocesses stay fast
std::string tiny_config(testutil::TempDir& tmp) {
    const std::string path = tmp.file("cfg.json");
    testutil::write_text(path,
                         R"({"model":{"vocab_size":16,"image_vocab_size":12,"d_model":8,)"
                         R"("n_layers":1,"n_heads":2,"max_seq_len":24,"seed":1}})");
    return path;
}

}  // namespace

TEST_CASE("cli usage, help and version") {
    CHECK(run_cli("--version").exit_code == 0);
    CHECK(!run_cli("--version").out.empty());

    const CliResult help = run_cli("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.out.find("analyze") != std::string::npos);
    CHECK(help.out.find("synth") != std::string::npos);

    CHECK(run_cli("").exit_code == 1);
    const CliResult unknown = run_cli("frobnicate");
    CHECK(unknown.exit_code == 1);
    CHECK(!unknown.err.empty());
}

TEST_CASE("cli band prints the bare band name") {
    const struct {
        const char* vas;
        const char* band;
    } table[] = {{"7.5", "Narrow"}, {"10.0", "Wide"}, {"13.8", "Wide"}, {"15.0", "Wide"},
                 {"18.9", "Panoramic"}};
    for (const auto& row : table) {
        const CliResult r = run_cli(std::string("band ") + row.vas);
        CHECK(r.exit_code == 0);
        CHECK(r.out == std::string(row.band) + "\n");
    }
    const CliResult neg = run_cli("band -- -1.0");
    CHECK(neg.exit_code == 2);
    CHECK(neg.err.find("NegativeScore") != std::string::npos);
    CHECK(run_cli("band abc").exit_code == 1);
    CHECK(run_cli("band").exit_code == 1);
}

TEST_CASE("cli analyze on a single dump") {
    testutil::TempDir tmp;
    const std::string path = write_dump(tmp, "a.dump", 21);
    const avar::Dump ref = avar::read_dump_file(path);

    const CliResult r = run_cli("analyze " + path);
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    CHECK(j.at("model_level").get<double>() ==
          avar::vas_model(ref.attention, ref.seg, avar::VasOptions{}));
    CHECK(j.at("query_set_kind").get<std::string>() == "user");
    CHECK(r.out.find("model_vas") != std::string::npos);
    CHECK(r.out.find("band") != std::string::npos);

    const CliResult resp = run_cli("analyze " + path + " --query-set response --strict");
    REQUIRE(resp.exit_code == 0);
    CHECK(first_json(resp.out).at("query_set_kind").get<std::string>() == "response");

    const std::string csv = tmp.file("a.csv"), svg = tmp.file("a.svg"), rep = tmp.file("a.json");
    const CliResult files =
        run_cli("analyze " + path + " --csv " + csv + " --svg " + svg + " --json " + rep);
    REQUIRE(files.exit_code == 0);
    CHECK(testutil::read_text(csv).rfind("layer,head,vas\n", 0) == 0);
    CHECK(testutil::read_text(svg).find("</svg>") != std::string::npos);
    CHECK(testutil::read_text(rep) == first_line(files.out) + "\n");

    const CliResult missing = run_cli("analyze " + tmp.file("gone.dump"));
    CHECK(missing.exit_code == 2);
    CHECK(missing.err.find("not found") != std::string::npos);
    CHECK(run_cli("analyze " + path + " --query-set bogus").exit_code == 1);
    CHECK(run_cli("analyze").exit_code == 1);
}

TEST_CASE("cli analyze aggregates several dumps") {
    testutil::TempDir tmp;
    std::string args = "analyze";
    for (int i = 0; i < 3; ++i)
        args += " " + write_dump(tmp, "d" + std::to_string(i) + ".dump",
                                 200 + static_cast<uint64_t>(i));

    const CliResult r = run_cli(args);
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    CHECK(j.contains("mean"));
    CHECK(j.at("samples").size() == 3);
    CHECK(r.out.find("mean_vas") != std::string::npos);
    CHECK(r.out.find("dumps") != std::string::npos);

    const CliResult mixed = run_cli(args + " --csv " + tmp.file("x.csv"));
    CHECK(mixed.exit_code == 1);
    CHECK(mixed.err.find("single dump") != std::string::npos);
}

TEST_CASE("cli correlate") {
    const CliResult table =
        run_cli("correlate --x 7.5,10.1,13.8,18.9 --y 49.3,51.0,52.6,56.1");
    REQUIRE(table.exit_code == 0);
    const json j = first_json(table.out);
    CHECK(j.at("n").get<int>() == 4);
    CHECK(j.at("r").get<double>() > 0.9);
    CHECK(j.at("r").get<double>() <= 1.0);

    const CliResult exact = run_cli("correlate --x 1,2,3 --y 1,2,3");
    REQUIRE(exact.exit_code == 0);
    CHECK(first_json(exact.out).at("r").get<double>() == doctest::Approx(1.0).epsilon(1e-12));

    testutil::TempDir tmp;
    const std::string from = tmp.file("series.json");
    testutil::write_text(from, R"({"x":[7.5,10.1,13.8,18.9],"y":[49.3,51.0,52.6,56.1]})");
    const CliResult via_file = run_cli("correlate --from " + from);
    REQUIRE(via_file.exit_code == 0);
    CHECK(first_json(via_file.out).at("r") == j.at("r"));

    CHECK(run_cli("correlate --from " + from + " --x 1,2").exit_code == 1);
    CHECK(run_cli("correlate").exit_code == 1);
    const CliResult mismatch = run_cli("correlate --x 1,2,3 --y 1,2");
    CHECK(mismatch.exit_code == 2);
    CHECK(mismatch.err.find("lengths differ") != std::string::npos);
    const CliResult flat = run_cli("correlate --x 3,3,3 --y 1,2,3");
    CHECK(flat.exit_code == 2);
    CHECK(flat.err.find("DegenerateVariance") != std::string::npos);
    const std::string bad = tmp.file("bad.json");
    testutil::write_text(bad, "[1,2,3]");
    CHECK(run_cli("correlate --from " + bad).exit_code == 2);
}

TEST_CASE("cli train writes checkpoint and history") {
    testutil::TempDir tmp;
    const std::string cfg = tiny_config(tmp);
    const std::string ckpt = tmp.file("m.avar"), hist = tmp.file("h.jsonl");
    const std::string common =
        "train --config " + cfg +
        " --steps 2 --lr 0.05 --seed 5 --alpha 0.1 --beta 0.1 --eval-episodes 4 --eval-seed 2";

    const CliResult r = run_cli(common + " --out " + ckpt + " --history " + hist);
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    CHECK(j.at("steps").get<int>() == 2);
    CHECK(j.at("final").contains("total"));
    CHECK(j.at("eval").at("accuracy").get<double>() >= 0.0);
    CHECK(r.out.find("final_total") != std::string::npos);
    CHECK(r.out.find("eval_accuracy") != std::string::npos);
    CHECK(r.out.find("eval_vas") != std::string::npos);

    std::istringstream lines(testutil::read_text(hist));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        CHECK(json::parse(line).contains("step"));
        ++n;
    }
    CHECK(n == 2);
    CHECK(avar::load_checkpoint_file(ckpt).step == 2);

    // resume from the written checkpoint
    const std::string ckpt2 = tmp.file("m2.avar");
    const CliResult more = run_cli("train --checkpoint " + ckpt +
                                   " --steps 1 --seed 6 --eval-episodes 4 --out " + ckpt2);
    REQUIRE(more.exit_code == 0);
    CHECK(avar::load_checkpoint_file(ckpt2).step == 3);

    // bit-for-bit deterministic across runs
    const CliResult again = run_cli(common + " --out " + tmp.file("m3.avar"));
    CHECK(first_line(again.out) == first_line(r.out));

    const std::string bad_cfg = tmp.file("bad.json");
    testutil::write_text(bad_cfg, R"({"modle":{}})");
    const CliResult unknown = run_cli("train --config " + bad_cfg + " --steps 1");
    CHECK(unknown.exit_code == 2);
    CHECK(unknown.err.find("unknown key") != std::string::npos);

    testutil::write_text(bad_cfg, R"({"paths":{"ckpt":"x"}})");
    CHECK(run_cli("train --config " + bad_cfg + " --steps 1").exit_code == 2);

    const CliResult bad_dir = run_cli(common + " --history " + tmp.path() + "/nodir/h.jsonl");
    CHECK(bad_dir.exit_code == 2);
    CHECK(bad_dir.err.find("directory missing") != std::string::npos);

    CHECK(run_cli("train --config " + tmp.file("gone.json") + " --steps 1").exit_code == 2);
}

TEST_CASE("cli gradcheck") {
    const CliResult r = run_cli("gradcheck --seeds 1");
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    CHECK(j.at("pass").get<bool>());
    CHECK(j.at("param_count").get<int>() == 1056);
    size_t passes = 0, pos = 0;
    while ((pos = r.out.find("PASS", pos)) != std::string::npos) {
        ++passes;
        pos += 4;
    }
    CHECK(passes == 5);

    // an absurd tolerance turns the same run into a reported failure
    const CliResult fail = run_cli("gradcheck --seeds 1 --tolerance 1e-15");
    CHECK(fail.exit_code == 2);
    CHECK(fail.out.find("FAIL") != std::string::npos);
}

TEST_CASE("cli rl smoke") {
    testutil::TempDir tmp;
    const std::string cfg = tiny_config(tmp);
    const std::string hist = tmp.file("hrl.jsonl");
    const CliResult r = run_cli(
        "rl --config " + cfg +
        " --steps 1 --group-size 4 --prompts-per-step 1 --max-new 5 --seed 3 --lr 0.05"
        " --eval-episodes 4 --eval-seed 2 --history " +
        hist);
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    CHECK(j.at("steps").get<int>() == 1);
    CHECK(r.out.find("eval_sampled_acc") != std::string::npos);
    CHECK(r.out.find("eval_rollout_vas") != std::string::npos);

    const json row = json::parse(first_line(testutil::read_text(hist)));
    CHECK(row.contains("mean_reward"));
    CHECK(row.contains("kl"));

    const CliResult bad = run_cli("rl --config " + cfg + " --steps 1 --group-size 1");
    CHECK(bad.exit_code == 2);
    CHECK(bad.err.find("GroupTooSmall") != std::string::npos);
}

TEST_CASE("cli intervene") {
    testutil::TempDir tmp;
    const std::string path = write_dump(tmp, "a.dump", 31);
    const std::string out = tmp.file("realloc.dump");

    const CliResult r = run_cli("intervene " + path + " --gamma 0.5 --out " + out);
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    const double before = j.at("vas_before").get<double>();
    const double after = j.at("vas_after").get<double>();
    CHECK(after == doctest::Approx(before / 0.5).epsilon(1e-9));
    CHECK(r.out.find("vas_before") != std::string::npos);
    CHECK(r.out.find("vas_after") != std::string::npos);
    CHECK(avar::read_dump_file(out).attention.seq_len == 12);

    const CliResult bad_gamma = run_cli("intervene " + path + " --gamma 0");
    CHECK(bad_gamma.exit_code == 2);
    CHECK(bad_gamma.err.find("InvalidGamma") != std::string::npos);
    CHECK(run_cli("intervene").exit_code == 1);
    CHECK(run_cli("intervene " + tmp.file("gone.dump") + " --gamma 0.5").exit_code == 2);
}

TEST_CASE("cli gen") {
    testutil::TempDir tmp;
    const std::string cfg = tiny_config(tmp);
    const CliResult r = run_cli("gen --config " + cfg + " --gamma 0.5 --episodes 3 --seed 2");
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    CHECK(j.at("episodes").get<int>() == 3);
    CHECK(j.at("gamma").get<double>() == 0.5);
    CHECK(r.out.find("accuracy_before") != std::string::npos);
    CHECK(r.out.find("accuracy_after") != std::string::npos);

    const CliResult bad = run_cli("gen --config " + cfg + " --gamma 2");
    CHECK(bad.exit_code == 2);
    CHECK(bad.err.find("InvalidGamma") != std::string::npos);
}

TEST_CASE("cli synth with the mock backend") {
    testutil::TempDir tmp;
    const std::string out = tmp.file("s.jsonl");
    const CliResult r = run_cli("synth --backend mock --n 5 --seed 9 --out " + out);
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    CHECK(j.at("total").get<int>() == 5);
    CHECK(j.at("succeeded").get<int>() == 5);
    CHECK(r.out.find("mean_anchors") != std::string::npos);
    const std::string bytes = testutil::read_text(out);
    CHECK(std::count(bytes.begin(), bytes.end(), '\n') == 5);

    // deterministic, including under concurrency
    const std::string out2 = tmp.file("s2.jsonl");
    REQUIRE(run_cli("synth --backend mock --n 5 --seed 9 --out " + out2).exit_code == 0);
    CHECK(testutil::read_text(out2) == bytes);
    const std::string out3 = tmp.file("s3.jsonl");
    REQUIRE(run_cli("synth --backend mock --n 5 --seed 9 --concurrency 4 --out " + out3)
                .exit_code == 0);
    CHECK(testutil::read_text(out3) == bytes);

    // a failing record is reported in the summary and flips the exit code
    const std::string in = tmp.file("in.jsonl");
    testutil::write_text(in,
                         R"({"id":"ok-1","image_ref":"img 1","question":"q1?"})"
                         "\n"
                         R"({"id":"bad-1","image_ref":"","question":"q2?"})"
                         "\n");
    const std::string out4 = tmp.file("s4.jsonl");
    const CliResult partial = run_cli("synth --backend mock --in " + in + " --out " + out4);
    CHECK(partial.exit_code == 3);
    const json pj = first_json(partial.out);
    CHECK(pj.at("failed").get<int>() == 1);
    CHECK(pj.at("succeeded").get<int>() == 1);
    CHECK(std::count_if(partial.out.begin(), partial.out.end(), [](char c) { return c == '\n'; }) >=
          2);

    CHECK(run_cli("synth --in " + tmp.file("gone.jsonl") + " --out " + out4).exit_code == 2);
    CHECK(run_cli("synth --templates-dir " + tmp.path() + "/gone --out " + out4).exit_code == 2);
    CHECK(run_cli("synth --backend bogus --out " + out4).exit_code == 1);
    CHECK(run_cli("synth").exit_code == 1);
}

TEST_CASE("cli report renders history curves") {
    testutil::TempDir tmp;
    const std::string hist = tmp.file("h.jsonl");
    testutil::write_text(hist,
                         R"({"step":1,"loss":2.5,"acc":0.1})"
                         "\n"
                         R"({"step":2,"loss":2.0,"acc":0.4})"
                         "\n"
                         R"({"step":3,"loss":1.5,"acc":0.9})"
                         "\n");
    const std::string svg = tmp.file("h.svg");
    const CliResult r = run_cli("report --from " + hist + " --svg " + svg);
    REQUIRE(r.exit_code == 0);
    CHECK(first_json(r.out).at("points").get<int>() == 3);
    CHECK(r.out.find("acc, loss") != std::string::npos);
    CHECK(testutil::read_text(svg).rfind("<svg", 0) == 0);

    CHECK(run_cli("report --from " + tmp.file("gone.jsonl") + " --svg " + svg).exit_code == 2);
    const std::string blank = tmp.file("blank.jsonl");
    testutil::write_text(blank, "\n");
    CHECK(run_cli("report --from " + blank + " --svg " + svg).exit_code == 2);
    CHECK(run_cli("report --from " + hist).exit_code == 1);
}

TEST_CASE("cli compare prints the variant table") {
    testutil::TempDir tmp;
    const std::string cfg = tiny_config(tmp);
    const std::string rows_path = tmp.file("rows.json");
    const CliResult r = run_cli("compare --config " + cfg +
                                " --seeds 1 --cold-steps 3 --rl-steps 1 --eval-episodes 4"
                                " --eval-seed 9 --json " +
                                rows_path);
    REQUIRE(r.exit_code == 0);
    const json j = first_json(r.out);
    REQUIRE(j.at("rows").size() == 3);
    CHECK(r.out.find("variant") != std::string::npos);
    CHECK(r.out.find("lm") != std::string::npos);
    CHECK(r.out.find("attn") != std::string::npos);
    CHECK(r.out.find("rl") != std::string::npos);
    CHECK(testutil::read_text(rows_path) == first_line(r.out) + "\n");
}
