#include "synth.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rng.hpp"

namespace avar {

namespace {

using nlohmann::json;

uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

constexpr const char* kNouns[] = {"triangle", "circle",  "ladder", "kettle", "bridge",
                                  "lantern",  "cart",    "tower",  "ribbon", "prism"};
constexpr const char* kAdjs[] = {"red",    "small",  "tilted", "shaded",
                                 "bright", "narrow", "curved", "dotted"};
constexpr const char* kRelations[] = {"beside", "above",    "behind",
                                      "left of", "right of", "under"};

template <size_t N>
const char* pick(Rng& rng, const char* const (&arr)[N]) {
    return arr[rng.below(N)];
}

// Sentences the rule and the mock insert; each is matched by the lexicon.
const std::vector<std::string>& anchor_insertions() {
    static const std::vector<std::string> v = {
        "Check the image again.",
        "Look back at the image.",
        "Refer back to the image.",
        "Re-examine the image.",
    };
    return v;
}

std::string mock_description(Rng& rng) {
    std::ostringstream out;
    const int sentences = 2 + static_cast<int>(rng.below(3));
    for (int i = 0; i < sentences; ++i) {
        out << "A " << pick(rng, kAdjs) << " " << pick(rng, kNouns) << " sits "
            << pick(rng, kRelations) << " a " << pick(rng, kAdjs) << " "
            << pick(rng, kNouns) << ". ";
    }
    out << "Nothing else is visible.";
    return out.str();
}

std::string mock_reasoning(Rng& rng, bool anchored) {
    std::ostringstream out;
    const int steps = 4 + static_cast<int>(rng.below(3));
    int inserted = 0;
    for (int i = 1; i <= steps; ++i) {
        if (anchored && i % 2 == 0) {
            out << anchor_insertions()[inserted % anchor_insertions().size()] << "\n";
            ++inserted;
        }
        out << "Step " << i << ": ";
        if (i == 1) {
            out << "Locate the " << pick(rng, kAdjs) << " " << pick(rng, kNouns)
                << " named in the description.";
        } else if (i == steps) {
            out << "Conclude that the answer is the " << pick(rng, kNouns) << ".";
        } else if (i % 2 == 0) {
            out << "Note that it is " << pick(rng, kRelations) << " the "
                << pick(rng, kNouns) << ".";
        } else {
            out << "On reflection the previous step agrees with the description, keep it.";
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace

std::string MockClient::complete(const std::string& prompt, const GenParams& params) {
    uint64_t h = fnv1a(prompt);
    h = h * 31 + static_cast<uint64_t>(params.max_tokens);
    h ^= fnv1a(std::to_string(params.temperature));
    Rng rng(h);

    const std::string p = lower(prompt);
    if (p.find("anchor") != std::string::npos) return mock_reasoning(rng, /*anchored=*/true);
    if (p.find("reflect") != std::string::npos) return mock_reasoning(rng, /*anchored=*/false);
    return mock_description(rng);
}

HttpClient::HttpClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {
    const size_t scheme = cfg_.endpoint.find("://");
    if (scheme == std::string::npos)
        throw Error(Errc::invalid_argument, "endpoint must be a full URL");
    const size_t slash = cfg_.endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) {
        base_ = cfg_.endpoint;
        path_ = "/";
    } else {
        base_ = cfg_.endpoint.substr(0, slash);
        path_ = cfg_.endpoint.substr(slash);
    }
}

std::string HttpClient::complete(const std::string& prompt, const GenParams& params) {
    const json body = {{"prompt", prompt},
                       {"max_tokens", params.max_tokens},
                       {"temperature", params.temperature}};
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env); key != nullptr && *key != '\0')
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
        // One client per call: httplib clients are not safe for concurrent
        // requests, and the pipeline runs completions from several threads.
        httplib::Client cli(base_);
        cli.set_connection_timeout(cfg_.connect_timeout_sec, 0);
        cli.set_read_timeout(cfg_.read_timeout_sec, 0);

        auto res = cli.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error " + std::to_string(static_cast<int>(res.error()));
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            const json reply = json::parse(res->body);
            return reply.at("text").get<std::string>();
        } catch (const json::exception& e) {
            last_error = std::string("malformed reply: ") + e.what();
        }
    }
    throw Error(Errc::backend_error,
                "backend failed after " + std::to_string(cfg_.max_retries + 1) +
                    " attempts: " + last_error);
}

StageTemplates StageTemplates::builtin() {
    StageTemplates t;
    t.describe =
        "You are given a document that stands in for an image.\n"
        "Write a faithful, detailed visual description of everything it depicts:\n"
        "every object, its attributes, and the spatial relations between them.\n"
        "Do not speculate beyond what is shown.\n"
        "\n"
        "Image document:\n"
        "{image_doc}\n";
    t.reason =
        "Using only the visual description below, answer the question with a\n"
        "numbered chain of reasoning steps, one step per line. After each\n"
        "deduction, reflect on it: re-check the description, look for errors,\n"
        "and revise the step before moving on.\n"
        "\n"
        "Description:\n"
        "{description}\n"
        "\n"
        "Question:\n"
        "{question}\n";
    t.anchor =
        "Rewrite the reasoning chain below, inserting visual anchor phrases\n"
        "such as \"look back at the image\" or \"check the image again\" at\n"
        "natural points, so the reader is repeatedly pointed back to the\n"
        "image. Keep the content of every step.\n"
        "\n"
        "Reasoning chain:\n"
        "{chain}\n";
    return t;
}

StageTemplates StageTemplates::from_dir(const std::string& dir) {
    StageTemplates t = builtin();
    auto load = [&dir](const char* name, std::string& slot) {
        std::ifstream f(dir + "/" + name);
        if (!f) return;
        std::ostringstream buf;
        buf << f.rdbuf();
        if (!trim(buf.str()).empty()) slot = buf.str();
    };
    load("describe.txt", t.describe);
    load("reason.txt", t.reason);
    load("anchor.txt", t.anchor);
    return t;
}

std::string render_template(const std::string& tmpl, const std::string& slot,
                            const std::string& value) {
    const std::string needle = "{" + slot + "}";
    std::string out = tmpl;
    size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
        out.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return out;
}

const std::vector<std::string>& default_anchor_lexicon() {
    static const std::vector<std::string> v = {
        "look back at the",    "check the image again", "refer back to the image",
        "re-examine the image", "revisit the image",    "glance back at the image",
    };
    return v;
}

int count_anchors(const std::string& text, const std::vector<std::string>& lexicon) {
    const std::string t = lower(text);
    std::vector<std::string> phrases;
    phrases.reserve(lexicon.size());
    for (const std::string& p : lexicon) phrases.push_back(lower(p));

    int count = 0;
    size_t i = 0;
    while (i < t.size()) {
        bool matched = false;
        for (const std::string& p : phrases) {
            if (!p.empty() && t.compare(i, p.size(), p) == 0) {
                ++count;
                i += p.size();
                matched = true;
                break;
            }
        }
        if (!matched) ++i;
    }
    return count;
}

std::string describe(const std::string& image_doc, GeneratorClient& client,
                     const StageTemplates& templates, const GenParams& params) {
    if (trim(image_doc).empty()) throw Error(Errc::empty_input, "image_doc is empty");
    const std::string out =
        client.complete(render_template(templates.describe, "image_doc", image_doc), params);
    if (trim(out).empty()) throw Error(Errc::empty_output, "describe stage returned no text");
    return out;
}

std::string reason(const std::string& description, const std::string& question,
                   GeneratorClient& client, const StageTemplates& templates,
                   const GenParams& params) {
    if (trim(description).empty()) throw Error(Errc::empty_input, "description is empty");
    if (trim(question).empty()) throw Error(Errc::empty_input, "question is empty");
    std::string prompt = render_template(templates.reason, "description", description);
    prompt = render_template(prompt, "question", question);
    const std::string out = client.complete(prompt, params);
    if (trim(out).empty()) throw Error(Errc::empty_output, "reason stage returned no text");
    return out;
}

std::string integrate_anchors_rule(const std::string& chain, int k,
                                   const std::vector<std::string>& lexicon) {
    if (trim(chain).empty()) throw Error(Errc::empty_input, "reasoning chain is empty");
    if (k < 1) throw Error(Errc::invalid_argument, "k must be >= 1");

    std::ostringstream out;
    std::istringstream in(chain);
    std::string line;
    int step = 0;
    int inserted = 0;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) {
            ++step;
            if (step % k == 0) {
                out << anchor_insertions()[inserted % anchor_insertions().size()] << "\n";
                ++inserted;
            }
        }
        out << line << "\n";
    }
    if (inserted == 0) out << anchor_insertions()[0] << "\n";

    const std::string result = out.str();
    if (count_anchors(result, lexicon) < 1)
        throw Error(Errc::no_anchor_produced, "rule insertion produced no detectable anchor");
    return result;
}

std::string integrate_anchors(const std::string& chain, GeneratorClient& client,
                              const StageTemplates& templates, const GenParams& params,
                              const std::vector<std::string>& lexicon) {
    if (trim(chain).empty()) throw Error(Errc::empty_input, "reasoning chain is empty");
    const std::string prompt = render_template(templates.anchor, "chain", chain);
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::string out = client.complete(prompt, params);
        if (trim(out).empty()) throw Error(Errc::empty_output, "anchor stage returned no text");
        if (count_anchors(out, lexicon) >= 1) return out;
    }
    throw Error(Errc::no_anchor_produced,
                "backend output contains no anchor phrase after retry");
}

std::string record_to_json_line(const SynthesisRecord& r) {
    json j;
    j["id"] = r.id;
    j["image_ref"] = r.image_ref;
    j["question"] = r.question;
    j["description"] = r.description;
    j["reasoning"] = r.reasoning;
    j["anchored_reasoning"] = r.anchored_reasoning;
    j["anchor_count"] = r.anchor_count;
    j["answer"] = r.answer;
    j["backends"] = {{"describe", r.describe_backend},
                     {"reason", r.reason_backend},
                     {"anchor", r.anchor_backend}};
    return j.dump();
}

std::vector<SynthesisInput> gen_inputs(int n, uint64_t seed) {
    if (n < 0) throw Error(Errc::invalid_argument, "n must be >= 0");
    std::vector<SynthesisInput> inputs;
    inputs.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::derive(seed, static_cast<uint64_t>(i));
        const char* subject = pick(rng, kNouns);
        const char* neighbor = pick(rng, kNouns);
        SynthesisInput in;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "rec-%04d", i);
        in.id = idbuf;
        in.image_ref = std::string("A ") + pick(rng, kAdjs) + " " + subject + " " +
                       pick(rng, kRelations) + " a " + pick(rng, kAdjs) + " " + neighbor +
                       ", with a " + pick(rng, kNouns) + " in the corner.";
        in.question = std::string("Which object is closest to the ") + subject + "?";
        in.answer = neighbor;
        inputs.push_back(std::move(in));
    }
    return inputs;
}

std::vector<SynthesisInput> parse_inputs_jsonl(std::istream& in) {
    std::vector<SynthesisInput> inputs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            SynthesisInput rec;
            rec.id = j.at("id").get<std::string>();
            rec.image_ref = j.at("image_ref").get<std::string>();
            rec.question = j.at("question").get<std::string>();
            rec.answer = j.value("answer", std::string{});
            inputs.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw Error(Errc::invalid_argument,
                        "inputs line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return inputs;
}

PipelineSummary run_pipeline(const std::vector<SynthesisInput>& inputs,
                             const StageClients& clients, const StageTemplates& templates,
                             const PipelineOptions& opts, std::ostream& out) {
    if (opts.concurrency < 1) throw Error(Errc::invalid_argument, "concurrency must be >= 1");
    if (opts.anchor_every < 1) throw Error(Errc::invalid_argument, "anchor_every must be >= 1");
    if (clients.describe == nullptr || clients.reason == nullptr)
        throw Error(Errc::invalid_argument, "describe and reason clients are required");

    const size_t n = inputs.size();
    std::vector<std::string> lines(n);
    std::vector<char> ok(n, 0);
    std::vector<int> counts(n, 0);
    std::atomic<size_t> next{0};

    auto work = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            const SynthesisInput& in = inputs[i];
            try {
                SynthesisRecord rec;
                rec.id = in.id;
                rec.image_ref = in.image_ref;
                rec.question = in.question;
                rec.answer = in.answer;
                rec.description = describe(in.image_ref, *clients.describe, templates, opts.gen);
                rec.describe_backend = clients.describe->name();
                rec.reasoning =
                    reason(rec.description, in.question, *clients.reason, templates, opts.gen);
                rec.reason_backend = clients.reason->name();
                if (clients.anchor != nullptr) {
                    rec.anchored_reasoning = integrate_anchors(rec.reasoning, *clients.anchor,
                                                               templates, opts.gen);
                    rec.anchor_backend = clients.anchor->name();
                } else {
                    rec.anchored_reasoning =
                        integrate_anchors_rule(rec.reasoning, opts.anchor_every);
                    rec.anchor_backend = "rule";
                }
                rec.anchor_count = count_anchors(rec.anchored_reasoning);
                if (rec.anchor_count < 1)
                    throw Error(Errc::no_anchor_produced, "record has no anchors");
                lines[i] = record_to_json_line(rec);
                ok[i] = 1;
                counts[i] = rec.anchor_count;
            } catch (const std::exception& e) {
                json j;
                j["id"] = in.id;
                j["error"] = e.what();
                lines[i] = j.dump();
            }
        }
    };

    const size_t workers = std::min<size_t>(opts.concurrency, std::max<size_t>(n, 1));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();

    PipelineSummary sum;
    sum.total = static_cast<int>(n);
    double anchor_total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        out << lines[i] << "\n";
        if (ok[i]) {
            ++sum.succeeded;
            anchor_total += counts[i];
        } else {
            ++sum.failed;
            sum.failures.push_back(inputs[i].id + ": " + lines[i]);
        }
    }
    sum.mean_anchor_count = sum.succeeded == 0 ? 0.0 : anchor_total / sum.succeeded;
    return sum;
}

}  // namespace avar
