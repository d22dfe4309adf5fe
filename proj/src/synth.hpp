#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"

namespace avar {

// Three-stage synthesis: describe the image, produce a reflective reasoning
// chain, then weave visual-anchor phrases into the chain. Backends are
// pluggable; the mock is a pure function of (prompt, params) so pipeline
// runs are reproducible with no model dependence.

struct GenParams {
    int max_tokens = 256;
    double temperature = 0.0;
};

class GeneratorClient {
  public:
    virtual ~GeneratorClient() = default;
    virtual std::string complete(const std::string& prompt, const GenParams& params) = 0;
    virtual std::string name() const = 0;
};

class MockClient : public GeneratorClient {
  public:
    std::string complete(const std::string& prompt, const GenParams& params) override;
    std::string name() const override { return "mock"; }
};

struct HttpClientConfig {
    std::string endpoint;  // full URL, e.g. http://localhost:8080/v1/complete
    int max_retries = 3;
    int connect_timeout_sec = 10;
    int read_timeout_sec = 60;
    const char* api_key_env = "AVAR_API_KEY";
};

// Generic JSON completion adapter: POST {prompt, max_tokens, temperature},
// expect {text}. Bearer token read from the environment, never from config.
class HttpClient : public GeneratorClient {
  public:
    explicit HttpClient(HttpClientConfig cfg);
    std::string complete(const std::string& prompt, const GenParams& params) override;
    std::string name() const override { return "http"; }

  private:
    HttpClientConfig cfg_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
};

// Prompt templates with {slot} placeholders; stored as editable files so the
// placeholder texts can be swapped for real prompts.
struct StageTemplates {
    std::string describe;  // slot: {image_doc}
    std::string reason;    // slots: {description}, {question}
    std::string anchor;    // slot: {chain}

    static StageTemplates builtin();
    // Overrides from <dir>/describe.txt, reason.txt, anchor.txt when present.
    static StageTemplates from_dir(const std::string& dir);
};

std::string render_template(const std::string& tmpl, const std::string& slot,
                            const std::string& value);

const std::vector<std::string>& default_anchor_lexicon();

// Non-overlapping case-insensitive matches of any lexicon phrase.
int count_anchors(const std::string& text,
                  const std::vector<std::string>& lexicon = default_anchor_lexicon());

std::string describe(const std::string& image_doc, GeneratorClient& client,
                     const StageTemplates& templates, const GenParams& params = {});

std::string reason(const std::string& description, const std::string& question,
                   GeneratorClient& client, const StageTemplates& templates,
                   const GenParams& params = {});

// Rule mode: an anchor sentence is prefixed to every k-th newline-delimited
// step; chains shorter than k steps get one trailing anchor so the record
// invariant (>= 1 anchor) always holds.
std::string integrate_anchors_rule(const std::string& chain, int k = 3,
                                   const std::vector<std::string>& lexicon =
                                       default_anchor_lexicon());

// Client mode: delegates to the backend, re-validates with count_anchors,
// retries once, then fails with NoAnchorProduced.
std::string integrate_anchors(const std::string& chain, GeneratorClient& client,
                              const StageTemplates& templates, const GenParams& params = {},
                              const std::vector<std::string>& lexicon =
                                  default_anchor_lexicon());

struct SynthesisInput {
    std::string id;
    std::string image_ref;  // inline textual image surrogate
    std::string question;
    std::string answer;
};

struct SynthesisRecord {
    std::string id;
    std::string image_ref;
    std::string question;
    std::string description;
    std::string reasoning;
    std::string anchored_reasoning;
    int anchor_count = 0;
    std::string answer;
    std::string describe_backend;
    std::string reason_backend;
    std::string anchor_backend;  // "rule" when no anchor client is used
};

std::string record_to_json_line(const SynthesisRecord& r);

// Deterministic toy inputs for runs without an input file.
std::vector<SynthesisInput> gen_inputs(int n, uint64_t seed);

// JSONL loader: one {id, image_ref, question, answer} object per line.
std::vector<SynthesisInput> parse_inputs_jsonl(std::istream& in);

struct StageClients {
    GeneratorClient* describe = nullptr;
    GeneratorClient* reason = nullptr;
    GeneratorClient* anchor = nullptr;  // nullptr selects rule mode
};

struct PipelineOptions {
    int concurrency = 1;
    int anchor_every = 3;  // rule-mode k
    GenParams gen;
};

struct PipelineSummary {
    int total = 0;
    int succeeded = 0;
    int failed = 0;
    double mean_anchor_count = 0.0;
    std::vector<std::string> failures;  // "id: error"
};

// One output line per input, in input order: a SynthesisRecord on success or
// {id, error} on failure. At most opts.concurrency in-flight backend calls.
PipelineSummary run_pipeline(const std::vector<SynthesisInput>& inputs,
                             const StageClients& clients, const StageTemplates& templates,
                             const PipelineOptions& opts, std::ostream& out);

}  // namespace avar
