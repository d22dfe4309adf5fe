#pragma once

#include <stdexcept>
#include <string>

namespace avar {

// Every failure the library can report, one code per distinct condition.
// The C API exposes the same values, so keep this list append-only.
enum class Errc : int {
    ok = 0,
    invalid_argument,
    // segmentation / attention validation
    overlap,
    out_of_range,
    empty_system_span,
    empty_image_span,
    empty_query_set,
    empty_response_span,
    negative_entry,
    row_sum,
    causal_violation,
    // dump format
    bad_magic,
    header_parse,
    length_mismatch,
    // micro model
    invalid_config,
    sequence_too_long,
    symbol_out_of_range,
    stale_trace,
    shape_mismatch,
    // metrics
    series_length_mismatch,
    degenerate_variance,
    negative_score,
    empty_input,
    // rl
    group_too_small,
    nonfinite_ratio,
    nonfinite_input,
    invalid_gamma,
    // synthesis
    backend_error,
    empty_output,
    no_anchor_produced,
    // io
    io_error,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Errc code() const { return code_; }

  private:
    Errc code_;
};

// Outcome of the validate_* operations: first violated constraint, if any.
struct ValidationResult {
    bool ok = true;
    Errc code = Errc::ok;
    std::string message;

    static ValidationResult valid() { return {}; }
    static ValidationResult fail(Errc code, std::string message) {
        return {false, code, std::move(message)};
    }
    explicit operator bool() const { return ok; }
    // Raise the recorded violation as an Error.
    void require() const {
        if (!ok) throw Error(code, message);
    }
};

}  // namespace avar
