#include "error.hpp"

namespace avar {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::ok: return "Ok";
        case Errc::invalid_argument: return "InvalidArgument";
        case Errc::overlap: return "OverlapError";
        case Errc::out_of_range: return "OutOfRange";
        case Errc::empty_system_span: return "EmptySystemSpan";
        case Errc::empty_image_span: return "EmptyImageSpan";
        case Errc::empty_query_set: return "EmptyQuerySet";
        case Errc::empty_response_span: return "EmptyResponseSpan";
        case Errc::negative_entry: return "NegativeEntry";
        case Errc::row_sum: return "RowSumError";
        case Errc::causal_violation: return "CausalViolation";
        case Errc::bad_magic: return "BadMagic";
        case Errc::header_parse: return "HeaderParseError";
        case Errc::length_mismatch: return "LengthMismatch";
        case Errc::invalid_config: return "InvalidConfig";
        case Errc::sequence_too_long: return "SequenceTooLong";
        case Errc::symbol_out_of_range: return "SymbolOutOfRange";
        case Errc::stale_trace: return "StaleTrace";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::series_length_mismatch: return "SeriesLengthMismatch";
        case Errc::degenerate_variance: return "DegenerateVariance";
        case Errc::negative_score: return "NegativeScore";
        case Errc::empty_input: return "EmptyInput";
        case Errc::group_too_small: return "GroupTooSmall";
        case Errc::nonfinite_ratio: return "NonFiniteRatio";
        case Errc::nonfinite_input: return "NonFiniteInput";
        case Errc::invalid_gamma: return "InvalidGamma";
        case Errc::backend_error: return "BackendError";
        case Errc::empty_output: return "EmptyOutput";
        case Errc::no_anchor_produced: return "NoAnchorProduced";
        case Errc::io_error: return "IoError";
    }
    return "Unknown";
}

}  // namespace avar
