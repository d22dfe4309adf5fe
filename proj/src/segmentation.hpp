#pragma once

#include <vector>

#include "error.hpp"

namespace avar {

// Half-open token index interval [begin, end).
struct Span {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool empty() const { return end <= begin; }
    bool contains(int i) const { return i >= begin && i < end; }
};

// Partition of a token sequence into system (S), image (V), user (U) and
// response categories. Image and user may be split across several spans
// (interleaved prompts); system and response are single spans.
struct TokenSegmentation {
    int total_len = 0;
    Span system_span{};
    std::vector<Span> image_spans;
    std::vector<Span> user_spans;
    Span response_span{};

    std::vector<int> system_indices() const;
    std::vector<int> image_indices() const;
    std::vector<int> user_indices() const;
    std::vector<int> response_indices() const;

    bool in_image(int i) const;
    bool in_system(int i) const { return system_span.contains(i); }
};

// Checks span bounds and pairwise disjointness across all categories.
// Reports the first violated constraint; emptiness of required spans is a
// concern of downstream consumers, not of this check.
ValidationResult validate_segmentation(const TokenSegmentation& seg);

}  // namespace avar
