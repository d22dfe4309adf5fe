#include "segmentation.hpp"

#include <algorithm>
#include <cstdio>
#include <string>

namespace avar {

namespace {

std::string span_str(const Span& s) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "[%d,%d)", s.begin, s.end);
    return buf;
}

void collect(const Span& s, std::vector<int>& out) {
    for (int i = s.begin; i < s.end; ++i) out.push_back(i);
}

}  // namespace

std::vector<int> TokenSegmentation::system_indices() const {
    std::vector<int> out;
    collect(system_span, out);
    return out;
}

std::vector<int> TokenSegmentation::image_indices() const {
    std::vector<int> out;
    for (const Span& s : image_spans) collect(s, out);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> TokenSegmentation::user_indices() const {
    std::vector<int> out;
    for (const Span& s : user_spans) collect(s, out);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> TokenSegmentation::response_indices() const {
    std::vector<int> out;
    collect(response_span, out);
    return out;
}

bool TokenSegmentation::in_image(int i) const {
    for (const Span& s : image_spans)
        if (s.contains(i)) return true;
    return false;
}

ValidationResult validate_segmentation(const TokenSegmentation& seg) {
    struct Named {
        const char* name;
        Span span;
    };
    std::vector<Named> spans;
    if (!seg.system_span.empty()) spans.push_back({"system", seg.system_span});
    for (const Span& s : seg.image_spans)
        if (!s.empty()) spans.push_back({"image", s});
    for (const Span& s : seg.user_spans)
        if (!s.empty()) spans.push_back({"user", s});
    if (!seg.response_span.empty()) spans.push_back({"response", seg.response_span});

    if (seg.total_len < 0)
        return ValidationResult::fail(Errc::out_of_range, "total_len is negative");

    for (const Named& n : spans) {
        if (n.span.begin < 0 || n.span.end > seg.total_len)
            return ValidationResult::fail(
                Errc::out_of_range, std::string(n.name) + " span " + span_str(n.span) +
                                        " exceeds total_len " + std::to_string(seg.total_len));
    }
    for (size_t a = 0; a < spans.size(); ++a) {
        for (size_t b = a + 1; b < spans.size(); ++b) {
            const Span& x = spans[a].span;
            const Span& y = spans[b].span;
            if (x.begin < y.end && y.begin < x.end)
                return ValidationResult::fail(
                    Errc::overlap, std::string(spans[a].name) + " span " + span_str(x) +
                                       " overlaps " + spans[b].name + " span " + span_str(y));
        }
    }
    return ValidationResult::valid();
}

}  // namespace avar
