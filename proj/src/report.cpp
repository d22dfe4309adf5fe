#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace avar {

using nlohmann::json;

HistoryData parse_history_jsonl(std::istream& in) {
    HistoryData data;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw Error(Errc::invalid_argument,
                        "history line " + std::to_string(lineno) + ": not a JSON object");
        if (!j.contains("step") || !j["step"].is_number())
            throw Error(Errc::invalid_argument,
                        "history line " + std::to_string(lineno) + ": missing numeric \"step\"");
        if (data.steps.empty()) {
            for (auto& [key, val] : j.items()) {
                if (key != "step" && val.is_number()) data.series_names.push_back(key);
            }
            std::sort(data.series_names.begin(), data.series_names.end());
            data.series.resize(data.series_names.size());
        }
        data.steps.push_back(j["step"].get<double>());
        for (size_t s = 0; s < data.series_names.size(); ++s) {
            const std::string& name = data.series_names[s];
            if (!j.contains(name) || !j[name].is_number())
                throw Error(Errc::series_length_mismatch,
                            "history line " + std::to_string(lineno) + ": missing field \"" +
                                name + "\"");
            data.series[s].push_back(j[name].get<double>());
        }
    }
    if (data.steps.empty()) throw Error(Errc::empty_input, "history has no records");
    return data;
}

HistoryData load_history_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    return parse_history_jsonl(in);
}

namespace {

// Qualitative palette, cycled when a history carries more series.
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kNumColors = 8;

}  // namespace

std::string history_svg(const HistoryData& data) {
    const int w = 960, h = 540;
    const int left = 64, right = 24, top = 28;
    const int bottom = 36 + 14 * static_cast<int>(data.series_names.size());
    const int pw = w - left - right, ph = h - top - bottom;
    const size_t n = data.steps.size();

    double x_lo = data.steps.front(), x_hi = data.steps.back();
    for (double s : data.steps) {
        x_lo = std::min(x_lo, s);
        x_hi = std::max(x_hi, s);
    }
    const double x_range = (x_hi > x_lo) ? x_hi - x_lo : 1.0;

    std::string svg;
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n", w, h);
    svg += buf;
    svg += "<style>text{font:11px sans-serif;}</style>\n";
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" "
                  "stroke=\"#999\"/>\n",
                  left, top, pw, ph);
    svg += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\">step %.6g</text>\n", left, h - 8,
                  x_lo);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">step %.6g</text>\n", left + pw,
                  h - 8, x_hi);
    svg += buf;

    for (size_t s = 0; s < data.series.size(); ++s) {
        const std::vector<double>& ys = data.series[s];
        double lo = ys.front(), hi = ys.front();
        for (double v : ys) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = (hi > lo) ? hi - lo : 1.0;
        const char* color = kColors[s % kNumColors];

        std::string points;
        for (size_t i = 0; i < n; ++i) {
            const double px = left + (data.steps[i] - x_lo) / x_range * pw;
            const double py = top + (1.0 - (ys[i] - lo) / range) * ph;
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px, py);
            points += buf;
        }
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += color;
        svg += "\" stroke-width=\"1.5\" points=\"";
        svg += points;
        svg += "\"/>\n";

        const int ly = top + ph + 28 + 14 * static_cast<int>(s);
        std::snprintf(buf, sizeof(buf),
                      "<rect x=\"%d\" y=\"%d\" width=\"10\" height=\"10\" fill=\"%s\"/>\n", left,
                      ly - 9, color);
        svg += buf;
        std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\">%s  first %.6g  last %.6g</text>\n",
                      left + 16, ly, data.series_names[s].c_str(), ys.front(), ys.back());
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace avar
