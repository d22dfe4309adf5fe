#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avar {

// Line chart over a training/RL history JSONL file: one object per line
// carrying a "step" field plus numeric metric fields. The first line fixes
// the series set; every later line must carry the same fields.

struct HistoryData {
    std::vector<double> steps;
    std::vector<std::string> series_names;
    std::vector<std::vector<double>> series;  // [series][point]
};

HistoryData parse_history_jsonl(std::istream& in);
HistoryData load_history_file(const std::string& path);

// Each series normalized to the plot height independently; the legend shows
// first and last values so absolute scales survive the normalization.
std::string history_svg(const HistoryData& data);

}  // namespace avar
