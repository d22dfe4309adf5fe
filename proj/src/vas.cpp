#include "vas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace avar {

namespace {

struct Kahan {
    double sum = 0.0;
    double c = 0.0;
    void add(double x) {
        const double y = x - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

std::vector<int> query_indices(const TokenSegmentation& seg, QuerySet q) {
    return q == QuerySet::User ? seg.user_indices() : seg.response_indices();
}

std::string fmt(const char* spec, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

const char* band_name(ViewBand b) {
    switch (b) {
        case ViewBand::Narrow: return "Narrow";
        case ViewBand::Wide: return "Wide";
        case ViewBand::Panoramic: return "Panoramic";
    }
    return "?";
}

const char* query_set_name(QuerySet q) {
    return q == QuerySet::User ? "user" : "response";
}

std::vector<double> vas_per_head(const AttentionTensor& a, const TokenSegmentation& seg,
                                 const std::vector<int>& query_set, bool strict) {
    validate_segmentation(seg).require();
    if (seg.total_len != a.seq_len)
        throw Error(Errc::shape_mismatch, "segmentation total_len != attention seq_len");
    if (seg.system_span.empty())
        throw Error(Errc::empty_system_span, "VAS needs a non-empty system span");
    if (query_set.empty()) throw Error(Errc::empty_query_set, "empty query set");
    for (int i : query_set)
        if (i < 0 || i >= a.seq_len)
            throw Error(Errc::out_of_range, "query index " + std::to_string(i));

    // In strict mode queries that cannot see any system key are dropped.
    std::vector<int> queries;
    queries.reserve(query_set.size());
    for (int i : query_set) {
        if (strict && a.causal && i < seg.system_span.begin) continue;
        queries.push_back(i);
    }
    if (queries.empty())
        throw Error(Errc::empty_query_set, "all queries causally masked from the system span");

    const std::vector<int> vis = seg.image_indices();
    const std::vector<int> sys = seg.system_indices();

    std::vector<double> out(static_cast<size_t>(a.layers) * a.heads, 0.0);
    for (int l = 0; l < a.layers; ++l) {
        for (int h = 0; h < a.heads; ++h) {
            Kahan mean;
            for (int i : queries) {
                double num = 0.0, den = 0.0;
                for (int j : vis) num += a.at(l, h, i, j);
                for (int j : sys) den += a.at(l, h, i, j);
                mean.add(num / std::max(den, kVasDenomFloor));
            }
            out[static_cast<size_t>(l) * a.heads + h] =
                mean.sum / static_cast<double>(queries.size());
        }
    }
    return out;
}

double vas_model(const AttentionTensor& a, const TokenSegmentation& seg,
                 const VasOptions& opts) {
    const std::vector<double> heads =
        vas_per_head(a, seg, query_indices(seg, opts.query_set), opts.strict);
    Kahan sum;
    for (double v : heads) sum.add(v);
    return sum.sum / static_cast<double>(heads.size());
}

VasReport vas_report(const AttentionTensor& a, const TokenSegmentation& seg,
                     const VasOptions& opts) {
    VasReport r;
    r.layers = a.layers;
    r.heads = a.heads;
    r.query_set = opts.query_set;
    r.per_head = vas_per_head(a, seg, query_indices(seg, opts.query_set), opts.strict);
    r.per_layer.resize(a.layers);
    Kahan all;
    for (int l = 0; l < a.layers; ++l) {
        Kahan layer;
        for (int h = 0; h < a.heads; ++h) {
            layer.add(r.head(l, h));
            all.add(r.head(l, h));
        }
        r.per_layer[l] = layer.sum / a.heads;
    }
    r.model_level = all.sum / (static_cast<double>(a.layers) * a.heads);
    r.band = classify_band(r.model_level);
    return r;
}

ViewBand classify_band(double vas) {
    if (!(vas >= 0.0))
        throw Error(Errc::negative_score, "VAS must be nonnegative, got " + fmt("%.17g", vas));
    if (vas < 10.0) return ViewBand::Narrow;
    if (vas <= 15.0) return ViewBand::Wide;
    return ViewBand::Panoramic;
}

AggregateVas aggregate_vas(const std::vector<Dump>& dumps, const VasOptions& opts) {
    if (dumps.empty()) throw Error(Errc::empty_input, "no dumps to aggregate");
    AggregateVas agg;
    Kahan mean;
    for (size_t i = 0; i < dumps.size(); ++i) {
        try {
            validate_attention(dumps[i].attention).require();
            const double v = vas_model(dumps[i].attention, dumps[i].seg, opts);
            agg.per_sample.push_back(v);
            agg.sample_ids.push_back(dumps[i].sample_id.empty() ? std::to_string(i)
                                                                : dumps[i].sample_id);
            mean.add(v);
        } catch (const Error& e) {
            throw Error(e.code(), "dump " + std::to_string(i) + ": " + e.what());
        }
    }
    agg.mean = mean.sum / static_cast<double>(dumps.size());
    return agg;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw Error(Errc::series_length_mismatch,
                    "series lengths " + std::to_string(xs.size()) + " vs " +
                        std::to_string(ys.size()));
    const size_t n = xs.size();
    if (n < 2) throw Error(Errc::series_length_mismatch, "need at least 2 points");

    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw Error(Errc::degenerate_variance, "zero variance in a series");
    const double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
    return std::clamp(r, -1.0, 1.0);
}

std::string vas_report_json(const VasReport& report, const AggregateVas* samples) {
    nlohmann::json j;
    j["model_level"] = report.model_level;
    j["band"] = band_name(report.band);
    j["query_set_kind"] = query_set_name(report.query_set);
    j["per_layer"] = report.per_layer;
    nlohmann::json heads = nlohmann::json::array();
    for (int l = 0; l < report.layers; ++l) {
        nlohmann::json row = nlohmann::json::array();
        for (int h = 0; h < report.heads; ++h) row.push_back(report.head(l, h));
        heads.push_back(row);
    }
    j["per_head"] = heads;
    nlohmann::json arr = nlohmann::json::array();
    if (samples) {
        for (size_t i = 0; i < samples->per_sample.size(); ++i)
            arr.push_back({{"id", samples->sample_ids[i]}, {"vas", samples->per_sample[i]}});
    }
    j["samples"] = arr;
    return j.dump();
}

std::string vas_report_csv(const VasReport& report) {
    std::string out = "layer,head,vas\n";
    for (int l = 0; l < report.layers; ++l)
        for (int h = 0; h < report.heads; ++h)
            out += std::to_string(l) + "," + std::to_string(h) + "," +
                   fmt("%.12g", report.head(l, h)) + "\n";
    out += "model,-," + fmt("%.12g", report.model_level) + "\n";
    return out;
}

std::string vas_heatmap_svg(const VasReport& report) {
    const int cell = 36, margin = 48;
    const int w = margin + report.heads * cell + 16;
    const int h = margin + report.layers * cell + 16;
    double lo = report.per_head.empty() ? 0.0 : report.per_head[0];
    double hi = lo;
    for (double v : report.per_head) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = (hi > lo) ? hi - lo : 1.0;

    std::string svg;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n", w, h);
    svg += buf;
    svg += "<style>text{font:10px sans-serif;}</style>\n";
    for (int l = 0; l < report.layers; ++l) {
        for (int hd = 0; hd < report.heads; ++hd) {
            const double t = (report.head(l, hd) - lo) / range;  // linear ramp
            const int red = static_cast<int>(255 * (1.0 - t));
            const int green = static_cast<int>(255 * (1.0 - 0.6 * t));
            std::snprintf(buf, sizeof(buf),
                          "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" "
                          "fill=\"rgb(%d,%d,255)\"><title>layer %d head %d vas %.6g</title></rect>\n",
                          margin + hd * cell, margin + l * cell, cell - 2, cell - 2, red, green, l,
                          hd, report.head(l, hd));
            svg += buf;
        }
        std::snprintf(buf, sizeof(buf), "<text x=\"4\" y=\"%d\">L%d</text>\n",
                      margin + l * cell + cell / 2, l);
        svg += buf;
    }
    for (int hd = 0; hd < report.heads; ++hd) {
        std::snprintf(buf, sizeof(buf), "<text x=\"%d\" y=\"%d\">H%d</text>\n",
                      margin + hd * cell + cell / 2 - 8, margin - 8, hd);
        svg += buf;
    }
    std::snprintf(buf, sizeof(buf), "<text x=\"4\" y=\"%d\">model VAS %.6g (%s)</text>\n", h - 4,
                  report.model_level, band_name(report.band));
    svg += buf;
    svg += "</svg>\n";
    return svg;
}

}  // namespace avar
