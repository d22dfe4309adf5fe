#pragma once

#include <string>
#include <vector>

#include "attention.hpp"
#include "dump.hpp"
#include "segmentation.hpp"

namespace avar {

// View-band taxonomy over model-level VAS. Boundaries are inclusive into
// Wide: the prose thresholds ("below 10", "between 10 and 15", "greater
// than 15") leave 10 and 15 ambiguous and inclusive-Wide covers the line.
enum class ViewBand { Narrow, Wide, Panoramic };

const char* band_name(ViewBand b);

// Which token category supplies the query rows of the ratio.
enum class QuerySet { User, Response };

const char* query_set_name(QuerySet q);

struct VasOptions {
    QuerySet query_set = QuerySet::User;
    // Strict mode drops queries whose whole system span is causally masked;
    // the default clamps the denominator at 1e-12 instead.
    bool strict = false;
};

// Denominator guard: causal masking can zero the system sum for early query
// positions. A floor (rather than an additive term) leaves realistic values
// bit-exact, e.g. uniform attention gives |V|/|S| with no perturbation.
inline constexpr double kVasDenomFloor = 1e-12;

struct VasReport {
    int layers = 0;
    int heads = 0;
    std::vector<double> per_head;   // L*H, row-major [layer][head]
    std::vector<double> per_layer;  // head means
    double model_level = 0.0;
    QuerySet query_set = QuerySet::User;
    ViewBand band = ViewBand::Narrow;

    double head(int l, int h) const { return per_head[static_cast<size_t>(l) * heads + h]; }
};

// Mean over the query set of visual-vs-system attention mass per (layer, head).
std::vector<double> vas_per_head(const AttentionTensor& a, const TokenSegmentation& seg,
                                 const std::vector<int>& query_set,
                                 bool strict = false);

// Mean of the per-head scores over all layers, heads and query tokens.
double vas_model(const AttentionTensor& a, const TokenSegmentation& seg,
                 const VasOptions& opts = {});

VasReport vas_report(const AttentionTensor& a, const TokenSegmentation& seg,
                     const VasOptions& opts = {});

ViewBand classify_band(double vas);

struct AggregateVas {
    double mean = 0.0;
    std::vector<double> per_sample;
    std::vector<std::string> sample_ids;
};

// Unweighted mean of per-dump model-level VAS (per-case computation first,
// then averaging; insensitive to varying T). Compensated summation keeps the
// result order-stable to 1e-12.
AggregateVas aggregate_vas(const std::vector<Dump>& dumps, const VasOptions& opts = {});

// Product-moment correlation, two-pass centered form.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Report emitters.
std::string vas_report_json(const VasReport& report, const AggregateVas* samples = nullptr);
std::string vas_report_csv(const VasReport& report);
std::string vas_heatmap_svg(const VasReport& report);

}  // namespace avar
