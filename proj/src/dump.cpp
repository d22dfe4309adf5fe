#include "dump.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "bytes.hpp"

namespace avar {

namespace {

using nlohmann::json;

json span_json(const Span& s) { return json::array({s.begin, s.end}); }

json spans_json(const std::vector<Span>& spans) {
    json arr = json::array();
    for (const Span& s : spans) arr.push_back(span_json(s));
    return arr;
}

Span parse_span(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw Error(Errc::header_parse, "span must be a [begin,end] integer pair");
    return Span{j[0].get<int>(), j[1].get<int>()};
}

std::vector<Span> parse_spans(const json& j) {
    if (!j.is_array()) throw Error(Errc::header_parse, "span list must be an array");
    std::vector<Span> out;
    for (const auto& e : j) out.push_back(parse_span(e));
    return out;
}

}  // namespace

std::vector<uint8_t> write_dump(const AttentionTensor& a, const TokenSegmentation& seg,
                                const std::string& sample_id) {
    validate_segmentation(seg).require();
    validate_attention(a).require();
    if (seg.total_len != a.seq_len)
        throw Error(Errc::shape_mismatch, "segmentation total_len != attention seq_len");

    json header;
    header["version"] = kDumpVersion;
    header["seq_len"] = a.seq_len;
    header["layers"] = a.layers;
    header["heads"] = a.heads;
    header["causal"] = a.causal;
    header["dtype"] = "f32";
    header["spans"] = {{"system", span_json(seg.system_span)},
                       {"image", spans_json(seg.image_spans)},
                       {"user", spans_json(seg.user_spans)},
                       {"response", span_json(seg.response_span)}};
    if (!sample_id.empty()) header["sample_id"] = sample_id;
    const std::string head = header.dump();  // canonical: sorted keys, no whitespace

    std::vector<uint8_t> out;
    out.reserve(8 + 4 + head.size() + a.weights.size() * 4);
    out.insert(out.end(), kDumpMagic, kDumpMagic + 8);
    put_u32le(out, static_cast<uint32_t>(head.size()));
    out.insert(out.end(), head.begin(), head.end());
    for (double w : a.weights) put_f32le(out, static_cast<float>(w));
    return out;
}

Dump read_dump(std::span<const uint8_t> bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kDumpMagic, 8) != 0)
        throw Error(Errc::bad_magic, "not an ATNDUMP1 stream");
    const uint32_t head_len = get_u32le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<size_t>(head_len))
        throw Error(Errc::length_mismatch, "truncated header");

    json header;
    try {
        header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + head_len);
    } catch (const json::exception& e) {
        throw Error(Errc::header_parse, std::string("header JSON: ") + e.what());
    }

    Dump d;
    try {
        if (header.at("version").get<int>() != kDumpVersion)
            throw Error(Errc::header_parse,
                        "unsupported version " + header.at("version").dump());
        if (header.at("dtype").get<std::string>() != "f32")
            throw Error(Errc::header_parse, "unsupported dtype");
        d.attention.seq_len = header.at("seq_len").get<int>();
        d.attention.layers = header.at("layers").get<int>();
        d.attention.heads = header.at("heads").get<int>();
        d.attention.causal = header.at("causal").get<bool>();
        const json& spans = header.at("spans");
        d.seg.total_len = d.attention.seq_len;
        d.seg.system_span = parse_span(spans.at("system"));
        d.seg.image_spans = parse_spans(spans.at("image"));
        d.seg.user_spans = parse_spans(spans.at("user"));
        d.seg.response_span = parse_span(spans.at("response"));
        if (header.contains("sample_id")) d.sample_id = header.at("sample_id").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(Errc::header_parse, std::string("header fields: ") + e.what());
    }

    if (d.attention.layers < 1 || d.attention.heads < 1 || d.attention.seq_len < 1)
        throw Error(Errc::header_parse, "non-positive dims in header");

    const size_t n = static_cast<size_t>(d.attention.layers) * d.attention.heads *
                     d.attention.seq_len * d.attention.seq_len;
    const size_t want = 12 + static_cast<size_t>(head_len) + n * 4;
    if (bytes.size() != want)
        throw Error(Errc::length_mismatch,
                    "payload length " + std::to_string(bytes.size() - 12 - head_len) +
                        " bytes, expected " + std::to_string(n * 4));

    d.attention.weights.resize(n);
    const uint8_t* p = bytes.data() + 12 + head_len;
    for (size_t i = 0; i < n; ++i) d.attention.weights[i] = get_f32le(p + i * 4);

    validate_segmentation(d.seg).require();
    validate_attention(d.attention, kRowSumTolDefault).require();
    return d;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::io_error, "cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(Errc::io_error, "cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(Errc::io_error, "short write to " + path);
}

void write_dump_file(const std::string& path, const AttentionTensor& a,
                     const TokenSegmentation& seg, const std::string& sample_id) {
    write_file_bytes(path, write_dump(a, seg, sample_id));
}

Dump read_dump_file(const std::string& path) { return read_dump(read_file_bytes(path)); }

}  // namespace avar
