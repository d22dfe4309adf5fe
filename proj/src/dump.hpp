#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attention.hpp"
#include "segmentation.hpp"

namespace avar {

// ATND interchange dump: one attention record plus its token segmentation.
//
// Binary layout (bit-exact):
//   1. magic, 8 bytes ASCII "ATNDUMP1"
//   2. header length, unsigned 32-bit little-endian
//   3. header, UTF-8 JSON: {version:1, seq_len, layers, heads, causal,
//      dtype:"f32", spans:{system:[a,b], image:[[a,b],...], user:[[a,b],...],
//      response:[a,b]}, sample_id?}
//   4. payload, layers*heads*seq_len^2 IEEE-754 binary32 little-endian,
//      layout [layer][head][query][key]
//
// The writer emits a canonical header (sorted keys, no whitespace), so
// serialize -> parse -> serialize is byte-identical.
struct Dump {
    AttentionTensor attention;
    TokenSegmentation seg;
    std::string sample_id;  // empty = absent
};

inline constexpr char kDumpMagic[8] = {'A', 'T', 'N', 'D', 'U', 'M', 'P', '1'};
inline constexpr int kDumpVersion = 1;

// Serializes after checking both type invariant sets. Internal doubles are
// narrowed to f32 in the payload.
std::vector<uint8_t> write_dump(const AttentionTensor& a, const TokenSegmentation& seg,
                                const std::string& sample_id = "");

// Parses and re-validates header/payload consistency, the segmentation
// invariants, and the attention invariants with row tolerance 1e-5 (absorbs
// f32 rounding of real softmax rows).
Dump read_dump(std::span<const uint8_t> bytes);

void write_dump_file(const std::string& path, const AttentionTensor& a,
                     const TokenSegmentation& seg, const std::string& sample_id = "");
Dump read_dump_file(const std::string& path);

std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const uint8_t> bytes);

}  // namespace avar
