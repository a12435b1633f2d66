#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cwc/model.hpp"

namespace cwc {

// Binary model containers. All multi-byte fields little-endian.
//
// TDM1 (dense):
//   "TDM1" | version u32=1 | tensor_count u32
//   per tensor: name_len u16 | name (UTF-8) | ndims u8 | dims u32*ndims
//               | dtype u8 (0=FP32) | payload f32*prod(dims)
//
// TCM1 (clustered):
//   "TCM1" | version u32=1 | mode u8 (0=entire-model, 1=per-layer)
//   mode 0 only: shared_codebook_len u16 | centroids f32*len
//   tensor_count u32
//   per tensor: name_len u16 | name | ndims u8 | dims u32*ndims | dtype u8(0)
//               | storage u8 (0=dense, 1=clustered)
//               storage 0: payload f32*prod
//               storage 1: [per-layer mode only: codebook_len u16
//                           | centroids f32*len] | indices u8*prod
//
// Loaders reject bad magic, unknown versions, non-UTF-8 names, non-FP32
// dtypes, non-finite payloads, unsorted codebooks and truncated or oversized
// streams with ParseError carrying the byte offset; clustered indices past
// their codebook raise CorruptionError.

std::vector<std::uint8_t> save_dense(const Model& m);
Model load_dense(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> save_clustered(const Model& m);
Model load_clustered(std::span<const std::uint8_t> bytes);

// Dispatches on the magic; accepts both formats.
Model load_model_bytes(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
Model load_model_file(const std::string& path);

}  // namespace cwc
