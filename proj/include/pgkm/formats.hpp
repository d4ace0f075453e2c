#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgkm/pq_engine.hpp"

namespace pgkm {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kTensorFileVersion = 1;
inline constexpr std::uint16_t kQuantFileVersion = 1;
inline constexpr int kReportSchema = 1;

/// Named 2-D tensor as stored in a PGW1 file.
struct TensorFile {
    std::string name;
    LayerKind kind = LayerKind::linear;
    Tensor tensor;

    bool operator==(const TensorFile&) const = default;
};

/*
 * PGW1 layout (all integers little-endian):
 *   "PGW1" | u16 version | u16 name length | name (UTF-8) | u8 kind
 *   | u32 rows | u32 cols | rows*cols f32, row-major
 */
Bytes serialize_tensor(const TensorFile& t);
TensorFile parse_tensor(std::span<const std::uint8_t> bytes);

/*
 * PGQ1 layout (all integers little-endian):
 *   "PGQ1" | u16 version | u16 name length | name | u8 kind | u32 rows | u32 cols
 *   | u32 block size | u32 centroids | u8 method | k*b f32 codebook
 *   | ceil(n*w/8) bytes of w-bit indices, LSB first, w = ceil(log2 k)
 *   | u32 report length | report JSON
 */
Bytes serialize_quantized(const QuantizedLayer& q);
QuantizedLayer parse_quantized(std::span<const std::uint8_t> bytes);

/// Packs each index into `bits` bits, least-significant bit first.
Bytes pack_indices(std::span<const std::uint32_t> index, unsigned bits);
std::vector<std::uint32_t> unpack_indices(std::span<const std::uint8_t> packed, std::size_t count,
                                          unsigned bits);

/// Timing is a measurement, not a result; leave it out of files that must be reproducible.
nlohmann::json report_to_json(const QuantReport& r, bool include_timing = false);
QuantReport report_from_json(const nlohmann::json& j);

Bytes read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

TensorFile read_tensor_file(const std::filesystem::path& path);
void write_tensor_file(const std::filesystem::path& path, const TensorFile& t);
QuantizedLayer read_quantized_file(const std::filesystem::path& path);
void write_quantized_file(const std::filesystem::path& path, const QuantizedLayer& q);

}  // namespace pgkm
