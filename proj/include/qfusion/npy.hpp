#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace qfusion::npy {

/// uint8 NPY v1.0 array.
struct NpyArray {
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> data;
};

/// Parses a NPY v1.0 buffer with descr |u1 (or <u1). Throws on magic,
/// version, dtype, or size mismatches.
NpyArray parse_npy_u8(std::span<const std::uint8_t> bytes);

/// Serializes a uint8 array as NPY v1.0.
std::vector<std::uint8_t> serialize_npy_u8(const std::vector<std::size_t>& shape,
                                           std::span<const std::uint8_t> data);

/// Reads every member of a ZIP archive (stored or deflated entries).
std::map<std::string, std::vector<std::uint8_t>> read_zip(const std::string& path);

/// Writes a ZIP archive with stored (uncompressed) entries.
void write_zip_stored(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<std::uint8_t>>>& members);

}  // namespace qfusion::npy
