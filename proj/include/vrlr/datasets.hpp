#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrlr/problems.hpp"

namespace vrlr {

enum class IdxNormalize { none, unit_l2 };
std::string_view to_string(IdxNormalize normalize);
std::optional<IdxNormalize> parse_idx_normalize(std::string_view name);

// Rectangular numeric CSV with a header row. The column named `label_column`
// becomes the labels; every other column is a feature, in file order. Errors
// carry the 1-based line number.
Dataset load_csv_dataset(const std::filesystem::path& path, std::string_view label_column);
Dataset parse_csv_dataset(std::string_view text, std::string_view label_column);

// IDX image file (magic 0x00000803, dims N x rows x cols) and label file
// (magic 0x00000801, dim N), big-endian. Pixels are scaled to [0, 1];
// `limit` > 0 keeps the first `limit` examples. Errors carry the byte offset.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t limit, IdxNormalize normalize);
Dataset parse_idx_dataset(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                          std::size_t limit, IdxNormalize normalize);

// Big-endian IDX encoders, used for fixtures.
std::vector<std::uint8_t> encode_idx_images(std::size_t count, std::size_t rows, std::size_t cols,
                                            std::span<const std::uint8_t> pixels);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

}  // namespace vrlr
