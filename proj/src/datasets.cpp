#include "vrlr/datasets.hpp"

#include <charconv>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace vrlr {

std::string_view to_string(IdxNormalize normalize) {
  return normalize == IdxNormalize::unit_l2 ? "unit_l2" : "none";
}

std::optional<IdxNormalize> parse_idx_normalize(std::string_view name) {
  if (name == "none") return IdxNormalize::none;
  if (name == "unit_l2") return IdxNormalize::unit_l2;
  return std::nullopt;
}

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

double parse_cell(std::string_view cell, std::size_t line, std::string_view column) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw ParseError(fmt::format("csv line {}, column '{}': '{}' is not a number", line, column, cell),
                     line);
  }
  return value;
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size()) {
    throw ParseError(fmt::format("idx {}: truncated header at byte offset {}", what, offset), offset);
  }
  return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
         (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
         static_cast<std::uint32_t>(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

Dataset parse_csv_dataset(std::string_view text, std::string_view label_column) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::string_view line = text.substr(start, nl == std::string_view::npos ? nl : nl - start);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("csv: missing header row", 1);

  const std::vector<std::string_view> header = split_cells(lines.front());
  std::size_t label_index = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_index = c;
  }
  if (label_index == header.size()) {
    throw ParseError(fmt::format("csv: no column named '{}' in the header", label_column), 1);
  }
  if (header.size() < 2) throw ParseError("csv: need at least one feature column", 1);

  const std::size_t rows = lines.size() - 1;
  if (rows == 0) throw ParseError("csv: no data rows", 1);
  Dataset data;
  data.features = RowMatrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(header.size() - 1));
  data.labels.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t line_no = r + 2;
    const std::vector<std::string_view> cells = split_cells(lines[r + 1]);
    if (cells.size() != header.size()) {
      throw ParseError(fmt::format("csv line {}: expected {} cells, found {}", line_no, header.size(),
                                   cells.size()),
                       line_no);
    }
    std::size_t feature = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_cell(cells[c], line_no, header[c]);
      if (c == label_index) {
        data.labels[r] = v;
      } else {
        data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(feature++)) = v;
      }
    }
  }
  return data;
}

Dataset load_csv_dataset(const std::filesystem::path& path, std::string_view label_column) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  return parse_csv_dataset(
      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), label_column);
}

Dataset parse_idx_dataset(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                          std::size_t limit, IdxNormalize normalize) {
  const std::uint32_t image_magic = read_be32(images, 0, "images");
  if (image_magic != kIdxImagesMagic) {
    throw ParseError(fmt::format("idx images: bad magic 0x{:08x} at byte offset 0", image_magic), 0);
  }
  const std::uint32_t label_magic = read_be32(labels, 0, "labels");
  if (label_magic != kIdxLabelsMagic) {
    throw ParseError(fmt::format("idx labels: bad magic 0x{:08x} at byte offset 0", label_magic), 0);
  }
  const std::size_t count = read_be32(images, 4, "images");
  const std::size_t rows = read_be32(images, 8, "images");
  const std::size_t cols = read_be32(images, 12, "images");
  const std::size_t label_count = read_be32(labels, 4, "labels");
  if (label_count != count) {
    throw ParseError(fmt::format("idx: {} images but {} labels (label count at byte offset 4)", count,
                                 label_count),
                     4);
  }
  const std::size_t pixels = rows * cols;
  const std::size_t image_end = 16 + count * pixels;
  if (images.size() < image_end) {
    throw ParseError(fmt::format("idx images: truncated at byte offset {} (expected {} bytes)",
                                 images.size(), image_end),
                     images.size());
  }
  if (labels.size() < 8 + count) {
    throw ParseError(fmt::format("idx labels: truncated at byte offset {} (expected {} bytes)",
                                 labels.size(), 8 + count),
                     labels.size());
  }

  const std::size_t kept = limit > 0 ? std::min(limit, count) : count;
  Dataset data;
  data.features = RowMatrix(static_cast<Eigen::Index>(kept), static_cast<Eigen::Index>(pixels));
  data.labels.resize(kept);
  for (std::size_t i = 0; i < kept; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
          static_cast<double>(images[16 + i * pixels + p]) / 255.0;
    }
    data.labels[i] = static_cast<double>(labels[8 + i]);
  }
  if (normalize == IdxNormalize::unit_l2) normalize_rows_unit_l2(data);
  return data;
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t limit, IdxNormalize normalize) {
  const std::vector<std::uint8_t> image_bytes = read_bytes(images);
  const std::vector<std::uint8_t> label_bytes = read_bytes(labels);
  return parse_idx_dataset(image_bytes, label_bytes, limit, normalize);
}

std::vector<std::uint8_t> encode_idx_images(std::size_t count, std::size_t rows, std::size_t cols,
                                            std::span<const std::uint8_t> pixels) {
  if (pixels.size() != count * rows * cols) {
    throw ShapeError("encode_idx_images", count * rows * cols, pixels.size());
  }
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(count));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  write_be32(out, kIdxLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

}  // namespace vrlr
