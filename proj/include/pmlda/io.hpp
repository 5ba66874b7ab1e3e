#pragma once

#include "pmlda/core.hpp"
#include "pmlda/corpus.hpp"
#include "pmlda/synthgen.hpp"

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <string>

namespace pmlda::io {

namespace fs = std::filesystem;

using KeyValues = std::map<std::string, std::string>;

/// Shortest text that reads back to the same double.
std::string format_double(double value);

KeyValues read_key_values(const fs::path &path);
/// Keys are written in the order given.
void write_key_values(const fs::path &path,
                      const std::vector<std::pair<std::string, std::string>> &entries);

// Cube files. A cube is a text header (key=value: rows, cols, bands,
// dtype=float32, layout=bip, byte_order=little-endian, data_file) next to a
// raw little-endian float32 payload, pixels in row-major order with bands
// interleaved. A ".csv" path instead holds one pixel per line, optionally
// preceded by "# rows=R cols=C".

/// Writes `<stem>.hdr` and `<stem>.raw`; `header_path` names the header.
void write_cube(const fs::path &header_path, const HyperspectralCube &cube);
HyperspectralCube read_cube(const fs::path &path);
void write_cube_csv(const fs::path &path, const HyperspectralCube &cube);

/// CSV of integer labels (rows lines x cols values), or a cube-style header
/// with a single band of labels (dtype int32 or float32).
SegmentationMap read_segmentation(const fs::path &path);
void write_segmentation_csv(const fs::path &path, const SegmentationMap &seg);

/// Numeric CSV without header; lines starting with '#' are skipped.
Eigen::MatrixXd read_matrix_csv(const fs::path &path);
void write_matrix_csv(const fs::path &path, const Eigen::MatrixXd &matrix);

/// K rows x bands columns; returned as bands x K.
Eigen::MatrixXd read_endmember_csv(const fs::path &path);
void write_endmember_csv(const fs::path &path, const Eigen::MatrixXd &means);

/// 8-bit binary PGM, value round(255 * clamp(v, 0, 1)), row-major.
void write_pgm(const fs::path &path, Index rows, Index cols, const Eigen::VectorXd &values);

void write_truth(const fs::path &path, const TruthRecord &truth);
TruthRecord read_truth(const fs::path &path);

} // namespace pmlda::io
