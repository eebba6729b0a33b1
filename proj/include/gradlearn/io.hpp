#pragma once

#include "gradlearn/dataset.hpp"
#include "gradlearn/gradient_classification.hpp"
#include "gradlearn/gradient_regression.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gradlearn {

// ---- CSV -------------------------------------------------------------
// Plain numeric CSV: comma-separated, '.' decimal point, one row per line.
// The writer emits 17 significant digits so write/read round-trips are
// bit-exact.

Eigen::MatrixXd load_matrix_csv(const std::string& path, bool has_header = false);
void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& M);

// label_column: 0-based column index holding the response; -1 selects the
// last column.  With require_binary_labels set, any response other than
// +1/-1 is a data-format error.
Dataset load_csv(const std::string& path, int label_column = -1, bool has_header = false,
                 bool require_binary_labels = false);
void save_dataset_csv(const std::string& path, const Dataset& data);

// ---- IDX (big-endian image/label container) ---------------------------
// Images file: magic 0x00000803, then count/rows/cols as big-endian uint32,
// then unsigned bytes row-major.  Pixel bytes are scaled to [0,1] by /255.
// Labels file: magic 0x00000801, then count, then one byte per label.

Eigen::MatrixXd load_idx_images(const std::string& path);
Eigen::VectorXd load_idx_labels(const std::string& path);

// Companion writers (test fixtures, exports); pixels row-major, one byte
// per pixel.
void save_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                     std::uint32_t count, std::uint32_t rows, std::uint32_t cols);
void save_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Keeps only the rows whose label is neg_digit or pos_digit, mapping them to
// -1 and +1 respectively.
Dataset filter_digit_pair(const Eigen::MatrixXd& images, const Eigen::VectorXd& labels,
                          int neg_digit, int pos_digit);

// ---- model archive -----------------------------------------------------
// Single self-describing JSON document; numeric arrays round-trip exactly
// (shortest-representation doubles), so a saved-then-loaded model predicts
// bit-identically.

struct Provenance {
    std::optional<std::uint64_t> seed;
    std::string dataset_digest;
    std::string tool_version;
};

struct ModelArchive {
    int schema_version = 1;
    std::string kind; // "regression" or "classification"
    std::optional<GradientModel> regression;
    std::optional<ClassGradientModel> classification;
    Provenance provenance;
};

ModelArchive make_archive(const GradientModel& model, Provenance provenance = {});
ModelArchive make_archive(const ClassGradientModel& model, Provenance provenance = {});

void save_model(const std::string& path, const ModelArchive& archive);
ModelArchive load_model(const std::string& path);

// ---- digests -------------------------------------------------------------
// FNV-1a 64-bit over the raw little-endian bytes; provenance fingerprinting,
// not cryptography.

std::string dataset_digest(const Dataset& data);
std::string matrix_digest(const Eigen::MatrixXd& M);
std::string file_digest(const std::string& path);

} // namespace gradlearn
