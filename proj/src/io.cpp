#include "gradlearn/io.hpp"

#include "gradlearn/errors.hpp"
#include "gradlearn/version.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gradlearn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && (*first == ' ' || *first == '\t')) ++first;
    while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r'))
        --last;
    double value = 0.0;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
        throw DataFormatError("csv: non-numeric cell at row " + std::to_string(row + 1)
                              + ", column " + std::to_string(col + 1));
    return value;
}

std::vector<std::vector<double>> read_csv_rows(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in)
        throw DataFormatError("csv: cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool skipped_header = !has_header;
    while (std::getline(in, line)) {
        if (!skipped_header) { skipped_header = true; continue; }
        if (line.empty() || line == "\r") { ++lineno; continue; }
        std::vector<double> row;
        std::size_t start = 0, col = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string cell = line.substr(
                start, comma == std::string::npos ? std::string::npos : comma - start);
            row.push_back(parse_cell(cell, lineno, col));
            ++col;
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw DataFormatError("csv: ragged row " + std::to_string(lineno + 1) + " (expected "
                                  + std::to_string(rows.front().size()) + " fields, found "
                                  + std::to_string(row.size()) + ")");
        rows.push_back(std::move(row));
        ++lineno;
    }
    if (rows.empty())
        throw DataFormatError("csv: '" + path + "' contains no data rows");
    return rows;
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataFormatError("idx: truncated header in '" + path + "'");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8)
           | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

json matrix_to_json(const MatrixXd& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd matrix_from_json(const json& rows, const char* field) {
    if (!rows.is_array())
        throw DataFormatError(std::string("archive: field '") + field + "' must be an array");
    const Index n = static_cast<Index>(rows.size());
    Index m = -1;
    MatrixXd M;
    for (Index i = 0; i < n; ++i) {
        const json& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array())
            throw DataFormatError(std::string("archive: field '") + field
                                  + "' must be an array of arrays");
        if (m < 0) {
            m = static_cast<Index>(row.size());
            M.resize(n, m);
        }
        if (static_cast<Index>(row.size()) != m)
            throw DataFormatError(std::string("archive: ragged rows in field '") + field + "'");
        for (Index j = 0; j < m; ++j) M(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    if (m < 0) M.resize(0, 0);
    return M;
}

json vector_to_json(const VectorXd& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

VectorXd vector_from_json(const json& arr, const char* field) {
    if (!arr.is_array())
        throw DataFormatError(std::string("archive: field '") + field + "' must be an array");
    VectorXd v(static_cast<Index>(arr.size()));
    for (Index i = 0; i < v.size(); ++i) v[i] = arr[static_cast<std::size_t>(i)].get<double>();
    return v;
}

json kernel_to_json(const KernelSpec& k) {
    return json{{"family", "gaussian"}, {"sigma", k.sigma}};
}

KernelSpec kernel_from_json(const json& j) {
    KernelSpec k;
    if (j.at("family").get<std::string>() != "gaussian")
        throw DataFormatError("archive: unknown kernel family");
    k.sigma = j.at("sigma").get<double>();
    return k;
}

json weight_to_json(const WeightSpec& w) {
    return json{{"s", w.s},
                {"denominator_factor",
                 w.factor == DenominatorFactor::two_s_sq ? "two_s_sq" : "one_s_sq"}};
}

WeightSpec weight_from_json(const json& j) {
    WeightSpec w;
    w.s = j.at("s").get<double>();
    const std::string f = j.at("denominator_factor").get<std::string>();
    if (f == "one_s_sq")
        w.factor = DenominatorFactor::one_s_sq;
    else if (f == "two_s_sq")
        w.factor = DenominatorFactor::two_s_sq;
    else
        throw DataFormatError("archive: unknown weight denominator_factor");
    return w;
}

std::uint64_t fnv1a_update(std::uint64_t h, const void* bytes, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= b[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

constexpr std::uint64_t kFnvBasis = 0xCBF29CE484222325ull;

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace

Eigen::MatrixXd load_matrix_csv(const std::string& path, bool has_header) {
    const auto rows = read_csv_rows(path, has_header);
    MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < M.rows(); ++i)
        for (Index j = 0; j < M.cols(); ++j)
            M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return M;
}

void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& M) {
    std::ofstream out(path);
    if (!out)
        throw DataFormatError("csv: cannot write '" + path + "'");
    for (Index i = 0; i < M.rows(); ++i) {
        for (Index j = 0; j < M.cols(); ++j) {
            if (j) out << ',';
            out << format_double(M(i, j));
        }
        out << '\n';
    }
    if (!out)
        throw DataFormatError("csv: write failed for '" + path + "'");
}

Dataset load_csv(const std::string& path, int label_column, bool has_header,
                 bool require_binary_labels) {
    const MatrixXd table = load_matrix_csv(path, has_header);
    if (table.cols() < 2)
        throw DataFormatError("csv: '" + path + "' needs at least one feature and a label column");
    Index label = (label_column < 0) ? table.cols() - 1 : static_cast<Index>(label_column);
    if (label >= table.cols())
        throw DataFormatError("csv: label column " + std::to_string(label_column)
                              + " out of range for '" + path + "' (" + std::to_string(table.cols())
                              + " columns)");
    Dataset ds;
    ds.y = table.col(label);
    ds.X.resize(table.rows(), table.cols() - 1);
    Index out = 0;
    for (Index j = 0; j < table.cols(); ++j) {
        if (j == label) continue;
        ds.X.col(out++) = table.col(j);
    }
    if (require_binary_labels && !ds.labels_are_binary())
        throw DataFormatError("csv: '" + path + "' labels must be +1 or -1 for classification");
    return ds;
}

void save_dataset_csv(const std::string& path, const Dataset& data) {
    data.check_consistent();
    MatrixXd table(data.n(), data.p() + 1);
    table.leftCols(data.p()) = data.X;
    table.col(data.p()) = data.y;
    save_matrix_csv(path, table);
}

Eigen::MatrixXd load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataFormatError("idx: cannot open '" + path + "'");
    const std::uint32_t magic = read_be32(in, path);
    if (magic != 0x00000803u)
        throw DataFormatError("idx: '" + path + "' has wrong magic for an image file");
    const std::uint32_t count = read_be32(in, path);
    const std::uint32_t rows = read_be32(in, path);
    const std::uint32_t cols = read_be32(in, path);
    const std::size_t total = std::size_t(count) * rows * cols;
    std::vector<unsigned char> bytes(total);
    if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(total)))
        throw DataFormatError("idx: truncated pixel payload in '" + path + "'");
    MatrixXd M(count, std::size_t(rows) * cols);
    for (std::uint32_t i = 0; i < count; ++i)
        for (std::uint32_t j = 0; j < rows * cols; ++j)
            M(i, j) = bytes[std::size_t(i) * rows * cols + j] / 255.0;
    return M;
}

Eigen::VectorXd load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataFormatError("idx: cannot open '" + path + "'");
    const std::uint32_t magic = read_be32(in, path);
    if (magic != 0x00000801u)
        throw DataFormatError("idx: '" + path + "' has wrong magic for a label file");
    const std::uint32_t count = read_be32(in, path);
    std::vector<unsigned char> bytes(count);
    if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count)))
        throw DataFormatError("idx: truncated label payload in '" + path + "'");
    VectorXd v(count);
    for (std::uint32_t i = 0; i < count; ++i) v[i] = bytes[i];
    return v;
}

void save_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                     std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != std::size_t(count) * rows * cols)
        throw std::invalid_argument("save_idx_images: pixel count does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataFormatError("idx: cannot write '" + path + "'");
    write_be32(out, 0x00000803u);
    write_be32(out, count);
    write_be32(out, rows);
    write_be32(out, cols);
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
}

void save_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataFormatError("idx: cannot write '" + path + "'");
    write_be32(out, 0x00000801u);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

Dataset filter_digit_pair(const Eigen::MatrixXd& images, const Eigen::VectorXd& labels,
                          int neg_digit, int pos_digit) {
    if (images.rows() != labels.size())
        throw DataFormatError("idx: image count does not match label count");
    std::vector<Index> keep;
    for (Index i = 0; i < labels.size(); ++i)
        if (labels[i] == neg_digit || labels[i] == pos_digit) keep.push_back(i);
    Dataset ds;
    ds.X.resize(static_cast<Index>(keep.size()), images.cols());
    ds.y.resize(static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        ds.X.row(static_cast<Index>(k)) = images.row(keep[k]);
        ds.y[static_cast<Index>(k)] = (labels[keep[k]] == neg_digit) ? -1.0 : 1.0;
    }
    return ds;
}

ModelArchive make_archive(const GradientModel& model, Provenance provenance) {
    ModelArchive a;
    a.schema_version = kArchiveSchemaVersion;
    a.kind = "regression";
    a.regression = model;
    a.provenance = std::move(provenance);
    if (a.provenance.tool_version.empty()) a.provenance.tool_version = kVersion;
    return a;
}

ModelArchive make_archive(const ClassGradientModel& model, Provenance provenance) {
    ModelArchive a;
    a.schema_version = kArchiveSchemaVersion;
    a.kind = "classification";
    a.classification = model;
    a.provenance = std::move(provenance);
    if (a.provenance.tool_version.empty()) a.provenance.tool_version = kVersion;
    return a;
}

void save_model(const std::string& path, const ModelArchive& archive) {
    json j;
    j["schema_version"] = archive.schema_version;
    j["kind"] = archive.kind;
    json prov;
    if (archive.provenance.seed) prov["seed"] = *archive.provenance.seed;
    prov["dataset_digest"] = archive.provenance.dataset_digest;
    prov["tool_version"] = archive.provenance.tool_version.empty()
                               ? std::string(kVersion)
                               : archive.provenance.tool_version;
    j["provenance"] = std::move(prov);

    if (archive.kind == "regression" && archive.regression) {
        const GradientModel& m = *archive.regression;
        j["kernel"] = kernel_to_json(m.kernel);
        j["weight"] = weight_to_json(m.weight);
        j["lambda"] = m.lambda;
        j["objective_value"] = m.objective_value;
        j["train_points"] = matrix_to_json(m.train_points);
        j["coefficients"] = matrix_to_json(m.coefficients);
    } else if (archive.kind == "classification" && archive.classification) {
        const ClassGradientModel& m = *archive.classification;
        j["kernel"] = kernel_to_json(m.kernel);
        j["weight"] = weight_to_json(m.weight);
        j["lambda1"] = m.lambda1;
        j["lambda2"] = m.lambda2;
        j["objective_value"] = m.objective_value;
        j["iterations"] = m.iterations;
        j["converged"] = m.converged;
        j["train_points"] = matrix_to_json(m.train_points);
        j["coefficients"] = matrix_to_json(m.grad_coefficients);
        j["g_coefficients"] = vector_to_json(m.g_coefficients);
    } else {
        throw std::invalid_argument("save_model: archive kind/content mismatch");
    }

    std::ofstream out(path);
    if (!out)
        throw DataFormatError("archive: cannot write '" + path + "'");
    out << j.dump(1) << '\n';
    if (!out)
        throw DataFormatError("archive: write failed for '" + path + "'");
}

ModelArchive load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataFormatError("archive: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataFormatError("archive: '" + path + "' is not valid JSON: " + e.what());
    }

    try {
        ModelArchive a;
        a.schema_version = j.at("schema_version").get<int>();
        if (a.schema_version != kArchiveSchemaVersion)
            throw DataFormatError("archive: unsupported schema_version "
                                  + std::to_string(a.schema_version));
        a.kind = j.at("kind").get<std::string>();
        if (j.contains("provenance")) {
            const json& prov = j["provenance"];
            if (prov.contains("seed")) a.provenance.seed = prov["seed"].get<std::uint64_t>();
            if (prov.contains("dataset_digest"))
                a.provenance.dataset_digest = prov["dataset_digest"].get<std::string>();
            if (prov.contains("tool_version"))
                a.provenance.tool_version = prov["tool_version"].get<std::string>();
        }
        if (a.kind == "regression") {
            GradientModel m;
            m.kernel = kernel_from_json(j.at("kernel"));
            m.weight = weight_from_json(j.at("weight"));
            m.lambda = j.at("lambda").get<double>();
            m.objective_value = j.at("objective_value").get<double>();
            m.train_points = matrix_from_json(j.at("train_points"), "train_points");
            m.coefficients = matrix_from_json(j.at("coefficients"), "coefficients");
            if (m.coefficients.cols() != m.train_points.rows()
                || m.coefficients.rows() != m.train_points.cols())
                throw DataFormatError("archive: coefficient/train_points shape mismatch");
            a.regression = std::move(m);
        } else if (a.kind == "classification") {
            ClassGradientModel m;
            m.kernel = kernel_from_json(j.at("kernel"));
            m.weight = weight_from_json(j.at("weight"));
            m.lambda1 = j.at("lambda1").get<double>();
            m.lambda2 = j.at("lambda2").get<double>();
            m.objective_value = j.at("objective_value").get<double>();
            m.iterations = j.at("iterations").get<int>();
            m.converged = j.at("converged").get<bool>();
            m.train_points = matrix_from_json(j.at("train_points"), "train_points");
            m.grad_coefficients = matrix_from_json(j.at("coefficients"), "coefficients");
            m.g_coefficients = vector_from_json(j.at("g_coefficients"), "g_coefficients");
            if (m.grad_coefficients.cols() != m.train_points.rows()
                || m.g_coefficients.size() != m.train_points.rows()
                || m.grad_coefficients.rows() != m.train_points.cols())
                throw DataFormatError("archive: coefficient/train_points shape mismatch");
            a.classification = std::move(m);
        } else {
            throw DataFormatError("archive: unknown kind '" + a.kind + "'");
        }
        return a;
    } catch (const json::exception& e) {
        throw DataFormatError("archive: '" + path + "' is malformed: " + e.what());
    }
}

std::string dataset_digest(const Dataset& data) {
    std::uint64_t h = kFnvBasis;
    h = fnv1a_update(h, data.X.data(), sizeof(double) * static_cast<std::size_t>(data.X.size()));
    h = fnv1a_update(h, data.y.data(), sizeof(double) * static_cast<std::size_t>(data.y.size()));
    return hex64(h);
}

std::string matrix_digest(const Eigen::MatrixXd& M) {
    std::uint64_t h = kFnvBasis;
    h = fnv1a_update(h, M.data(), sizeof(double) * static_cast<std::size_t>(M.size()));
    return hex64(h);
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataFormatError("digest: cannot open '" + path + "'");
    std::uint64_t h = kFnvBasis;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a_update(h, buf, static_cast<std::size_t>(in.gcount()));
        if (!in) break;
    }
    return hex64(h);
}

} // namespace gradlearn
