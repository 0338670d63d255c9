#pragma once

#include <charconv>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdcluster/errors.hpp"

namespace crowdcluster {

/// Row-major dense matrix. Small on purpose; N here is annotator count.
template <typename T = double>
struct Dense {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Dense() = default;
    Dense(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    friend bool operator==(const Dense& a, const Dense& b) {
        return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
    }
};

using DenseMatrix = Dense<double>;
using CountMatrix = Dense<std::size_t>;

/// Shortest round-trip decimal form; identical across platforms for equal bits.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Square matrix as CSV with an id header row and id-prefixed rows.
inline void write_labeled_csv(std::ostream& out, const std::vector<std::string>& labels,
                              const DenseMatrix& m) {
    if (labels.size() != m.rows || m.rows != m.cols)
        throw ShapeError("write_labeled_csv: labels and matrix disagree");
    out << "annotator";
    for (const auto& l : labels) out << ',' << csv_escape(l);
    out << '\n';
    for (std::size_t r = 0; r < m.rows; ++r) {
        out << csv_escape(labels[r]);
        for (std::size_t c = 0; c < m.cols; ++c) out << ',' << format_double(m.at(r, c));
        out << '\n';
    }
}

inline nlohmann::json matrix_to_json(const DenseMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json matrix_to_json(const CountMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace crowdcluster
