#include "macc/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "macc/error.hpp"

namespace macc {

TrainingLog::TrainingLog(std::vector<std::string> value_columns) : columns(std::move(value_columns)) {
    columns.emplace_back("seconds");
}

void TrainingLog::add(std::vector<double> values, double seconds) {
    if (values.size() + 1 != columns.size()) throw Error("training log: row width does not match columns");
    values.push_back(seconds);
    rows.push_back(std::move(values));
}

double TrainingLog::value(std::size_t row, const std::string& column_name) const {
    auto it = std::find(columns.begin(), columns.end(), column_name);
    if (it == columns.end()) throw Error("training log: no column " + column_name);
    return rows.at(row)[static_cast<std::size_t>(it - columns.begin())];
}

std::vector<double> TrainingLog::column(const std::string& column_name) const {
    std::vector<double> out;
    for (std::size_t r = 0; r < rows.size(); ++r) out.push_back(value(r, column_name));
    return out;
}

bool TrainingLog::same_values(const TrainingLog& other) const {
    if (columns != other.columns || rows.size() != other.rows.size()) return false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!std::equal(rows[r].begin(), rows[r].end() - 1, other.rows[r].begin())) return false;
    }
    return true;
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::span<const std::size_t>> make_batches(std::span<const std::size_t> order, std::size_t batch_size) {
    if (batch_size == 0) throw Error("make_batches: batch size must be positive");
    std::vector<std::span<const std::size_t>> out;
    for (std::size_t b = 0; b < order.size(); b += batch_size) {
        out.push_back(order.subspan(b, std::min(batch_size, order.size() - b)));
    }
    return out;
}

bool EarlyStopper::update(double score, int epoch) {
    if (!any_ || score < best_) {
        any_ = true;
        best_ = score;
        best_epoch_ = epoch;
        return true;
    }
    return false;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace macc
