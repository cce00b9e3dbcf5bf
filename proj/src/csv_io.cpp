#include "pigp/csv_io.hpp"

#include "pigp/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pigp {

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, const std::filesystem::path& path, std::size_t line) {
    const std::string s = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw IoError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void CsvTable::set_meta(const std::string& key, const std::string& value) {
    for (auto& [k, v] : meta)
        if (k == key) {
            v = value;
            return;
        }
    meta.emplace_back(key, value);
}

bool CsvTable::has_meta(const std::string& key) const {
    for (const auto& kv : meta)
        if (kv.first == key) return true;
    return false;
}

const std::string& CsvTable::meta_value(const std::string& key) const {
    for (const auto& kv : meta)
        if (kv.first == key) return kv.second;
    throw IoError("CSV header has no '" + key + "' entry");
}

double CsvTable::meta_double(const std::string& key) const {
    const std::string& v = meta_value(key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw IoError("CSV header '" + key + "' is not a number");
    return out;
}

Eigen::Index CsvTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<Eigen::Index>(i);
    return -1;
}

Eigen::VectorXd CsvTable::column(const std::string& name) const {
    const auto i = column_index(name);
    if (i < 0) throw IoError("CSV has no column '" + name + "'");
    return data.col(i);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    if (static_cast<std::size_t>(table.data.cols()) != table.columns.size())
        throw std::invalid_argument("write_csv: column names do not match data");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& [k, v] : table.meta) out << "# " << k << ": " << v << '\n';
    for (std::size_t j = 0; j < table.columns.size(); ++j) out << (j ? "," : "") << table.columns[j];
    out << '\n';
    std::string line;
    for (Eigen::Index i = 0; i < table.data.rows(); ++i) {
        line.clear();
        for (Eigen::Index j = 0; j < table.data.cols(); ++j) {
            if (j) line += ',';
            line += format_double(table.data(i, j));
        }
        line += '\n';
        out << line;
    }
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> values;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            t.meta.emplace_back(trim(line.substr(1, colon - 1)), trim(line.substr(colon + 1)));
            continue;
        }
        if (t.columns.empty()) {
            t.columns = split(line);
            continue;
        }
        const auto fields = split(line);
        if (fields.size() != t.columns.size())
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                          " fields, found " + std::to_string(fields.size()));
        for (const auto& f : fields) values.push_back(parse_double(f, path, lineno));
        ++rows;
    }
    if (t.columns.empty()) throw IoError("'" + path.string() + "' has no column header");
    const auto cols = static_cast<Eigen::Index>(t.columns.size());
    t.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), rows, cols);
    return t;
}

CsvTable series_table(double t0, double dt, const std::vector<std::string>& names,
                      const std::vector<Eigen::VectorXd>& columns) {
    if (names.size() != columns.size() || columns.empty()) throw std::invalid_argument("series_table: bad columns");
    const Eigen::Index n = columns.front().size();
    CsvTable t;
    t.set_meta("t0", format_double(t0));
    t.set_meta("dt", format_double(dt));
    t.columns.push_back("time");
    t.columns.insert(t.columns.end(), names.begin(), names.end());
    t.data.resize(n, static_cast<Eigen::Index>(names.size()) + 1);
    for (Eigen::Index i = 0; i < n; ++i) t.data(i, 0) = t0 + static_cast<double>(i) * dt;
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].size() != n) throw std::invalid_argument("series_table: ragged columns");
        t.data.col(static_cast<Eigen::Index>(j) + 1) = columns[j];
    }
    return t;
}

TimeSeries read_series(const CsvTable& table, const std::string& column) {
    const double t0 = table.meta_double("t0");
    const double dt = table.meta_double("dt");
    if (!(dt > 0.0)) throw IoError("CSV header dt must be positive");
    const Eigen::VectorXd time = table.column("time");
    for (Eigen::Index i = 0; i < time.size(); ++i) {
        const double want = t0 + static_cast<double>(i) * dt;
        if (std::abs(time[i] - want) > 1e-9 * (std::abs(want) + dt))
            throw IoError("time column disagrees with header t0/dt at row " + std::to_string(i));
    }
    TimeSeries s{t0, dt, table.column(column)};
    if (!s.values.allFinite()) throw IoError("column '" + column + "' contains non-finite values");
    return s;
}

}  // namespace pigp
