#pragma once

#include "pigp/time_series.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace pigp {

/// Numeric table with a `# key: value` header block. Values are written with
/// 17 significant digits so a write/read cycle reproduces every double.
struct CsvTable {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    Eigen::MatrixXd data;  ///< rows x columns

    void set_meta(const std::string& key, const std::string& value);
    [[nodiscard]] bool has_meta(const std::string& key) const;
    /// Throws IoError when the key is missing.
    [[nodiscard]] const std::string& meta_value(const std::string& key) const;
    [[nodiscard]] double meta_double(const std::string& key) const;

    /// -1 when absent.
    [[nodiscard]] Eigen::Index column_index(const std::string& name) const;
    [[nodiscard]] bool has_column(const std::string& name) const { return column_index(name) >= 0; }
    /// Throws IoError when absent.
    [[nodiscard]] Eigen::VectorXd column(const std::string& name) const;
};

std::string format_double(double v);

void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Throws IoError on a missing file, a malformed line or a ragged row.
CsvTable read_csv(const std::filesystem::path& path);

/// Table with a leading `time` column on the grid t0 + i dt, and t0/dt in the header.
CsvTable series_table(double t0, double dt, const std::vector<std::string>& names,
                      const std::vector<Eigen::VectorXd>& columns);

/// One column of a time-series table. The header's t0/dt must agree with the
/// time column, otherwise the file is reported as corrupt.
TimeSeries read_series(const CsvTable& table, const std::string& column);

}  // namespace pigp
