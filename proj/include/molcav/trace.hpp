#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace molcav {

struct Axis {
    std::string quantity;
    std::string unit;
};

/// Ordered (x, y) samples with axis metadata. x is strictly increasing and
/// there are at least two samples.
class Trace {
public:
    Trace(std::vector<double> x, std::vector<double> y, Axis x_axis, Axis y_axis);

    std::span<const double> x() const { return x_; }
    std::span<const double> y() const { return y_; }
    const Axis& x_axis() const { return x_axis_; }
    const Axis& y_axis() const { return y_axis_; }
    std::size_t size() const { return x_.size(); }

    /// Extra constant-valued columns written to CSV (e.g. model=linear).
    const std::vector<std::pair<std::string, std::string>>& tags() const { return tags_; }
    Trace& tag(std::string column, std::string value);

    double min_y() const;
    double max_y() const;
    /// True when successive x steps agree to `rel_tol` of the mean step.
    bool uniform(double rel_tol = 1e-9) const;

private:
    std::vector<double> x_;
    std::vector<double> y_;
    Axis x_axis_;
    Axis y_axis_;
    std::vector<std::pair<std::string, std::string>> tags_;
};

/// n points from `first` to `last` inclusive.
std::vector<double> linspace(double first, double last, std::size_t n);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

// CSV schema: line 1 column names, line 2 units, then one row per sample.
void write_csv(std::ostream& out, const Trace& trace);
void write_csv(const std::filesystem::path& path, const Trace& trace);

struct CsvData {
    Trace trace;
    std::vector<double> sigma;  ///< empty unless the file carries a "sigma" column
};

/// Reads the first two numeric columns as (x, y) plus an optional "sigma" column.
CsvData read_csv(std::istream& in);
CsvData read_csv(const std::filesystem::path& path);

} // namespace molcav
