#include "molcav/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "molcav/errors.hpp"

namespace molcav {

Trace::Trace(std::vector<double> x, std::vector<double> y, Axis x_axis, Axis y_axis)
    : x_(std::move(x)), y_(std::move(y)), x_axis_(std::move(x_axis)), y_axis_(std::move(y_axis)) {
    if (x_.size() != y_.size()) throw DomainError("trace x and y lengths differ");
    if (x_.size() < 2) throw DomainError("trace needs at least two samples");
    for (std::size_t i = 1; i < x_.size(); ++i) {
        if (!(x_[i] > x_[i - 1])) throw DomainError("trace x must be strictly increasing");
    }
}

Trace& Trace::tag(std::string column, std::string value) {
    tags_.emplace_back(std::move(column), std::move(value));
    return *this;
}

double Trace::min_y() const { return *std::min_element(y_.begin(), y_.end()); }
double Trace::max_y() const { return *std::max_element(y_.begin(), y_.end()); }

bool Trace::uniform(double rel_tol) const {
    const double step = (x_.back() - x_.front()) / static_cast<double>(x_.size() - 1);
    for (std::size_t i = 1; i < x_.size(); ++i) {
        if (std::abs((x_[i] - x_[i - 1]) - step) > rel_tol * step) return false;
    }
    return true;
}

std::vector<double> linspace(double first, double last, std::size_t n) {
    if (n < 2) throw DomainError("linspace needs at least two points");
    std::vector<double> out(n);
    const double step = (last - first) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = first + step * static_cast<double>(i);
    out.back() = last;
    return out;
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const Trace& trace) {
    out << trace.x_axis().quantity << ',' << trace.y_axis().quantity;
    for (const auto& [column, value] : trace.tags()) out << ',' << column;
    out << '\n' << trace.x_axis().unit << ',' << trace.y_axis().unit;
    for (std::size_t i = 0; i < trace.tags().size(); ++i) out << ",-";
    out << '\n';
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << format_double(trace.x()[i]) << ',' << format_double(trace.y()[i]);
        for (const auto& [column, value] : trace.tags()) out << ',' << value;
        out << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const Trace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_csv(out, trace);
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    return cells;
}

double parse_number(const std::string& cell, std::size_t row) {
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw IoError("csv row " + std::to_string(row) + ": not a number: '" + cell + "'");
    return v;
}

} // namespace

CsvData read_csv(std::istream& in) {
    std::string names_line, units_line;
    if (!std::getline(in, names_line) || !std::getline(in, units_line))
        throw IoError("csv needs a two-line header (names, units)");
    const auto names = split_commas(names_line);
    const auto units = split_commas(units_line);
    if (names.size() < 2 || units.size() != names.size())
        throw IoError("csv header must name at least two columns and give one unit per column");
    std::size_t sigma_col = 0;
    for (std::size_t c = 2; c < names.size(); ++c) {
        if (names[c] == "sigma") sigma_col = c;
    }

    std::vector<double> x, y, sigma;
    std::string line;
    std::size_t row = 2;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_commas(line);
        if (cells.size() != names.size())
            throw IoError("csv row " + std::to_string(row) + ": expected " + std::to_string(names.size()) +
                          " columns");
        x.push_back(parse_number(cells[0], row));
        y.push_back(parse_number(cells[1], row));
        if (sigma_col != 0) sigma.push_back(parse_number(cells[sigma_col], row));
    }
    if (x.size() < 2) throw IoError("csv needs at least two data rows");
    return {Trace(std::move(x), std::move(y), {names[0], units[0]}, {names[1], units[1]}), std::move(sigma)};
}

CsvData read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_csv(in);
}

} // namespace molcav
