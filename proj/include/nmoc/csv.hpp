#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "nmoc/types.hpp"

namespace nmoc {

/// Comma-separated output with round-trip (17 significant digit) numbers.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path), columns_(header.size()) {
        if (!out_) throw ParameterError("csv: cannot open " + path + " for writing");
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    static std::string number(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(number(v));
        row(cells);
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw ParameterError("csv: row width does not match the header");
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

  private:
    std::ofstream out_;
    std::size_t columns_;
};

}  // namespace nmoc
