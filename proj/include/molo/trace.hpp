#pragma once

// CSV trace output. Headers carry run metadata as '#' comment lines so the
// CSV body stays byte-identical for identical (spec, seed).

#include "molo/core.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace molo {

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns,
              const std::map<std::string, std::string>& metadata = {})
        : out_(path) {
        if (!out_) throw Error("cannot open " + path);
        for (const auto& [k, v] : metadata) out_ << "# " << k << "=" << v << "\n";
        for (size_t i = 0; i < columns.size(); ++i)
            out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    }

    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i)
            out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
    }

    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return buf;
    }

  private:
    std::ofstream out_;
};

}  // namespace molo
