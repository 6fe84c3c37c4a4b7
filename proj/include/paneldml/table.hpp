#pragma once

#include "paneldml/error.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace paneldml {

/// Dense row-major numeric table with named columns. The common currency
/// between panel extraction, the tree learners and the DML engine.
struct NumericTable {
    std::vector<std::string> names;
    std::size_t n_rows = 0;
    std::vector<double> data; // n_rows * names.size(), row major

    std::size_t n_cols() const { return names.size(); }

    double at(std::size_t r, std::size_t c) const { return data[r * names.size() + c]; }
    double& at(std::size_t r, std::size_t c) { return data[r * names.size() + c]; }

    const double* row(std::size_t r) const { return data.data() + r * names.size(); }

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }

    std::size_t require(const std::string& name) const {
        const int c = column(name);
        if (c < 0) throw SchemaError("NumericTable: no column '" + name + "'");
        return static_cast<std::size_t>(c);
    }

    std::vector<double> column_values(std::size_t c) const {
        std::vector<double> out(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) out[r] = at(r, c);
        return out;
    }

    /// New table holding a subset of columns, rows in the same order.
    NumericTable select(const std::vector<std::string>& cols) const {
        NumericTable t;
        t.names = cols;
        t.n_rows = n_rows;
        t.data.resize(n_rows * cols.size());
        std::vector<std::size_t> idx;
        idx.reserve(cols.size());
        for (const auto& c : cols) idx.push_back(require(c));
        for (std::size_t r = 0; r < n_rows; ++r)
            for (std::size_t j = 0; j < idx.size(); ++j)
                t.data[r * cols.size() + j] = at(r, idx[j]);
        return t;
    }
};

} // namespace paneldml
