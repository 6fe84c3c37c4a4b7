#pragma once

#include "paneldml/panel.hpp"
#include "paneldml/table.hpp"

#include <optional>
#include <string>
#include <vector>

namespace paneldml {

/// Numeric view over the panel restricted to rows where every requested
/// column is present. Rows with a missing lag stay in the panel but drop out
/// of every model matrix.
struct ModelFrame {
    NumericTable table;
    std::vector<std::size_t> panel_rows; // frame row -> panel row index
};

/// Column value of a panel row by name; nullopt when the value is missing.
std::optional<double> panel_value(const PanelRow& row, const std::string& column);

ModelFrame build_model_frame(const Panel& panel, const std::vector<std::string>& columns);

/// Controls W as listed in the variable-role table: student-level trajectory
/// measures plus the calendar trend.
const std::vector<std::string>& control_columns();

/// W used for DML residualization: controls plus cohort_year and the
/// moderator itself (a cohort-level confounder of the interaction).
const std::vector<std::string>& dml_nuisance_columns();

} // namespace paneldml
