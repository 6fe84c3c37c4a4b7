#include "paneldml/frame.hpp"

#include "paneldml/error.hpp"

namespace paneldml {

std::optional<double> panel_value(const PanelRow& row, const std::string& column) {
    if (column == "dropout_next_sem") return static_cast<double>(row.dropout_next_sem);
    if (column == "strikes_lag1") return row.strikes_lag1;
    if (column == "strikes_lag2") return row.strikes_lag2;
    if (column == "strikes_lag3") return row.strikes_lag3;
    if (column == "inflation_at_entry") return row.inflation_at_entry;
    if (column == "interaction_term") return row.interaction_term;
    if (column == "cum_gpa") return row.cum_gpa;
    if (column == "repeat_ratio") return row.repeat_ratio;
    if (column == "credits_approved_cum") return row.credits_approved_cum;
    if (column == "semester_number") return static_cast<double>(row.semester_number);
    if (column == "calendar_year") return static_cast<double>(row.calendar_year);
    if (column == "semester_of_year") return static_cast<double>(row.semester_of_year);
    if (column == "cohort_year") return static_cast<double>(row.cohort_year);
    if (column == "gender_code") return static_cast<double>(row.gender_code);
    if (column == "work_status") return static_cast<double>(row.work_status);
    throw SchemaError("unknown panel column '" + column + "'");
}

ModelFrame build_model_frame(const Panel& panel, const std::vector<std::string>& columns) {
    ModelFrame frame;
    frame.table.names = columns;

    std::vector<double> row_buffer(columns.size());
    for (std::size_t i = 0; i < panel.rows.size(); ++i) {
        bool complete = true;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto v = panel_value(panel.rows[i], columns[c]);
            if (!v) {
                complete = false;
                break;
            }
            row_buffer[c] = *v;
        }
        if (!complete) continue;
        frame.table.data.insert(frame.table.data.end(), row_buffer.begin(), row_buffer.end());
        frame.panel_rows.push_back(i);
    }
    frame.table.n_rows = frame.panel_rows.size();
    return frame;
}

const std::vector<std::string>& control_columns() {
    static const std::vector<std::string> cols = {
        "cum_gpa",       "repeat_ratio", "credits_approved_cum", "semester_number",
        "calendar_year", "gender_code",  "work_status"};
    return cols;
}

const std::vector<std::string>& dml_nuisance_columns() {
    static const std::vector<std::string> cols = {
        "cum_gpa",       "repeat_ratio", "credits_approved_cum", "semester_number",
        "calendar_year", "cohort_year",  "gender_code",          "work_status",
        "inflation_at_entry"};
    return cols;
}

} // namespace paneldml
