#pragma once

#include "paneldml/csv.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace paneldml {

/// One observed student-semester from the enrollment extract.
struct RawEnrollmentRecord {
    std::string student_id;
    int cohort_year = 0;      // calendar year of first enrollment
    int semester_number = 0;  // 1-based ordinal within the trajectory
    int calendar_year = 0;
    int semester_of_year = 0; // 1 or 2
    bool enrolled_next = false;
    bool graduated_by_next = false;
    double cum_gpa = 0.0;
    double repeat_ratio = 0.0;
    double credits_approved_cum = 0.0;
    int gender_code = 0;
    std::optional<int> work_status;
};

/// Monthly proportional CPI changes, 12 per calendar year.
struct CpiMonthlySeries {
    std::map<int, std::array<double, 12>> years;

    bool has_year(int y) const { return years.count(y) > 0; }
};

/// Calendar semester: (year, half) with half in {1, 2}.
struct SemesterKey {
    int year = 0;
    int half = 0;

    auto operator<=>(const SemesterKey&) const = default;

    /// Position on the semester number line (two semesters per year).
    long linear() const { return static_cast<long>(year) * 2 + (half - 1); }
    static SemesterKey from_linear(long idx) {
        const long y = idx >= 0 ? idx / 2 : (idx - 1) / 2;
        return SemesterKey{static_cast<int>(y), static_cast<int>(idx - y * 2) + 1};
    }
    SemesterKey minus(int k) const { return from_linear(linear() - k); }
};

/// Share of teaching days lost per calendar semester.
///
/// Semesters inside the listed coverage window but absent from the file are
/// strike-free (0); semesters outside the window are unobserved.
struct StrikeCalendar {
    std::map<SemesterKey, double> cells;

    std::optional<double> intensity(const SemesterKey& key) const;
};

struct PanelRow {
    std::string student_id;
    int semester_number = 0;
    int calendar_year = 0;
    int semester_of_year = 0;
    int cohort_year = 0;
    int dropout_next_sem = 0;
    std::optional<double> strikes_lag1;
    std::optional<double> strikes_lag2;
    std::optional<double> strikes_lag3;
    double inflation_at_entry = 0.0;
    std::optional<double> interaction_term; // strikes_lag2 * inflation_at_entry
    double cum_gpa = 0.0;
    double repeat_ratio = 0.0;
    double credits_approved_cum = 0.0;
    int gender_code = 0;
    int work_status = 0;
    bool work_status_imputed = false;
};

struct Panel {
    std::vector<PanelRow> rows;
};

struct AssemblyReport {
    std::size_t input_rows = 0;
    std::size_t retained_rows = 0;
    std::map<std::string, std::size_t> exclusions_by_reason;
    std::size_t work_status_imputations = 0;
    std::map<int, std::size_t> cohort_sizes; // distinct students per cohort year
    std::vector<std::string> warnings;
};

struct LeakageViolation {
    std::size_t row_index = 0;
    std::string student_id;
    int semester_number = 0;
    std::string column;
    std::string detail;
};

// --- Operations ---------------------------------------------------------

/// Annual compounded rate from 12 monthly proportional changes:
/// prod(1 + m_i) - 1. Factors are multiplied in a canonical (sorted) order so
/// the result is bit-identical under permutation of the months.
double compound_annual_inflation(std::span<const double> monthly_changes);

/// Compounded rate for one CPI year. Throws DataError when the year is absent.
double annual_rate_for(const CpiMonthlySeries& cpi, int year);

/// Sets inflation_at_entry on every row from its cohort year. Throws
/// DataError naming all cohort years missing from the CPI series.
void merge_inflation_at_entry(Panel& panel, const CpiMonthlySeries& cpi);

/// Strike intensity k semesters before `current`, or nullopt when the lagged
/// semester precedes the calendar coverage or the student's entry semester.
std::optional<double> build_lagged_strikes(const StrikeCalendar& calendar,
                                           const SemesterKey& current, const SemesterKey& entry,
                                           int k);

struct AssemblyResult {
    Panel panel;
    AssemblyReport report;
};

AssemblyResult assemble_panel(const std::vector<RawEnrollmentRecord>& records,
                              const CpiMonthlySeries& cpi, const StrikeCalendar& calendar);

/// Re-derives every panel column from the raw inputs and reports any cell
/// that differs, i.e. any value not reproducible from information available
/// by the end of its semester.
std::vector<LeakageViolation> validate_leakage(const Panel& panel,
                                               const std::vector<RawEnrollmentRecord>& records,
                                               const CpiMonthlySeries& cpi,
                                               const StrikeCalendar& calendar);

// --- File formats -------------------------------------------------------

std::vector<RawEnrollmentRecord> load_enrollment_csv(const std::filesystem::path& path);
CpiMonthlySeries load_cpi_csv(const std::filesystem::path& path);
StrikeCalendar load_strikes_csv(const std::filesystem::path& path);

void write_enrollment_csv(const std::filesystem::path& path,
                          const std::vector<RawEnrollmentRecord>& records);
void write_cpi_csv(const std::filesystem::path& path, const CpiMonthlySeries& cpi);
void write_strikes_csv(const std::filesystem::path& path, const StrikeCalendar& calendar);

void write_panel_csv(const std::filesystem::path& path, const Panel& panel);
Panel read_panel_csv(const std::filesystem::path& path);

/// Canonical byte serialization used by the determinism checks.
std::string panel_to_string(const Panel& panel);

} // namespace paneldml
