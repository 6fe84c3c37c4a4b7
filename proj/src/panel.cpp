#include "paneldml/panel.hpp"

#include "paneldml/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace paneldml {

namespace {

std::string missing_or(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

int parse_binary(const std::string& cell, const std::string& context) {
    const long v = parse_long(cell, context);
    if (v != 0 && v != 1) throw SchemaError(context + ": expected 0/1, got '" + cell + "'");
    return static_cast<int>(v);
}

} // namespace

double compound_annual_inflation(std::span<const double> monthly_changes) {
    if (monthly_changes.size() != 12)
        throw SchemaError("compound_annual_inflation: expected 12 monthly values, got " +
                          std::to_string(monthly_changes.size()));
    std::array<double, 12> factors{};
    for (std::size_t i = 0; i < 12; ++i) {
        if (monthly_changes[i] <= -1.0)
            throw DataError("compound_annual_inflation: monthly change must exceed -1, got " +
                            format_double(monthly_changes[i]));
        factors[i] = 1.0 + monthly_changes[i];
    }
    // Canonical multiplication order: the result is bit-identical for any
    // permutation of the months.
    std::sort(factors.begin(), factors.end());
    double product = 1.0;
    for (double f : factors) product *= f;
    return product - 1.0;
}

double annual_rate_for(const CpiMonthlySeries& cpi, int year) {
    const auto it = cpi.years.find(year);
    if (it == cpi.years.end())
        throw DataError("CPI series has no year " + std::to_string(year));
    return compound_annual_inflation(it->second);
}

void merge_inflation_at_entry(Panel& panel, const CpiMonthlySeries& cpi) {
    std::set<int> missing;
    for (const auto& row : panel.rows)
        if (!cpi.has_year(row.cohort_year)) missing.insert(row.cohort_year);
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << "CPI series missing cohort years:";
        for (int y : missing) msg << ' ' << y;
        throw DataError(msg.str());
    }
    std::map<int, double> rate;
    for (auto& row : panel.rows) {
        auto it = rate.find(row.cohort_year);
        if (it == rate.end()) it = rate.emplace(row.cohort_year, annual_rate_for(cpi, row.cohort_year)).first;
        row.inflation_at_entry = it->second;
        if (row.strikes_lag2)
            row.interaction_term = *row.strikes_lag2 * row.inflation_at_entry;
    }
}

std::optional<double> StrikeCalendar::intensity(const SemesterKey& key) const {
    if (cells.empty()) return std::nullopt;
    if (key < cells.begin()->first || cells.rbegin()->first < key) return std::nullopt;
    const auto it = cells.find(key);
    if (it != cells.end()) return it->second;
    return 0.0; // inside coverage, no listed strike
}

std::optional<double> build_lagged_strikes(const StrikeCalendar& calendar,
                                           const SemesterKey& current, const SemesterKey& entry,
                                           int k) {
    const SemesterKey target = current.minus(k);
    if (target < entry) return std::nullopt;
    return calendar.intensity(target);
}

namespace {

struct StudentTrajectory {
    std::vector<const RawEnrollmentRecord*> records; // sorted by semester_number
    SemesterKey entry;
};

void check_record_invariants(const RawEnrollmentRecord& r) {
    const std::string who = "record (" + r.student_id + ", semester " +
                            std::to_string(r.semester_number) + ")";
    if (r.semester_number < 1) throw DataError(who + ": semester_number must be >= 1");
    if (r.cohort_year > r.calendar_year)
        throw DataError(who + ": cohort_year exceeds calendar_year");
    if (r.semester_of_year != 1 && r.semester_of_year != 2)
        throw DataError(who + ": semester_of_year must be 1 or 2");
    if (r.repeat_ratio < 0.0 || r.repeat_ratio > 1.0)
        throw DataError(who + ": repeat_ratio outside [0,1]");
    if (r.credits_approved_cum < 0.0)
        throw DataError(who + ": credits_approved_cum negative");
}

/// Modal observed work_status per cohort, with a global fallback. Ties break
/// toward the smaller code; no observations at all default to 0.
struct WorkStatusImputer {
    std::map<int, int> per_cohort;
    int global_mode = 0;

    static int mode_of(const std::map<int, std::size_t>& counts, int fallback) {
        int best = fallback;
        std::size_t best_n = 0;
        for (const auto& [value, n] : counts) {
            if (n > best_n) {
                best = value;
                best_n = n;
            }
        }
        return best;
    }

    explicit WorkStatusImputer(const std::vector<RawEnrollmentRecord>& records) {
        std::map<int, std::map<int, std::size_t>> counts;
        std::map<int, std::size_t> global_counts;
        for (const auto& r : records) {
            if (!r.work_status) continue;
            counts[r.cohort_year][*r.work_status]++;
            global_counts[*r.work_status]++;
        }
        global_mode = mode_of(global_counts, 0);
        for (const auto& [cohort, c] : counts) per_cohort[cohort] = mode_of(c, global_mode);
    }

    int value_for(int cohort_year) const {
        const auto it = per_cohort.find(cohort_year);
        return it != per_cohort.end() ? it->second : global_mode;
    }
};

SemesterKey entry_key(const RawEnrollmentRecord& first) {
    SemesterKey pos{first.calendar_year, first.semester_of_year};
    // Left-truncated trajectories: walk back to the nominal entry semester
    // assuming consecutive enrollment before the observation window.
    return pos.minus(first.semester_number - 1);
}

} // namespace

AssemblyResult assemble_panel(const std::vector<RawEnrollmentRecord>& records,
                              const CpiMonthlySeries& cpi, const StrikeCalendar& calendar) {
    AssemblyResult result;
    auto& report = result.report;
    report.input_rows = records.size();

    std::set<std::pair<std::string, int>> seen;
    for (const auto& r : records) {
        check_record_invariants(r);
        if (!seen.emplace(r.student_id, r.semester_number).second)
            throw DataError("duplicate (student, semester): (" + r.student_id + ", " +
                            std::to_string(r.semester_number) + ")");
    }

    std::map<std::string, std::vector<const RawEnrollmentRecord*>> by_student;
    for (const auto& r : records) by_student[r.student_id].push_back(&r);

    const WorkStatusImputer imputer(records);

    for (auto& [student, recs] : by_student) {
        std::sort(recs.begin(), recs.end(),
                  [](const RawEnrollmentRecord* a, const RawEnrollmentRecord* b) {
                      return a->semester_number < b->semester_number;
                  });

        const SemesterKey entry = entry_key(*recs.front());

        // Rows recorded after a graduation are inconsistent; drop them.
        int graduated_at = -1;
        for (const auto* r : recs) {
            if (graduated_at >= 0 && r->semester_number > graduated_at) {
                report.exclusions_by_reason["after_graduation"]++;
                report.warnings.push_back("student " + student + ": enrollment at semester " +
                                          std::to_string(r->semester_number) +
                                          " after graduating at semester " +
                                          std::to_string(graduated_at) + "; row dropped");
                continue;
            }
            if (r->graduated_by_next && graduated_at < 0) graduated_at = r->semester_number;
        }

        for (std::size_t i = 0; i < recs.size(); ++i) {
            const auto& r = *recs[i];
            if (graduated_at >= 0 && r.semester_number > graduated_at) continue;

            if (i + 1 < recs.size() && !r.enrolled_next && !r.graduated_by_next) {
                const auto& nxt = *recs[i + 1];
                const SemesterKey here{r.calendar_year, r.semester_of_year};
                const SemesterKey next_pos{nxt.calendar_year, nxt.semester_of_year};
                if (next_pos.linear() == here.linear() + 1)
                    report.warnings.push_back(
                        "student " + student + ": enrolled_next=0 at semester " +
                        std::to_string(r.semester_number) +
                        " contradicts the following record; flags kept as given");
            }

            PanelRow row;
            row.student_id = r.student_id;
            row.semester_number = r.semester_number;
            row.calendar_year = r.calendar_year;
            row.semester_of_year = r.semester_of_year;
            row.cohort_year = r.cohort_year;
            row.dropout_next_sem = (!r.enrolled_next && !r.graduated_by_next) ? 1 : 0;

            const SemesterKey pos{r.calendar_year, r.semester_of_year};
            row.strikes_lag1 = build_lagged_strikes(calendar, pos, entry, 1);
            row.strikes_lag2 = build_lagged_strikes(calendar, pos, entry, 2);
            row.strikes_lag3 = build_lagged_strikes(calendar, pos, entry, 3);

            row.cum_gpa = r.cum_gpa;
            row.repeat_ratio = r.repeat_ratio;
            row.credits_approved_cum = r.credits_approved_cum;
            row.gender_code = r.gender_code;
            if (r.work_status) {
                row.work_status = *r.work_status;
            } else {
                row.work_status = imputer.value_for(r.cohort_year);
                row.work_status_imputed = true;
                report.work_status_imputations++;
            }
            result.panel.rows.push_back(std::move(row));
        }
    }

    merge_inflation_at_entry(result.panel, cpi);

    std::sort(result.panel.rows.begin(), result.panel.rows.end(),
              [](const PanelRow& a, const PanelRow& b) {
                  return std::tie(a.student_id, a.semester_number) <
                         std::tie(b.student_id, b.semester_number);
              });

    report.retained_rows = result.panel.rows.size();
    std::map<int, std::set<std::string>> cohort_students;
    for (const auto& row : result.panel.rows) cohort_students[row.cohort_year].insert(row.student_id);
    for (const auto& [year, students] : cohort_students) report.cohort_sizes[year] = students.size();

    return result;
}

std::vector<LeakageViolation> validate_leakage(const Panel& panel,
                                               const std::vector<RawEnrollmentRecord>& records,
                                               const CpiMonthlySeries& cpi,
                                               const StrikeCalendar& calendar) {
    std::vector<LeakageViolation> violations;

    std::map<std::pair<std::string, int>, const RawEnrollmentRecord*> index;
    std::map<std::string, const RawEnrollmentRecord*> first_record;
    for (const auto& r : records) {
        index[{r.student_id, r.semester_number}] = &r;
        auto it = first_record.find(r.student_id);
        if (it == first_record.end() || r.semester_number < it->second->semester_number)
            first_record[r.student_id] = &r;
    }
    const WorkStatusImputer imputer(records);

    auto flag = [&](std::size_t i, const PanelRow& row, const std::string& column,
                    const std::string& detail) {
        violations.push_back({i, row.student_id, row.semester_number, column, detail});
    };
    auto check_exact = [&](std::size_t i, const PanelRow& row, const std::string& column,
                           double actual, double expected) {
        if (actual != expected)
            flag(i, row, column,
                 "expected " + format_double(expected) + ", found " + format_double(actual));
    };
    auto check_opt = [&](std::size_t i, const PanelRow& row, const std::string& column,
                         const std::optional<double>& actual,
                         const std::optional<double>& expected) {
        if (actual.has_value() != expected.has_value() ||
            (actual && expected && *actual != *expected))
            flag(i, row, column,
                 "expected " + (expected ? format_double(*expected) : std::string("missing")) +
                     ", found " + (actual ? format_double(*actual) : std::string("missing")));
    };

    for (std::size_t i = 0; i < panel.rows.size(); ++i) {
        const auto& row = panel.rows[i];
        const auto rec_it = index.find({row.student_id, row.semester_number});
        if (rec_it == index.end()) {
            flag(i, row, "student_id", "no source record for this student-semester");
            continue;
        }
        const auto& rec = *rec_it->second;

        check_exact(i, row, "calendar_year", row.calendar_year, rec.calendar_year);
        check_exact(i, row, "semester_of_year", row.semester_of_year, rec.semester_of_year);
        check_exact(i, row, "cohort_year", row.cohort_year, rec.cohort_year);
        check_exact(i, row, "dropout_next_sem", row.dropout_next_sem,
                    (!rec.enrolled_next && !rec.graduated_by_next) ? 1.0 : 0.0);
        check_exact(i, row, "cum_gpa", row.cum_gpa, rec.cum_gpa);
        check_exact(i, row, "repeat_ratio", row.repeat_ratio, rec.repeat_ratio);
        check_exact(i, row, "credits_approved_cum", row.credits_approved_cum,
                    rec.credits_approved_cum);
        check_exact(i, row, "gender_code", row.gender_code, rec.gender_code);

        if (rec.work_status) {
            check_exact(i, row, "work_status", row.work_status, *rec.work_status);
            if (row.work_status_imputed)
                flag(i, row, "work_status_imputed", "flag set although the record has a value");
        } else {
            if (!row.work_status_imputed)
                flag(i, row, "work_status_imputed", "missing value was not flagged as imputed");
            check_exact(i, row, "work_status", row.work_status,
                        imputer.value_for(rec.cohort_year));
        }

        const SemesterKey pos{rec.calendar_year, rec.semester_of_year};
        const auto first_it = first_record.find(row.student_id);
        const SemesterKey entry = entry_key(*first_it->second);
        check_opt(i, row, "strikes_lag1", row.strikes_lag1,
                  build_lagged_strikes(calendar, pos, entry, 1));
        check_opt(i, row, "strikes_lag2", row.strikes_lag2,
                  build_lagged_strikes(calendar, pos, entry, 2));
        check_opt(i, row, "strikes_lag3", row.strikes_lag3,
                  build_lagged_strikes(calendar, pos, entry, 3));

        if (cpi.has_year(rec.cohort_year)) {
            check_exact(i, row, "inflation_at_entry", row.inflation_at_entry,
                        annual_rate_for(cpi, rec.cohort_year));
        } else {
            flag(i, row, "inflation_at_entry", "no CPI year for cohort");
        }
        const std::optional<double> expected_interaction =
            row.strikes_lag2 ? std::optional<double>(*row.strikes_lag2 * row.inflation_at_entry)
                             : std::nullopt;
        check_opt(i, row, "interaction_term", row.interaction_term, expected_interaction);
    }
    return violations;
}

// --- File formats -------------------------------------------------------

static const std::vector<std::string> kEnrollmentHeader = {
    "student_id",   "cohort_year",  "semester_number",      "calendar_year",
    "semester_of_year", "enrolled_next", "graduated_by_next", "cum_gpa",
    "repeat_ratio", "credits_approved_cum", "gender_code",   "work_status"};

std::vector<RawEnrollmentRecord> load_enrollment_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header != kEnrollmentHeader)
        throw SchemaError(path.string() + ": unexpected enrollment header");

    std::vector<RawEnrollmentRecord> records;
    records.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& cells = t.rows[i];
        const std::string ctx = path.string() + ":" + std::to_string(i + 2);
        RawEnrollmentRecord r;
        r.student_id = cells[0];
        if (r.student_id.empty()) throw SchemaError(ctx + ": empty student_id");
        r.cohort_year = static_cast<int>(parse_long(cells[1], ctx + ":cohort_year"));
        r.semester_number = static_cast<int>(parse_long(cells[2], ctx + ":semester_number"));
        r.calendar_year = static_cast<int>(parse_long(cells[3], ctx + ":calendar_year"));
        r.semester_of_year = static_cast<int>(parse_long(cells[4], ctx + ":semester_of_year"));
        r.enrolled_next = parse_binary(cells[5], ctx + ":enrolled_next") != 0;
        r.graduated_by_next = parse_binary(cells[6], ctx + ":graduated_by_next") != 0;
        r.cum_gpa = parse_double(cells[7], ctx + ":cum_gpa");
        r.repeat_ratio = parse_double(cells[8], ctx + ":repeat_ratio");
        r.credits_approved_cum = parse_double(cells[9], ctx + ":credits_approved_cum");
        r.gender_code = parse_binary(cells[10], ctx + ":gender_code");
        if (!cells[11].empty()) r.work_status = parse_binary(cells[11], ctx + ":work_status");
        records.push_back(std::move(r));
    }
    return records;
}

CpiMonthlySeries load_cpi_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"year", "month", "variacion"})
        throw SchemaError(path.string() + ": expected header year,month,variacion");

    std::map<int, std::array<std::optional<double>, 12>> partial;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string ctx = path.string() + ":" + std::to_string(i + 2);
        const int year = static_cast<int>(parse_long(t.rows[i][0], ctx + ":year"));
        const int month = static_cast<int>(parse_long(t.rows[i][1], ctx + ":month"));
        const double v = parse_double(t.rows[i][2], ctx + ":variacion");
        if (month < 1 || month > 12) throw DataError(ctx + ": month outside 1..12");
        if (v <= -1.0) throw DataError(ctx + ": variacion must exceed -1");
        auto& slot = partial[year][static_cast<std::size_t>(month - 1)];
        if (slot) throw DataError(ctx + ": duplicate (year, month)");
        slot = v;
    }

    CpiMonthlySeries cpi;
    for (const auto& [year, months] : partial) {
        std::array<double, 12> full{};
        for (std::size_t m = 0; m < 12; ++m) {
            if (!months[m])
                throw DataError(path.string() + ": year " + std::to_string(year) +
                                " is missing month " + std::to_string(m + 1));
            full[m] = *months[m];
        }
        cpi.years[year] = full;
    }
    return cpi;
}

StrikeCalendar load_strikes_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"calendar_year", "semester_of_year", "strike_intensity"})
        throw SchemaError(path.string() +
                          ": expected header calendar_year,semester_of_year,strike_intensity");

    StrikeCalendar calendar;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string ctx = path.string() + ":" + std::to_string(i + 2);
        SemesterKey key;
        key.year = static_cast<int>(parse_long(t.rows[i][0], ctx + ":calendar_year"));
        key.half = static_cast<int>(parse_long(t.rows[i][1], ctx + ":semester_of_year"));
        if (key.half != 1 && key.half != 2) throw DataError(ctx + ": semester_of_year must be 1 or 2");
        const double v = parse_double(t.rows[i][2], ctx + ":strike_intensity");
        if (v < 0.0 || v > 1.0) throw DataError(ctx + ": strike_intensity outside [0,1]");
        if (!calendar.cells.emplace(key, v).second)
            throw DataError(ctx + ": duplicate calendar semester");
    }
    return calendar;
}

void write_enrollment_csv(const std::filesystem::path& path,
                          const std::vector<RawEnrollmentRecord>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        rows.push_back({r.student_id, std::to_string(r.cohort_year),
                        std::to_string(r.semester_number), std::to_string(r.calendar_year),
                        std::to_string(r.semester_of_year), r.enrolled_next ? "1" : "0",
                        r.graduated_by_next ? "1" : "0", format_double(r.cum_gpa),
                        format_double(r.repeat_ratio), format_double(r.credits_approved_cum),
                        std::to_string(r.gender_code),
                        r.work_status ? std::to_string(*r.work_status) : std::string()});
    }
    write_csv(path, kEnrollmentHeader, rows);
}

void write_cpi_csv(const std::filesystem::path& path, const CpiMonthlySeries& cpi) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [year, months] : cpi.years)
        for (std::size_t m = 0; m < 12; ++m)
            rows.push_back({std::to_string(year), std::to_string(m + 1), format_double(months[m])});
    write_csv(path, {"year", "month", "variacion"}, rows);
}

void write_strikes_csv(const std::filesystem::path& path, const StrikeCalendar& calendar) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [key, v] : calendar.cells)
        rows.push_back({std::to_string(key.year), std::to_string(key.half), format_double(v)});
    write_csv(path, {"calendar_year", "semester_of_year", "strike_intensity"}, rows);
}

static const std::vector<std::string> kPanelHeader = {
    "student_id",        "semester_number", "calendar_year",   "semester_of_year",
    "cohort_year",       "dropout_next_sem", "strikes_lag1",   "strikes_lag2",
    "strikes_lag3",      "inflation_at_entry", "interaction_term", "cum_gpa",
    "repeat_ratio",      "credits_approved_cum", "gender_code", "work_status",
    "work_status_imputed"};

static std::vector<std::string> panel_row_cells(const PanelRow& r) {
    return {r.student_id,
            std::to_string(r.semester_number),
            std::to_string(r.calendar_year),
            std::to_string(r.semester_of_year),
            std::to_string(r.cohort_year),
            std::to_string(r.dropout_next_sem),
            missing_or(r.strikes_lag1),
            missing_or(r.strikes_lag2),
            missing_or(r.strikes_lag3),
            format_double(r.inflation_at_entry),
            missing_or(r.interaction_term),
            format_double(r.cum_gpa),
            format_double(r.repeat_ratio),
            format_double(r.credits_approved_cum),
            std::to_string(r.gender_code),
            std::to_string(r.work_status),
            r.work_status_imputed ? "1" : "0"};
}

void write_panel_csv(const std::filesystem::path& path, const Panel& panel) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(panel.rows.size());
    for (const auto& r : panel.rows) rows.push_back(panel_row_cells(r));
    write_csv(path, kPanelHeader, rows);
}

std::string panel_to_string(const Panel& panel) {
    std::ostringstream out;
    for (std::size_t i = 0; i < kPanelHeader.size(); ++i)
        out << (i ? "," : "") << kPanelHeader[i];
    out << '\n';
    for (const auto& r : panel.rows) {
        const auto cells = panel_row_cells(r);
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    }
    return out.str();
}

Panel read_panel_csv(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header != kPanelHeader) throw SchemaError(path.string() + ": unexpected panel header");

    Panel panel;
    panel.rows.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& c = t.rows[i];
        const std::string ctx = path.string() + ":" + std::to_string(i + 2);
        PanelRow r;
        r.student_id = c[0];
        r.semester_number = static_cast<int>(parse_long(c[1], ctx));
        r.calendar_year = static_cast<int>(parse_long(c[2], ctx));
        r.semester_of_year = static_cast<int>(parse_long(c[3], ctx));
        r.cohort_year = static_cast<int>(parse_long(c[4], ctx));
        r.dropout_next_sem = parse_binary(c[5], ctx + ":dropout_next_sem");
        if (!c[6].empty()) r.strikes_lag1 = parse_double(c[6], ctx);
        if (!c[7].empty()) r.strikes_lag2 = parse_double(c[7], ctx);
        if (!c[8].empty()) r.strikes_lag3 = parse_double(c[8], ctx);
        r.inflation_at_entry = parse_double(c[9], ctx);
        if (!c[10].empty()) r.interaction_term = parse_double(c[10], ctx);
        r.cum_gpa = parse_double(c[11], ctx);
        r.repeat_ratio = parse_double(c[12], ctx);
        r.credits_approved_cum = parse_double(c[13], ctx);
        r.gender_code = parse_binary(c[14], ctx + ":gender_code");
        r.work_status = parse_binary(c[15], ctx + ":work_status");
        r.work_status_imputed = parse_binary(c[16], ctx + ":work_status_imputed") != 0;
        panel.rows.push_back(std::move(r));
    }
    return panel;
}

} // namespace paneldml
