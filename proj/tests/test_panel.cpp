#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "paneldml/error.hpp"
#include "paneldml/panel.hpp"
#include "paneldml/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace paneldml;

namespace {

RawEnrollmentRecord record(const std::string& id, int cohort, int sem, int year, int half,
                           bool enrolled_next, bool graduated = false) {
    RawEnrollmentRecord r;
    r.student_id = id;
    r.cohort_year = cohort;
    r.semester_number = sem;
    r.calendar_year = year;
    r.semester_of_year = half;
    r.enrolled_next = enrolled_next;
    r.graduated_by_next = graduated;
    r.cum_gpa = 6.0;
    r.repeat_ratio = 0.2;
    r.credits_approved_cum = 10.0 * sem;
    r.gender_code = 0;
    r.work_status = 0;
    return r;
}

CpiMonthlySeries flat_cpi(std::initializer_list<int> years, double monthly = 0.0) {
    CpiMonthlySeries cpi;
    for (int y : years) {
        std::array<double, 12> months{};
        months.fill(monthly);
        cpi.years[y] = months;
    }
    return cpi;
}

StrikeCalendar calendar_covering(int first_year, int last_year) {
    StrikeCalendar cal;
    for (int y = first_year; y <= last_year; ++y) {
        cal.cells[{y, 1}] = 0.0;
        cal.cells[{y, 2}] = 0.0;
    }
    return cal;
}

} // namespace

TEST_CASE("compound_annual_inflation: identity and simple products") {
    std::vector<double> zero(12, 0.0);
    CHECK(compound_annual_inflation(zero) == 0.0);

    std::vector<double> two_tenths = {0.10, 0.10, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(compound_annual_inflation(two_tenths) == doctest::Approx(0.21).epsilon(1e-12));

    std::vector<double> one_pct(12, 0.01);
    // (1.01)^12 - 1 evaluated directly
    CHECK(compound_annual_inflation(one_pct) ==
          doctest::Approx(std::pow(1.01, 12) - 1.0).epsilon(1e-12));
}

TEST_CASE("compound_annual_inflation: errors") {
    std::vector<double> short_vec(11, 0.0);
    CHECK_THROWS_AS(compound_annual_inflation(short_vec), SchemaError);
    std::vector<double> bad(12, 0.0);
    bad[3] = -1.0;
    CHECK_THROWS_AS(compound_annual_inflation(bad), DataError);
}

TEST_CASE("compound_annual_inflation: permutation invariance is exact") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> months(12);
        for (auto& m : months) m = rng.uniform01() * 0.1 - 0.02;
        const double base = compound_annual_inflation(months);
        std::vector<double> shuffled = months;
        rng.shuffle(shuffled);
        CHECK(compound_annual_inflation(shuffled) == base); // bitwise
    }
}

TEST_CASE("compound_annual_inflation: constant rate equals (1+r)^12 - 1") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const double r = rng.uniform01() * 0.4 - 0.1;
        std::vector<double> months(12, r);
        const double expected = std::pow(1.0 + r, 12) - 1.0;
        CHECK(compound_annual_inflation(months) ==
              doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("merge_inflation_at_entry: cohorts get their own compounded rate") {
    // Monthly rate that compounds to 51.4% annually.
    const double annual = 0.514;
    const double monthly = std::pow(1.0 + annual, 1.0 / 12.0) - 1.0;
    CpiMonthlySeries cpi;
    std::array<double, 12> months{};
    months.fill(monthly);
    cpi.years[2018] = months;
    cpi.years[2019] = {}; // all-zero year

    Panel panel;
    PanelRow row;
    row.student_id = "a";
    row.cohort_year = 2018;
    panel.rows.push_back(row);
    row.student_id = "b";
    row.cohort_year = 2019;
    panel.rows.push_back(row);

    merge_inflation_at_entry(panel, cpi);
    CHECK(panel.rows[0].inflation_at_entry == doctest::Approx(0.514).epsilon(1e-12));
    CHECK(panel.rows[1].inflation_at_entry == 0.0);
    // Rendered as a percentage in cohort reports
    CHECK(panel.rows[0].inflation_at_entry * 100.0 == doctest::Approx(51.4).epsilon(1e-10));
}

TEST_CASE("merge_inflation_at_entry: missing CPI year lists the gap") {
    Panel panel;
    PanelRow row;
    row.cohort_year = 2010;
    panel.rows.push_back(row);
    CpiMonthlySeries cpi = flat_cpi({2011});
    CHECK_THROWS_WITH_AS(merge_inflation_at_entry(panel, cpi),
                         doctest::Contains("2010"), DataError);
}

TEST_CASE("build_lagged_strikes: lag walks across year boundaries") {
    StrikeCalendar cal;
    cal.cells[{2009, 2}] = 0.3;
    cal.cells[{2010, 1}] = 0.1;
    cal.cells[{2010, 2}] = 0.0;

    const SemesterKey entry{2009, 2};
    // semester (2010, 2), lag 2 -> (2009, 2)
    auto v = build_lagged_strikes(cal, {2010, 2}, entry, 2);
    REQUIRE(v.has_value());
    CHECK(*v == 0.3);
}

TEST_CASE("build_lagged_strikes: before entry or coverage is missing") {
    StrikeCalendar cal;
    cal.cells[{2010, 1}] = 0.5;
    cal.cells[{2011, 2}] = 0.2;

    // Lag target before the student's entry.
    CHECK_FALSE(build_lagged_strikes(cal, {2010, 1}, {2010, 1}, 1).has_value());
    // Lag target before the calendar coverage.
    CHECK_FALSE(build_lagged_strikes(cal, {2010, 2}, {2009, 1}, 3).has_value());
    // Inside coverage but unlisted: strike-free.
    auto v = build_lagged_strikes(cal, {2011, 2}, {2010, 1}, 2);
    REQUIRE(v.has_value());
    CHECK(*v == 0.0);
}

TEST_CASE("build_lagged_strikes: single nonzero semester shows up only at lag 3") {
    StrikeCalendar cal = calendar_covering(2009, 2012);
    cal.cells[{2010, 1}] = 0.7;

    const SemesterKey entry{2009, 1};
    const SemesterKey pos{2011, 2}; // three semesters after (2010,1)
    CHECK(*build_lagged_strikes(cal, pos, entry, 1) == 0.0);
    CHECK(*build_lagged_strikes(cal, pos, entry, 2) == 0.0);
    CHECK(*build_lagged_strikes(cal, pos, entry, 3) == 0.7);
}

TEST_CASE("assemble_panel: dropout coding and graduate rule") {
    std::vector<RawEnrollmentRecord> records;
    // Student x: enrolled semesters 1-3 then gone (not graduated).
    records.push_back(record("x", 2010, 1, 2010, 1, true));
    records.push_back(record("x", 2010, 2, 2010, 2, true));
    records.push_back(record("x", 2010, 3, 2011, 1, false));
    // Student y: graduates after semester 2.
    records.push_back(record("y", 2010, 1, 2010, 1, true));
    records.push_back(record("y", 2010, 2, 2010, 2, false, true));

    const auto cpi = flat_cpi({2010});
    const auto cal = calendar_covering(2009, 2012);
    const auto result = assemble_panel(records, cpi, cal);

    REQUIRE(result.panel.rows.size() == 5);
    CHECK(result.panel.rows[0].dropout_next_sem == 0);
    CHECK(result.panel.rows[1].dropout_next_sem == 0);
    CHECK(result.panel.rows[2].dropout_next_sem == 1);
    // Graduates are coded 0.
    CHECK(result.panel.rows[4].dropout_next_sem == 0);
    CHECK(result.report.cohort_sizes.at(2010) == 2);
}

TEST_CASE("assemble_panel: rows after graduation are dropped with a warning") {
    std::vector<RawEnrollmentRecord> records;
    records.push_back(record("x", 2010, 1, 2010, 1, true, true)); // graduates
    records.push_back(record("x", 2010, 2, 2010, 2, false));      // inconsistent

    const auto result = assemble_panel(records, flat_cpi({2010}), calendar_covering(2009, 2011));
    CHECK(result.panel.rows.size() == 1);
    CHECK(result.report.exclusions_by_reason.at("after_graduation") == 1);
    CHECK(result.report.warnings.size() == 1);
}

TEST_CASE("assemble_panel: duplicate (student, semester) is an ingestion error") {
    std::vector<RawEnrollmentRecord> records;
    records.push_back(record("x", 2010, 1, 2010, 1, true));
    records.push_back(record("x", 2010, 1, 2010, 1, false));
    CHECK_THROWS_AS(assemble_panel(records, flat_cpi({2010}), calendar_covering(2009, 2011)),
                    DataError);
}

TEST_CASE("assemble_panel: work status imputed by cohort mode with flag") {
    std::vector<RawEnrollmentRecord> records;
    auto r1 = record("a", 2010, 1, 2010, 1, true);
    r1.work_status = 1;
    auto r2 = record("b", 2010, 1, 2010, 1, true);
    r2.work_status = 1;
    auto r3 = record("c", 2010, 1, 2010, 1, true);
    r3.work_status = 0;
    auto r4 = record("d", 2010, 1, 2010, 1, true);
    r4.work_status.reset(); // to impute, cohort mode is 1
    records = {r1, r2, r3, r4};

    const auto result = assemble_panel(records, flat_cpi({2010}), calendar_covering(2009, 2011));
    const auto& imputed = result.panel.rows[3];
    CHECK(imputed.student_id == "d");
    CHECK(imputed.work_status == 1);
    CHECK(imputed.work_status_imputed);
    CHECK(result.report.work_status_imputations == 1);
    CHECK_FALSE(result.panel.rows[0].work_status_imputed);
}

TEST_CASE("assemble_panel: interaction term is the exact product") {
    std::vector<RawEnrollmentRecord> records;
    for (int sem = 1; sem <= 4; ++sem)
        records.push_back(
            record("x", 2010, sem, 2010 + (sem - 1) / 2, (sem - 1) % 2 + 1, sem < 4));
    StrikeCalendar cal = calendar_covering(2009, 2012);
    cal.cells[{2010, 1}] = 0.37;
    cal.cells[{2010, 2}] = 0.11;
    const auto result = assemble_panel(records, flat_cpi({2010}, 0.02), cal);

    for (const auto& row : result.panel.rows) {
        if (row.strikes_lag2) {
            REQUIRE(row.interaction_term.has_value());
            CHECK(*row.interaction_term == *row.strikes_lag2 * row.inflation_at_entry);
        } else {
            CHECK_FALSE(row.interaction_term.has_value());
        }
    }
    // Missing lags on early semesters, present later.
    CHECK_FALSE(result.panel.rows[0].strikes_lag1.has_value());
    CHECK(result.panel.rows[2].strikes_lag2.has_value());
}

TEST_CASE("assemble_panel: deterministic byte-identical serialization") {
    std::vector<RawEnrollmentRecord> records;
    Rng rng(3);
    for (int s = 0; s < 25; ++s) {
        const int n_sem = 1 + static_cast<int>(rng.below(5));
        for (int t = 1; t <= n_sem; ++t) {
            auto r = record("s" + std::to_string(s), 2010, t, 2010 + (t - 1) / 2,
                            (t - 1) % 2 + 1, t < n_sem);
            r.cum_gpa = 2.0 + 8.0 * rng.uniform01();
            if (rng.bernoulli(0.2)) r.work_status.reset();
            records.push_back(r);
        }
    }
    StrikeCalendar cal = calendar_covering(2009, 2013);
    cal.cells[{2010, 2}] = 0.4;

    const auto a = assemble_panel(records, flat_cpi({2010}, 0.01), cal);
    const auto b = assemble_panel(records, flat_cpi({2010}, 0.01), cal);
    CHECK(panel_to_string(a.panel) == panel_to_string(b.panel));

    // Input order must not matter either.
    std::vector<RawEnrollmentRecord> reversed(records.rbegin(), records.rend());
    const auto c = assemble_panel(reversed, flat_cpi({2010}, 0.01), cal);
    CHECK(panel_to_string(a.panel) == panel_to_string(c.panel));
}

TEST_CASE("validate_leakage: clean assembly has no violations, faults are caught") {
    std::vector<RawEnrollmentRecord> records;
    Rng rng(5);
    for (int s = 0; s < 30; ++s) {
        const int n_sem = 2 + static_cast<int>(rng.below(4));
        for (int t = 1; t <= n_sem; ++t) {
            auto r = record("s" + std::to_string(s), 2010, t, 2010 + (t - 1) / 2,
                            (t - 1) % 2 + 1, t < n_sem);
            r.cum_gpa = 2.0 + 8.0 * rng.uniform01();
            records.push_back(r);
        }
    }
    StrikeCalendar cal = calendar_covering(2009, 2013);
    cal.cells[{2010, 2}] = 0.25;
    cal.cells[{2011, 1}] = 0.6;
    const auto cpi = flat_cpi({2010}, 0.015);
    auto result = assemble_panel(records, cpi, cal);

    CHECK(validate_leakage(result.panel, records, cpi, cal).empty());

    SUBCASE("strikes_lag1 shifted forward one semester") {
        auto faulty = result.panel;
        // Shift lag1 forward within each student (semester t takes t-1's value).
        for (std::size_t i = faulty.rows.size(); i-- > 1;) {
            if (faulty.rows[i].student_id == faulty.rows[i - 1].student_id)
                faulty.rows[i].strikes_lag1 = faulty.rows[i - 1].strikes_lag1;
        }
        const auto violations = validate_leakage(faulty, records, cpi, cal);
        CHECK_FALSE(violations.empty());
        for (const auto& v : violations) CHECK(v.column == "strikes_lag1");
    }

    SUBCASE("outcome copied into a control column") {
        auto faulty = result.panel;
        bool changed = false;
        for (auto& row : faulty.rows) {
            if (row.cum_gpa != static_cast<double>(row.dropout_next_sem)) changed = true;
            row.cum_gpa = static_cast<double>(row.dropout_next_sem);
        }
        REQUIRE(changed);
        const auto violations = validate_leakage(faulty, records, cpi, cal);
        CHECK_FALSE(violations.empty());
        for (const auto& v : violations) CHECK(v.column == "cum_gpa");
    }
}

TEST_CASE("panel csv round trip preserves every cell") {
    std::vector<RawEnrollmentRecord> records;
    for (int t = 1; t <= 4; ++t) {
        auto r = record("s1", 2010, t, 2010 + (t - 1) / 2, (t - 1) % 2 + 1, t < 4);
        r.cum_gpa = 6.123456789012345;
        if (t == 2) r.work_status.reset();
        records.push_back(r);
    }
    StrikeCalendar cal = calendar_covering(2009, 2012);
    cal.cells[{2010, 2}] = 1.0 / 3.0;
    const auto result = assemble_panel(records, flat_cpi({2010}, 0.013), cal);

    const auto path = std::filesystem::temp_directory_path() / "paneldml_roundtrip.csv";
    write_panel_csv(path, result.panel);
    const Panel loaded = read_panel_csv(path);
    CHECK(panel_to_string(loaded) == panel_to_string(result.panel));
    std::filesystem::remove(path);
}

TEST_CASE("enrollment loader validates schema") {
    const auto path = std::filesystem::temp_directory_path() / "paneldml_bad_enrollment.csv";
    {
        std::ofstream out(path);
        out << "student_id,cohort_year\n1,2\n";
    }
    CHECK_THROWS_AS(load_enrollment_csv(path), SchemaError);
    std::filesystem::remove(path);
}

TEST_CASE("cpi loader requires complete years") {
    const auto path = std::filesystem::temp_directory_path() / "paneldml_partial_cpi.csv";
    {
        std::ofstream out(path);
        out << "year,month,variacion\n";
        for (int m = 1; m <= 11; ++m) out << "2010," << m << ",0.01\n";
    }
    CHECK_THROWS_AS(load_cpi_csv(path), DataError);
    std::filesystem::remove(path);
}
