#include "mcp/data.hpp"

#include "mcp/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

namespace mcp {

// ---------------------------------------------------------------------------
// Calendar

namespace {

// civil <-> serial day conversion (H. Hinnant's algorithms)
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

}  // namespace

std::int64_t Date::serial() const {
    return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
}

Date Date::from_serial(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

std::optional<Date> Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int v = 0;
        const char* b = text.data() + pos;
        const auto [ptr, ec] = std::from_chars(b, b + len, v);
        if (ec != std::errc{} || ptr != b + len) return std::nullopt;
        return v;
    };
    const auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
    if (!y || !m || !d) return std::nullopt;
    if (*m < 1 || *m > 12 || *d < 1 || *d > days_in_month(*y, *m)) return std::nullopt;
    return Date{*y, *m, *d};
}

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

Date Date::plus_years(int n) const {
    Date d{year + n, month, day};
    if (d.month == 2 && d.day == 29 && !is_leap(d.year)) d.day = 28;
    return d;
}

// ---------------------------------------------------------------------------
// Forcing

std::optional<std::size_t> ForcingSeries::index_of(const Date& d) const {
    if (dates.empty()) return std::nullopt;
    const auto off = d.serial() - dates.front().serial();
    if (off < 0 || off >= static_cast<std::int64_t>(dates.size())) return std::nullopt;
    return static_cast<std::size_t>(off);
}

void ForcingSeries::validate() const {
    const std::size_t n = dates.size();
    if (p.size() != n || pet.size() != n || q_obs.size() != n)
        throw InvalidInput("forcing columns have unequal lengths");
    for (std::size_t i = 1; i < n; ++i)
        if (dates[i].serial() != dates[i - 1].serial() + 1)
            throw GapError("date gap between " + dates[i - 1].iso() + " and " + dates[i].iso());
    for (std::size_t i = 0; i < n; ++i) {
        if (!(p[i] >= 0.0)) throw InvalidInput("negative or missing precipitation on " + dates[i].iso());
        if (!(pet[i] >= 0.0)) throw InvalidInput("negative or missing PET on " + dates[i].iso());
        if (!is_missing(q_obs[i]) && !(q_obs[i] >= 0.0))
            throw InvalidInput("negative discharge on " + dates[i].iso());
    }
}

ForcingSeries parse_forcing(std::istream& in, const std::string& source) {
    const auto table = csv::read_table(in, source);
    const auto cd = table.column("date"), cp = table.column("prcp_mm"), ce = table.column("pet_mm"),
               cq = table.column("q_mm");
    if (!cd || !cp || !ce || !cq) throw ParseError(source, 1, "header must contain date,prcp_mm,pet_mm,q_mm");

    ForcingSeries s;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        const auto date = Date::parse(row[*cd]);
        if (!date) throw ParseError(source, line, "bad date '" + row[*cd] + "'");
        const auto p = csv::parse_double(row[*cp]);
        if (!p) throw ParseError(source, line, "bad precipitation '" + row[*cp] + "'");
        if (!(*p >= 0.0)) throw ParseError(source, line, "negative precipitation");
        const auto e = csv::parse_double(row[*ce]);
        if (!e) throw ParseError(source, line, "bad PET '" + row[*ce] + "'");
        if (!(*e >= 0.0)) throw ParseError(source, line, "negative PET");
        double q = std::numeric_limits<double>::quiet_NaN();
        if (!row[*cq].empty()) {
            const auto qv = csv::parse_double(row[*cq]);
            if (!qv) throw ParseError(source, line, "bad discharge '" + row[*cq] + "'");
            if (*qv == kMissingSentinel) {
                // missing
            } else if (*qv < 0.0) {
                throw ParseError(source, line, "negative discharge");
            } else {
                q = *qv;
            }
        }
        if (!s.dates.empty() && date->serial() != s.dates.back().serial() + 1)
            throw GapError(source + ":" + std::to_string(line) + ": date gap between " + s.dates.back().iso() +
                           " and " + date->iso());
        s.dates.push_back(*date);
        s.p.push_back(*p);
        s.pet.push_back(*e);
        s.q_obs.push_back(q);
    }
    return s;
}

ForcingSeries load_forcing(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open forcing file '" + path + "'");
    return parse_forcing(in, path);
}

void write_forcing(std::ostream& out, const ForcingSeries& s) {
    out << "date,prcp_mm,pet_mm,q_mm\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        csv::write_row(out, {s.dates[i].iso(), csv::format_number(s.p[i]), csv::format_number(s.pet[i]),
                             csv::format_number(s.q_obs[i])});
}

// ---------------------------------------------------------------------------
// Attributes

std::vector<BasinAttributes> parse_attributes(std::istream& in, const std::string& source) {
    const auto table = csv::read_table(in, source);
    const auto ci = table.column("basin_id"), ch = table.column("h_soil_mm"), cr = table.column("region");
    if (!ci || !ch || !cr) throw ParseError(source, 1, "header must contain basin_id,h_soil_mm,region");
    std::vector<BasinAttributes> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const auto h = csv::parse_double(row[*ch]);
        if (!h || !(*h > 0.0))
            throw ParseError(source, table.line_numbers[r], "soil thickness must be a positive number");
        if (row[*ci].empty()) throw ParseError(source, table.line_numbers[r], "empty basin id");
        out.push_back({row[*ci], *h, row[*cr]});
    }
    return out;
}

std::vector<BasinAttributes> load_attributes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open attributes file '" + path + "'");
    return parse_attributes(in, path);
}

// ---------------------------------------------------------------------------
// Periods

DateRange DateRange::from_years(int first_year, int end_year) {
    return {Date{first_year, 1, 1}, Date{end_year - 1, 12, 31}};
}

void PeriodSpec::validate() const {
    for (const auto* r : {&train, &val, &test})
        if (r->last < r->first) throw InvalidInput("period " + r->first.iso() + ".." + r->last.iso() + " is inverted");
    if (train.overlaps(val) || train.overlaps(test) || val.overlaps(test))
        throw InvalidInput("train, validation and test ranges must not overlap");
    if (spinup_years < 0) throw InvalidInput("spin-up years must be non-negative");
}

namespace {

PeriodWindow make_window(const ForcingSeries& s, const DateRange& range, int spinup_years, const char* label) {
    const auto first = s.index_of(range.first);
    const auto last = s.index_of(range.last);
    if (!first || !last)
        throw RangeError(std::string(label) + " range " + range.first.iso() + ".." + range.last.iso() +
                         " is not covered by data " + (s.empty() ? std::string("(empty)")
                                                                 : s.dates.front().iso() + ".." + s.dates.back().iso()));
    PeriodWindow w;
    w.range = range;
    const Date spin = range.first.plus_years(-spinup_years);
    if (spin < s.dates.front()) {
        w.spinup_clipped = spinup_years > 0;
        w.sim_begin = 0;
    } else {
        w.sim_begin = *s.index_of(spin);
    }
    w.sim_end = *last + 1;
    for (std::size_t i = w.sim_begin; i < *first; ++i) w.spinup.push_back(i);
    for (std::size_t i = *first; i <= *last; ++i)
        if (!is_missing(s.q_obs[i])) w.eval.push_back(i);
    return w;
}

}  // namespace

PeriodMasks split_periods(const ForcingSeries& series, const PeriodSpec& spec) {
    spec.validate();
    PeriodMasks m;
    m.train = make_window(series, spec.train, spec.spinup_years, "training");
    m.val = make_window(series, spec.val, spec.spinup_years, "validation");
    m.test = make_window(series, spec.test, spec.spinup_years, "test");
    return m;
}

}  // namespace mcp
