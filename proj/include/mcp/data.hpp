/**
 * @file data.hpp
 * @brief Daily basin forcing, basin attributes and calibration periods.
 *
 * Forcing CSV:    date,prcp_mm,pet_mm,q_mm   (ISO dates; q missing as "" or -999)
 * Attributes CSV: basin_id,h_soil_mm,region
 */

#pragma once

#include "mcp/error.hpp"
#include "mcp/metrics.hpp"

#include <cmath>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mcp {

/// Proleptic Gregorian calendar day.
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    /// Days since 1970-01-01.
    std::int64_t serial() const;
    static Date from_serial(std::int64_t days);
    /// Strict YYYY-MM-DD; returns nullopt on malformed or impossible dates.
    static std::optional<Date> parse(std::string_view text);
    std::string iso() const;

    Date plus_days(std::int64_t n) const { return from_serial(serial() + n); }
    /// Same calendar day `n` years later (Feb 29 maps to Feb 28).
    Date plus_years(int n) const;

    auto operator<=>(const Date&) const = default;
};

inline constexpr double kMissingSentinel = -999.0;

inline bool is_missing(double q) { return std::isnan(q); }

struct ForcingSeries {
    std::vector<Date> dates;
    std::vector<double> p;
    std::vector<double> pet;
    std::vector<double> q_obs;  ///< NaN marks a missing observation

    std::size_t size() const { return dates.size(); }
    bool empty() const { return dates.empty(); }
    /// Index of `d`, or nullopt when outside the series.
    std::optional<std::size_t> index_of(const Date& d) const;
    /// Checks equal lengths, daily continuity and sign rules.
    void validate() const;
};

ForcingSeries parse_forcing(std::istream& in, const std::string& source = "<stream>");
ForcingSeries load_forcing(const std::string& path);
/// Canonical form: shortest round-trip numbers, missing q as an empty field.
void write_forcing(std::ostream& out, const ForcingSeries& series);

struct BasinAttributes {
    std::string basin_id;
    double h_soil = 0.0;
    std::string region;
};

std::vector<BasinAttributes> parse_attributes(std::istream& in, const std::string& source = "<stream>");
std::vector<BasinAttributes> load_attributes(const std::string& path);

/// Inclusive calendar range.
struct DateRange {
    Date first;
    Date last;

    /// "A-B" year style range: [Jan 1 of A, Dec 31 of B-1].
    static DateRange from_years(int first_year, int end_year);
    bool contains(const Date& d) const { return first <= d && d <= last; }
    bool overlaps(const DateRange& o) const { return !(last < o.first || o.last < first); }
};

struct PeriodSpec {
    DateRange train = DateRange::from_years(1987, 2004);
    DateRange val = DateRange::from_years(1980, 1987);
    DateRange test = DateRange::from_years(2004, 2014);
    int spinup_years = 3;

    /// Throws InvalidInput if evaluation ranges overlap or are inverted.
    void validate() const;
};

/// One evaluation period: simulate [sim_begin, sim_end), score `eval`.
struct PeriodWindow {
    std::size_t sim_begin = 0;
    std::size_t sim_end = 0;
    IndexSet eval;    ///< global indices, in range and with observed q
    IndexSet spinup;  ///< global indices simulated before the range starts
    bool spinup_clipped = false;
    DateRange range;
};

struct PeriodMasks {
    PeriodWindow train;
    PeriodWindow val;
    PeriodWindow test;
};

PeriodMasks split_periods(const ForcingSeries& series, const PeriodSpec& spec);

}  // namespace mcp
