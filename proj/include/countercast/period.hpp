#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace ccast {

enum class Frequency { yearly, quarterly };

int periods_per_year(Frequency f);
std::string to_string(Frequency f);
Frequency frequency_from_string(std::string_view s);

/// A calendar period: a year ("2019") or a year-quarter ("2019Q3").
/// quarter == 0 marks a yearly period.
struct Period {
    int year = 0;
    int quarter = 0;

    constexpr bool is_quarterly() const { return quarter != 0; }

    /// Position on a contiguous integer axis; consecutive periods differ by 1.
    int index(Frequency f) const;
    static Period from_index(int idx, Frequency f);

    /// Parses "YYYY" or "YYYYQn". Throws DomainError on malformed input.
    static Period parse(std::string_view text);

    std::string str() const;

    auto operator<=>(const Period&) const = default;
};

/// First period of the given year at the given frequency (Q1 for quarterly).
Period year_start(int year, Frequency f);

}  // namespace ccast
