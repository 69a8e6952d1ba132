#include "countercast/period.hpp"

#include <cctype>
#include <charconv>

#include "countercast/errors.hpp"

namespace ccast {

int periods_per_year(Frequency f) { return f == Frequency::quarterly ? 4 : 1; }

std::string to_string(Frequency f) {
    return f == Frequency::quarterly ? "quarterly" : "yearly";
}

Frequency frequency_from_string(std::string_view s) {
    if (s == "yearly" || s == "annual") return Frequency::yearly;
    if (s == "quarterly") return Frequency::quarterly;
    throw ConfigError("unknown frequency: " + std::string(s));
}

int Period::index(Frequency f) const {
    if (f == Frequency::quarterly) return year * 4 + (quarter - 1);
    return year;
}

Period Period::from_index(int idx, Frequency f) {
    if (f == Frequency::quarterly) {
        int y = idx >= 0 ? idx / 4 : (idx - 3) / 4;
        return Period{y, idx - y * 4 + 1};
    }
    return Period{idx, 0};
}

Period Period::parse(std::string_view text) {
    auto fail = [&] { throw DomainError("malformed period: " + std::string(text)); };
    if (text.size() != 4 && text.size() != 6) fail();
    int year = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + 4, year);
    if (ec != std::errc{} || ptr != text.data() + 4) fail();
    if (text.size() == 4) return Period{year, 0};
    if (text[4] != 'Q' && text[4] != 'q') fail();
    int q = text[5] - '0';
    if (q < 1 || q > 4) fail();
    return Period{year, q};
}

std::string Period::str() const {
    std::string s = std::to_string(year);
    if (quarter != 0) {
        s += 'Q';
        s += static_cast<char>('0' + quarter);
    }
    return s;
}

Period year_start(int year, Frequency f) {
    return f == Frequency::quarterly ? Period{year, 1} : Period{year, 0};
}

}  // namespace ccast
