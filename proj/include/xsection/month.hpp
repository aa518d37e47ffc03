#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace xs {

// Calendar month. Ordering and arithmetic go through a linear index
// (year * 12 + month - 1) so month spans are plain integer differences.
struct MonthId {
  int year = 2000;
  int month = 1;  // 1..12

  static MonthId from_index(int index);
  // Parses "YYYY-MM".
  static MonthId parse(std::string_view text);

  int index() const { return year * 12 + (month - 1); }
  MonthId plus_months(int k) const { return from_index(index() + k); }
  MonthId minus_months(int k) const { return from_index(index() - k); }
  std::string to_string() const;

  friend bool operator==(const MonthId& a, const MonthId& b) { return a.index() == b.index(); }
  friend std::strong_ordering operator<=>(const MonthId& a, const MonthId& b) {
    return a.index() <=> b.index();
  }
};

// Number of months from `from` to `to` (negative when `to` precedes `from`).
inline int months_between(MonthId from, MonthId to) { return to.index() - from.index(); }

}  // namespace xs
