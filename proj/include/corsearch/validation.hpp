#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace corsearch::validation {

enum class Level { Quick, Full };

struct Check {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;  // measured quantities against their bounds
};

inline constexpr int kCriteria = 14;

// Runs the numbered acceptance criteria (all of them when `only` is empty).
// Progress lines go to `log` when it is non-null.
std::vector<Check> run_battery(Level level, std::ostream* log = nullptr, const std::vector<int>& only = {});

std::string format(const Check& c);

}  // namespace corsearch::validation
