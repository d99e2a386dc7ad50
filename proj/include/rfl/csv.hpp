#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace rfl {

/// Round-trippable decimal form (17 significant digits).
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv_row(std::ostream& out,
                          const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

}  // namespace rfl
