#pragma once

#include <functional>
#include <string>
#include <vector>

namespace rfl {

struct CheckOptions {
  bool full = false;
  /// Multiplies the kernel constant c_N in the normalization invariant; 1
  /// leaves it intact. Used to confirm that the suite detects a broken kernel.
  double normalization_scale = 1.0;
  unsigned long long seed = 20240601;
  /// Runs only checks whose "module: name" contains this text.
  std::string filter;
};

struct CheckItem {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Every invariant of the laboratory at fast (or full) settings. A check
/// that throws is recorded as failed with the exception text.
std::vector<CheckItem> run_checks(
    const CheckOptions& options,
    const std::function<void(const CheckItem&)>& on_done = nullptr);

}  // namespace rfl
