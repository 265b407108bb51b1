#pragma once

#include <string>
#include <vector>

namespace maskprobe::selfcheck {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Fast invariant suite backing the CLI `verify` verb. Every check is
// independent and self-contained; a thrown exception fails the check
// with its message as the detail.
std::vector<CheckResult> run_all();

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace maskprobe::selfcheck
