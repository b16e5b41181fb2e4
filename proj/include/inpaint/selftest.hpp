#pragma once

#include <string>
#include <vector>

namespace inpaint {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  std::string detail;
};

/// Runs every invariant suite at fixed seeds. With `inject_fault` the matmul
/// backward is perturbed so that the gradient suites must fail.
std::vector<SuiteResult> run_selftest(bool inject_fault = false);

}  // namespace inpaint
