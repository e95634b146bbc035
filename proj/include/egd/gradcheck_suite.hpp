#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace egd::models {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  size_t checked = 0;
  bool pass(double tol = 1e-4) const { return max_rel_err < tol; }
};

// Central-difference verification (h, 64-bit) of every differentiable op and
// all four architectures (Siamese variants on pairs), `instances` seeded
// random instances per case.
std::vector<GradCheckCase> gradient_check_suite(int instances, uint64_t seed,
                                                double h = 1e-3);

std::string gradcheck_report(const std::vector<GradCheckCase>& cases, double tol = 1e-4);

}  // namespace egd::models
