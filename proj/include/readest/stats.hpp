#pragma once

#include <optional>
#include <span>
#include <vector>

namespace readest {

struct PairedTTest {
  std::size_t n = 0;
  double mean_diff = 0;  // mean of (after - before)
  std::optional<double> t;
  std::optional<double> p;  // two-sided; empty with fewer than 2 pairs
};

// Paired two-sided t-test on after - before. Zero spread gives p = 1 when the
// mean difference is 0 and p = 0 otherwise. Throws PairingError on unequal
// lengths.
PairedTTest paired_t_test(std::span<const double> before, std::span<const double> after);

// Holm-Sidak step-down adjustment. Results are in input order; empty entries
// stay empty and do not count toward the family size.
std::vector<std::optional<double>> holm_sidak(std::span<const std::optional<double>> p);

}  // namespace readest
