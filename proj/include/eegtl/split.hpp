#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "eegtl/data.hpp"

namespace eegtl {

enum class Strategy { standard, distributed, split, frozen, transfer_standard, transfer_split };
std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

/// Which (subject, session) sets feed each phase of a run.
struct SplitAssignment {
  std::vector<SessionKey> train;
  std::vector<SessionKey> retrain;
  std::vector<SessionKey> test;
};

/// Throws ValidationError if a test key also appears in train or retrain.
void check_no_leakage(const SplitAssignment& split);

/// `subject` is the trained subject for standard runs and the held-out
/// subject for split-style runs; distributed runs ignore it.
SplitAssignment make_split(const Datasets& datasets, Strategy strategy, int subject);

/// Subject ids present in the inventory, ascending.
std::vector<int> subjects(const Datasets& datasets);

}  // namespace eegtl
