#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "topology.hpp"

namespace napcoll::verify {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Options {
  std::int64_t max_ranks = 65536;   // cap on enumerated/simulated total ranks
  bool inject_pairing_bug = false;  // mutation hook: corrupts the pairing rule
};

using PartnerFn =
    std::function<topology::PartnerAction(int, int, const topology::ClusterShape&)>;

// The pairing rule actually used by the library.
PartnerFn real_partner_fn();

// Deliberately broken pairing rule (drops node position at steps >= 1);
// used to prove the involution property can fail.
PartnerFn buggy_partner_fn();

// Runs the full property suite. Results come back in a stable order; a
// property failure is reported in the results, not thrown.
std::vector<PropertyResult> run_all(const Options& opts);

bool all_passed(const std::vector<PropertyResult>& results);

}  // namespace napcoll::verify
