#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "collectives.hpp"
#include "topology.hpp"
#include "types.hpp"

namespace napcoll::experiment {

enum class Algorithm { Tree, RecursiveDoubling, Smp, Nap };

const char* to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

// Rank r's element j is ((seed xor r xor j) mod 2^31) as int64; float mode
// divides by 2^31, giving values in [0, 1).
ReductionBuffer make_input(int rank, std::int64_t size, ElementKind kind, std::uint64_t seed);
std::vector<ReductionBuffer> make_inputs(const topology::ClusterShape& shape, std::int64_t size,
                                         ElementKind kind, std::uint64_t seed);

// Ascending-rank left fold; the reference result for every algorithm.
ReductionBuffer serial_reduce(const std::vector<ReductionBuffer>& inputs, ReduceOp op);

collectives::CollectiveResult run_algorithm(Algorithm alg,
                                            const std::vector<ReductionBuffer>& inputs,
                                            ReduceOp op, const topology::ClusterShape& shape);

struct OracleVerdict {
  bool match = true;
  int first_mismatch_rank = -1;
};

// Exact elementwise equality on every rank.
OracleVerdict compare_exact(const std::vector<ReductionBuffer>& outputs,
                            const ReductionBuffer& expected);

// Per-element |out - expected| <= p*s*2^-48 * |expected| on every rank.
OracleVerdict compare_float_tolerance(const std::vector<ReductionBuffer>& outputs,
                                      const ReductionBuffer& expected, std::int64_t p);

}  // namespace napcoll::experiment
