#pragma once

#include <cstdint>
#include <vector>

#include "simnet.hpp"
#include "topology.hpp"
#include "types.hpp"

namespace napcoll::collectives {

struct CollectiveResult {
  std::vector<ReductionBuffer> buffers;  // indexed by rank
  simnet::TraceSummary trace;
  std::vector<std::int64_t> flops_per_rank;  // elementwise reduce-op applications
};

// Binomial reduce to rank 0 followed by a binomial broadcast.
// Requires total_ranks to be a power of two.
CollectiveResult run_tree(const std::vector<ReductionBuffer>& inputs, ReduceOp op,
                          const topology::ClusterShape& shape);

// Butterfly exchange on rank ids. Requires total_ranks to be a power of two.
CollectiveResult run_recursive_doubling(const std::vector<ReductionBuffer>& inputs, ReduceOp op,
                                        const topology::ClusterShape& shape);

// Reduce to the per-node master (local rank 0), recursive doubling among
// masters, then a local broadcast. Requires num_nodes and ppn powers of two.
CollectiveResult run_smp(const std::vector<ReductionBuffer>& inputs, ReduceOp op,
                         const topology::ClusterShape& shape);

// Node-aware allreduce: an intra-node allreduce, then per inter-node step an
// exchange chosen by topology::nap_partner followed by another intra-node
// allreduce. Requires ppn a power of two; any node count.
CollectiveResult run_nap(const std::vector<ReductionBuffer>& inputs, ReduceOp op,
                         const topology::ClusterShape& shape);

// One node's allreduce in isolation (intra-node recursive doubling).
// node_inputs.size() must be a power of two.
CollectiveResult local_allreduce(const std::vector<ReductionBuffer>& node_inputs, ReduceOp op);

struct LowerBounds {
  double min_messages = 0.0;
  double min_bytes = 0.0;
  double min_flops = 0.0;
};

// Allreduce lower bounds: log2(p) messages, 2(p-1)s/p bytes, (p-1)s/p flops.
LowerBounds lower_bounds(std::int64_t p, std::int64_t s_bytes);

}  // namespace napcoll::collectives
