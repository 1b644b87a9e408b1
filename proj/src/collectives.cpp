#include "collectives.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <utility>

namespace napcoll::collectives {
namespace {

bool is_pow2(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

int ilog2(std::int64_t x) {
  int k = 0;
  while ((std::int64_t{1} << k) < x) ++k;
  return k;
}

void check_inputs(const std::vector<ReductionBuffer>& inputs,
                  const topology::ClusterShape& shape) {
  if (static_cast<std::int64_t>(inputs.size()) != shape.total_ranks())
    fail(Errc::InvalidArgument, "collective: exactly one input buffer per rank is required");
  for (const auto& b : inputs)
    if (b.kind != inputs[0].kind || b.size() != inputs[0].size())
      fail(Errc::InvalidArgument, "collective: input buffers must share element kind and length");
}

std::string phase_label(const char* stem, int k) {
  std::ostringstream os;
  os << stem << k;
  return os.str();
}

std::string local_label(int seq, int k) {
  std::ostringstream os;
  os << "local" << seq << ".rd" << k;
  return os.str();
}

// One intra-node recursive-doubling allreduce, run across every node in the
// same phase sequence. Values are merged as (received op own).
void local_rd_phases(simnet::Network& net, ReduceOp op, std::vector<ReductionBuffer>& values,
                     std::vector<std::int64_t>& flops, int seq) {
  const auto& shape = net.shape();
  const std::int64_t p = shape.total_ranks();
  const int rounds = ilog2(shape.ppn);
  for (int k = 0; k < rounds; ++k) {
    net.begin_phase(local_label(seq, k));
    for (int r = 0; r < p; ++r) net.post_exchange(r, r ^ (1 << k), values[r]);
    auto inbox = net.end_phase();
    for (int r = 0; r < p; ++r) {
      values[r] = merge(*inbox[r], values[r], op);
      flops[r] += values[r].size();
    }
  }
}

CollectiveResult finish(simnet::Network& net, std::vector<ReductionBuffer> values,
                        std::vector<std::int64_t> flops) {
  CollectiveResult res;
  res.trace = simnet::summarize(net.take_records(), net.shape());
  res.buffers = std::move(values);
  res.flops_per_rank = std::move(flops);
  return res;
}

}  // namespace

CollectiveResult run_tree(const std::vector<ReductionBuffer>& inputs, ReduceOp op,
                          const topology::ClusterShape& shape) {
  check_inputs(inputs, shape);
  const std::int64_t p = shape.total_ranks();
  if (!is_pow2(p)) fail(Errc::UnsupportedShape, "tree: total rank count must be a power of two");
  const int K = ilog2(p);
  const std::int64_t s = inputs.empty() ? 0 : inputs[0].size();

  simnet::Network net(shape);
  std::vector<ReductionBuffer> values = inputs;
  std::vector<std::int64_t> flops(p, 0);

  for (int k = 0; k < K; ++k) {
    const std::int64_t span = std::int64_t{1} << (k + 1);
    const std::int64_t half = std::int64_t{1} << k;
    net.begin_phase(phase_label("reduce", k));
    for (std::int64_t r = 0; r < p; ++r) {
      if (r % span == half)
        net.post_send(static_cast<int>(r), static_cast<int>(r - half), values[r]);
      else if (r % span == 0)
        net.post_recv(static_cast<int>(r), static_cast<int>(r + half));
    }
    auto inbox = net.end_phase();
    for (std::int64_t r = 0; r < p; ++r) {
      if (r % span != 0) continue;
      values[r] = merge(*inbox[r], values[r], op);
      flops[r] += s;
    }
  }
  for (int k = K - 1; k >= 0; --k) {
    const std::int64_t span = std::int64_t{1} << (k + 1);
    const std::int64_t half = std::int64_t{1} << k;
    net.begin_phase(phase_label("bcast", k));
    for (std::int64_t r = 0; r < p; ++r) {
      if (r % span == 0)
        net.post_send(static_cast<int>(r), static_cast<int>(r + half), values[r]);
      else if (r % span == half)
        net.post_recv(static_cast<int>(r), static_cast<int>(r - half));
    }
    auto inbox = net.end_phase();
    for (std::int64_t r = 0; r < p; ++r)
      if (r % span == half) values[r] = std::move(*inbox[r]);
  }
  return finish(net, std::move(values), std::move(flops));
}

CollectiveResult run_recursive_doubling(const std::vector<ReductionBuffer>& inputs, ReduceOp op,
                                        const topology::ClusterShape& shape) {
  check_inputs(inputs, shape);
  const std::int64_t p = shape.total_ranks();
  if (!is_pow2(p))
    fail(Errc::UnsupportedShape, "recursive doubling: total rank count must be a power of two");
  const int K = ilog2(p);
  const std::int64_t s = inputs.empty() ? 0 : inputs[0].size();

  simnet::Network net(shape);
  std::vector<ReductionBuffer> values = inputs;
  std::vector<std::int64_t> flops(p, 0);

  for (int k = 0; k < K; ++k) {
    net.begin_phase(phase_label("rd", k));
    for (std::int64_t r = 0; r < p; ++r)
      net.post_exchange(static_cast<int>(r), static_cast<int>(r ^ (std::int64_t{1} << k)),
                        values[r]);
    auto inbox = net.end_phase();
    for (std::int64_t r = 0; r < p; ++r) {
      values[r] = merge(*inbox[r], values[r], op);
      flops[r] += s;
    }
  }
  return finish(net, std::move(values), std::move(flops));
}

CollectiveResult run_smp(const std::vector<ReductionBuffer>& inputs, ReduceOp op,
                         const topology::ClusterShape& shape) {
  check_inputs(inputs, shape);
  if (!is_pow2(shape.num_nodes) || !is_pow2(shape.ppn))
    fail(Errc::UnsupportedShape, "smp: node count and ppn must both be powers of two");
  const std::int64_t p = shape.total_ranks();
  const int Kl = ilog2(shape.ppn);
  const int Kn = ilog2(shape.num_nodes);
  const std::int64_t s = inputs.empty() ? 0 : inputs[0].size();

  simnet::Network net(shape);
  std::vector<ReductionBuffer> values = inputs;
  std::vector<std::int64_t> flops(p, 0);

  for (int k = 0; k < Kl; ++k) {
    const int span = 1 << (k + 1);
    const int half = 1 << k;
    net.begin_phase(phase_label("reduce", k));
    for (std::int64_t r = 0; r < p; ++r) {
      const int lr = topology::local_rank_of(static_cast<int>(r), shape);
      if (lr % span == half)
        net.post_send(static_cast<int>(r), static_cast<int>(r - half), values[r]);
      else if (lr % span == 0)
        net.post_recv(static_cast<int>(r), static_cast<int>(r + half));
    }
    auto inbox = net.end_phase();
    for (std::int64_t r = 0; r < p; ++r) {
      if (topology::local_rank_of(static_cast<int>(r), shape) % span != 0) continue;
      values[r] = merge(*inbox[r], values[r], op);
      flops[r] += s;
    }
  }
  for (int k = 0; k < Kn; ++k) {
    net.begin_phase(phase_label("xrd", k));
    for (std::int64_t node = 0; node < shape.num_nodes; ++node) {
      const std::int64_t master = node * shape.ppn;
      const std::int64_t peer = (node ^ (std::int64_t{1} << k)) * shape.ppn;
      net.post_exchange(static_cast<int>(master), static_cast<int>(peer), values[master]);
    }
    auto inbox = net.end_phase();
    for (std::int64_t node = 0; node < shape.num_nodes; ++node) {
      const std::int64_t master = node * shape.ppn;
      values[master] = merge(*inbox[master], values[master], op);
      flops[master] += s;
    }
  }
  for (int k = Kl - 1; k >= 0; --k) {
    const int span = 1 << (k + 1);
    const int half = 1 << k;
    net.begin_phase(phase_label("bcast", k));
    for (std::int64_t r = 0; r < p; ++r) {
      const int lr = topology::local_rank_of(static_cast<int>(r), shape);
      if (lr % span == 0)
        net.post_send(static_cast<int>(r), static_cast<int>(r + half), values[r]);
      else if (lr % span == half)
        net.post_recv(static_cast<int>(r), static_cast<int>(r - half));
    }
    auto inbox = net.end_phase();
    for (std::int64_t r = 0; r < p; ++r)
      if (topology::local_rank_of(static_cast<int>(r), shape) % span == half)
        values[r] = std::move(*inbox[r]);
  }
  return finish(net, std::move(values), std::move(flops));
}

CollectiveResult run_nap(const std::vector<ReductionBuffer>& inputs, ReduceOp op,
                         const topology::ClusterShape& shape) {
  check_inputs(inputs, shape);
  if (!is_pow2(shape.ppn)) fail(Errc::UnsupportedShape, "nap: ppn must be a power of two");
  const std::int64_t p = shape.total_ranks();
  const int L = topology::num_internode_steps(shape);
  const ElementKind kind = inputs.empty() ? ElementKind::Int64 : inputs[0].kind;
  const std::int64_t s = inputs.empty() ? 0 : inputs[0].size();

  simnet::Network net(shape);
  std::vector<ReductionBuffer> values = inputs;
  std::vector<std::int64_t> flops(p, 0);

  local_rd_phases(net, op, values, flops, 0);

  std::vector<topology::PartnerAction> actions(p);
  for (int step = 0; step < L; ++step) {
    for (std::int64_t r = 0; r < p; ++r)
      actions[r] = topology::nap_partner(static_cast<int>(r), step, shape);

    net.begin_phase(phase_label("step", step));
    for (std::int64_t r = 0; r < p; ++r) {
      const auto& act = actions[r];
      switch (act.kind) {
        case topology::ActionKind::Exchange:
          net.post_exchange(static_cast<int>(r), act.partner, values[r]);
          break;
        case topology::ActionKind::ExtraRecv:
          net.post_recv(static_cast<int>(r), act.partner);
          break;
        case topology::ActionKind::ExtraSend:
          for (int t : act.extra_targets) net.post_send(static_cast<int>(r), t, values[r]);
          break;
        case topology::ActionKind::Idle:
          break;
      }
    }
    auto inbox = net.end_phase();

    // Contributions to this step's intra-node allreduce. Each subgroup
    // partial must enter each node's reduction exactly once: active ranks
    // adopt the partial they received, the lowest active local rank also
    // folds the node's own partial in, everyone else contributes the
    // operator identity. A node whose group holds a single subgroup keeps
    // its own partial on local rank 0.
    for (std::int64_t node = 0; node < shape.num_nodes; ++node) {
      int lowest_active = -1;
      for (int lr = 0; lr < shape.ppn; ++lr) {
        const auto k = actions[node * shape.ppn + lr].kind;
        if (k == topology::ActionKind::Exchange || k == topology::ActionKind::ExtraRecv) {
          lowest_active = lr;
          break;
        }
      }
      for (int lr = 0; lr < shape.ppn; ++lr) {
        const std::int64_t r = node * shape.ppn + lr;
        const auto k = actions[r].kind;
        if (k == topology::ActionKind::Exchange || k == topology::ActionKind::ExtraRecv) {
          ReductionBuffer received = std::move(*inbox[r]);
          if (lr == lowest_active) {
            values[r] = merge(received, values[r], op);
            flops[r] += s;
          } else {
            values[r] = std::move(received);
          }
        } else if (lowest_active == -1 && lr == 0) {
          // keep own partial
        } else {
          values[r] = identity_buffer(kind, op, s);
        }
      }
    }

    local_rd_phases(net, op, values, flops, step + 1);
  }
  return finish(net, std::move(values), std::move(flops));
}

CollectiveResult local_allreduce(const std::vector<ReductionBuffer>& node_inputs, ReduceOp op) {
  const std::int64_t ppn = static_cast<std::int64_t>(node_inputs.size());
  if (!is_pow2(ppn))
    fail(Errc::UnsupportedShape, "local allreduce: local rank count must be a power of two");
  const auto shape = topology::ClusterShape::make(1, static_cast<int>(ppn));
  check_inputs(node_inputs, shape);

  simnet::Network net(shape);
  std::vector<ReductionBuffer> values = node_inputs;
  std::vector<std::int64_t> flops(ppn, 0);
  local_rd_phases(net, op, values, flops, 0);
  return finish(net, std::move(values), std::move(flops));
}

LowerBounds lower_bounds(std::int64_t p, std::int64_t s_bytes) {
  if (p < 1) fail(Errc::InvalidArgument, "lower bounds: rank count must be at least 1");
  if (s_bytes < 0) fail(Errc::InvalidArgument, "lower bounds: byte count must be non-negative");
  LowerBounds b;
  b.min_messages = std::log2(static_cast<double>(p));
  b.min_bytes = 2.0 * static_cast<double>(p - 1) * static_cast<double>(s_bytes) /
                static_cast<double>(p);
  b.min_flops = static_cast<double>(p - 1) * static_cast<double>(s_bytes) /
                static_cast<double>(p);
  return b;
}

}  // namespace napcoll::collectives
