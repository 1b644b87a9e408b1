#include "topology.hpp"

#include <algorithm>
#include <string>

namespace napcoll::topology {

namespace {

using std::int64_t;

void check_shape(const ClusterShape& s) {
  if (s.num_nodes < 1 || s.ppn < 1) fail(Errc::InvalidArgument, "cluster shape: num_nodes and ppn must be positive");
  if (s.socket_size < 1 || s.ppn % s.socket_size != 0)
    fail(Errc::InvalidArgument, "cluster shape: socket_size must be positive and divide ppn");
  if (static_cast<std::int64_t>(s.num_nodes) * s.ppn > (std::int64_t{1} << 30))
    fail(Errc::InvalidArgument, "cluster shape: total rank count exceeds 2^30");
}

void check_rank(int rank, const ClusterShape& s) {
  check_shape(s);
  if (rank < 0 || rank >= s.total_ranks())
    fail(Errc::InvalidArgument,
         "rank " + std::to_string(rank) + " out of range [0, " + std::to_string(s.total_ranks()) + ")");
}

int64_t ipow(int64_t base, int exp) {
  int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

ClusterShape ClusterShape::make(int num_nodes, int ppn, int socket_size) {
  ClusterShape s;
  s.num_nodes = num_nodes;
  s.ppn = ppn;
  s.socket_size = socket_size > 0 ? socket_size : std::max(1, ppn / 2);
  check_shape(s);
  return s;
}

int node_of(int rank, const ClusterShape& shape) {
  check_rank(rank, shape);
  return rank / shape.ppn;
}

int local_rank_of(int rank, const ClusterShape& shape) {
  check_rank(rank, shape);
  return rank % shape.ppn;
}

RankCoord coord_of(int rank, const ClusterShape& shape) {
  check_rank(rank, shape);
  return {rank, rank / shape.ppn, rank % shape.ppn};
}

int num_internode_steps(const ClusterShape& shape) {
  check_shape(shape);
  if (shape.num_nodes == 1) return 0;
  if (shape.ppn == 1)
    fail(Errc::UnsupportedShape, "inter-node steps undefined for ppn=1 with more than one node");
  int steps = 0;
  int64_t covered = 1;
  while (covered < shape.num_nodes) {
    covered *= shape.ppn;
    ++steps;
  }
  return steps;
}

int64_t StepGeometry::subgroup_nodes(int j) const {
  return std::min<int64_t>(subgroup_size_nodes, group_size_nodes - int64_t{j} * subgroup_size_nodes);
}

StepGeometry step_geometry(int rank, int step, const ClusterShape& shape) {
  check_rank(rank, shape);
  const int steps = num_internode_steps(shape);
  if (step < 0 || step >= steps)
    fail(Errc::InvalidArgument,
         "step " + std::to_string(step) + " out of range [0, " + std::to_string(steps) + ")");

  const int64_t sg = ipow(shape.ppn, step);
  const int64_t full_group = sg * shape.ppn;
  const int64_t node = rank / shape.ppn;

  StepGeometry g;
  g.step = step;
  g.subgroup_size_nodes = sg;
  g.group_start_node = (node / full_group) * full_group;
  g.group_size_nodes = std::min<int64_t>(full_group, shape.num_nodes - g.group_start_node);
  g.subgroup_index = static_cast<int>((node - g.group_start_node) / sg);
  g.node_position = (node - g.group_start_node) % sg;
  g.subgroup_count = static_cast<int>((g.group_size_nodes + sg - 1) / sg);
  return g;
}

PartnerAction nap_partner(int rank, int step, const ClusterShape& shape) {
  const StepGeometry g = step_geometry(rank, step, shape);
  const int ppn = shape.ppn;
  const int lr = rank % ppn;
  const int m = g.subgroup_index;
  const int k = g.subgroup_count;
  const int64_t sg = g.subgroup_size_nodes;
  const int last = k - 1;
  const int64_t last_size = g.subgroup_nodes(last);

  auto rank_at = [&](int subgroup, int64_t pos, int local) {
    return static_cast<int>((g.group_start_node + subgroup * sg + pos) * ppn + local);
  };

  // Normal pairing: swap local rank and subgroup index, keep node position.
  if (lr != m && lr < k) {
    if (g.node_position < g.subgroup_nodes(lr)) return PartnerAction::exchange(rank_at(lr, g.node_position, m));
    // Partner position missing (target subgroup is short): an idle rank of
    // that subgroup donates its partial instead.
    const int64_t per_full = sg - last_size;  // missing positions per full subgroup
    const int64_t recipient_index = int64_t{m} * per_full + (g.node_position - last_size);
    const int64_t donors = last_size * (1 + ppn - k);
    const int64_t d = recipient_index % donors;
    const int64_t donor_pos = d / (1 + ppn - k);
    const int64_t donor_slot = d % (1 + ppn - k);
    // Free local ranks on a short-subgroup node, ascending: the classic idle
    // rank (lr == subgroup index) first, then the ranks with no subgroup to
    // target (lr >= k).
    const int donor_lr = donor_slot == 0 ? last : static_cast<int>(k + donor_slot - 1);
    return PartnerAction::extra_recv(rank_at(last, donor_pos, donor_lr));
  }

  // Idle ranks of a short last subgroup serve the missing positions of the
  // full subgroups, assigned round-robin in ascending recipient order.
  if (m == last && last_size < sg) {
    const int free_slot = lr == m ? 0 : (lr >= k ? lr - k + 1 : -1);
    if (free_slot >= 0) {
      const int64_t per_full = sg - last_size;
      const int64_t recipients = int64_t{last} * per_full;  // full subgroups are 0..last-1
      const int64_t donors = last_size * (1 + ppn - k);
      const int64_t my_donor_index = g.node_position * (1 + ppn - k) + free_slot;
      std::vector<int> targets;
      for (int64_t i = my_donor_index; i < recipients; i += donors) {
        const int sub = static_cast<int>(i / per_full);
        const int64_t pos = last_size + i % per_full;
        targets.push_back(rank_at(sub, pos, last));
      }
      if (!targets.empty()) return PartnerAction::extra_send(std::move(targets));
    }
  }

  return PartnerAction::idle();
}

}  // namespace napcoll::topology
