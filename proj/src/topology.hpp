#pragma once

#include <cstdint>
#include <vector>

#include "types.hpp"

namespace napcoll::topology {

// Geometry of the simulated cluster. Ranks are laid out SMP-style:
// rank = node * ppn + local_rank.
struct ClusterShape {
  int num_nodes = 1;
  int ppn = 1;
  int socket_size = 1;  // ranks per socket; divides ppn

  int total_ranks() const { return num_nodes * ppn; }

  // socket_size <= 0 selects the default of ppn/2 (two sockets per node),
  // clamped to at least one rank per socket.
  static ClusterShape make(int num_nodes, int ppn, int socket_size = 0);
};

struct RankCoord {
  int rank = 0;
  int node = 0;
  int local_rank = 0;
};

int node_of(int rank, const ClusterShape& shape);
int local_rank_of(int rank, const ClusterShape& shape);
RankCoord coord_of(int rank, const ClusterShape& shape);

// Number of inter-node steps a NAP allreduce needs: the smallest L with
// ppn^L >= num_nodes (zero for a single node).
int num_internode_steps(const ClusterShape& shape);

// Where a rank sits at inter-node step `step`: its group of ppn^(step+1)
// consecutive nodes (the trailing group may be shorter), the subgroup of
// ppn^step nodes inside it, and the node's position within the subgroup.
struct StepGeometry {
  int step = 0;
  std::int64_t subgroup_size_nodes = 1;  // ppn^step (stride; not clamped)
  std::int64_t group_size_nodes = 1;     // nodes actually in this group (clamped)
  std::int64_t group_start_node = 0;
  int subgroup_index = 0;     // index of the rank's subgroup within its group
  std::int64_t node_position = 0;  // index of the rank's node within its subgroup
  int subgroup_count = 0;     // subgroups present in this group (<= ppn)

  // Nodes in subgroup `j` of this group; only the last subgroup can be short.
  std::int64_t subgroup_nodes(int j) const;
};

StepGeometry step_geometry(int rank, int step, const ClusterShape& shape);

enum class ActionKind { Exchange, Idle, ExtraSend, ExtraRecv };

// A rank's role in one inter-node step. Exchange/ExtraRecv name the peer;
// ExtraSend carries the recipients served by this idle rank (more than one
// when a short subgroup has fewer idle ranks than missing partners).
struct PartnerAction {
  ActionKind kind = ActionKind::Idle;
  int partner = -1;
  std::vector<int> extra_targets;

  static PartnerAction exchange(int peer) { return {ActionKind::Exchange, peer, {}}; }
  static PartnerAction idle() { return {ActionKind::Idle, -1, {}}; }
  static PartnerAction extra_send(std::vector<int> targets) {
    return {ActionKind::ExtraSend, -1, std::move(targets)};
  }
  static PartnerAction extra_recv(int peer) { return {ActionKind::ExtraRecv, peer, {}}; }

  bool operator==(const PartnerAction& o) const = default;
};

// The NAP pairing rule: a rank with local rank r in subgroup m exchanges
// with the rank holding local rank m in subgroup r at the same node
// position. Ranks with local rank equal to their subgroup index idle; when
// the last subgroup of a group is short, its free ranks feed the partials
// to the ranks whose partner position does not exist.
PartnerAction nap_partner(int rank, int step, const ClusterShape& shape);

}  // namespace napcoll::topology
