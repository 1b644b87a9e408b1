#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "topology.hpp"
#include "types.hpp"

namespace napcoll::simnet {

enum class Locality { IntraSocket, IntraNode, InterNode };

const char* to_string(Locality l);

Locality classify(int src, int dst, const topology::ClusterShape& shape);

struct MessageRecord {
  std::string phase;
  int src = 0;
  int dst = 0;
  std::int64_t bytes = 0;
  Locality locality = Locality::IntraNode;

  bool operator==(const MessageRecord& o) const = default;
};

struct TraceSummary {
  std::vector<std::int64_t> per_rank_internode_msgs;  // indexed by rank; messages sent
  std::vector<std::int64_t> per_rank_intranode_msgs;
  std::int64_t max_internode_msgs_per_rank = 0;
  std::int64_t total_internode_bytes = 0;
  std::int64_t total_intranode_bytes = 0;
  int internode_step_count = 0;  // distinct phases containing inter-node traffic
  std::vector<MessageRecord> records;
};

TraceSummary summarize(std::vector<MessageRecord> records, const topology::ClusterShape& shape);

// CSV export: header `phase,src,dst,bytes,locality`, LF line endings.
void write_trace_csv(std::ostream& out, const std::vector<MessageRecord>& records);

// Deterministic in-process transport with rendezvous semantics. A phase is
// opened, every participating rank posts its operations, and end_phase()
// matches them: every exchange needs both halves and every one-way send
// needs its receive, otherwise the phase deadlocks with an error naming the
// two ranks involved. Completed messages are appended to the trace in
// canonical order (pairs sorted by their rank ids, lower rank's send first).
class Network {
 public:
  explicit Network(topology::ClusterShape shape);

  void begin_phase(std::string label);
  void post_exchange(int self, int peer, ReductionBuffer buffer);
  void post_send(int self, int dst, ReductionBuffer buffer);
  void post_recv(int self, int src);

  // Matches the posted operations, records the traffic, and hands every rank
  // the buffer it received this phase (at most one; a second incoming
  // message in the same phase is a protocol error).
  std::vector<std::optional<ReductionBuffer>> end_phase();

  const topology::ClusterShape& shape() const { return shape_; }
  const std::vector<MessageRecord>& records() const { return records_; }
  std::vector<MessageRecord> take_records() { return std::move(records_); }

 private:
  struct Exchange {
    ReductionBuffer buffer;
    bool posted = false;
  };
  struct OneWay {
    ReductionBuffer buffer;
    bool send_posted = false;
    bool recv_posted = false;
  };

  void check_peer(int self, int peer) const;
  void record(int src, int dst, std::int64_t bytes);

  topology::ClusterShape shape_;
  bool phase_open_ = false;
  std::string label_;
  std::map<std::pair<int, int>, std::pair<Exchange, Exchange>> exchanges_;  // key (lo, hi)
  std::map<std::pair<int, int>, OneWay> oneways_;                          // key (src, dst)
  std::vector<MessageRecord> records_;
  std::mutex post_mutex_;
};

}  // namespace napcoll::simnet
