#include "simnet.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace napcoll::simnet {

const char* to_string(Locality l) {
  switch (l) {
    case Locality::IntraSocket: return "IntraSocket";
    case Locality::IntraNode: return "IntraNode";
    case Locality::InterNode: return "InterNode";
  }
  return "?";
}

Locality classify(int src, int dst, const topology::ClusterShape& shape) {
  if (topology::node_of(src, shape) != topology::node_of(dst, shape)) return Locality::InterNode;
  const int a = topology::local_rank_of(src, shape) / shape.socket_size;
  const int b = topology::local_rank_of(dst, shape) / shape.socket_size;
  return a == b ? Locality::IntraSocket : Locality::IntraNode;
}

TraceSummary summarize(std::vector<MessageRecord> records, const topology::ClusterShape& shape) {
  TraceSummary s;
  const int p = static_cast<int>(shape.total_ranks());
  s.per_rank_internode_msgs.assign(p, 0);
  s.per_rank_intranode_msgs.assign(p, 0);
  std::string last_internode_phase;
  bool have_last = false;
  for (const auto& r : records) {
    if (r.locality == Locality::InterNode) {
      s.per_rank_internode_msgs[r.src] += 1;
      s.total_internode_bytes += r.bytes;
      if (!have_last || last_internode_phase != r.phase) {
        s.internode_step_count += 1;
        last_internode_phase = r.phase;
        have_last = true;
      }
    } else {
      s.per_rank_intranode_msgs[r.src] += 1;
      s.total_intranode_bytes += r.bytes;
    }
  }
  for (auto c : s.per_rank_internode_msgs)
    s.max_internode_msgs_per_rank = std::max(s.max_internode_msgs_per_rank, c);
  s.records = std::move(records);
  return s;
}

void write_trace_csv(std::ostream& out, const std::vector<MessageRecord>& records) {
  out << "phase,src,dst,bytes,locality\n";
  for (const auto& r : records)
    out << r.phase << ',' << r.src << ',' << r.dst << ',' << r.bytes << ','
        << to_string(r.locality) << '\n';
}

Network::Network(topology::ClusterShape shape) : shape_(shape) {}

void Network::check_peer(int self, int peer) const {
  const auto p = shape_.total_ranks();
  if (self < 0 || self >= p || peer < 0 || peer >= p) {
    std::ostringstream os;
    os << "rank out of range in phase '" << label_ << "': self=" << self << " peer=" << peer;
    fail(Errc::InvalidArgument, os.str());
  }
  if (self == peer) {
    std::ostringstream os;
    os << "rank " << self << " attempted a self-send in phase '" << label_ << "'";
    fail(Errc::InvalidArgument, os.str());
  }
  if (!phase_open_) fail(Errc::Protocol, "operation posted outside an open phase");
}

void Network::begin_phase(std::string label) {
  if (phase_open_) fail(Errc::Protocol, "begin_phase while a phase is already open");
  phase_open_ = true;
  label_ = std::move(label);
  exchanges_.clear();
  oneways_.clear();
}

void Network::post_exchange(int self, int peer, ReductionBuffer buffer) {
  std::lock_guard<std::mutex> lg(post_mutex_);
  check_peer(self, peer);
  const auto key = std::minmax(self, peer);
  auto& slot = exchanges_[{key.first, key.second}];
  auto& half = self == key.first ? slot.first : slot.second;
  if (half.posted) {
    std::ostringstream os;
    os << "rank " << self << " posted a duplicate exchange with rank " << peer << " in phase '"
       << label_ << "'";
    fail(Errc::Protocol, os.str());
  }
  half.buffer = std::move(buffer);
  half.posted = true;
}

void Network::post_send(int self, int dst, ReductionBuffer buffer) {
  std::lock_guard<std::mutex> lg(post_mutex_);
  check_peer(self, dst);
  auto& slot = oneways_[{self, dst}];
  if (slot.send_posted) {
    std::ostringstream os;
    os << "rank " << self << " posted a duplicate send to rank " << dst << " in phase '" << label_
       << "'";
    fail(Errc::Protocol, os.str());
  }
  slot.buffer = std::move(buffer);
  slot.send_posted = true;
}

void Network::post_recv(int self, int src) {
  std::lock_guard<std::mutex> lg(post_mutex_);
  check_peer(self, src);
  auto& slot = oneways_[{src, self}];
  if (slot.recv_posted) {
    std::ostringstream os;
    os << "rank " << self << " posted a duplicate receive from rank " << src << " in phase '"
       << label_ << "'";
    fail(Errc::Protocol, os.str());
  }
  slot.recv_posted = true;
}

void Network::record(int src, int dst, std::int64_t bytes) {
  records_.push_back({label_, src, dst, bytes, classify(src, dst, shape_)});
}

std::vector<std::optional<ReductionBuffer>> Network::end_phase() {
  if (!phase_open_) fail(Errc::Protocol, "end_phase without an open phase");

  for (const auto& [key, slot] : exchanges_) {
    if (!slot.first.posted || !slot.second.posted) {
      const int waiter = slot.first.posted ? key.first : key.second;
      const int absent = slot.first.posted ? key.second : key.first;
      std::ostringstream os;
      os << "deadlock in phase '" << label_ << "': rank " << waiter
         << " posted an exchange with rank " << absent << " which never posted the matching half";
      fail(Errc::Deadlock, os.str());
    }
    if (slot.first.buffer.bytes() != slot.second.buffer.bytes() ||
        slot.first.buffer.kind != slot.second.buffer.kind) {
      std::ostringstream os;
      os << "protocol error in phase '" << label_ << "': exchange between ranks " << key.first
         << " and " << key.second << " has mismatched payloads (" << slot.first.buffer.bytes()
         << " vs " << slot.second.buffer.bytes() << " bytes)";
      fail(Errc::Protocol, os.str());
    }
  }
  for (const auto& [key, slot] : oneways_) {
    if (slot.send_posted && slot.recv_posted) continue;
    std::ostringstream os;
    if (slot.send_posted)
      os << "deadlock in phase '" << label_ << "': rank " << key.first << " sent to rank "
         << key.second << " which never posted the matching receive";
    else
      os << "deadlock in phase '" << label_ << "': rank " << key.second
         << " posted a receive from rank " << key.first << " which never sent";
    fail(Errc::Deadlock, os.str());
  }

  // Delivery plan in canonical order: keyed by (lo, hi) across both kinds of
  // operation, exchanges emitting the lower rank's message first.
  struct Delivery {
    int src, dst;
    const ReductionBuffer* payload;
  };
  std::map<std::pair<int, int>, std::vector<Delivery>> plan;
  for (const auto& [key, slot] : exchanges_) {
    plan[key].push_back({key.first, key.second, &slot.first.buffer});
    plan[key].push_back({key.second, key.first, &slot.second.buffer});
  }
  for (const auto& [key, slot] : oneways_) {
    const auto canon = std::minmax(key.first, key.second);
    plan[{canon.first, canon.second}].push_back({key.first, key.second, &slot.buffer});
  }

  std::vector<std::optional<ReductionBuffer>> inbox(shape_.total_ranks());
  for (const auto& [key, deliveries] : plan) {
    for (const auto& d : deliveries) {
      if (inbox[d.dst].has_value()) {
        std::ostringstream os;
        os << "protocol error in phase '" << label_ << "': rank " << d.dst
           << " received more than one message";
        fail(Errc::Protocol, os.str());
      }
      record(d.src, d.dst, d.payload->bytes());
      inbox[d.dst] = *d.payload;
    }
  }

  phase_open_ = false;
  exchanges_.clear();
  oneways_.clear();
  return inbox;
}

}  // namespace napcoll::simnet
