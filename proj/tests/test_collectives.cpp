#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "collectives.hpp"
#include "experiment.hpp"
#include "simnet.hpp"
#include "topology.hpp"
#include "types.hpp"

using namespace napcoll;
using simnet::Locality;
using topology::ClusterShape;

namespace {

std::vector<ReductionBuffer> rank_id_inputs(int p) {
  std::vector<ReductionBuffer> v;
  for (int r = 0; r < p; ++r) v.push_back(ReductionBuffer::of_ints({r}));
  return v;
}

void check_all_equal(const std::vector<ReductionBuffer>& buffers, std::int64_t want) {
  for (const auto& b : buffers) {
    REQUIRE(b.ints.size() == 1);
    CHECK(b.ints[0] == want);
  }
}

}  // namespace

TEST_CASE("tree allreduce on sixteen ranks") {
  const auto s = ClusterShape::make(4, 4);
  const auto res = collectives::run_tree(rank_id_inputs(16), ReduceOp::Sum, s);
  check_all_equal(res.buffers, 120);
  CHECK(res.trace.records.size() == 30);  // 2 * (p - 1)
  std::set<std::string> phases;
  for (const auto& r : res.trace.records) phases.insert(r.phase);
  CHECK(phases.size() == 8);  // 2 * log2(16)
  // Rank 0 absorbs one message per reduce round and fans back out.
  int to_root = 0, from_root = 0;
  for (const auto& r : res.trace.records) {
    to_root += r.dst == 0;
    from_root += r.src == 0;
  }
  CHECK(to_root == 4);
  CHECK(from_root == 4);
  CHECK(res.flops_per_rank[0] == 4);  // one element, four merges
}

TEST_CASE("tree trivial and unsupported shapes") {
  const auto s1 = ClusterShape::make(1, 1);
  const auto res = collectives::run_tree(rank_id_inputs(1), ReduceOp::Sum, s1);
  check_all_equal(res.buffers, 0);
  CHECK(res.trace.records.empty());
  const auto s12 = ClusterShape::make(3, 4);
  CHECK_THROWS_AS(collectives::run_tree(rank_id_inputs(12), ReduceOp::Sum, s12), Error);
}

TEST_CASE("recursive doubling on sixteen ranks") {
  const auto s = ClusterShape::make(4, 4);
  const auto res = collectives::run_recursive_doubling(rank_id_inputs(16), ReduceOp::Sum, s);
  check_all_equal(res.buffers, 120);
  for (int r = 0; r < 16; ++r) {
    const auto total = res.trace.per_rank_internode_msgs[r] + res.trace.per_rank_intranode_msgs[r];
    CHECK(total == 4);                                 // log2(p) sends per rank
    CHECK(res.trace.per_rank_internode_msgs[r] == 2);  // log2(n) of them cross nodes
    CHECK(res.flops_per_rank[r] == 4);
  }
  CHECK(res.trace.internode_step_count == 2);

  const auto mx = collectives::run_recursive_doubling(rank_id_inputs(16), ReduceOp::Max, s);
  check_all_equal(mx.buffers, 15);
  const auto mn = collectives::run_recursive_doubling(rank_id_inputs(16), ReduceOp::Min, s);
  check_all_equal(mn.buffers, 0);
}

TEST_CASE("recursive doubling pair") {
  const auto s = ClusterShape::make(2, 1);
  const auto res = collectives::run_recursive_doubling(rank_id_inputs(2), ReduceOp::Sum, s);
  check_all_equal(res.buffers, 1);
  CHECK(res.trace.records.size() == 2);  // one exchange
  CHECK_THROWS_AS(
      collectives::run_recursive_doubling(rank_id_inputs(6), ReduceOp::Sum, ClusterShape::make(3, 2)),
      Error);
}

TEST_CASE("smp allreduce keeps inter-node traffic on the masters") {
  const auto s = ClusterShape::make(4, 4);
  const auto res = collectives::run_smp(rank_id_inputs(16), ReduceOp::Sum, s);
  check_all_equal(res.buffers, 120);
  for (const auto& rec : res.trace.records) {
    if (rec.locality != Locality::InterNode) continue;
    CHECK(rec.src % 4 == 0);
    CHECK(rec.dst % 4 == 0);
  }
  for (int r = 0; r < 16; ++r)
    CHECK(res.trace.per_rank_internode_msgs[r] == (r % 4 == 0 ? 2 : 0));
  CHECK(res.trace.max_internode_msgs_per_rank == 2);  // log2(n)

  const auto single = collectives::run_smp(rank_id_inputs(8), ReduceOp::Sum,
                                           ClusterShape::make(1, 8));
  check_all_equal(single.buffers, 28);
  CHECK(single.trace.total_internode_bytes == 0);
  CHECK(single.trace.internode_step_count == 0);

  CHECK_THROWS_AS(collectives::run_smp(rank_id_inputs(12), ReduceOp::Sum, ClusterShape::make(3, 4)),
                  Error);
}

TEST_CASE("nap allreduce matches the serial fold on clean shapes") {
  const auto s = ClusterShape::make(16, 16);
  const auto res = collectives::run_nap(rank_id_inputs(256), ReduceOp::Sum, s);
  check_all_equal(res.buffers, 255 * 256 / 2);
  CHECK(res.trace.internode_step_count == 1);
  CHECK(res.trace.max_internode_msgs_per_rank == 1);
}

TEST_CASE("nap handles the reduced final step") {
  const auto s = ClusterShape::make(12, 4);
  const auto res = collectives::run_nap(rank_id_inputs(48), ReduceOp::Sum, s);
  check_all_equal(res.buffers, 47 * 48 / 2);
  CHECK(res.trace.internode_step_count == 2);
  CHECK(res.trace.max_internode_msgs_per_rank == 2);
}

TEST_CASE("nap handles node counts that do not divide evenly") {
  for (const auto& [n, ppn] : std::vector<std::pair<int, int>>{{5, 4}, {9, 4}, {3, 2}, {7, 2}}) {
    const auto s = ClusterShape::make(n, ppn);
    const int p = s.total_ranks();
    const auto res = collectives::run_nap(rank_id_inputs(p), ReduceOp::Sum, s);
    check_all_equal(res.buffers, std::int64_t{p} * (p - 1) / 2);
  }
  // The short-subgroup step shows one-way traffic in the trace.
  const auto res9 = collectives::run_nap(rank_id_inputs(36), ReduceOp::Sum,
                                         ClusterShape::make(9, 4));
  int oneway_34_14 = 0;
  for (const auto& rec : res9.trace.records)
    if (rec.src == 34 && rec.dst == 14) ++oneway_34_14;
  CHECK(oneway_34_14 == 1);
}

TEST_CASE("nap single node and unsupported ppn") {
  const auto res = collectives::run_nap(rank_id_inputs(4), ReduceOp::Sum, ClusterShape::make(1, 4));
  check_all_equal(res.buffers, 6);
  CHECK(res.trace.total_internode_bytes == 0);
  CHECK_THROWS_AS(collectives::run_nap(rank_id_inputs(9), ReduceOp::Sum, ClusterShape::make(3, 3)),
                  Error);
}

TEST_CASE("nap float sum stays within the reassociation bound") {
  const auto s = ClusterShape::make(9, 4);
  const auto inputs = experiment::make_inputs(s, 16, ElementKind::Float64, 123);
  const auto res = collectives::run_nap(inputs, ReduceOp::Sum, s);
  const auto expected = experiment::serial_reduce(inputs, ReduceOp::Sum);
  const auto verdict = experiment::compare_float_tolerance(res.buffers, expected, 36);
  CHECK(verdict.match);
}

TEST_CASE("local allreduce") {
  const std::vector<ReductionBuffer> four = {
      ReductionBuffer::of_ints({1}), ReductionBuffer::of_ints({2}), ReductionBuffer::of_ints({3}),
      ReductionBuffer::of_ints({4})};
  const auto res = collectives::local_allreduce(four, ReduceOp::Sum);
  check_all_equal(res.buffers, 10);

  const auto one = collectives::local_allreduce({ReductionBuffer::of_ints({42})}, ReduceOp::Sum);
  check_all_equal(one.buffers, 42);
  CHECK(one.trace.records.empty());

  std::vector<ReductionBuffer> ones;
  for (int i = 0; i < 16; ++i) ones.push_back(ReductionBuffer::of_ints({1}));
  const auto wide = collectives::local_allreduce(ones, ReduceOp::Sum);
  check_all_equal(wide.buffers, 16);
  std::set<std::string> phases;
  for (const auto& r : wide.trace.records) phases.insert(r.phase);
  CHECK(phases.size() == 4);  // log2(16) rounds
  CHECK(wide.trace.total_internode_bytes == 0);
}

TEST_CASE("nap critical-path flops") {
  const auto s = ClusterShape::make(16, 4);  // p = 64, two inter-node steps
  const auto inputs = experiment::make_inputs(s, 4, ElementKind::Int64, 1);
  const auto res = collectives::run_nap(inputs, ReduceOp::Sum, s);
  std::int64_t mx = 0;
  for (const auto f : res.flops_per_rank) mx = std::max(mx, f);
  CHECK(mx == 4 * (6 + 2));  // s * (log2(p) + steps)
}

TEST_CASE("lower bounds") {
  const auto b = collectives::lower_bounds(4, 8);
  CHECK(b.min_messages == 2.0);
  CHECK(b.min_bytes == 12.0);
  CHECK(b.min_flops == 6.0);
  const auto t = collectives::lower_bounds(1, 999);
  CHECK(t.min_messages == 0.0);
  CHECK(t.min_bytes == 0.0);
  CHECK(t.min_flops == 0.0);
  CHECK(collectives::lower_bounds(2, 2).min_bytes == 2.0);
}

TEST_CASE("input shape validation") {
  const auto s = ClusterShape::make(2, 2);
  auto inputs = rank_id_inputs(4);
  inputs.pop_back();
  CHECK_THROWS_AS(collectives::run_recursive_doubling(inputs, ReduceOp::Sum, s), Error);
  auto ragged = rank_id_inputs(4);
  ragged[2] = ReductionBuffer::of_ints({1, 2});
  CHECK_THROWS_AS(collectives::run_nap(ragged, ReduceOp::Sum, s), Error);
}
