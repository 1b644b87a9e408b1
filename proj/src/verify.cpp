#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "collectives.hpp"
#include "costmodel.hpp"
#include "experiment.hpp"
#include "simnet.hpp"
#include "types.hpp"

namespace napcoll::verify {
namespace {

using topology::ActionKind;
using topology::ClusterShape;

struct ShapePair {
  int n = 0;
  int ppn = 0;
};

bool is_pow2(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

int ilog2(std::int64_t x) {
  int k = 0;
  while ((std::int64_t{1} << k) < x) ++k;
  return k;
}

// All n = ppn^L shapes (L >= 1) within the rank budget.
std::vector<ShapePair> power_of_ppn_shapes(std::int64_t max_ranks) {
  std::vector<ShapePair> out;
  for (int ppn : {2, 4, 8, 16, 32, 64, 128, 256}) {
    for (std::int64_t n = ppn; n * ppn <= max_ranks; n *= ppn)
      out.push_back({static_cast<int>(n), ppn});
  }
  return out;
}

// Divisible non-powers n = c * ppn^(L-1) with 2 <= c < ppn, L >= 2: every
// step is full except a reduced final one, so no extra transfers appear.
std::vector<ShapePair> reduced_final_step_shapes(std::int64_t max_ranks) {
  std::vector<ShapePair> out;
  for (int ppn : {4, 8, 16, 32}) {
    for (std::int64_t base = ppn;; base *= ppn) {
      bool any = false;
      for (int c = 2; c < ppn; ++c) {
        const std::int64_t n = c * base;
        if (n * ppn <= max_ranks) {
          out.push_back({static_cast<int>(n), ppn});
          any = true;
        }
      }
      if (!any) break;
    }
  }
  return out;
}

// Shapes whose final steps need extra transfers (short last subgroup),
// including node counts not divisible by ppn and messy divisible ones.
std::vector<ShapePair> irregular_shapes(std::int64_t max_ranks) {
  static const ShapePair kAll[] = {{3, 2},  {5, 2},  {6, 2},  {7, 2},  {9, 2},  {18, 2},
                                   {5, 4},  {6, 4},  {7, 4},  {9, 4},  {10, 4}, {13, 4},
                                   {24, 4}, {11, 8}, {20, 8}, {17, 16}};
  std::vector<ShapePair> out;
  for (const auto& s : kAll)
    if (static_cast<std::int64_t>(s.n) * s.ppn <= max_ranks) out.push_back(s);
  return out;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::string shape_str(const ClusterShape& s, int step = -1) {
  std::ostringstream os;
  os << "n=" << s.num_nodes << " ppn=" << s.ppn;
  if (step >= 0) os << " step=" << step;
  return os.str();
}

bool supports(experiment::Algorithm alg, const ClusterShape& shape) {
  const std::int64_t p = shape.total_ranks();
  switch (alg) {
    case experiment::Algorithm::Tree:
    case experiment::Algorithm::RecursiveDoubling:
      return is_pow2(p);
    case experiment::Algorithm::Smp:
      return is_pow2(shape.num_nodes) && is_pow2(shape.ppn);
    case experiment::Algorithm::Nap:
      return is_pow2(shape.ppn) && (shape.num_nodes == 1 || shape.ppn >= 2);
  }
  return false;
}

double uniform(std::mt19937_64& g, double a, double b) {
  std::uniform_real_distribution<double> d(a, b);
  return d(g);
}

double log_uniform(std::mt19937_64& g, double a, double b) {
  return std::exp(uniform(g, std::log(a), std::log(b)));
}

class Suite {
 public:
  explicit Suite(const Options& opts)
      : opts_(opts), fn_(opts.inject_pairing_bug ? buggy_partner_fn() : real_partner_fn()) {
    sim_cap_ = std::min<std::int64_t>(opts_.max_ranks, 4096);
  }

  std::vector<PropertyResult> run() {
    prop_oracle_equivalence();
    prop_float_tolerance();
    prop_cross_algorithm_agreement();
    prop_partner_involution();
    prop_partner_partition();
    prop_partner_idle_count();
    prop_partner_locality();
    prop_partner_extras_consistency();
    prop_node_coverage();
    prop_nap_message_counts();
    prop_rd_smp_tree_counts();
    prop_nap_rd_phase_monotonic();
    prop_flop_accounting();
    prop_model_degeneration();
    prop_model_rd_smp_order();
    prop_model_crossover();
    prop_model_monotonicity();
    prop_model_trace_consistency();
    prop_lower_bounds_values();
    prop_determinism();
    return results_;
  }

 private:
  void add(const std::string& name, bool passed, const std::string& detail) {
    results_.push_back({name, passed, detail});
  }

  // Criterion-1 sweep: n in 1..16 x ppn in {2,4,8,16} plus irregular extras.
  std::vector<ClusterShape> oracle_shapes() const {
    std::vector<ClusterShape> shapes;
    for (int n = 1; n <= 16; ++n)
      for (int ppn : {2, 4, 8, 16})
        if (static_cast<std::int64_t>(n) * ppn <= sim_cap_)
          shapes.push_back(topology::ClusterShape::make(n, ppn));
    for (const auto& s : irregular_shapes(sim_cap_))
      shapes.push_back(topology::ClusterShape::make(s.n, s.ppn));
    return shapes;
  }

  void prop_oracle_equivalence() {
    const std::uint64_t seed = 42;
    const std::int64_t size = 4;
    std::int64_t runs = 0;
    for (const auto& shape : oracle_shapes()) {
      const auto inputs = experiment::make_inputs(shape, size, ElementKind::Int64, seed);
      for (ReduceOp op : {ReduceOp::Sum, ReduceOp::Max, ReduceOp::Min}) {
        const auto expected = experiment::serial_reduce(inputs, op);
        for (auto alg : {experiment::Algorithm::Tree, experiment::Algorithm::RecursiveDoubling,
                         experiment::Algorithm::Smp, experiment::Algorithm::Nap}) {
          if (!supports(alg, shape)) continue;
          const auto res = experiment::run_algorithm(alg, inputs, op, shape);
          const auto verdict = experiment::compare_exact(res.buffers, expected);
          ++runs;
          if (!verdict.match) {
            std::ostringstream os;
            os << "alg=" << experiment::to_string(alg) << " " << shape_str(shape)
               << " op=" << to_string(op) << ": rank " << verdict.first_mismatch_rank
               << " disagrees with the serial reduction";
            add("oracle_equivalence", false, os.str());
            return;
          }
        }
      }
    }
    std::ostringstream os;
    os << runs << " int64 runs matched the serial reduction exactly";
    add("oracle_equivalence", true, os.str());
  }

  void prop_float_tolerance() {
    const std::uint64_t seed = 42;
    const std::int64_t size = 4;
    std::int64_t runs = 0;
    for (const auto& shape : oracle_shapes()) {
      const auto inputs = experiment::make_inputs(shape, size, ElementKind::Float64, seed);
      const auto expected = experiment::serial_reduce(inputs, ReduceOp::Sum);
      for (auto alg : {experiment::Algorithm::Tree, experiment::Algorithm::RecursiveDoubling,
                       experiment::Algorithm::Smp, experiment::Algorithm::Nap}) {
        if (!supports(alg, shape)) continue;
        const auto res = experiment::run_algorithm(alg, inputs, ReduceOp::Sum, shape);
        const auto verdict =
            experiment::compare_float_tolerance(res.buffers, expected, shape.total_ranks());
        ++runs;
        if (!verdict.match) {
          std::ostringstream os;
          os << "alg=" << experiment::to_string(alg) << " " << shape_str(shape) << ": rank "
             << verdict.first_mismatch_rank << " outside the p*s*2^-48 relative bound";
          add("float_tolerance", false, os.str());
          return;
        }
      }
    }
    std::ostringstream os;
    os << runs << " float64 sum runs within the reassociation bound";
    add("float_tolerance", true, os.str());
  }

  void prop_cross_algorithm_agreement() {
    const std::uint64_t seed = 7;
    const std::int64_t size = 3;
    std::int64_t comparisons = 0;
    for (const auto& shape : oracle_shapes()) {
      const auto inputs = experiment::make_inputs(shape, size, ElementKind::Int64, seed);
      std::vector<std::pair<experiment::Algorithm, std::vector<ReductionBuffer>>> outs;
      for (auto alg : {experiment::Algorithm::Tree, experiment::Algorithm::RecursiveDoubling,
                       experiment::Algorithm::Smp, experiment::Algorithm::Nap}) {
        if (!supports(alg, shape)) continue;
        outs.emplace_back(alg,
                          experiment::run_algorithm(alg, inputs, ReduceOp::Sum, shape).buffers);
      }
      for (std::size_t i = 1; i < outs.size(); ++i) {
        ++comparisons;
        if (outs[i].second != outs[0].second) {
          std::ostringstream os;
          os << shape_str(shape) << ": " << experiment::to_string(outs[i].first) << " and "
             << experiment::to_string(outs[0].first) << " disagree on int64 sum";
          add("cross_algorithm_agreement", false, os.str());
          return;
        }
      }
    }
    std::ostringstream os;
    os << comparisons << " pairwise algorithm comparisons identical";
    add("cross_algorithm_agreement", true, os.str());
  }

  void prop_partner_involution() {
    std::int64_t checks = 0;
    auto shapes = power_of_ppn_shapes(opts_.max_ranks);
    const auto extra = reduced_final_step_shapes(opts_.max_ranks);
    shapes.insert(shapes.end(), extra.begin(), extra.end());
    const auto irr = irregular_shapes(opts_.max_ranks);
    shapes.insert(shapes.end(), irr.begin(), irr.end());
    for (const auto& sp : shapes) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const int L = topology::num_internode_steps(shape);
      const std::int64_t p = shape.total_ranks();
      for (int step = 0; step < L; ++step) {
        for (std::int64_t r = 0; r < p; ++r) {
          const auto act = fn_(static_cast<int>(r), step, shape);
          if (act.kind != ActionKind::Exchange) continue;
          const auto back = fn_(act.partner, step, shape);
          ++checks;
          if (back.kind != ActionKind::Exchange || back.partner != r) {
            std::ostringstream os;
            os << shape_str(shape, step) << ": rank " << r << " pairs with " << act.partner
               << " but the reverse lookup gives partner " << back.partner;
            add("partner_involution", false, os.str());
            return;
          }
        }
      }
    }
    std::ostringstream os;
    os << checks << " exchange pairings verified symmetric";
    add("partner_involution", true, os.str());
  }

  void prop_partner_partition() {
    std::int64_t steps_checked = 0;
    for (const auto& sp : power_of_ppn_shapes(opts_.max_ranks)) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const int L = topology::num_internode_steps(shape);
      const std::int64_t p = shape.total_ranks();
      for (int step = 0; step < L; ++step) {
        std::vector<int> partner_of(static_cast<std::size_t>(p), -1);
        for (std::int64_t r = 0; r < p; ++r) {
          const auto act = fn_(static_cast<int>(r), step, shape);
          if (act.kind == ActionKind::ExtraSend || act.kind == ActionKind::ExtraRecv) {
            add("partner_partition", false,
                shape_str(shape, step) + ": extra transfer on a power-of-ppn shape");
            return;
          }
          if (act.kind == ActionKind::Exchange) partner_of[static_cast<std::size_t>(r)] = act.partner;
        }
        for (std::int64_t r = 0; r < p; ++r) {
          const int u = partner_of[static_cast<std::size_t>(r)];
          if (u < 0) continue;
          if (u == r || u >= p || partner_of[static_cast<std::size_t>(u)] != r) {
            std::ostringstream os;
            os << shape_str(shape, step) << ": ranks " << r << " and " << u
               << " do not form a disjoint exchange pair";
            add("partner_partition", false, os.str());
            return;
          }
        }
        ++steps_checked;
      }
    }
    std::ostringstream os;
    os << steps_checked << " steps partition into disjoint pairs plus idle ranks";
    add("partner_partition", true, os.str());
  }

  void prop_partner_idle_count() {
    std::int64_t nodes_checked = 0;
    for (const auto& sp : power_of_ppn_shapes(opts_.max_ranks)) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const int L = topology::num_internode_steps(shape);
      for (int step = 0; step < L; ++step) {
        for (std::int64_t node = 0; node < shape.num_nodes; ++node) {
          int idle = 0;
          for (int lr = 0; lr < shape.ppn; ++lr) {
            const auto act = fn_(static_cast<int>(node * shape.ppn + lr), step, shape);
            if (act.kind == ActionKind::Idle) ++idle;
          }
          ++nodes_checked;
          if (idle != 1) {
            std::ostringstream os;
            os << shape_str(shape, step) << ": node " << node << " has " << idle
               << " idle ranks, expected exactly 1";
            add("partner_idle_count", false, os.str());
            return;
          }
        }
      }
    }
    std::ostringstream os;
    os << nodes_checked << " node-steps with exactly one idle rank each";
    add("partner_idle_count", true, os.str());
  }

  void prop_partner_locality() {
    std::int64_t checks = 0;
    auto shapes = power_of_ppn_shapes(opts_.max_ranks);
    const auto extra = reduced_final_step_shapes(opts_.max_ranks);
    shapes.insert(shapes.end(), extra.begin(), extra.end());
    const auto irr = irregular_shapes(opts_.max_ranks);
    shapes.insert(shapes.end(), irr.begin(), irr.end());
    for (const auto& sp : shapes) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const int L = topology::num_internode_steps(shape);
      const std::int64_t p = shape.total_ranks();
      for (int step = 0; step < L; ++step) {
        for (std::int64_t r = 0; r < p; ++r) {
          const auto act = fn_(static_cast<int>(r), step, shape);
          const int my_node = topology::node_of(static_cast<int>(r), shape);
          std::vector<int> peers;
          if (act.kind == ActionKind::Exchange || act.kind == ActionKind::ExtraRecv)
            peers.push_back(act.partner);
          if (act.kind == ActionKind::ExtraSend)
            peers = act.extra_targets;
          for (int peer : peers) {
            ++checks;
            if (topology::node_of(peer, shape) == my_node) {
              std::ostringstream os;
              os << shape_str(shape, step) << ": rank " << r << " paired with same-node rank "
                 << peer;
              add("partner_locality", false, os.str());
              return;
            }
          }
        }
      }
    }
    std::ostringstream os;
    os << checks << " pairings all cross node boundaries";
    add("partner_locality", true, os.str());
  }

  void prop_partner_extras_consistency() {
    std::int64_t extras_seen = 0;
    std::int64_t steps_checked = 0;
    auto clean = power_of_ppn_shapes(opts_.max_ranks);
    const auto fig7 = reduced_final_step_shapes(opts_.max_ranks);
    clean.insert(clean.end(), fig7.begin(), fig7.end());
    // Clean shapes must produce no extra transfers at all.
    for (const auto& sp : clean) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const int L = topology::num_internode_steps(shape);
      const std::int64_t p = shape.total_ranks();
      for (int step = 0; step < L; ++step)
        for (std::int64_t r = 0; r < p; ++r) {
          const auto act = fn_(static_cast<int>(r), step, shape);
          if (act.kind == ActionKind::ExtraSend || act.kind == ActionKind::ExtraRecv) {
            add("partner_extras_consistency", false,
                shape_str(shape, step) + ": unexpected extra transfer on a divisible shape");
            return;
          }
        }
    }
    // Irregular shapes: every receiver has exactly one sender that lists it,
    // and every listed target is a receiver naming that sender.
    for (const auto& sp : irregular_shapes(opts_.max_ranks)) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const int L = topology::num_internode_steps(shape);
      const std::int64_t p = shape.total_ranks();
      bool shape_has_extras = false;
      for (int step = 0; step < L; ++step) {
        std::map<int, int> recv_from;
        std::map<int, std::vector<int>> send_targets;
        for (std::int64_t r = 0; r < p; ++r) {
          const auto act = fn_(static_cast<int>(r), step, shape);
          if (act.kind == ActionKind::ExtraRecv) recv_from[static_cast<int>(r)] = act.partner;
          if (act.kind == ActionKind::ExtraSend) {
            if (act.extra_targets.empty()) {
              add("partner_extras_consistency", false,
                  shape_str(shape, step) + ": extra send with empty target list");
              return;
            }
            send_targets[static_cast<int>(r)] = act.extra_targets;
          }
        }
        ++steps_checked;
        std::set<int> all_targets;
        for (const auto& [donor, targets] : send_targets)
          for (int t : targets) {
            if (!all_targets.insert(t).second) {
              add("partner_extras_consistency", false,
                  shape_str(shape, step) + ": rank " + std::to_string(t) +
                      " targeted by two extra sends");
              return;
            }
            const auto it = recv_from.find(t);
            if (it == recv_from.end() || it->second != donor) {
              add("partner_extras_consistency", false,
                  shape_str(shape, step) + ": extra send " + std::to_string(donor) + " -> " +
                      std::to_string(t) + " has no matching receive");
              return;
            }
          }
        if (all_targets.size() != recv_from.size()) {
          add("partner_extras_consistency", false,
              shape_str(shape, step) + ": receiver without a matching extra send");
          return;
        }
        extras_seen += static_cast<std::int64_t>(all_targets.size());
        if (!all_targets.empty()) shape_has_extras = true;
      }
      if (!shape_has_extras) {
        add("partner_extras_consistency", false,
            shape_str(topology::ClusterShape::make(sp.n, sp.ppn)) +
                ": expected extra transfers on this shape but found none");
        return;
      }
    }
    std::ostringstream os;
    os << extras_seen << " extra transfers matched one-to-one over " << steps_checked << " steps";
    add("partner_extras_consistency", true, os.str());
  }

  void prop_node_coverage() {
    auto shapes = power_of_ppn_shapes(opts_.max_ranks);
    const auto extra = reduced_final_step_shapes(opts_.max_ranks);
    shapes.insert(shapes.end(), extra.begin(), extra.end());
    const auto irr = irregular_shapes(opts_.max_ranks);
    shapes.insert(shapes.end(), irr.begin(), irr.end());
    for (const auto& sp : shapes) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const int L = topology::num_internode_steps(shape);
      const std::int64_t p = shape.total_ranks();
      UnionFind uf(shape.num_nodes);
      for (int step = 0; step < L; ++step) {
        for (std::int64_t r = 0; r < p; ++r) {
          const auto act = fn_(static_cast<int>(r), step, shape);
          const int my_node = topology::node_of(static_cast<int>(r), shape);
          if (act.kind == ActionKind::Exchange || act.kind == ActionKind::ExtraRecv)
            uf.unite(my_node, topology::node_of(act.partner, shape));
          if (act.kind == ActionKind::ExtraSend)
            for (int t : act.extra_targets) uf.unite(my_node, topology::node_of(t, shape));
        }
      }
      for (int node = 1; node < shape.num_nodes; ++node) {
        if (uf.find(node) != uf.find(0)) {
          std::ostringstream os;
          os << shape_str(shape) << ": node " << node
             << " unreachable from node 0 in the exchange graph";
          add("node_coverage", false, os.str());
          return;
        }
      }
    }
    add("node_coverage", true, "exchange graph connects all nodes on every tested shape");
  }

  struct PartnerCounts {
    std::vector<std::int64_t> sent;
    int phases_with_traffic = 0;
  };

  PartnerCounts count_partner_msgs(const ClusterShape& shape) const {
    const std::int64_t p = shape.total_ranks();
    PartnerCounts c{std::vector<std::int64_t>(static_cast<std::size_t>(p), 0), 0};
    const int L = topology::num_internode_steps(shape);
    for (int step = 0; step < L; ++step) {
      bool any = false;
      for (std::int64_t r = 0; r < p; ++r) {
        const auto act = fn_(static_cast<int>(r), step, shape);
        if (act.kind == ActionKind::Exchange) {
          c.sent[static_cast<std::size_t>(r)] += 1;
          any = true;
        } else if (act.kind == ActionKind::ExtraSend) {
          c.sent[static_cast<std::size_t>(r)] +=
              static_cast<std::int64_t>(act.extra_targets.size());
          any = true;
        } else if (act.kind == ActionKind::ExtraRecv) {
          any = true;
        }
      }
      if (any) ++c.phases_with_traffic;
    }
    return c;
  }

  void prop_nap_message_counts() {
    // Partner-level counting over every power-of-ppn shape in budget,
    // including (4096 nodes, ppn 16) when the budget allows.
    auto shapes = power_of_ppn_shapes(opts_.max_ranks);
    const auto fig7 = reduced_final_step_shapes(opts_.max_ranks);
    shapes.insert(shapes.end(), fig7.begin(), fig7.end());
    for (const auto& sp : shapes) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const int L = topology::num_internode_steps(shape);
      const auto counts = count_partner_msgs(shape);
      const std::int64_t max_sent =
          *std::max_element(counts.sent.begin(), counts.sent.end());
      if (max_sent != L || counts.phases_with_traffic != L) {
        std::ostringstream os;
        os << shape_str(shape) << ": max inter-node messages per rank " << max_sent << " over "
           << counts.phases_with_traffic << " phases, expected " << L;
        add("nap_message_counts", false, os.str());
        return;
      }
    }
    // Simulated traces for a handful of small shapes.
    struct Case {
      int n, ppn, expected;
    };
    for (const Case c : {Case{16, 16, 1}, Case{256, 16, 2}, Case{4, 4, 1}, Case{16, 4, 2},
                         Case{12, 4, 2}}) {
      if (static_cast<std::int64_t>(c.n) * c.ppn > sim_cap_) continue;
      const auto shape = topology::ClusterShape::make(c.n, c.ppn);
      const auto inputs = experiment::make_inputs(shape, 2, ElementKind::Int64, 9);
      const auto res = collectives::run_nap(inputs, ReduceOp::Sum, shape);
      if (res.trace.max_internode_msgs_per_rank != c.expected ||
          res.trace.internode_step_count != c.expected) {
        std::ostringstream os;
        os << shape_str(shape) << ": simulated max per-rank inter-node messages "
           << res.trace.max_internode_msgs_per_rank << " in " << res.trace.internode_step_count
           << " phases, expected " << c.expected;
        add("nap_message_counts", false, os.str());
        return;
      }
    }
    std::ostringstream os;
    os << shapes.size() << " shapes meet the ceil(log_ppn(n)) bound";
    add("nap_message_counts", true, os.str());
  }

  void prop_rd_smp_tree_counts() {
    std::int64_t shapes_checked = 0;
    for (std::int64_t n = 1; n * 1 <= sim_cap_; n *= 2) {
      for (std::int64_t ppn = 1; n * ppn <= sim_cap_; ppn *= 2) {
        const auto shape =
            topology::ClusterShape::make(static_cast<int>(n), static_cast<int>(ppn));
        const std::int64_t p = shape.total_ranks();
        const int ln = ilog2(n);
        const int lp = ilog2(p);
        const auto inputs = experiment::make_inputs(shape, 1, ElementKind::Int64, 3);

        const auto rd = collectives::run_recursive_doubling(inputs, ReduceOp::Sum, shape);
        for (std::int64_t r = 0; r < p; ++r) {
          if (rd.trace.per_rank_internode_msgs[static_cast<std::size_t>(r)] != ln) {
            std::ostringstream os;
            os << "rd " << shape_str(shape) << ": rank " << r << " sent "
               << rd.trace.per_rank_internode_msgs[static_cast<std::size_t>(r)]
               << " inter-node messages, expected " << ln;
            add("rd_smp_tree_counts", false, os.str());
            return;
          }
        }
        if (rd.trace.internode_step_count != ln) {
          add("rd_smp_tree_counts", false,
              "rd " + shape_str(shape) + ": wrong inter-node phase count");
          return;
        }

        const auto smp = collectives::run_smp(inputs, ReduceOp::Sum, shape);
        for (const auto& rec : smp.trace.records) {
          if (rec.locality != simnet::Locality::InterNode) continue;
          if (topology::local_rank_of(rec.src, shape) != 0 ||
              topology::local_rank_of(rec.dst, shape) != 0) {
            std::ostringstream os;
            os << "smp " << shape_str(shape) << ": inter-node record " << rec.src << " -> "
               << rec.dst << " touches a non-master rank";
            add("rd_smp_tree_counts", false, os.str());
            return;
          }
        }
        for (std::int64_t r = 0; r < p; ++r) {
          const bool master = topology::local_rank_of(static_cast<int>(r), shape) == 0;
          const std::int64_t expect = master ? ln : 0;
          if (smp.trace.per_rank_internode_msgs[static_cast<std::size_t>(r)] != expect) {
            std::ostringstream os;
            os << "smp " << shape_str(shape) << ": rank " << r << " inter-node count "
               << smp.trace.per_rank_internode_msgs[static_cast<std::size_t>(r)] << ", expected "
               << expect;
            add("rd_smp_tree_counts", false, os.str());
            return;
          }
        }

        const auto tree = collectives::run_tree(inputs, ReduceOp::Sum, shape);
        std::set<std::string> phases;
        for (const auto& rec : tree.trace.records) phases.insert(rec.phase);
        const std::int64_t messages = static_cast<std::int64_t>(tree.trace.records.size());
        if (static_cast<int>(phases.size()) != 2 * lp || messages != 2 * (p - 1)) {
          std::ostringstream os;
          os << "tree " << shape_str(shape) << ": " << phases.size() << " phases and " << messages
             << " messages, expected " << 2 * lp << " and " << 2 * (p - 1);
          add("rd_smp_tree_counts", false, os.str());
          return;
        }
        ++shapes_checked;
      }
    }
    std::ostringstream os;
    os << shapes_checked << " power-of-two shapes meet the rd/smp/tree count formulas";
    add("rd_smp_tree_counts", true, os.str());
  }

  void prop_nap_rd_phase_monotonic() {
    for (std::int64_t n = 2; n <= opts_.max_ranks; n *= 2) {
      for (std::int64_t ppn = 2; n * ppn <= opts_.max_ranks; ppn *= 2) {
        const int L = costmodel::model_nap_steps(n, ppn);
        if (L > ilog2(n)) {
          std::ostringstream os;
          os << "n=" << n << " ppn=" << ppn << ": nap needs " << L
             << " inter-node phases, more than recursive doubling's " << ilog2(n);
          add("nap_rd_phase_monotonic", false, os.str());
          return;
        }
      }
    }
    add("nap_rd_phase_monotonic", true,
        "ceil(log_ppn(n)) <= log2(n) on all power-of-two shapes in budget");
  }

  void prop_flop_accounting() {
    const std::int64_t size = 4;
    for (const auto& sp : power_of_ppn_shapes(sim_cap_)) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const std::int64_t p = shape.total_ranks();
      const int lp = ilog2(p);
      const int L = topology::num_internode_steps(shape);
      const auto inputs = experiment::make_inputs(shape, size, ElementKind::Int64, 5);

      const auto nap = collectives::run_nap(inputs, ReduceOp::Sum, shape);
      const std::int64_t nap_max =
          *std::max_element(nap.flops_per_rank.begin(), nap.flops_per_rank.end());
      if (nap_max != size * (lp + L)) {
        std::ostringstream os;
        os << "nap " << shape_str(shape) << ": critical-path flops " << nap_max << ", expected "
           << size * (lp + L);
        add("flop_accounting", false, os.str());
        return;
      }

      const auto rd = collectives::run_recursive_doubling(inputs, ReduceOp::Sum, shape);
      for (std::int64_t r = 0; r < p; ++r) {
        if (rd.flops_per_rank[static_cast<std::size_t>(r)] != size * lp) {
          add("flop_accounting", false,
              "rd " + shape_str(shape) + ": per-rank flop count off the s*log2(p) formula");
          return;
        }
      }

      const auto tree = collectives::run_tree(inputs, ReduceOp::Sum, shape);
      const std::int64_t tree_max =
          *std::max_element(tree.flops_per_rank.begin(), tree.flops_per_rank.end());
      const auto smp = collectives::run_smp(inputs, ReduceOp::Sum, shape);
      const std::int64_t smp_max =
          *std::max_element(smp.flops_per_rank.begin(), smp.flops_per_rank.end());
      if (tree_max != size * lp || smp_max != size * lp) {
        add("flop_accounting", false,
            shape_str(shape) + ": tree or smp critical-path flops off the s*log2(p) formula");
        return;
      }
    }
    add("flop_accounting", true,
        "critical-path flops match s*(log2(p)+log_ppn(n)) for nap and s*log2(p) elsewhere");
  }

  void prop_model_degeneration() {
    std::mt19937_64 rng(12345);
    for (int i = 0; i < 1000; ++i) {
      costmodel::CostParams prm;
      prm.alpha_local = log_uniform(rng, 1e-8, 1e-5);
      prm.alpha = prm.alpha_local * uniform(rng, 1.0, 50.0);
      prm.beta_local = log_uniform(rng, 1e-11, 1e-9);
      prm.R_b = log_uniform(rng, 1e8, 1e11);
      prm.gamma = log_uniform(rng, 1e-12, 1e-9);
      costmodel::CommVolume v;
      v.t = std::floor(uniform(rng, 0.0, 20.0));
      v.t_local = std::floor(uniform(rng, 0.0, 20.0));
      v.s_local = std::floor(uniform(rng, 0.0, 1e6));
      v.c = std::floor(uniform(rng, 0.0, 1e6));
      v.s = (i % 7 == 0) ? 0.0 : std::floor(uniform(rng, 8.0, 1e7));
      v.ppn_active = static_cast<double>(std::int64_t{1} << (i % 6));
      const bool achievable = (i % 2 == 0);
      if (achievable)
        prm.R_N = v.ppn_active * prm.R_b * ((i % 100 == 0) ? 1.0 : uniform(rng, 1.0, 8.0));
      else
        prm.R_N = v.ppn_active * prm.R_b * uniform(rng, 0.05, 0.9);

      const double split = costmodel::split_cost(v, prm);
      const double maxr = costmodel::maxrate_cost(v, prm);
      if (v.ppn_active * prm.R_b <= prm.R_N) {
        if (maxr != split) {
          std::ostringstream os;
          os << "sample " << i << ": max-rate " << maxr << " != split " << split
             << " although ppn*R_b <= R_N";
          add("model_degeneration", false, os.str());
          return;
        }
      } else {
        if (maxr < split || (v.s >= 8 && !(maxr > split))) {
          std::ostringstream os;
          os << "sample " << i << ": max-rate " << maxr << " not above split " << split
             << " although injection bandwidth binds";
          add("model_degeneration", false, os.str());
          return;
        }
      }
    }
    add("model_degeneration", true,
        "1000 sampled volumes: max-rate equals split exactly iff ppn*R_b <= R_N");
  }

  void prop_model_rd_smp_order() {
    std::mt19937_64 rng(54321);
    for (int i = 0; i < 1000; ++i) {
      const int lp = 4 + static_cast<int>(std::floor(uniform(rng, 0.0, 12.0)));
      const std::int64_t p = std::int64_t{1} << lp;
      const int lppn = 1 + static_cast<int>(std::floor(uniform(rng, 0.0,
                                                               std::min(7, lp - 1) + 0.0)));
      const std::int64_t ppn = std::int64_t{1} << lppn;
      costmodel::CostParams prm;
      prm.alpha_local = log_uniform(rng, 1e-7, 1e-5);
      prm.alpha = prm.alpha_local * uniform(rng, 1.0, 20.0);
      prm.beta_local = log_uniform(rng, 1e-11, 1e-9);
      prm.R_b = log_uniform(rng, 1e8, 1e10);
      prm.gamma = log_uniform(rng, 1e-12, 1e-9);
      const bool achievable = (i % 2 == 0);
      prm.R_N = achievable ? static_cast<double>(ppn) * prm.R_b * uniform(rng, 1.0, 8.0)
                           : static_cast<double>(ppn) * prm.R_b * uniform(rng, 0.05, 0.9);
      const double s = (i % 5 == 0) ? 0.0 : std::floor(uniform(rng, 8.0, 1e6));

      const double rd = costmodel::model_rd(p, ppn, s, prm);
      const double smp = costmodel::model_smp(p, ppn, s, prm);
      if (rd < smp) {
        std::ostringstream os;
        os << "sample " << i << ": model_rd " << rd << " below model_smp " << smp;
        add("model_rd_smp_order", false, os.str());
        return;
      }
      const bool equality_expected =
          s == 0.0 || static_cast<double>(ppn) * prm.R_b <= prm.R_N;
      if (equality_expected && rd != smp) {
        std::ostringstream os;
        os << "sample " << i << ": expected exact equality, got rd-smp = " << rd - smp;
        add("model_rd_smp_order", false, os.str());
        return;
      }
      if (!equality_expected && p / ppn >= 2 && !(rd > smp)) {
        std::ostringstream os;
        os << "sample " << i << ": expected strict rd > smp under binding injection bandwidth";
        add("model_rd_smp_order", false, os.str());
        return;
      }
    }
    add("model_rd_smp_order", true,
        "1000 sampled shapes: rd >= smp with equality exactly when s=0 or ppn*R_b <= R_N");
  }

  // Envelope in which the small-message ordering and a crossover provably
  // exist at p=32768, ppn=16: alpha >= 5*alpha_local and R_N <= 4*R_b keep
  // the nap-minus-smp slope positive and the s=8 gap negative.
  costmodel::CostParams sample_crossover_params(std::mt19937_64& rng) const {
    costmodel::CostParams prm;
    prm.alpha_local = uniform(rng, 2e-7, 1e-6);
    prm.alpha = prm.alpha_local * uniform(rng, 5.0, 20.0);
    prm.beta_local = uniform(rng, 5e-11, 5e-10);
    prm.R_b = log_uniform(rng, 1e9, 1e10);
    prm.R_N = prm.R_b * uniform(rng, 1.0, 4.0);
    prm.gamma = log_uniform(rng, 1e-11, 1e-9);
    return prm;
  }

  void prop_model_crossover() {
    const std::int64_t p = 32768;
    const std::int64_t ppn = 16;
    std::mt19937_64 rng(2024);
    std::vector<costmodel::CostParams> sets;
    sets.push_back(costmodel::default_params());
    for (int i = 0; i < 1000; ++i) sets.push_back(sample_crossover_params(rng));

    double default_cross = 0.0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const auto& prm = sets[i];
      const double nap8 = costmodel::model_nap(p, ppn, 8.0, prm);
      const double smp8 = costmodel::model_smp(p, ppn, 8.0, prm);
      const double rd8 = costmodel::model_rd(p, ppn, 8.0, prm);
      if (!(nap8 < smp8 && smp8 < rd8)) {
        std::ostringstream os;
        os << "set " << i << ": ordering nap < smp < rd fails at s=8 (nap=" << nap8
           << " smp=" << smp8 << " rd=" << rd8 << ")";
        add("model_crossover", false, os.str());
        return;
      }
      auto gap = [&](double s) {
        return costmodel::model_nap(p, ppn, s, prm) - costmodel::model_smp(p, ppn, s, prm);
      };
      double lo = 8.0, hi = 8.0;
      int guard = 0;
      while (gap(hi) < 0.0 && guard++ < 60) hi *= 2.0;
      if (!(gap(hi) >= 0.0)) {
        std::ostringstream os;
        os << "set " << i << ": no crossover found below s=" << hi;
        add("model_crossover", false, os.str());
        return;
      }
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) < 0.0 ? lo : hi) = mid;
      }
      if (i == 0) default_cross = hi;
    }
    std::ostringstream os;
    os << "ordering and crossover hold for defaults plus 1000 sampled sets; default-parameter "
          "crossover near "
       << static_cast<std::int64_t>(default_cross) << " bytes";
    add("model_crossover", true, os.str());
  }

  void prop_model_monotonicity() {
    const auto base = costmodel::default_params();
    struct Cell {
      std::int64_t p, ppn;
    };
    for (const Cell cell : {Cell{1024, 16}, Cell{64, 2}, Cell{32768, 256}}) {
      const double s = 64.0;
      for (int which = 0; which < 3; ++which) {
        auto eval = [&](const costmodel::CostParams& prm) {
          switch (which) {
            case 0: return costmodel::model_rd(cell.p, cell.ppn, s, prm);
            case 1: return costmodel::model_smp(cell.p, cell.ppn, s, prm);
            default: return costmodel::model_nap(cell.p, cell.ppn, s, prm);
          }
        };
        const double t0 = eval(base);
        auto bumped = [&](void (*mut)(costmodel::CostParams&)) {
          costmodel::CostParams prm = base;
          mut(prm);
          return eval(prm);
        };
        const double ta = bumped([](costmodel::CostParams& q) { q.alpha *= 2; });
        const double tl = bumped([](costmodel::CostParams& q) { q.alpha_local *= 2; });
        const double tg = bumped([](costmodel::CostParams& q) { q.gamma *= 2; });
        double ts;
        switch (which) {
          case 0: ts = costmodel::model_rd(cell.p, cell.ppn, 2 * s, base); break;
          case 1: ts = costmodel::model_smp(cell.p, cell.ppn, 2 * s, base); break;
          default: ts = costmodel::model_nap(cell.p, cell.ppn, 2 * s, base); break;
        }
        if (!(ta > t0 && tl > t0 && tg > t0 && ts > t0)) {
          std::ostringstream os;
          os << "model " << which << " p=" << cell.p << " ppn=" << cell.ppn
             << ": not strictly increasing in alpha/alpha_local/gamma/s";
          add("model_monotonicity", false, os.str());
          return;
        }
      }
    }
    add("model_monotonicity", true,
        "models strictly increase in alpha, alpha_local, gamma, and s");
  }

  void prop_model_trace_consistency() {
    auto shapes = power_of_ppn_shapes(sim_cap_);
    const auto fig7 = reduced_final_step_shapes(sim_cap_);
    shapes.insert(shapes.end(), fig7.begin(), fig7.end());
    for (const auto& sp : shapes) {
      const auto shape = topology::ClusterShape::make(sp.n, sp.ppn);
      const auto inputs = experiment::make_inputs(shape, 1, ElementKind::Int64, 11);
      const auto res = collectives::run_nap(inputs, ReduceOp::Sum, shape);
      const int modeled = costmodel::model_nap_steps(sp.n, sp.ppn);
      if (res.trace.internode_step_count != modeled) {
        std::ostringstream os;
        os << shape_str(shape) << ": trace shows " << res.trace.internode_step_count
           << " inter-node phases, model charges " << modeled;
        add("model_trace_consistency", false, os.str());
        return;
      }
    }
    add("model_trace_consistency", true,
        "modeled inter-node step count matches simulated traces on every tested shape");
  }

  void prop_lower_bounds_values() {
    const auto b1 = collectives::lower_bounds(4, 8);
    const auto b2 = collectives::lower_bounds(1, 123);
    const auto b3 = collectives::lower_bounds(2, 2);
    const bool ok = b1.min_messages == 2.0 && b1.min_bytes == 12.0 && b1.min_flops == 6.0 &&
                    b2.min_messages == 0.0 && b2.min_bytes == 0.0 && b2.min_flops == 0.0 &&
                    b3.min_bytes == 2.0;
    if (!ok) {
      add("lower_bounds_values", false, "closed-form lower bounds disagree with hand evaluation");
      return;
    }
    // Recursive doubling attains the message lower bound.
    for (int lp = 0; lp <= 6; ++lp) {
      const std::int64_t p = std::int64_t{1} << lp;
      if (collectives::lower_bounds(p, 8).min_messages != static_cast<double>(lp)) {
        add("lower_bounds_values", false, "log2 message bound not exact on a power of two");
        return;
      }
    }
    add("lower_bounds_values", true, "lower bound formulas match hand-computed values");
  }

  void prop_determinism() {
    const auto shape = topology::ClusterShape::make(9, 4);
    const auto inputs = experiment::make_inputs(shape, 3, ElementKind::Float64, 77);
    const auto a = collectives::run_nap(inputs, ReduceOp::Sum, shape);
    const auto b = collectives::run_nap(inputs, ReduceOp::Sum, shape);
    std::ostringstream csv_a, csv_b;
    simnet::write_trace_csv(csv_a, a.trace.records);
    simnet::write_trace_csv(csv_b, b.trace.records);
    if (a.trace.records != b.trace.records || a.buffers != b.buffers ||
        a.flops_per_rank != b.flops_per_rank || csv_a.str() != csv_b.str()) {
      add("determinism", false, "two identical nap runs produced different traces or results");
      return;
    }
    const auto prm = costmodel::default_params();
    const std::vector<std::string> algs = {"nap", "rd", "smp"};
    const std::vector<std::int64_t> pg = {16, 256, 4096};
    const std::vector<double> sg = {8.0, 64.0};
    std::ostringstream sweep_a, sweep_b;
    costmodel::write_sweep_csv(sweep_a, costmodel::sweep(algs, pg, 16, sg, prm));
    costmodel::write_sweep_csv(sweep_b, costmodel::sweep(algs, pg, 16, sg, prm));
    if (sweep_a.str() != sweep_b.str()) {
      add("determinism", false, "two identical model sweeps produced different tables");
      return;
    }
    add("determinism", true, "repeated runs and sweeps are byte-identical");
  }

  Options opts_;
  PartnerFn fn_;
  std::int64_t sim_cap_ = 4096;
  std::vector<PropertyResult> results_;
};

}  // namespace

PartnerFn real_partner_fn() {
  return [](int rank, int step, const ClusterShape& shape) {
    return topology::nap_partner(rank, step, shape);
  };
}

PartnerFn buggy_partner_fn() {
  return [](int rank, int step, const ClusterShape& shape) {
    auto act = topology::nap_partner(rank, step, shape);
    if (step >= 1 && act.kind == ActionKind::Exchange) {
      const auto g = topology::step_geometry(rank, step, shape);
      const int lr = topology::local_rank_of(rank, shape);
      const std::int64_t node =
          g.group_start_node + static_cast<std::int64_t>(lr) * g.subgroup_size_nodes;
      act.partner = static_cast<int>(node * shape.ppn + g.subgroup_index);
    }
    return act;
  };
}

std::vector<PropertyResult> run_all(const Options& opts) { return Suite(opts).run(); }

bool all_passed(const std::vector<PropertyResult>& results) {
  for (const auto& r : results)
    if (!r.passed) return false;
  return true;
}

}  // namespace napcoll::verify
