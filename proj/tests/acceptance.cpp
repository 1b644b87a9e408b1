// Acceptance suite: one line per shipped claim, nonzero exit if any fails.
// Links the core library directly; the determinism check drives the CLI
// binary named by NAPCOLL_CLI_PATH.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "collectives.hpp"
#include "costmodel.hpp"
#include "experiment.hpp"
#include "simnet.hpp"
#include "topology.hpp"
#include "types.hpp"

namespace {

using namespace napcoll;
using experiment::Algorithm;
using topology::ClusterShape;

int g_failures = 0;

void report(int idx, bool ok, const std::string& desc, const std::string& detail = "") {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << idx << ": " << desc;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << "\n";
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool is_pow2(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

int ilog2(std::int64_t x) {
  int k = 0;
  while ((std::int64_t{1} << (k + 1)) <= x) ++k;
  return k;
}

bool supports(Algorithm alg, const ClusterShape& shape) {
  const std::int64_t p = shape.total_ranks();
  switch (alg) {
    case Algorithm::Tree:
    case Algorithm::RecursiveDoubling: return is_pow2(p);
    case Algorithm::Smp: return is_pow2(shape.num_nodes) && is_pow2(shape.ppn);
    case Algorithm::Nap: return is_pow2(shape.ppn);
  }
  return false;
}

double unif(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double logu(std::mt19937_64& rng, double lo, double hi) {
  return std::exp(unif(rng, std::log(lo), std::log(hi)));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------- criterion 1

void criterion_oracle_sweep() {
  const auto start = std::chrono::steady_clock::now();
  const Algorithm algs[] = {Algorithm::Tree, Algorithm::RecursiveDoubling, Algorithm::Smp,
                            Algorithm::Nap};
  const ReduceOp ops[] = {ReduceOp::Sum, ReduceOp::Max, ReduceOp::Min};
  int runs = 0;
  std::string why;
  bool saw_12_4 = false, saw_5_4 = false;
  for (int n = 1; n <= 16 && why.empty(); ++n) {
    for (int ppn : {2, 4, 8, 16}) {
      const auto shape = ClusterShape::make(n, ppn);
      for (Algorithm alg : algs) {
        if (!supports(alg, shape)) continue;
        for (ReduceOp op : ops) {
          const auto inputs = experiment::make_inputs(
              shape, 4, ElementKind::Int64, 1234u + static_cast<unsigned>(n * 131 + ppn));
          const auto res = experiment::run_algorithm(alg, inputs, op, shape);
          const auto expected = experiment::serial_reduce(inputs, op);
          const auto verdict = experiment::compare_exact(res.buffers, expected);
          ++runs;
          if (!verdict.match) {
            std::ostringstream os;
            os << experiment::to_string(alg) << " n=" << n << " ppn=" << ppn
               << " first mismatch at rank " << verdict.first_mismatch_rank;
            why = os.str();
            break;
          }
          if (alg == Algorithm::Nap && n == 12 && ppn == 4) saw_12_4 = true;
          if (alg == Algorithm::Nap && n == 5 && ppn == 4) saw_5_4 = true;
        }
        if (!why.empty()) break;
      }
      if (!why.empty()) break;
    }
  }
  const double elapsed = seconds_since(start);
  if (why.empty() && !(saw_12_4 && saw_5_4)) why = "sweep skipped a required irregular shape";
  if (why.empty() && elapsed >= 60.0) why = "took " + fmt(elapsed) + " s, budget 60 s";
  report(1, why.empty(),
         "int64 sum/max/min allreduce equals the serial fold on every rank over the "
         "n=1..16 x ppn={2,4,8,16} sweep, " +
             std::to_string(runs) + " runs in " + fmt(elapsed) + " s",
         why);
}

// ---------------------------------------------------------------- criterion 2

struct CountResult {
  std::int64_t max_sent = 0;
  int active_steps = 0;
  bool extras_seen = false;
};

CountResult count_nap_sends(const ClusterShape& shape) {
  CountResult out;
  const int L = topology::num_internode_steps(shape);
  const int p = shape.total_ranks();
  std::vector<std::int64_t> sent(static_cast<std::size_t>(p), 0);
  for (int step = 0; step < L; ++step) {
    bool active = false;
    for (int r = 0; r < p; ++r) {
      const auto act = topology::nap_partner(r, step, shape);
      if (act.kind == topology::ActionKind::Exchange) {
        sent[static_cast<std::size_t>(r)] += 1;
        active = true;
      } else if (act.kind == topology::ActionKind::ExtraSend) {
        sent[static_cast<std::size_t>(r)] += static_cast<std::int64_t>(act.extra_targets.size());
        out.extras_seen = true;
      } else if (act.kind == topology::ActionKind::ExtraRecv) {
        out.extras_seen = true;
      }
    }
    if (active) ++out.active_steps;
  }
  for (auto c : sent) out.max_sent = std::max(out.max_sent, c);
  return out;
}

void criterion_nap_message_counts() {
  const auto start = std::chrono::steady_clock::now();
  std::string why;
  int shapes_checked = 0;
  bool spot_4096_16 = false;
  for (int ppn : {2, 3, 4, 6, 8, 16, 32, 64, 128, 256}) {
    // Exact powers: n = ppn^L, expect the max equal to L with no extra traffic.
    for (std::int64_t n = ppn; n * ppn <= 65536; n *= ppn) {
      const auto shape = ClusterShape::make(static_cast<int>(n), ppn);
      const int L = topology::num_internode_steps(shape);
      std::int64_t power = 1;
      for (int i = 0; i < L; ++i) power *= ppn;
      const auto res = count_nap_sends(shape);
      ++shapes_checked;
      if (power != n || res.max_sent != L || res.active_steps != L || res.extras_seen) {
        std::ostringstream os;
        os << "n=" << n << " ppn=" << ppn << ": max sent " << res.max_sent << ", active steps "
           << res.active_steps << ", expected " << L;
        why = os.str();
        break;
      }
      if (n == 4096 && ppn == 16) spot_4096_16 = res.max_sent == 3 && res.active_steps == 3;
    }
    if (!why.empty()) break;
    // Divisible non-powers: n = c * ppn^(L-1) with 2 <= c < ppn, expect
    // ceil(log_ppn(n)) = L, still without extra traffic.
    for (std::int64_t stride = 1; why.empty(); stride *= ppn) {
      if (stride * 2LL * ppn > 65536) break;
      for (std::int64_t c = 2; c < ppn; ++c) {
        const std::int64_t n = c * stride;
        if (n * ppn > 65536) break;
        const auto shape = ClusterShape::make(static_cast<int>(n), ppn);
        const int L = topology::num_internode_steps(shape);
        std::int64_t lo = 1, hi = 1;
        for (int i = 0; i < L - 1; ++i) lo *= ppn;
        hi = lo * ppn;
        const auto res = count_nap_sends(shape);
        ++shapes_checked;
        if (!(lo < n && n < hi) || res.max_sent != L || res.active_steps != L ||
            res.extras_seen) {
          std::ostringstream os;
          os << "n=" << n << " ppn=" << ppn << ": max sent " << res.max_sent << ", expected "
             << L;
          why = os.str();
          break;
        }
      }
    }
    if (!why.empty()) break;
  }
  if (why.empty() && !spot_4096_16) why = "n=4096 ppn=16 did not need exactly 3 inter-node steps";
  const double elapsed = seconds_since(start);
  if (why.empty() && elapsed >= 30.0) why = "took " + fmt(elapsed) + " s, budget 30 s";
  report(2, why.empty(),
         "max inter-node messages per rank equals log_ppn(n) on exact powers and "
         "ceil(log_ppn(n)) on divisible non-powers up to p=65536, counted from the partner "
         "function (" +
             std::to_string(shapes_checked) + " shapes, " + fmt(elapsed) + " s)",
         why);
}

// ---------------------------------------------------------------- criterion 3

void criterion_rd_smp_tree_counts() {
  std::string why;
  for (int lppn = 0; lppn <= 12 && why.empty(); ++lppn) {
    const int ppn = 1 << lppn;
    for (int ln = 0; (std::int64_t{1} << (ln + lppn)) <= 4096; ++ln) {
      const int n = 1 << ln;
      const auto shape = ClusterShape::make(n, ppn);
      const int p = shape.total_ranks();
      const auto inputs = experiment::make_inputs(shape, 1, ElementKind::Int64, 9);

      const auto rd = collectives::run_recursive_doubling(inputs, ReduceOp::Sum, shape);
      for (int r = 0; r < p; ++r) {
        if (rd.trace.per_rank_internode_msgs[static_cast<std::size_t>(r)] != ln) {
          why = "rd n=" + std::to_string(n) + " ppn=" + std::to_string(ppn) + " rank " +
                std::to_string(r) + " sent " +
                std::to_string(rd.trace.per_rank_internode_msgs[static_cast<std::size_t>(r)]) +
                " inter-node messages, expected " + std::to_string(ln);
          break;
        }
      }
      if (!why.empty()) break;

      const auto smp = collectives::run_smp(inputs, ReduceOp::Sum, shape);
      for (const auto& rec : smp.trace.records) {
        if (rec.locality != simnet::Locality::InterNode) continue;
        if (rec.src % ppn != 0 || rec.dst % ppn != 0) {
          why = "smp n=" + std::to_string(n) + " ppn=" + std::to_string(ppn) +
                " inter-node record touches a non-master rank";
          break;
        }
      }
      for (int r = 0; r < p && why.empty(); ++r) {
        const std::int64_t expect = r % ppn == 0 ? ln : 0;
        if (smp.trace.per_rank_internode_msgs[static_cast<std::size_t>(r)] != expect) {
          why = "smp n=" + std::to_string(n) + " ppn=" + std::to_string(ppn) + " rank " +
                std::to_string(r) + " inter-node count wrong";
        }
      }
      if (!why.empty()) break;

      const auto tree = collectives::run_tree(inputs, ReduceOp::Sum, shape);
      std::set<std::string> phases;
      for (const auto& rec : tree.trace.records) phases.insert(rec.phase);
      if (static_cast<int>(phases.size()) != 2 * ilog2(p)) {
        why = "tree p=" + std::to_string(p) + " used " + std::to_string(phases.size()) +
              " phases, expected " + std::to_string(2 * ilog2(p));
        break;
      }
    }
  }
  report(3, why.empty(),
         "recursive doubling sends log2(n) inter-node messages per rank, smp keeps "
         "inter-node traffic on local-rank-0 masters with log2(n) each, and the tree's "
         "critical path is 2*log2(p) phases, exact for all power-of-two shapes to p=4096",
         why);
}

// ---------------------------------------------------------------- criterion 4

void criterion_partner_involution_partition() {
  std::string why;
  int shapes_checked = 0;
  for (int ppn : {2, 4, 8, 16, 32, 64, 128, 256}) {
    for (std::int64_t n = ppn; n * ppn <= 65536 && why.empty(); n *= ppn) {
      const auto shape = ClusterShape::make(static_cast<int>(n), ppn);
      const int p = shape.total_ranks();
      const int L = topology::num_internode_steps(shape);
      ++shapes_checked;
      for (int step = 0; step < L && why.empty(); ++step) {
        std::int64_t idle = 0, exchanging = 0;
        for (int r = 0; r < p; ++r) {
          const auto act = topology::nap_partner(r, step, shape);
          if (act.kind == topology::ActionKind::Idle) {
            ++idle;
            continue;
          }
          if (act.kind != topology::ActionKind::Exchange) {
            why = "unexpected extra traffic on an exact power shape";
            break;
          }
          ++exchanging;
          if (act.partner < 0 || act.partner >= p || act.partner == r) {
            why = "partner out of range";
            break;
          }
          const auto back = topology::nap_partner(act.partner, step, shape);
          if (back.kind != topology::ActionKind::Exchange || back.partner != r) {
            std::ostringstream os;
            os << "involution broken at n=" << n << " ppn=" << ppn << " step " << step
               << ": rank " << r << " -> " << act.partner << " -> "
               << (back.kind == topology::ActionKind::Exchange ? back.partner : -1);
            why = os.str();
            break;
          }
        }
        if (why.empty() && (idle != n || idle + exchanging != p)) {
          std::ostringstream os;
          os << "partition broken at n=" << n << " ppn=" << ppn << " step " << step << ": "
             << idle << " idle + " << exchanging << " exchanging != " << p;
          why = os.str();
        }
      }
    }
    if (!why.empty()) break;
  }
  report(4, why.empty(),
         "the pairing function is an involution and partitions every power-of-ppn shape up "
         "to p=65536 into one idle rank per node plus exchange pairs (" +
             std::to_string(shapes_checked) + " shapes exhaustively)",
         why);
}

// ---------------------------------------------------------------- criterion 5

void criterion_model_identities() {
  std::mt19937_64 rng(987654321);
  std::string why;
  for (int i = 0; i < 1000 && why.empty(); ++i) {
    costmodel::CostParams q;
    q.alpha_local = logu(rng, 1e-8, 1e-5);
    q.beta_local = logu(rng, 1e-12, 1e-9);
    q.alpha = logu(rng, 1e-7, 1e-4);
    q.R_b = logu(rng, 1e8, 1e11);
    q.gamma = logu(rng, 1e-12, 1e-9);

    costmodel::CommVolume v;
    v.t = static_cast<double>(i % 21);
    v.t_local = static_cast<double>((i * 7) % 16);
    v.s = i % 7 == 0 ? 0.0 : std::floor(unif(rng, 8.0, 1e7));
    v.s_local = std::floor(unif(rng, 0.0, 1e6));
    v.c = static_cast<double>(i % 51);
    v.ppn_active = static_cast<double>(std::int64_t{1} << (i % 7));

    // Ample injection bandwidth: the split-rate and max-rate forms coincide.
    q.R_N = v.ppn_active * q.R_b * (i % 97 == 0 ? 1.0 : unif(rng, 1.0, 8.0));
    if (costmodel::maxrate_cost(v, q) != costmodel::split_cost(v, q)) {
      why = "max-rate did not degenerate to the split form at sample " + std::to_string(i);
      break;
    }
    // Saturated injection bandwidth: max-rate strictly dominates for s > 0.
    q.R_N = v.ppn_active * q.R_b * unif(rng, 0.05, 0.9);
    const double mr = costmodel::maxrate_cost(v, q);
    const double sp = costmodel::split_cost(v, q);
    if (v.s == 0.0 ? (mr != sp) : !(mr > sp)) {
      why = "max-rate lost its dominance over the split form at sample " + std::to_string(i);
      break;
    }

    // Full-collective forms: rd >= smp, equal exactly when bandwidth is ample
    // or nothing crosses the network.
    const int lp = 4 + i % 12;
    const int lppn = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::min(6, lp - 1)));
    const std::int64_t p = std::int64_t{1} << lp;
    const std::int64_t ppn = std::int64_t{1} << lppn;
    const bool ample = i % 2 == 0;
    q.R_N = static_cast<double>(ppn) * q.R_b * (ample ? unif(rng, 1.0, 4.0) : unif(rng, 0.05, 0.9));
    const double s = v.s;
    const double rd = costmodel::model_rd(p, ppn, s, q);
    const double smp = costmodel::model_smp(p, ppn, s, q);
    if ((ample || s == 0.0) ? (rd != smp) : !(rd > smp)) {
      why = "rd/smp ordering violated at sample " + std::to_string(i);
      break;
    }
  }
  report(5, why.empty(),
         "max-rate cost degenerates exactly to the split form when injection bandwidth is "
         "ample, and strictly dominates otherwise; rd >= smp with exact equality conditions, "
         "over a 1000-point random parameter/volume sample",
         why);
}

// ---------------------------------------------------------------- criterion 6

void criterion_crossover() {
  const std::int64_t p = 32768, ppn = 16;
  std::string why;
  double default_crossover = 0.0;

  auto check_one = [&](const costmodel::CostParams& q, bool record) -> bool {
    const double nap8 = costmodel::model_nap(p, ppn, 8.0, q);
    const double smp8 = costmodel::model_smp(p, ppn, 8.0, q);
    const double rd8 = costmodel::model_rd(p, ppn, 8.0, q);
    if (!(nap8 < smp8 && smp8 < rd8)) {
      why = "expected nap < smp < rd at s=8 bytes";
      return false;
    }
    double lo = 8.0, hi = 8.0;
    while (costmodel::model_nap(p, ppn, hi, q) < costmodel::model_smp(p, ppn, hi, q)) {
      hi *= 2.0;
      if (hi > 4.4e12) {
        why = "no crossover below 4 TB";
        return false;
      }
    }
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (costmodel::model_nap(p, ppn, mid, q) < costmodel::model_smp(p, ppn, mid, q))
        lo = mid;
      else
        hi = mid;
    }
    if (!(hi > 8.0) || !std::isfinite(hi)) {
      why = "bisection failed to localize the crossover";
      return false;
    }
    if (record) default_crossover = hi;
    return true;
  };

  if (check_one(costmodel::default_params(), true)) {
    std::mt19937_64 rng(424242);
    for (int i = 0; i < 200; ++i) {
      costmodel::CostParams q;
      q.alpha_local = unif(rng, 2e-7, 1e-6);
      q.alpha = q.alpha_local * unif(rng, 5.0, 20.0);
      q.beta_local = unif(rng, 5e-11, 5e-10);
      q.R_b = logu(rng, 1e9, 1e10);
      q.R_N = q.R_b * unif(rng, 1.0, 4.0);
      q.gamma = logu(rng, 1e-11, 1e-9);
      if (!check_one(q, false)) {
        why += " at parameter sample " + std::to_string(i);
        break;
      }
    }
  }
  report(6, why.empty(),
         "at p=32768, ppn=16 the models order nap < smp < rd at s=8 bytes and bisection finds "
         "an smp/nap crossover for the default and 200 sampled parameter sets (default "
         "crossover near " +
             std::to_string(static_cast<long long>(default_crossover)) + " bytes)",
         why);
}

// ---------------------------------------------------------------- criterion 7

void criterion_float_tolerance() {
  std::string why;
  for (int n = 1; n <= 16 && why.empty(); ++n) {
    for (int ppn : {2, 4, 8, 16}) {
      const auto shape = ClusterShape::make(n, ppn);
      for (Algorithm alg :
           {Algorithm::Tree, Algorithm::RecursiveDoubling, Algorithm::Smp, Algorithm::Nap}) {
        if (!supports(alg, shape)) continue;
        const auto inputs = experiment::make_inputs(
            shape, 4, ElementKind::Float64, 77u + static_cast<unsigned>(n * 17 + ppn));
        const auto res = experiment::run_algorithm(alg, inputs, ReduceOp::Sum, shape);
        const auto expected = experiment::serial_reduce(inputs, ReduceOp::Sum);
        const auto verdict =
            experiment::compare_float_tolerance(res.buffers, expected, shape.total_ranks());
        if (!verdict.match) {
          std::ostringstream os;
          os << experiment::to_string(alg) << " n=" << n << " ppn=" << ppn
             << " exceeded tolerance at rank " << verdict.first_mismatch_rank;
          why = os.str();
          break;
        }
      }
      if (!why.empty()) break;
    }
  }
  report(7, why.empty(),
         "float64 sum agrees with the serial fold within p*s*2^-48 relative error across the "
         "criterion-1 sweep",
         why);
}

// ---------------------------------------------------------------- criterion 8

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return {};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool run_cli(const std::string& args) {
  const std::string cmd = std::string(NAPCOLL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
}

void criterion_determinism() {
  std::string why;
  if (!run_cli("run --alg nap --nodes 9 --ppn 4 --size 4 --seed 42 --out accept_run_a.csv") ||
      !run_cli("run --alg nap --nodes 9 --ppn 4 --size 4 --seed 42 --out accept_run_b.csv")) {
    why = "cli run invocation failed";
  } else {
    const auto a = slurp("accept_run_a.csv");
    const auto b = slurp("accept_run_b.csv");
    if (a.empty() || a != b) why = "trace CSVs differ between identical runs";
  }
  std::remove("accept_run_a.csv");
  std::remove("accept_run_b.csv");
  if (why.empty()) {
    if (!run_cli("model --ppn 16 --p-grid 16:32768:x2 --s-grid 8:512:x4 --out accept_m_a.csv") ||
        !run_cli("model --ppn 16 --p-grid 16:32768:x2 --s-grid 8:512:x4 --out accept_m_b.csv")) {
      why = "cli model invocation failed";
    } else {
      const auto a = slurp("accept_m_a.csv");
      const auto b = slurp("accept_m_b.csv");
      if (a.empty() || a != b) why = "model CSVs differ between identical runs";
    }
    std::remove("accept_m_a.csv");
    std::remove("accept_m_b.csv");
  }
  report(8, why.empty(),
         "two cli runs with identical flags produce byte-identical trace and model CSVs", why);
}

}  // namespace

int main() {
  criterion_oracle_sweep();
  criterion_nap_message_counts();
  criterion_rd_smp_tree_counts();
  criterion_partner_involution_partition();
  criterion_model_identities();
  criterion_crossover();
  criterion_float_tolerance();
  criterion_determinism();
  if (g_failures != 0) {
    std::cout << g_failures << " criteria failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
