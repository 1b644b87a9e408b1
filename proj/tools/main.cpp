#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "napcoll/napcoll.h"

namespace {

// Exit codes: 0 success, 1 failed property or reduction check,
// 2 usage or unsupported shape, 3 file I/O.
int exit_for(napc_status st) {
  switch (st) {
    case NAPC_OK: return 0;
    case NAPC_ERR_INVALID_ARGUMENT:
    case NAPC_ERR_UNSUPPORTED_SHAPE: return 2;
    case NAPC_ERR_PROTOCOL:
    case NAPC_ERR_DEADLOCK: return 1;
    case NAPC_ERR_IO: return 3;
  }
  return 2;
}

int report_failure(napc_status st) {
  std::cerr << "error: " << napc_status_string(st) << ": " << napc_last_error() << "\n";
  return exit_for(st);
}

bool parse_int_token(const std::string& tok, std::int64_t& out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(tok.c_str(), &end, 10);
  if (errno != 0 || end != tok.c_str() + tok.size()) return false;
  out = v;
  return true;
}

bool parse_double_token(const std::string& tok, double& out) {
  if (tok.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (errno != 0 || end != tok.c_str() + tok.size()) return false;
  out = v;
  return true;
}

// Grid syntax: comma-separated entries, each a value or a geometric range
// a:b:xK (from a up to b, multiplying by K).
bool parse_grid_int(const std::string& text, std::vector<std::int64_t>& out) {
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const auto c1 = tok.find(':');
    if (c1 == std::string::npos) {
      std::int64_t v = 0;
      if (!parse_int_token(tok, v) || v < 1) return false;
      out.push_back(v);
      continue;
    }
    const auto c2 = tok.find(':', c1 + 1);
    if (c2 == std::string::npos) return false;
    std::int64_t a = 0, b = 0, k = 0;
    const std::string step = tok.substr(c2 + 1);
    if (!parse_int_token(tok.substr(0, c1), a) ||
        !parse_int_token(tok.substr(c1 + 1, c2 - c1 - 1), b) || step.size() < 2 ||
        step[0] != 'x' || !parse_int_token(step.substr(1), k))
      return false;
    if (a < 1 || b < a || k < 2) return false;
    for (std::int64_t v = a; v <= b; v *= k) out.push_back(v);
  }
  return !out.empty();
}

bool parse_grid_double(const std::string& text, std::vector<double>& out) {
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const auto c1 = tok.find(':');
    if (c1 == std::string::npos) {
      double v = 0;
      if (!parse_double_token(tok, v) || !(v > 0)) return false;
      out.push_back(v);
      continue;
    }
    const auto c2 = tok.find(':', c1 + 1);
    if (c2 == std::string::npos) return false;
    double a = 0, b = 0, k = 0;
    const std::string step = tok.substr(c2 + 1);
    if (!parse_double_token(tok.substr(0, c1), a) ||
        !parse_double_token(tok.substr(c1 + 1, c2 - c1 - 1), b) || step.size() < 2 ||
        step[0] != 'x' || !parse_double_token(step.substr(1), k))
      return false;
    if (!(a > 0) || b < a || !(k > 1)) return false;
    for (double v = a; v <= b; v *= k) out.push_back(v);
  }
  return !out.empty();
}

// trace.csv -> trace.nap.csv; no-extension paths get the suffix appended.
std::string with_alg_suffix(const std::string& path, const std::string& alg) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + "." + alg;
  return path.substr(0, dot) + "." + alg + path.substr(dot);
}

struct RunOutcome {
  napc_status st = NAPC_OK;
  bool oracle_ok = false;
};

RunOutcome run_one(const napc_shape& shape, napc_alg alg, const std::string& alg_name,
                   napc_elem elem, napc_op op, std::int64_t size, std::uint64_t seed,
                   const std::string& out_path) {
  napc_run* run = nullptr;
  napc_status st = napc_run_collective(&shape, alg, elem, op, size, seed, &run);
  if (st != NAPC_OK) return {st, false};
  int ok = 0;
  std::int64_t msgs = 0, inter = 0, intra = 0, maxmsg = 0, flops = 0, mismatch = -1;
  int steps = 0;
  napc_run_oracle_match(run, &ok);
  napc_run_first_mismatch(run, &mismatch);
  napc_run_message_count(run, &msgs);
  napc_run_total_bytes(run, &inter, &intra);
  napc_run_internode_steps(run, &steps);
  napc_run_max_internode_msgs(run, &maxmsg);
  napc_run_max_flops(run, &flops);
  std::cout << (ok ? "OK" : "FAIL") << " alg=" << alg_name << " nodes=" << shape.num_nodes
            << " ppn=" << shape.ppn << " p=" << shape.num_nodes * shape.ppn
            << " oracle=" << (ok ? "match" : "mismatch") << " messages=" << msgs
            << " internode_bytes=" << inter << " intranode_bytes=" << intra
            << " internode_phases=" << steps << " max_internode_msgs_per_rank=" << maxmsg
            << " max_flops_per_rank=" << flops;
  if (!ok) std::cout << " first_mismatch_rank=" << mismatch;
  std::cout << "\n";
  if (!out_path.empty()) {
    st = napc_run_write_trace_csv(run, out_path.c_str());
    if (st != NAPC_OK) {
      napc_run_free(run);
      return {st, ok != 0};
    }
    std::cout << "trace written to " << out_path << "\n";
  }
  napc_run_free(run);
  return {NAPC_OK, ok != 0};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"napcoll: simulated node-aware allreduce collectives and cost models"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "simulate one allreduce and check the result");
  std::string r_alg = "nap", r_elem = "i64", r_op = "sum", r_out;
  std::int64_t r_nodes = 0, r_ppn = 0, r_size = 8, r_socket = 0;
  std::uint64_t r_seed = 1;
  run_cmd->add_option("--alg", r_alg, "tree, rd, smp, nap, or all")
      ->check(CLI::IsMember({"tree", "rd", "smp", "nap", "all"}));
  run_cmd->add_option("--nodes", r_nodes, "number of nodes")
      ->required()
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--ppn", r_ppn, "ranks per node")->required()->check(CLI::PositiveNumber);
  run_cmd->add_option("--size", r_size, "elements per rank (8 bytes each)")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--elem", r_elem, "element type")->check(CLI::IsMember({"i64", "f64"}));
  run_cmd->add_option("--op", r_op, "reduction")->check(CLI::IsMember({"sum", "max", "min"}));
  run_cmd->add_option("--seed", r_seed, "input generator seed");
  run_cmd->add_option("--out", r_out, "trace CSV path (per-algorithm suffix under --alg all)");
  run_cmd->add_option("--socket-size", r_socket, "ranks per socket (default ppn/2)");

  auto* model_cmd = app.add_subcommand("model", "evaluate the closed-form cost models");
  std::string m_alg = "all", m_pgrid, m_sgrid, m_params, m_out;
  std::int64_t m_ppn = 0;
  model_cmd->add_option("--alg", m_alg, "all or a comma list drawn from nap,rd,smp");
  model_cmd->add_option("--ppn", m_ppn, "ranks per node")->required()->check(CLI::PositiveNumber);
  model_cmd->add_option("--p-grid", m_pgrid, "total ranks, e.g. 64,128 or 64:65536:x4")
      ->required();
  model_cmd->add_option("--s-grid", m_sgrid, "message bytes, e.g. 8:1048576:x4")->required();
  model_cmd->add_option("--params", m_params,
                        "parameter file (falls back to NAPCOLL_PARAMS, then defaults)");
  model_cmd->add_option("--out", m_out, "output CSV path")->required();

  auto* verify_cmd = app.add_subcommand("verify", "run the self-check property suite");
  std::int64_t v_max_ranks = 65536;
  bool v_inject = false;
  verify_cmd->add_option("--max-ranks", v_max_ranks, "cap on enumerated or simulated ranks")
      ->check(CLI::PositiveNumber);
  verify_cmd->add_flag("--inject-pairing-bug", v_inject)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (app.got_subcommand(run_cmd)) {
    const napc_shape shape{r_nodes, r_ppn, r_socket};
    const napc_elem elem = r_elem == "i64" ? NAPC_ELEM_I64 : NAPC_ELEM_F64;
    const napc_op op = r_op == "sum" ? NAPC_OP_SUM : (r_op == "max" ? NAPC_OP_MAX : NAPC_OP_MIN);
    const struct {
      napc_alg alg;
      const char* name;
    } kAll[] = {{NAPC_ALG_TREE, "tree"},
                {NAPC_ALG_RD, "rd"},
                {NAPC_ALG_SMP, "smp"},
                {NAPC_ALG_NAP, "nap"}};
    if (r_alg != "all") {
      for (const auto& entry : kAll) {
        if (r_alg != entry.name) continue;
        const auto outcome =
            run_one(shape, entry.alg, entry.name, elem, op, r_size, r_seed, r_out);
        if (outcome.st != NAPC_OK) return report_failure(outcome.st);
        return outcome.oracle_ok ? 0 : 1;
      }
      std::cerr << "error: unknown algorithm " << r_alg << "\n";
      return 2;
    }
    int ran = 0;
    bool all_ok = true;
    for (const auto& entry : kAll) {
      const std::string path = r_out.empty() ? "" : with_alg_suffix(r_out, entry.name);
      const auto outcome = run_one(shape, entry.alg, entry.name, elem, op, r_size, r_seed, path);
      if (outcome.st == NAPC_ERR_UNSUPPORTED_SHAPE) {
        std::cout << "alg=" << entry.name << " skipped: " << napc_last_error() << "\n";
        continue;
      }
      if (outcome.st != NAPC_OK) return report_failure(outcome.st);
      ++ran;
      all_ok = all_ok && outcome.oracle_ok;
    }
    if (ran == 0) {
      std::cerr << "error: no algorithm supports nodes=" << r_nodes << " ppn=" << r_ppn << "\n";
      return 2;
    }
    return all_ok ? 0 : 1;
  }

  if (app.got_subcommand(model_cmd)) {
    std::vector<std::int64_t> p_grid;
    std::vector<double> s_grid;
    if (!parse_grid_int(m_pgrid, p_grid)) {
      std::cerr << "error: bad --p-grid '" << m_pgrid << "'\n";
      return 2;
    }
    if (!parse_grid_double(m_sgrid, s_grid)) {
      std::cerr << "error: bad --s-grid '" << m_sgrid << "'\n";
      return 2;
    }
    const std::string algs = m_alg == "all" ? "nap,rd,smp" : m_alg;
    {
      std::istringstream in(algs);
      std::string tok;
      while (std::getline(in, tok, ',')) {
        if (tok != "nap" && tok != "rd" && tok != "smp") {
          std::cerr << "error: no model for algorithm '" << tok << "'\n";
          return 2;
        }
      }
    }
    napc_cost_params params;
    napc_params_defaults(&params);
    std::string params_path = m_params;
    if (params_path.empty()) {
      const char* env = std::getenv("NAPCOLL_PARAMS");
      if (env && *env) params_path = env;
    }
    if (!params_path.empty()) {
      char warn[256] = {0};
      const napc_status st = napc_params_load(params_path.c_str(), &params, warn, sizeof warn);
      if (st != NAPC_OK) return report_failure(st);
      if (warn[0] != '\0') std::cerr << "warning: " << warn << "\n";
    } else {
      std::cerr << "note: no parameter file given, using built-in defaults\n";
    }
    const napc_status st =
        napc_model_sweep_csv(algs.c_str(), p_grid.data(), p_grid.size(), m_ppn, s_grid.data(),
                             s_grid.size(), &params, m_out.c_str());
    if (st != NAPC_OK) return report_failure(st);
    std::cout << "model table written to " << m_out << " (" << p_grid.size() * s_grid.size()
              << " grid points)\n";
    return 0;
  }

  // verify
  const napc_verify_options opts{v_max_ranks, v_inject ? 1 : 0};
  napc_verify_report* report = nullptr;
  const napc_status st = napc_verify_run(&opts, &report);
  if (st != NAPC_OK) return report_failure(st);
  size_t count = 0;
  napc_verify_report_count(report, &count);
  int failed = 0;
  for (size_t i = 0; i < count; ++i) {
    const char* name = nullptr;
    const char* detail = nullptr;
    int passed = 0;
    napc_verify_report_entry(report, i, &name, &passed, &detail);
    std::cout << (passed ? "PASS" : "FAIL") << " " << name << ": " << detail << "\n";
    if (!passed) ++failed;
  }
  std::cout << "verify: " << count << " properties, " << failed << " failed\n";
  int all_ok = 0;
  napc_verify_all_passed(report, &all_ok);
  napc_verify_report_free(report);
  return all_ok ? 0 : 1;
}
