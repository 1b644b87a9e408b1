#include "napcoll/napcoll.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "collectives.hpp"
#include "costmodel.hpp"
#include "experiment.hpp"
#include "simnet.hpp"
#include "topology.hpp"
#include "types.hpp"
#include "verify.hpp"

using namespace napcoll;

namespace {

thread_local std::string t_last_error;

void set_error(const std::string& msg) { t_last_error = msg; }

napc_status to_status(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return NAPC_ERR_INVALID_ARGUMENT;
    case Errc::UnsupportedShape: return NAPC_ERR_UNSUPPORTED_SHAPE;
    case Errc::Protocol: return NAPC_ERR_PROTOCOL;
    case Errc::Deadlock: return NAPC_ERR_DEADLOCK;
    case Errc::Io: return NAPC_ERR_IO;
  }
  return NAPC_ERR_INVALID_ARGUMENT;
}

template <typename F>
napc_status guarded(F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    set_error(e.what());
    return to_status(e.code());
  } catch (const std::exception& e) {
    set_error(e.what());
    return NAPC_ERR_INVALID_ARGUMENT;
  }
}

napc_status null_arg(const char* name) {
  set_error(std::string(name) + " must not be null");
  return NAPC_ERR_INVALID_ARGUMENT;
}

topology::ClusterShape to_shape(const napc_shape& s) {
  constexpr std::int64_t kMax = std::numeric_limits<int>::max();
  if (s.num_nodes < 1 || s.num_nodes > kMax || s.ppn < 1 || s.ppn > kMax ||
      s.socket_size > kMax)
    fail(Errc::InvalidArgument, "shape fields out of range");
  return topology::ClusterShape::make(static_cast<int>(s.num_nodes), static_cast<int>(s.ppn),
                                      s.socket_size > 0 ? static_cast<int>(s.socket_size) : 0);
}

int checked_rank(std::int64_t rank, const topology::ClusterShape& shape) {
  if (rank < 0 || rank >= shape.total_ranks())
    fail(Errc::InvalidArgument, "rank out of range for the shape");
  return static_cast<int>(rank);
}

experiment::Algorithm to_algorithm(napc_alg alg) {
  switch (alg) {
    case NAPC_ALG_TREE: return experiment::Algorithm::Tree;
    case NAPC_ALG_RD: return experiment::Algorithm::RecursiveDoubling;
    case NAPC_ALG_SMP: return experiment::Algorithm::Smp;
    case NAPC_ALG_NAP: return experiment::Algorithm::Nap;
  }
  fail(Errc::InvalidArgument, "unknown algorithm id");
}

ElementKind to_elem(napc_elem e) {
  switch (e) {
    case NAPC_ELEM_I64: return ElementKind::Int64;
    case NAPC_ELEM_F64: return ElementKind::Float64;
  }
  fail(Errc::InvalidArgument, "unknown element kind id");
}

ReduceOp to_op(napc_op op) {
  switch (op) {
    case NAPC_OP_SUM: return ReduceOp::Sum;
    case NAPC_OP_MAX: return ReduceOp::Max;
    case NAPC_OP_MIN: return ReduceOp::Min;
  }
  fail(Errc::InvalidArgument, "unknown reduce op id");
}

costmodel::CostParams to_params(const napc_cost_params& p) {
  costmodel::CostParams out;
  out.alpha_local = p.alpha_local;
  out.beta_local = p.beta_local;
  out.alpha = p.alpha;
  out.R_b = p.R_b;
  out.R_N = p.R_N;
  out.gamma = p.gamma;
  return out;
}

costmodel::CommVolume to_volume(const napc_comm_volume& v) {
  costmodel::CommVolume out;
  out.t = v.t;
  out.s = v.s;
  out.t_local = v.t_local;
  out.s_local = v.s_local;
  out.c = v.c;
  out.ppn_active = v.ppn_active;
  return out;
}

}  // namespace

struct napc_run {
  topology::ClusterShape shape;
  collectives::CollectiveResult result;
  bool oracle_ok = false;
  std::int64_t first_mismatch = -1;
};

struct napc_verify_report {
  std::vector<verify::PropertyResult> results;
};

extern "C" {

const char* napc_status_string(napc_status st) {
  switch (st) {
    case NAPC_OK: return "ok";
    case NAPC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NAPC_ERR_UNSUPPORTED_SHAPE: return "unsupported shape";
    case NAPC_ERR_PROTOCOL: return "protocol violation";
    case NAPC_ERR_DEADLOCK: return "deadlock";
    case NAPC_ERR_IO: return "io error";
  }
  return "unknown status";
}

const char* napc_last_error(void) { return t_last_error.c_str(); }

napc_status napc_total_ranks(const napc_shape* shape, int64_t* out) {
  if (!shape) return null_arg("shape");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = to_shape(*shape).total_ranks();
    return NAPC_OK;
  });
}

napc_status napc_node_of(const napc_shape* shape, int64_t rank, int64_t* out) {
  if (!shape) return null_arg("shape");
  if (!out) return null_arg("out");
  return guarded([&] {
    const auto s = to_shape(*shape);
    *out = topology::node_of(checked_rank(rank, s), s);
    return NAPC_OK;
  });
}

napc_status napc_local_rank_of(const napc_shape* shape, int64_t rank, int64_t* out) {
  if (!shape) return null_arg("shape");
  if (!out) return null_arg("out");
  return guarded([&] {
    const auto s = to_shape(*shape);
    *out = topology::local_rank_of(checked_rank(rank, s), s);
    return NAPC_OK;
  });
}

napc_status napc_internode_steps(const napc_shape* shape, int* out) {
  if (!shape) return null_arg("shape");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = topology::num_internode_steps(to_shape(*shape));
    return NAPC_OK;
  });
}

napc_status napc_nap_partner(const napc_shape* shape, int64_t rank, int step,
                             napc_action_kind* kind_out, int64_t* partner_out) {
  if (!shape) return null_arg("shape");
  if (!kind_out) return null_arg("kind_out");
  if (!partner_out) return null_arg("partner_out");
  return guarded([&] {
    const auto s = to_shape(*shape);
    const auto act = topology::nap_partner(checked_rank(rank, s), step, s);
    switch (act.kind) {
      case topology::ActionKind::Exchange: *kind_out = NAPC_ACTION_EXCHANGE; break;
      case topology::ActionKind::Idle: *kind_out = NAPC_ACTION_IDLE; break;
      case topology::ActionKind::ExtraSend: *kind_out = NAPC_ACTION_EXTRA_SEND; break;
      case topology::ActionKind::ExtraRecv: *kind_out = NAPC_ACTION_EXTRA_RECV; break;
    }
    *partner_out = act.partner;
    return NAPC_OK;
  });
}

napc_status napc_nap_partner_targets(const napc_shape* shape, int64_t rank, int step,
                                     int64_t* targets, size_t cap, size_t* count_out) {
  if (!shape) return null_arg("shape");
  if (!count_out) return null_arg("count_out");
  if (cap > 0 && !targets) return null_arg("targets");
  return guarded([&] {
    const auto s = to_shape(*shape);
    const auto act = topology::nap_partner(checked_rank(rank, s), step, s);
    *count_out = act.extra_targets.size();
    const size_t n = std::min(cap, act.extra_targets.size());
    for (size_t i = 0; i < n; ++i) targets[i] = act.extra_targets[i];
    return NAPC_OK;
  });
}

napc_status napc_run_collective(const napc_shape* shape, napc_alg alg, napc_elem elem, napc_op op,
                                int64_t size_elems, uint64_t seed, napc_run** out) {
  if (!shape) return null_arg("shape");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    if (size_elems < 1) fail(Errc::InvalidArgument, "size_elems must be at least 1");
    const auto s = to_shape(*shape);
    const auto algo = to_algorithm(alg);
    const auto kind = to_elem(elem);
    const auto rop = to_op(op);
    const auto inputs = experiment::make_inputs(s, size_elems, kind, seed);
    auto run = std::make_unique<napc_run>();
    run->shape = s;
    run->result = experiment::run_algorithm(algo, inputs, rop, s);
    const auto expected = experiment::serial_reduce(inputs, rop);
    const auto verdict =
        (kind == ElementKind::Float64 && rop == ReduceOp::Sum)
            ? experiment::compare_float_tolerance(run->result.buffers, expected, s.total_ranks())
            : experiment::compare_exact(run->result.buffers, expected);
    run->oracle_ok = verdict.match;
    run->first_mismatch = verdict.match ? -1 : verdict.first_mismatch_rank;
    *out = run.release();
    return NAPC_OK;
  });
}

void napc_run_free(napc_run* run) { delete run; }

napc_status napc_run_oracle_match(const napc_run* run, int* out) {
  if (!run) return null_arg("run");
  if (!out) return null_arg("out");
  *out = run->oracle_ok ? 1 : 0;
  return NAPC_OK;
}

napc_status napc_run_first_mismatch(const napc_run* run, int64_t* out) {
  if (!run) return null_arg("run");
  if (!out) return null_arg("out");
  *out = run->first_mismatch;
  return NAPC_OK;
}

napc_status napc_run_max_internode_msgs(const napc_run* run, int64_t* out) {
  if (!run) return null_arg("run");
  if (!out) return null_arg("out");
  *out = run->result.trace.max_internode_msgs_per_rank;
  return NAPC_OK;
}

napc_status napc_run_internode_steps(const napc_run* run, int* out) {
  if (!run) return null_arg("run");
  if (!out) return null_arg("out");
  *out = run->result.trace.internode_step_count;
  return NAPC_OK;
}

napc_status napc_run_total_bytes(const napc_run* run, int64_t* internode_out,
                                 int64_t* intranode_out) {
  if (!run) return null_arg("run");
  if (!internode_out) return null_arg("internode_out");
  if (!intranode_out) return null_arg("intranode_out");
  *internode_out = run->result.trace.total_internode_bytes;
  *intranode_out = run->result.trace.total_intranode_bytes;
  return NAPC_OK;
}

napc_status napc_run_message_count(const napc_run* run, int64_t* out) {
  if (!run) return null_arg("run");
  if (!out) return null_arg("out");
  *out = static_cast<int64_t>(run->result.trace.records.size());
  return NAPC_OK;
}

napc_status napc_run_max_flops(const napc_run* run, int64_t* out) {
  if (!run) return null_arg("run");
  if (!out) return null_arg("out");
  int64_t best = 0;
  for (const auto f : run->result.flops_per_rank) best = std::max(best, f);
  *out = best;
  return NAPC_OK;
}

napc_status napc_run_write_trace_csv(const napc_run* run, const char* path) {
  if (!run) return null_arg("run");
  if (!path) return null_arg("path");
  return guarded([&] {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::Io, std::string("cannot open for writing: ") + path);
    simnet::write_trace_csv(out, run->result.trace.records);
    out.flush();
    if (!out) fail(Errc::Io, std::string("write failed: ") + path);
    return NAPC_OK;
  });
}

void napc_params_defaults(napc_cost_params* out) {
  if (!out) return;
  const auto p = costmodel::default_params();
  out->alpha_local = p.alpha_local;
  out->beta_local = p.beta_local;
  out->alpha = p.alpha;
  out->R_b = p.R_b;
  out->R_N = p.R_N;
  out->gamma = p.gamma;
}

napc_status napc_params_load(const char* path, napc_cost_params* out, char* warn_buf,
                             size_t warn_cap) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    const auto res = costmodel::load_params_file(path);
    out->alpha_local = res.params.alpha_local;
    out->beta_local = res.params.beta_local;
    out->alpha = res.params.alpha;
    out->R_b = res.params.R_b;
    out->R_N = res.params.R_N;
    out->gamma = res.params.gamma;
    if (warn_buf && warn_cap > 0) std::snprintf(warn_buf, warn_cap, "%s", res.warning.c_str());
    return NAPC_OK;
  });
}

napc_status napc_cost_postal(const napc_comm_volume* v, const napc_cost_params* p, double* out) {
  if (!v) return null_arg("v");
  if (!p) return null_arg("p");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = costmodel::postal_cost(to_volume(*v), to_params(*p));
    return NAPC_OK;
  });
}

napc_status napc_cost_split(const napc_comm_volume* v, const napc_cost_params* p, double* out) {
  if (!v) return null_arg("v");
  if (!p) return null_arg("p");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = costmodel::split_cost(to_volume(*v), to_params(*p));
    return NAPC_OK;
  });
}

napc_status napc_cost_maxrate(const napc_comm_volume* v, const napc_cost_params* p, double* out) {
  if (!v) return null_arg("v");
  if (!p) return null_arg("p");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = costmodel::maxrate_cost(to_volume(*v), to_params(*p));
    return NAPC_OK;
  });
}

napc_status napc_model_eval(napc_alg alg, int64_t p_total, int64_t ppn, double s_bytes,
                            const napc_cost_params* params, double* out) {
  if (!params) return null_arg("params");
  if (!out) return null_arg("out");
  return guarded([&] {
    const auto prm = to_params(*params);
    switch (alg) {
      case NAPC_ALG_RD: *out = costmodel::model_rd(p_total, ppn, s_bytes, prm); break;
      case NAPC_ALG_SMP: *out = costmodel::model_smp(p_total, ppn, s_bytes, prm); break;
      case NAPC_ALG_NAP: *out = costmodel::model_nap(p_total, ppn, s_bytes, prm); break;
      default: fail(Errc::InvalidArgument, "no closed-form model for this algorithm");
    }
    return NAPC_OK;
  });
}

napc_status napc_model_sweep_csv(const char* algorithms, const int64_t* p_grid, size_t p_count,
                                 int64_t ppn, const double* s_grid, size_t s_count,
                                 const napc_cost_params* params, const char* path) {
  if (!algorithms) return null_arg("algorithms");
  if (!p_grid) return null_arg("p_grid");
  if (!s_grid) return null_arg("s_grid");
  if (!params) return null_arg("params");
  if (!path) return null_arg("path");
  return guarded([&] {
    if (p_count == 0 || s_count == 0)
      fail(Errc::InvalidArgument, "p_grid and s_grid must be non-empty");
    std::vector<std::string> algs;
    std::string tok;
    std::istringstream in(algorithms);
    while (std::getline(in, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      const auto e = tok.find_last_not_of(" \t");
      if (b == std::string::npos) fail(Errc::InvalidArgument, "empty algorithm name in list");
      algs.push_back(tok.substr(b, e - b + 1));
    }
    if (algs.empty()) fail(Errc::InvalidArgument, "empty algorithm list");
    const std::vector<std::int64_t> pg(p_grid, p_grid + p_count);
    const std::vector<double> sg(s_grid, s_grid + s_count);
    const auto rows = costmodel::sweep(algs, pg, ppn, sg, to_params(*params));
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::Io, std::string("cannot open for writing: ") + path);
    costmodel::write_sweep_csv(out, rows);
    out.flush();
    if (!out) fail(Errc::Io, std::string("write failed: ") + path);
    return NAPC_OK;
  });
}

napc_status napc_verify_run(const napc_verify_options* opts, napc_verify_report** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    verify::Options vo;
    if (opts) {
      if (opts->max_ranks < 4) fail(Errc::InvalidArgument, "max_ranks must be at least 4");
      vo.max_ranks = opts->max_ranks;
      vo.inject_pairing_bug = opts->inject_pairing_bug != 0;
    }
    auto rep = std::make_unique<napc_verify_report>();
    rep->results = verify::run_all(vo);
    *out = rep.release();
    return NAPC_OK;
  });
}

void napc_verify_report_free(napc_verify_report* report) { delete report; }

napc_status napc_verify_report_count(const napc_verify_report* report, size_t* out) {
  if (!report) return null_arg("report");
  if (!out) return null_arg("out");
  *out = report->results.size();
  return NAPC_OK;
}

napc_status napc_verify_report_entry(const napc_verify_report* report, size_t index,
                                     const char** name_out, int* passed_out,
                                     const char** detail_out) {
  if (!report) return null_arg("report");
  if (!name_out) return null_arg("name_out");
  if (!passed_out) return null_arg("passed_out");
  if (!detail_out) return null_arg("detail_out");
  if (index >= report->results.size()) {
    set_error("report entry index out of range");
    return NAPC_ERR_INVALID_ARGUMENT;
  }
  const auto& r = report->results[index];
  *name_out = r.name.c_str();
  *passed_out = r.passed ? 1 : 0;
  *detail_out = r.detail.c_str();
  return NAPC_OK;
}

napc_status napc_verify_all_passed(const napc_verify_report* report, int* out) {
  if (!report) return null_arg("report");
  if (!out) return null_arg("out");
  *out = verify::all_passed(report->results) ? 1 : 0;
  return NAPC_OK;
}

}  // extern "C"
