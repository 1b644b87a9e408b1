/* napcoll: modeled node-aware allreduce collectives.
 *
 * C interface to the simulation core. All functions return a napc_status;
 * outputs travel through pointer arguments. Handles are opaque and must be
 * released with the matching _free call. The last failure message for the
 * calling thread is available via napc_last_error().
 */
#ifndef NAPCOLL_H
#define NAPCOLL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define NAPC_API __declspec(dllexport)
#else
#define NAPC_API __attribute__((visibility("default")))
#endif

typedef enum napc_status {
  NAPC_OK = 0,
  NAPC_ERR_INVALID_ARGUMENT = 1,
  NAPC_ERR_UNSUPPORTED_SHAPE = 2,
  NAPC_ERR_PROTOCOL = 3,
  NAPC_ERR_DEADLOCK = 4,
  NAPC_ERR_IO = 5
} napc_status;

NAPC_API const char* napc_status_string(napc_status st);

/* Message for the most recent failing call on this thread; empty string if
 * none. The pointer stays valid until the thread's next failing call. */
NAPC_API const char* napc_last_error(void);

/* ---- topology ---- */

typedef struct napc_shape {
  int64_t num_nodes;
  int64_t ppn;
  int64_t socket_size; /* 0 picks the default ppn/2 (minimum 1) */
} napc_shape;

NAPC_API napc_status napc_total_ranks(const napc_shape* shape, int64_t* out);
NAPC_API napc_status napc_node_of(const napc_shape* shape, int64_t rank, int64_t* out);
NAPC_API napc_status napc_local_rank_of(const napc_shape* shape, int64_t rank, int64_t* out);

/* Inter-node steps the node-aware schedule needs: ceil(log_ppn(n)). */
NAPC_API napc_status napc_internode_steps(const napc_shape* shape, int* out);

typedef enum napc_action_kind {
  NAPC_ACTION_EXCHANGE = 0,
  NAPC_ACTION_IDLE = 1,
  NAPC_ACTION_EXTRA_SEND = 2,
  NAPC_ACTION_EXTRA_RECV = 3
} napc_action_kind;

/* Pairing rule for one rank at one inter-node step. For EXCHANGE and
 * EXTRA_RECV, *partner_out is the peer; otherwise it is -1. */
NAPC_API napc_status napc_nap_partner(const napc_shape* shape, int64_t rank, int step,
                                      napc_action_kind* kind_out, int64_t* partner_out);

/* Targets of an EXTRA_SEND action. Writes up to cap entries into targets and
 * always reports the full count in *count_out; the call succeeds with a
 * truncated write when cap is too small. Ranks with other action kinds
 * report zero targets. */
NAPC_API napc_status napc_nap_partner_targets(const napc_shape* shape, int64_t rank, int step,
                                              int64_t* targets, size_t cap, size_t* count_out);

/* ---- collective simulation ---- */

typedef enum napc_alg {
  NAPC_ALG_TREE = 0,
  NAPC_ALG_RD = 1,
  NAPC_ALG_SMP = 2,
  NAPC_ALG_NAP = 3
} napc_alg;

typedef enum napc_elem { NAPC_ELEM_I64 = 0, NAPC_ELEM_F64 = 1 } napc_elem;

typedef enum napc_op { NAPC_OP_SUM = 0, NAPC_OP_MAX = 1, NAPC_OP_MIN = 2 } napc_op;

typedef struct napc_run napc_run;

/* Simulates one allreduce over the modeled cluster. Inputs are generated
 * from the seed (element j of rank r derives from seed^r^j). The run owns
 * its trace and per-rank results until napc_run_free. */
NAPC_API napc_status napc_run_collective(const napc_shape* shape, napc_alg alg, napc_elem elem,
                                         napc_op op, int64_t size_elems, uint64_t seed,
                                         napc_run** out);
NAPC_API void napc_run_free(napc_run* run);

/* 1 when every rank's buffer equals the serial reduction of the generated
 * inputs (exact for i64; p*s*2^-48 relative tolerance for f64 sums). */
NAPC_API napc_status napc_run_oracle_match(const napc_run* run, int* out);

/* First rank whose buffer differs from the serial reduction; -1 on match. */
NAPC_API napc_status napc_run_first_mismatch(const napc_run* run, int64_t* out);

NAPC_API napc_status napc_run_max_internode_msgs(const napc_run* run, int64_t* out);
NAPC_API napc_status napc_run_internode_steps(const napc_run* run, int* out);
NAPC_API napc_status napc_run_total_bytes(const napc_run* run, int64_t* internode_out,
                                          int64_t* intranode_out);
NAPC_API napc_status napc_run_message_count(const napc_run* run, int64_t* out);
NAPC_API napc_status napc_run_max_flops(const napc_run* run, int64_t* out);

/* Writes the trace as CSV (phase,src,dst,bytes,locality). */
NAPC_API napc_status napc_run_write_trace_csv(const napc_run* run, const char* path);

/* ---- cost models ---- */

typedef struct napc_cost_params {
  double alpha_local; /* intra-node latency, seconds */
  double beta_local;  /* intra-node seconds per byte */
  double alpha;       /* inter-node latency, seconds */
  double R_b;         /* per-process injection bandwidth, bytes/second */
  double R_N;         /* per-node NIC bandwidth, bytes/second */
  double gamma;       /* seconds per reduced byte */
} napc_cost_params;

NAPC_API void napc_params_defaults(napc_cost_params* out);

/* Parses a key = value parameter file. All six keys are required. A
 * non-fatal warning (alpha_local > alpha) is copied into warn_buf when
 * provided. */
NAPC_API napc_status napc_params_load(const char* path, napc_cost_params* out, char* warn_buf,
                                      size_t warn_cap);

typedef struct napc_comm_volume {
  double t;          /* inter-node message count on the critical path */
  double s;          /* inter-node bytes */
  double t_local;    /* intra-node message count */
  double s_local;    /* intra-node bytes */
  double c;          /* reduced bytes (computation) */
  double ppn_active; /* processes per node injecting simultaneously */
} napc_comm_volume;

NAPC_API napc_status napc_cost_postal(const napc_comm_volume* v, const napc_cost_params* p,
                                      double* out);
NAPC_API napc_status napc_cost_split(const napc_comm_volume* v, const napc_cost_params* p,
                                     double* out);
NAPC_API napc_status napc_cost_maxrate(const napc_comm_volume* v, const napc_cost_params* p,
                                       double* out);

/* Whole-collective model time for alg in {NAPC_ALG_RD, NAPC_ALG_SMP,
 * NAPC_ALG_NAP}; p_total and ppn must be powers of two with ppn | p_total. */
NAPC_API napc_status napc_model_eval(napc_alg alg, int64_t p_total, int64_t ppn, double s_bytes,
                                     const napc_cost_params* params, double* out);

/* Dense model sweep written as CSV (p,ppn,s_bytes,algorithm,model_seconds).
 * algorithms is a comma-separated subset of "nap,rd,smp". */
NAPC_API napc_status napc_model_sweep_csv(const char* algorithms, const int64_t* p_grid,
                                          size_t p_count, int64_t ppn, const double* s_grid,
                                          size_t s_count, const napc_cost_params* params,
                                          const char* path);

/* ---- property verification ---- */

typedef struct napc_verify_options {
  int64_t max_ranks;       /* cap on enumerated/simulated total ranks */
  int inject_pairing_bug;  /* nonzero corrupts the pairing rule on purpose */
} napc_verify_options;

typedef struct napc_verify_report napc_verify_report;

NAPC_API napc_status napc_verify_run(const napc_verify_options* opts, napc_verify_report** out);
NAPC_API void napc_verify_report_free(napc_verify_report* report);
NAPC_API napc_status napc_verify_report_count(const napc_verify_report* report, size_t* out);
NAPC_API napc_status napc_verify_report_entry(const napc_verify_report* report, size_t index,
                                              const char** name_out, int* passed_out,
                                              const char** detail_out);
NAPC_API napc_status napc_verify_all_passed(const napc_verify_report* report, int* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* NAPCOLL_H */
