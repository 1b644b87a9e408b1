#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "types.hpp"

namespace napcoll::costmodel {

// All symbols of the postal/split/max-rate models in one place.
struct CostParams {
  double alpha_local = 5e-7;   // intra-node per-message startup, seconds
  double beta_local = 2e-10;   // intra-node per-byte cost, seconds/byte
  double alpha = 3e-6;         // inter-node per-message startup, seconds
  double R_b = 1e9;            // inter-process bandwidth, bytes/second
  double R_N = 4e9;            // injection bandwidth per node, bytes/second
  double gamma = 1e-10;        // seconds per elementwise reduction operation
};

// Illustrative defaults for smoke testing; not fitted to any machine.
CostParams default_params();

// Checks positivity; returns a human-readable warning when alpha_local
// exceeds alpha (allowed but suspicious), empty string otherwise.
std::string validate_params(const CostParams& p);

struct CommVolume {
  double t = 0.0;          // inter-node message count
  double s = 0.0;          // inter-node bytes per message
  double t_local = 0.0;    // intra-node message count
  double s_local = 0.0;    // intra-node bytes
  double c = 0.0;          // reduction operation count
  double ppn_active = 1.0; // processes per node communicating concurrently
};

// T = alpha*t + s/R_b + gamma*c with all traffic charged at inter-node rates.
double postal_cost(const CommVolume& v, const CostParams& p);

// Adds the intra-node alpha_local/beta_local terms; inter-node bandwidth
// term stays s/R_b.
double split_cost(const CommVolume& v, const CostParams& p);

// Split model with the inter-node bandwidth term replaced by the max-rate
// form ppn*s/min(R_N, ppn*R_b); reduces exactly to split_cost whenever
// ppn_active*R_b <= R_N.
double maxrate_cost(const CommVolume& v, const CostParams& p);

// Closed-form per-algorithm models. p and ppn must be powers of two with
// ppn dividing p; n = p/ppn.
double model_rd(std::int64_t p, std::int64_t ppn, double s_bytes, const CostParams& params);
double model_smp(std::int64_t p, std::int64_t ppn, double s_bytes, const CostParams& params);
double model_nap(std::int64_t p, std::int64_t ppn, double s_bytes, const CostParams& params);

// Inter-node step count used by model_nap: ceil(log_ppn(n)), 0 for n == 1.
int model_nap_steps(std::int64_t n, std::int64_t ppn);

struct SweepRow {
  std::int64_t p = 0;
  std::int64_t ppn = 0;
  double s_bytes = 0.0;
  std::string algorithm;  // "nap", "rd", "smp"
  double model_seconds = 0.0;
};

// Dense table over the given grids; rows ordered p-major, then s, then
// algorithm name.
std::vector<SweepRow> sweep(const std::vector<std::string>& algorithms,
                            const std::vector<std::int64_t>& p_grid, std::int64_t ppn,
                            const std::vector<double>& s_grid, const CostParams& params);

// CSV with header `p,ppn,s_bytes,algorithm,model_seconds`, LF endings.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

struct ParamsLoadResult {
  CostParams params;
  std::string warning;  // non-empty when alpha_local > alpha
};

// Flat key-value file: one `key = value` pair per line, keys alpha_local,
// beta_local, alpha, R_b, R_N, gamma, all required; '#' starts a comment.
// Unknown keys are rejected.
ParamsLoadResult parse_params(std::istream& in);
ParamsLoadResult load_params_file(const std::string& path);

}  // namespace napcoll::costmodel
