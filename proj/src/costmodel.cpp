#include "costmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace napcoll::costmodel {
namespace {

bool is_pow2(std::int64_t x) { return x > 0 && (x & (x - 1)) == 0; }

int ilog2(std::int64_t x) {
  int k = 0;
  while ((std::int64_t{1} << k) < x) ++k;
  return k;
}

std::int64_t check_model_shape(std::int64_t p, std::int64_t ppn) {
  if (!is_pow2(p) || !is_pow2(ppn))
    fail(Errc::UnsupportedShape, "cost model: p and ppn must be powers of two");
  if (ppn > p || p % ppn != 0)
    fail(Errc::UnsupportedShape, "cost model: ppn must divide p");
  return p / ppn;
}

// Max-rate bandwidth term for one inter-node message of s bytes sent by
// ppn_active concurrent processes per node. The branch keeps the reduction
// to the split model exact when inter-process bandwidth is achievable.
double maxrate_band(double s, double ppn_active, const CostParams& p) {
  if (ppn_active * p.R_b <= p.R_N) return s / p.R_b;
  return ppn_active * s / p.R_N;
}

void check_volume(const CommVolume& v) {
  if (v.t < 0 || v.s < 0 || v.t_local < 0 || v.s_local < 0 || v.c < 0)
    fail(Errc::InvalidArgument, "cost model: volume fields must be non-negative");
  if (v.ppn_active < 1)
    fail(Errc::InvalidArgument, "cost model: ppn_active must be at least 1");
}

void check_positive(const CostParams& p) {
  if (!(p.alpha_local > 0) || !(p.beta_local > 0) || !(p.alpha > 0) || !(p.R_b > 0) ||
      !(p.R_N > 0) || !(p.gamma > 0))
    fail(Errc::InvalidArgument, "cost model: parameters must all be strictly positive");
}

}  // namespace

CostParams default_params() { return CostParams{}; }

std::string validate_params(const CostParams& p) {
  check_positive(p);
  if (p.alpha_local > p.alpha)
    return "warning: alpha_local exceeds alpha; intra-node messages modeled as more "
           "expensive than inter-node";
  return "";
}

double postal_cost(const CommVolume& v, const CostParams& p) {
  check_volume(v);
  check_positive(p);
  return p.alpha * (v.t + v.t_local) + (v.s + v.s_local) / p.R_b + p.gamma * v.c;
}

double split_cost(const CommVolume& v, const CostParams& p) {
  check_volume(v);
  check_positive(p);
  return p.alpha_local * v.t_local + p.beta_local * v.s_local + p.alpha * v.t + v.s / p.R_b +
         p.gamma * v.c;
}

double maxrate_cost(const CommVolume& v, const CostParams& p) {
  check_volume(v);
  check_positive(p);
  return p.alpha_local * v.t_local + p.beta_local * v.s_local + p.alpha * v.t +
         maxrate_band(v.s, v.ppn_active, p) + p.gamma * v.c;
}

int model_nap_steps(std::int64_t n, std::int64_t ppn) {
  if (n <= 1) return 0;
  if (ppn < 2) fail(Errc::UnsupportedShape, "cost model: nap requires ppn >= 2 for n > 1");
  int steps = 0;
  std::int64_t reach = 1;
  while (reach < n) {
    reach *= ppn;
    ++steps;
  }
  return steps;
}

double model_rd(std::int64_t p, std::int64_t ppn, double s_bytes, const CostParams& params) {
  const std::int64_t n = check_model_shape(p, ppn);
  check_positive(params);
  if (s_bytes < 0) fail(Errc::InvalidArgument, "cost model: s must be non-negative");
  const double lppn = ilog2(ppn);
  const double ln = ilog2(n);
  const double lp = ilog2(p);
  return (params.alpha_local + params.beta_local * s_bytes) * lppn +
         (params.alpha + maxrate_band(s_bytes, static_cast<double>(ppn), params)) * ln +
         params.gamma * s_bytes * lp;
}

double model_smp(std::int64_t p, std::int64_t ppn, double s_bytes, const CostParams& params) {
  const std::int64_t n = check_model_shape(p, ppn);
  check_positive(params);
  if (s_bytes < 0) fail(Errc::InvalidArgument, "cost model: s must be non-negative");
  const double lppn = ilog2(ppn);
  const double ln = ilog2(n);
  const double lp = ilog2(p);
  return (params.alpha_local + params.beta_local * s_bytes) * lppn +
         (params.alpha + s_bytes / params.R_b) * ln + params.gamma * s_bytes * lp;
}

double model_nap(std::int64_t p, std::int64_t ppn, double s_bytes, const CostParams& params) {
  const std::int64_t n = check_model_shape(p, ppn);
  check_positive(params);
  if (s_bytes < 0) fail(Errc::InvalidArgument, "cost model: s must be non-negative");
  const double lp = ilog2(p);
  const double steps = model_nap_steps(n, ppn);
  return (params.alpha_local + params.beta_local * s_bytes) * lp +
         (params.alpha + maxrate_band(s_bytes, static_cast<double>(ppn), params)) * steps +
         params.gamma * s_bytes * (lp + steps);
}

std::vector<SweepRow> sweep(const std::vector<std::string>& algorithms,
                            const std::vector<std::int64_t>& p_grid, std::int64_t ppn,
                            const std::vector<double>& s_grid, const CostParams& params) {
  if (algorithms.empty() || p_grid.empty() || s_grid.empty())
    fail(Errc::InvalidArgument, "sweep: grids must be non-empty");
  std::vector<std::string> algs = algorithms;
  std::sort(algs.begin(), algs.end());
  std::vector<SweepRow> rows;
  rows.reserve(algs.size() * p_grid.size() * s_grid.size());
  for (std::int64_t p : p_grid) {
    for (double s : s_grid) {
      for (const auto& alg : algs) {
        SweepRow row;
        row.p = p;
        row.ppn = ppn;
        row.s_bytes = s;
        row.algorithm = alg;
        if (alg == "rd")
          row.model_seconds = model_rd(p, ppn, s, params);
        else if (alg == "smp")
          row.model_seconds = model_smp(p, ppn, s, params);
        else if (alg == "nap")
          row.model_seconds = model_nap(p, ppn, s, params);
        else
          fail(Errc::InvalidArgument, "sweep: unknown algorithm '" + alg + "'");
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "p,ppn,s_bytes,algorithm,model_seconds\n";
  char num[64];
  for (const auto& r : rows) {
    std::snprintf(num, sizeof num, "%.17g", r.s_bytes);
    out << r.p << ',' << r.ppn << ',' << num << ',' << r.algorithm << ',';
    std::snprintf(num, sizeof num, "%.12e", r.model_seconds);
    out << num << '\n';
  }
}

ParamsLoadResult parse_params(std::istream& in) {
  static const std::map<std::string, double CostParams::*> kKeys = {
      {"alpha_local", &CostParams::alpha_local}, {"beta_local", &CostParams::beta_local},
      {"alpha", &CostParams::alpha},             {"R_b", &CostParams::R_b},
      {"R_N", &CostParams::R_N},                 {"gamma", &CostParams::gamma},
  };
  CostParams params;
  std::map<std::string, bool> seen;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::InvalidArgument,
           "params: line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = kKeys.find(key);
    if (it == kKeys.end())
      fail(Errc::InvalidArgument,
           "params: line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (seen[key])
      fail(Errc::InvalidArgument,
           "params: line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    std::size_t used = 0;
    double parsed = 0.0;
    try {
      parsed = std::stod(value, &used);
    } catch (const std::exception&) {
      fail(Errc::InvalidArgument,
           "params: line " + std::to_string(lineno) + ": value for '" + key +
               "' is not a number");
    }
    if (used != value.size())
      fail(Errc::InvalidArgument,
           "params: line " + std::to_string(lineno) + ": trailing junk after value for '" + key +
               "'");
    if (!(parsed > 0))
      fail(Errc::InvalidArgument,
           "params: line " + std::to_string(lineno) + ": '" + key + "' must be strictly positive");
    params.*(it->second) = parsed;
    seen[key] = true;
  }
  for (const auto& [key, member] : kKeys) {
    (void)member;
    if (!seen[key]) fail(Errc::InvalidArgument, "params: missing required key '" + key + "'");
  }
  ParamsLoadResult res;
  res.params = params;
  res.warning = validate_params(params);
  return res;
}

ParamsLoadResult load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "params: cannot open '" + path + "'");
  return parse_params(in);
}

}  // namespace napcoll::costmodel
