#include "experiment.hpp"

#include <cmath>

namespace napcoll::experiment {

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Tree: return "tree";
    case Algorithm::RecursiveDoubling: return "rd";
    case Algorithm::Smp: return "smp";
    case Algorithm::Nap: return "nap";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "tree") return Algorithm::Tree;
  if (name == "rd") return Algorithm::RecursiveDoubling;
  if (name == "smp") return Algorithm::Smp;
  if (name == "nap") return Algorithm::Nap;
  fail(Errc::InvalidArgument, "unknown algorithm '" + name + "'");
}

ReductionBuffer make_input(int rank, std::int64_t size, ElementKind kind, std::uint64_t seed) {
  if (rank < 0) fail(Errc::InvalidArgument, "input generator: rank must be non-negative");
  if (size < 0) fail(Errc::InvalidArgument, "input generator: size must be non-negative");
  constexpr std::uint64_t kMask = (std::uint64_t{1} << 31) - 1;
  constexpr double kScale = 1.0 / static_cast<double>(std::uint64_t{1} << 31);
  if (kind == ElementKind::Int64) {
    std::vector<std::int64_t> vals(static_cast<std::size_t>(size));
    for (std::int64_t j = 0; j < size; ++j)
      vals[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(
          (seed ^ static_cast<std::uint64_t>(rank) ^ static_cast<std::uint64_t>(j)) & kMask);
    return ReductionBuffer::of_ints(std::move(vals));
  }
  std::vector<double> vals(static_cast<std::size_t>(size));
  for (std::int64_t j = 0; j < size; ++j)
    vals[static_cast<std::size_t>(j)] =
        static_cast<double>(
            (seed ^ static_cast<std::uint64_t>(rank) ^ static_cast<std::uint64_t>(j)) & kMask) *
        kScale;
  return ReductionBuffer::of_floats(std::move(vals));
}

std::vector<ReductionBuffer> make_inputs(const topology::ClusterShape& shape, std::int64_t size,
                                         ElementKind kind, std::uint64_t seed) {
  std::vector<ReductionBuffer> inputs;
  const std::int64_t p = shape.total_ranks();
  inputs.reserve(static_cast<std::size_t>(p));
  for (std::int64_t r = 0; r < p; ++r)
    inputs.push_back(make_input(static_cast<int>(r), size, kind, seed));
  return inputs;
}

ReductionBuffer serial_reduce(const std::vector<ReductionBuffer>& inputs, ReduceOp op) {
  if (inputs.empty()) fail(Errc::InvalidArgument, "serial reduce: no inputs");
  ReductionBuffer acc = inputs[0];
  for (std::size_t r = 1; r < inputs.size(); ++r) acc = merge(acc, inputs[r], op);
  return acc;
}

collectives::CollectiveResult run_algorithm(Algorithm alg,
                                            const std::vector<ReductionBuffer>& inputs,
                                            ReduceOp op, const topology::ClusterShape& shape) {
  switch (alg) {
    case Algorithm::Tree: return collectives::run_tree(inputs, op, shape);
    case Algorithm::RecursiveDoubling: return collectives::run_recursive_doubling(inputs, op, shape);
    case Algorithm::Smp: return collectives::run_smp(inputs, op, shape);
    case Algorithm::Nap: return collectives::run_nap(inputs, op, shape);
  }
  fail(Errc::InvalidArgument, "unknown algorithm");
}

OracleVerdict compare_exact(const std::vector<ReductionBuffer>& outputs,
                            const ReductionBuffer& expected) {
  for (std::size_t r = 0; r < outputs.size(); ++r) {
    if (!(outputs[r] == expected)) return {false, static_cast<int>(r)};
  }
  return {true, -1};
}

OracleVerdict compare_float_tolerance(const std::vector<ReductionBuffer>& outputs,
                                      const ReductionBuffer& expected, std::int64_t p) {
  if (expected.kind != ElementKind::Float64)
    fail(Errc::InvalidArgument, "float tolerance comparison requires float64 buffers");
  const double rel = static_cast<double>(p) * static_cast<double>(expected.size()) *
                     std::ldexp(1.0, -48);
  for (std::size_t r = 0; r < outputs.size(); ++r) {
    const auto& out = outputs[r];
    if (out.kind != expected.kind || out.size() != expected.size())
      return {false, static_cast<int>(r)};
    for (std::size_t j = 0; j < out.floats.size(); ++j) {
      const double want = expected.floats[j];
      if (std::fabs(out.floats[j] - want) > rel * std::fabs(want))
        return {false, static_cast<int>(r)};
    }
  }
  return {true, -1};
}

}  // namespace napcoll::experiment
