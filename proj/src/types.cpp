#include "types.hpp"

#include <algorithm>
#include <limits>

namespace napcoll {

ReductionBuffer identity_buffer(ElementKind kind, ReduceOp op, std::size_t n) {
  if (kind == ElementKind::Int64) {
    std::int64_t id = 0;
    if (op == ReduceOp::Max) id = std::numeric_limits<std::int64_t>::min();
    if (op == ReduceOp::Min) id = std::numeric_limits<std::int64_t>::max();
    return ReductionBuffer::of_ints(std::vector<std::int64_t>(n, id));
  }
  double id = 0.0;
  if (op == ReduceOp::Max) id = -std::numeric_limits<double>::infinity();
  if (op == ReduceOp::Min) id = std::numeric_limits<double>::infinity();
  return ReductionBuffer::of_floats(std::vector<double>(n, id));
}

ReductionBuffer merge(const ReductionBuffer& received, const ReductionBuffer& own, ReduceOp op) {
  if (received.kind != own.kind || received.size() != own.size())
    fail(Errc::Protocol, "merge: mismatched buffer kind or length");
  ReductionBuffer out = own;
  if (own.kind == ElementKind::Int64) {
    for (std::size_t j = 0; j < own.ints.size(); ++j) {
      switch (op) {
        case ReduceOp::Sum: out.ints[j] = received.ints[j] + own.ints[j]; break;
        case ReduceOp::Max: out.ints[j] = std::max(received.ints[j], own.ints[j]); break;
        case ReduceOp::Min: out.ints[j] = std::min(received.ints[j], own.ints[j]); break;
      }
    }
  } else {
    for (std::size_t j = 0; j < own.floats.size(); ++j) {
      switch (op) {
        case ReduceOp::Sum: out.floats[j] = received.floats[j] + own.floats[j]; break;
        case ReduceOp::Max: out.floats[j] = std::max(received.floats[j], own.floats[j]); break;
        case ReduceOp::Min: out.floats[j] = std::min(received.floats[j], own.floats[j]); break;
      }
    }
  }
  return out;
}

}  // namespace napcoll
