#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace napcoll {

enum class Errc {
  InvalidArgument,
  UnsupportedShape,
  Protocol,
  Deadlock,
  Io,
};

// Library-wide error type; carries a machine-readable code so the C API
// can map failures onto status codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

enum class ElementKind { Int64, Float64 };
enum class ReduceOp { Sum, Max, Min };

inline const char* to_string(ElementKind k) { return k == ElementKind::Int64 ? "i64" : "f64"; }
inline const char* to_string(ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum: return "sum";
    case ReduceOp::Max: return "max";
    default: return "min";
  }
}

// The payload of one rank in a collective: a flat sequence of elements, all
// reduced elementwise. Both element kinds are 8 bytes wide.
struct ReductionBuffer {
  ElementKind kind = ElementKind::Int64;
  std::vector<std::int64_t> ints;
  std::vector<double> floats;

  static ReductionBuffer of_ints(std::vector<std::int64_t> v) {
    ReductionBuffer b;
    b.kind = ElementKind::Int64;
    b.ints = std::move(v);
    return b;
  }
  static ReductionBuffer of_floats(std::vector<double> v) {
    ReductionBuffer b;
    b.kind = ElementKind::Float64;
    b.floats = std::move(v);
    return b;
  }

  std::size_t size() const { return kind == ElementKind::Int64 ? ints.size() : floats.size(); }
  static constexpr std::int64_t element_width = 8;
  std::int64_t bytes() const { return static_cast<std::int64_t>(size()) * element_width; }

  bool operator==(const ReductionBuffer& o) const = default;
};

// Identity buffer for `op`: merging it with any buffer leaves the other
// operand unchanged. Used for ranks that contribute nothing to a phase.
ReductionBuffer identity_buffer(ElementKind kind, ReduceOp op, std::size_t n);

// Elementwise op(received, own); `received` is the left operand so float
// reductions associate identically on every run.
ReductionBuffer merge(const ReductionBuffer& received, const ReductionBuffer& own, ReduceOp op);

}  // namespace napcoll
