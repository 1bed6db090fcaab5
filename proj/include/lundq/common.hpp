#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>

namespace lundq {

/// Invalid request: bad flags, mismatched shapes, out-of-range wires.
/// The CLI maps this to exit code 2.
class usage_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or physically invalid data. The CLI maps this to exit code 3.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846264338327950288;

/// Wraps an azimuthal difference into (-pi, pi].
inline double wrap_delta_phi(double dphi) {
  double r = std::remainder(dphi, 2.0 * kPi);  // lands in [-pi, pi]
  if (r <= -kPi) r = kPi;
  return r;
}

/// Maps an angle into the canonical range [-pi, pi).
inline double canonical_phi(double phi) {
  double r = std::remainder(phi, 2.0 * kPi);
  if (r >= kPi) r = -kPi;
  return r;
}

int resolve_threads(int requested);

/// Runs fn(0..n-1) spread over up to `threads` workers (0 picks hardware
/// concurrency). fn must be safe to call concurrently for distinct indices;
/// any reduction over per-index results is the caller's job, and reducing in
/// index order keeps results independent of the worker count.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace lundq
