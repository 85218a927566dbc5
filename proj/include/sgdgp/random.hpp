#ifndef SGDGP_RANDOM_HPP
#define SGDGP_RANDOM_HPP

#include <cstdint>
#include <limits>
#include <string_view>

namespace sgdgp {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream key from a root seed, a component tag and
/// an index: mix(root ⊕ hash(tag) ⊕ mix(index)).
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index = 0);

/// Counter-based generator: output i is mix64(key + i·golden). Every value is
/// a pure function of (key, i), so streams are reproducible piecewise and
/// platform independent.
class CounterRng {
public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}

  result_type operator()() { return mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  /// Uniform double in [0, 1).
  double uniform01();
  /// Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Standard normal via Box–Muller (one draw consumes two outputs).
  double normal();

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

} // namespace sgdgp

#endif // SGDGP_RANDOM_HPP
