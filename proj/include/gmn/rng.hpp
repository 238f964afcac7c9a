#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace gmn {

// Seeded random source. All randomness in the project flows through this
// class so that a run is fully reproducible from its seed. Floating-point
// draws are derived from the raw 64-bit stream directly instead of
// std::uniform_real_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

  // Serializable engine state, for checkpoints.
  std::string state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gmn
