#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace sensenet {

// Deterministic RNG with hand-rolled distributions so streams are identical
// across standard libraries (std::uniform_real_distribution is not portable).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n), unbiased via rejection
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // The textual engine state is portable across standard libraries.
  std::string state() const {
    std::ostringstream oss;
    oss << engine_;
    return oss.str();
  }
  void set_state(const std::string& s) {
    std::istringstream iss(s);
    iss >> engine_;
    if (!iss) throw std::invalid_argument("bad rng state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sensenet
