#ifndef BRA_RNG_HPP
#define BRA_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bra {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic child-stream RNG. A stream is addressed by a root seed plus a
// short id path (e.g. {step, particle}), so results do not depend on which
// worker thread runs a task or in what order tasks complete.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t s = splitmix64(seed);
    for (std::uint64_t id : ids) s = splitmix64(s ^ splitmix64(id + 0x51ed270b1f9e3d4cULL));
    engine_.seed(s);
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  double gamma(double shape) {
    return std::gamma_distribution<double>(shape, 1.0)(engine_);
  }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  // uniform integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline RngStream make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  return RngStream(seed, ids);
}

}  // namespace bra

#endif
