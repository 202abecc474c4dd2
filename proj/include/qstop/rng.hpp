#pragma once

// Counter-based random streams. Every consumer derives its own StreamKey from
// a named seed plus integer tags, so draws depend only on (seed, tags, index)
// and never on scheduling or worker count. Normal variates come from the
// inverse CDF (Wichura's PPND16), which doubles as the quantile function for
// the confidence intervals.

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qstop {

namespace detail {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace detail

// Inverse standard normal CDF, algorithm AS 241 (double precision branch).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return q * num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

// Identifies one random stream. Child keys are derived by hashing, so streams
// for distinct tag tuples are effectively independent and never overlap.
struct StreamKey {
  std::uint64_t key = 0;

  static StreamKey from_seed(std::uint64_t seed) {
    return StreamKey{detail::mix64(seed + detail::kGamma)};
  }
  constexpr StreamKey child(std::uint64_t tag) const {
    return StreamKey{detail::mix64(key ^ detail::mix64(tag + detail::kGamma))};
  }
  constexpr StreamKey child(std::uint64_t a, std::uint64_t b) const {
    return child(a).child(b);
  }
  constexpr StreamKey child(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return child(a).child(b).child(c);
  }
};

// Indexed access: draw #idx of a stream, independent of any generator state.
inline std::uint64_t u64_from(StreamKey k, std::uint64_t idx) {
  return detail::mix64(k.key + (idx + 1) * detail::kGamma);
}

// Uniform on the open interval (0,1).
inline double unit_from(StreamKey k, std::uint64_t idx) {
  return (static_cast<double>(u64_from(k, idx) >> 11) + 0.5) * 0x1.0p-53;
}

inline double normal_from(StreamKey k, std::uint64_t idx) {
  return normal_quantile(unit_from(k, idx));
}

// Sequential view of a stream for consumers that just need "the next draw".
class CounterRng {
 public:
  explicit CounterRng(StreamKey key) : key_(key) {}
  explicit CounterRng(std::uint64_t seed) : key_(StreamKey::from_seed(seed)) {}

  std::uint64_t next_u64() { return u64_from(key_, counter_++); }

  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() { return normal_quantile(next_unit()); }

  // Unbiased uniform draw from {0, ..., n-1}.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    std::uint64_t x, r;
    do {
      x = next_u64();
      r = x % n;
    } while (x - r > std::uint64_t(-1) - n + 1);
    return r;
  }

  StreamKey key() const { return key_; }

 private:
  StreamKey key_;
  std::uint64_t counter_ = 0;
};

}  // namespace qstop
