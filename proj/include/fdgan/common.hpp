#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace fdgan {

/// Default scalar for the training pipeline. Verification suites instantiate
/// the templated core with double where tighter tolerances are needed.
using Real = float;

template <typename S>
using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using RowMajorMatrixX =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

/// Single RNG type used everywhere. Streams are explicit; there is no hidden
/// global generator.
using Rng = std::mt19937_64;

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct checkpoint_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a loss term turns NaN/Inf; carries the offending term name.
struct divergence_error : std::runtime_error {
  explicit divergence_error(const std::string& term)
      : std::runtime_error("non-finite loss term: " + term), term_name(term) {}
  std::string term_name;
};

/// Distribution helpers. Fresh distribution objects per call so the engine
/// state alone determines the stream (distributions carry hidden caches that
/// would break checkpoint resume).
template <typename S>
S draw_normal(Rng& rng, S mean = S(0), S stddev = S(1)) {
  std::normal_distribution<double> d(static_cast<double>(mean),
                                     static_cast<double>(stddev));
  return static_cast<S>(d(rng));
}

template <typename S>
S draw_uniform(Rng& rng, S lo, S hi) {
  std::uniform_real_distribution<double> d(static_cast<double>(lo),
                                           static_cast<double>(hi));
  return static_cast<S>(d(rng));
}

inline std::uint64_t draw_index(Rng& rng, std::uint64_t n) {
  std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
  return d(rng);
}

/// FNV-1a over raw bytes; used for the bit-exact freeze audits.
inline std::uint64_t fnv1a(const void* data, std::size_t bytes,
                           std::uint64_t seed = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename S>
std::uint64_t hash_array(const ArrayX<S>& a, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  return fnv1a(a.data(), sizeof(S) * static_cast<std::size_t>(a.size()), seed);
}

}  // namespace fdgan
