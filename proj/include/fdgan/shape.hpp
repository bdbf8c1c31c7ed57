#pragma once

#include <array>
#include <sstream>
#include <string>

#include "fdgan/common.hpp"

namespace fdgan {

/// Dense tensor extents, rank 1..4. Layout is row-major with the first axis
/// slowest: (N), (N,D), (N,C,H,W).
struct Shape {
  std::array<Index, 4> d{1, 1, 1, 1};
  int rank = 1;

  static Shape vec(Index n) { return Shape{{n, 1, 1, 1}, 1}; }
  static Shape mat(Index n, Index m) { return Shape{{n, m, 1, 1}, 2}; }
  static Shape nchw(Index n, Index c, Index h, Index w) {
    return Shape{{n, c, h, w}, 4};
  }

  Index numel() const { return d[0] * d[1] * d[2] * d[3]; }
  Index operator[](int i) const { return d[static_cast<std::size_t>(i)]; }

  bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < rank; ++i) os << (i ? "," : "") << d[static_cast<std::size_t>(i)];
    os << ')';
    return os.str();
  }
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace fdgan
