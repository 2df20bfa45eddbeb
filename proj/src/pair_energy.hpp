#pragma once

#include <cmath>

namespace equiorb::detail {

// m_i m_k / r^alpha, shared by every potential evaluation so node values agree bit for bit.
inline long double pair_energy(long double mm, long double r, long double alpha) {
  return alpha == 1.0L ? mm / r : mm / std::pow(r, alpha);
}

}  // namespace equiorb::detail
