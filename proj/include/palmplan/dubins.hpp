#pragma once

// Shortest bounded-curvature paths between planar poses (six-word family).

#include "palmplan/core_types.hpp"

#include <array>
#include <limits>
#include <optional>
#include <string>

namespace palmplan {

enum class DubinsWord { LSL, RSR, LSR, RSL, RLR, LRL };

inline const char* to_string(DubinsWord w) {
  static constexpr const char* names[] = {"LSL", "RSR", "LSR", "RSL", "RLR", "LRL"};
  return names[static_cast<int>(w)];
}

struct DubinsPath {
  PlanarPose start;
  double radius = 1.0;
  DubinsWord word = DubinsWord::LSL;
  std::array<double, 3> lengths{0.0, 0.0, 0.0};  // meters, per segment

  double length() const { return lengths[0] + lengths[1] + lengths[2]; }

  /// Pose after travelling arc length s along the path.
  PlanarPose sample(double s) const {
    const std::string w = to_string(word);
    PlanarPose p = start;
    s = std::clamp(s, 0.0, length());
    for (int i = 0; i < 3 && s > 0.0; ++i) {
      const double ds = std::min(s, lengths[i]);
      p = advance(p, w[i], ds);
      s -= ds;
    }
    return p;
  }

  PlanarPose end() const { return sample(length()); }

  PlanarPose advance(const PlanarPose& p, char seg, double ds) const {
    PlanarPose out = p;
    if (seg == 'S') {
      out.x += ds * std::cos(p.yaw);
      out.y += ds * std::sin(p.yaw);
      return out;
    }
    const double sign = seg == 'L' ? 1.0 : -1.0;
    const double dth = sign * ds / radius;
    out.x += sign * radius * (std::sin(p.yaw + dth) - std::sin(p.yaw));
    out.y += sign * radius * (-std::cos(p.yaw + dth) + std::cos(p.yaw));
    out.yaw = wrap_angle(p.yaw + dth);
    return out;
  }
};

namespace detail {

inline double mod2pi(double a) {
  const double two_pi = 2.0 * kPi;
  double r = std::fmod(a, two_pi);
  if (r < 0.0) r += two_pi;
  // Round-off just below a full turn means no turn at all.
  return r > two_pi - 1e-10 ? 0.0 : r;
}

/// Normalized segment lengths (t, p, q) for one word, or nullopt if the word
/// has no solution.
inline std::optional<std::array<double, 3>> dubins_word(DubinsWord w, double alpha, double beta, double d) {
  const double sa = std::sin(alpha), sb = std::sin(beta), ca = std::cos(alpha), cb = std::cos(beta);
  const double c_ab = std::cos(alpha - beta);
  switch (w) {
    case DubinsWord::LSL: {
      const double p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb);
      if (p_sq < 0.0) return std::nullopt;
      const double t1 = std::atan2(cb - ca, d + sa - sb);
      return std::array<double, 3>{mod2pi(t1 - alpha), std::sqrt(p_sq), mod2pi(beta - t1)};
    }
    case DubinsWord::RSR: {
      const double p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa);
      if (p_sq < 0.0) return std::nullopt;
      const double t1 = std::atan2(ca - cb, d - sa + sb);
      return std::array<double, 3>{mod2pi(alpha - t1), std::sqrt(p_sq), mod2pi(t1 - beta)};
    }
    case DubinsWord::LSR: {
      const double p_sq = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb);
      if (p_sq < 0.0) return std::nullopt;
      const double p = std::sqrt(p_sq);
      const double t0 = std::atan2(-ca - cb, d + sa + sb) - std::atan2(-2.0, p);
      return std::array<double, 3>{mod2pi(t0 - alpha), p, mod2pi(t0 - mod2pi(beta))};
    }
    case DubinsWord::RSL: {
      const double p_sq = -2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb);
      if (p_sq < 0.0) return std::nullopt;
      const double p = std::sqrt(p_sq);
      const double t0 = std::atan2(ca + cb, d - sa - sb) - std::atan2(2.0, p);
      return std::array<double, 3>{mod2pi(alpha - t0), p, mod2pi(beta - t0)};
    }
    case DubinsWord::RLR: {
      const double t0 = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
      if (std::abs(t0) > 1.0) return std::nullopt;
      const double phi = std::atan2(ca - cb, d - sa + sb);
      const double p = mod2pi(2.0 * kPi - std::acos(t0));
      const double t = mod2pi(alpha - phi + mod2pi(p / 2.0));
      return std::array<double, 3>{t, p, mod2pi(alpha - beta - t + mod2pi(p))};
    }
    case DubinsWord::LRL: {
      const double t0 = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
      if (std::abs(t0) > 1.0) return std::nullopt;
      const double phi = std::atan2(ca - cb, d + sa - sb);
      const double p = mod2pi(2.0 * kPi - std::acos(t0));
      const double t = mod2pi(-alpha - phi + p / 2.0);
      return std::array<double, 3>{t, p, mod2pi(mod2pi(beta) - alpha - t + mod2pi(p))};
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Candidate path for one word, if it exists.
inline std::optional<DubinsPath> dubins_path(const PlanarPose& a, const PlanarPose& b, double radius, DubinsWord w) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double d = std::hypot(dx, dy) / radius;
  const double theta = d > 0.0 ? detail::mod2pi(std::atan2(dy, dx)) : 0.0;
  const double alpha = detail::mod2pi(a.yaw - theta), beta = detail::mod2pi(b.yaw - theta);
  const auto tpq = detail::dubins_word(w, alpha, beta, d);
  if (!tpq) return std::nullopt;
  DubinsPath path;
  path.start = a;
  path.radius = radius;
  path.word = w;
  for (int i = 0; i < 3; ++i) path.lengths[i] = (*tpq)[i] * radius;
  return path;
}

/// Shortest path over all six words; ties go to the earlier word.
inline DubinsPath shortest_dubins(const PlanarPose& a, const PlanarPose& b, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "turning radius must be positive");
  std::optional<DubinsPath> best;
  for (int w = 0; w < 6; ++w) {
    const auto p = dubins_path(a, b, radius, static_cast<DubinsWord>(w));
    if (p && (!best || p->length() < best->length() - 1e-12)) best = p;
  }
  return *best;  // LSL or RSR always exists
}

}  // namespace palmplan
