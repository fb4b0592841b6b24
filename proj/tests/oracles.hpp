#pragma once

#include "disc/types.hpp"

#include <algorithm>
#include <optional>

namespace disc::oracle {

// Hard-margin separator in 2-D by exhaustive search over support configurations:
// one point per class (normal along their difference) or two points of one class
// (normal perpendicular to the segment). Returns the feasible candidate with the
// largest geometric margin.
inline std::optional<Vector> brute_force_hard_margin(const Matrix& pos, const Matrix& neg) {
  Matrix all(pos.rows() + neg.rows(), 2);
  all << pos, neg;
  Vector y(all.rows());
  y.head(pos.rows()).setOnes();
  y.tail(neg.rows()).setConstant(-1.0);
  double best_margin = -1.0;
  Vector best = Vector::Zero(2);
  auto consider = [&](Vector w) {
    if (w.norm() == 0.0) return;
    w.normalize();
    for (double sign : {1.0, -1.0}) {
      const Vector v = sign * w;
      const Vector s = all * v;
      double lo_pos = 1e300, hi_neg = -1e300;
      for (Index i = 0; i < all.rows(); ++i) {
        if (y(i) > 0) {
          lo_pos = std::min(lo_pos, s(i));
        } else {
          hi_neg = std::max(hi_neg, s(i));
        }
      }
      const double margin = 0.5 * (lo_pos - hi_neg);
      if (margin > best_margin) {
        best_margin = margin;
        best = v;
      }
    }
  };
  for (Index i = 0; i < pos.rows(); ++i) {
    for (Index j = 0; j < neg.rows(); ++j) consider((pos.row(i) - neg.row(j)).transpose());
  }
  for (const Matrix* set : {&pos, &neg}) {
    for (Index i = 0; i < set->rows(); ++i) {
      for (Index j = i + 1; j < set->rows(); ++j) {
        const RowVector d = set->row(j) - set->row(i);
        consider(Vector{{-d(1), d(0)}});
      }
    }
  }
  if (!(best_margin > 0.0)) return std::nullopt;
  return best;
}

}  // namespace disc::oracle
