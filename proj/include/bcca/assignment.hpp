#pragma once

#include "bcca/types.hpp"

#include <limits>
#include <vector>

namespace bcca {

// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres with
// potentials, O(n^3)). Returns the column assigned to each row.
template <class Scalar>
std::vector<int> solve_assignment(const Mat<Scalar>& cost) {
  if (cost.rows() != cost.cols() || cost.rows() < 1)
    throw InvalidInput("solve_assignment: cost matrix must be square and non-empty");
  const int n = static_cast<int>(cost.rows());
  const Scalar inf = std::numeric_limits<Scalar>::infinity();

  std::vector<Scalar> u(n + 1, Scalar(0)), v(n + 1, Scalar(0));
  std::vector<int> match(n + 1, 0), way(n + 1, 0);  // match[j]: row matched to column j

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<Scalar> min_slack(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      int j1 = 0;
      Scalar delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (match[j] > 0) row_to_col[static_cast<std::size_t>(match[j] - 1)] = j - 1;
  return row_to_col;
}

}  // namespace bcca
