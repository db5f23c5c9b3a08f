#include "pcup/assignment.hpp"

#include <limits>

namespace pcup {

std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost) {
  require(cost.rows() == cost.cols(), "solve_assignment: cost matrix must be square");
  require(cost.rows() >= 1, "solve_assignment: empty cost matrix");
  require_finite(cost, "cost matrix");

  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();

  // Row/column potentials and, per column j (1-based, 0 = virtual start), the
  // row currently matched to it plus the preceding column on the alternating
  // path.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> match(n + 1, 0), prev_col(n + 1, 0);

  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> min_slack(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const Index i0 = match[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          prev_col[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
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
      const Index j1 = prev_col[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Index> row_to_col(n);
  for (Index j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace pcup
