#pragma once

#include <vector>

#include "pcup/types.hpp"

namespace pcup {

/// Exact minimum-cost perfect matching on a square cost matrix (shortest
/// augmenting paths with dual potentials, O(n^3)). Entry i of the result is
/// the column assigned to row i.
std::vector<Index> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace pcup
