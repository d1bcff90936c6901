#pragma once

// Dense strictly convex QP with inequality constraints:
//
//   minimize    1/2 x' G x + g' x
//   subject to  M x <= c
//
// solved by a dual active-set method (Goldfarb-Idnani). The unconstrained
// minimizer is the starting point, so no feasible initial guess is needed and
// an empty feasible set is detected directly.

#include <vector>

#include <Eigen/Dense>

namespace ofotune {

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;  // one per constraint row, zero when inactive
  std::vector<int> active;
  int iterations = 0;
};

/// Throws QpInfeasible, QpStalled, or ConfigError if G is not positive
/// definite or dimensions disagree.
QpSolution solve_qp(const Eigen::MatrixXd& G, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd& M, const Eigen::VectorXd& c,
                    int max_iterations = 200);

/// Largest violation among stationarity, primal feasibility, dual
/// feasibility and complementarity.
double kkt_residual(const Eigen::MatrixXd& G, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd& M, const Eigen::VectorXd& c,
                    const QpSolution& sol);

}  // namespace ofotune
