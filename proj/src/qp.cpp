#include "ofotune/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ofotune/errors.hpp"

namespace ofotune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Projected inverse Hessian H and pseudo-inverse N* of the active normals,
// both with respect to the G metric. Normals are columns of `normals`.
struct ActiveProjection {
  Eigen::MatrixXd H;
  Eigen::MatrixXd Nstar;
};

ActiveProjection project(const Eigen::MatrixXd& Ginv,
                         const Eigen::MatrixXd& normals) {
  if (normals.cols() == 0) {
    return {Ginv, Eigen::MatrixXd(0, Ginv.rows())};
  }
  const Eigen::MatrixXd GinvN = Ginv * normals;
  const Eigen::MatrixXd S = normals.transpose() * GinvN;
  ActiveProjection out;
  out.Nstar = S.ldlt().solve(GinvN.transpose());
  out.H = Ginv - GinvN * out.Nstar;
  return out;
}

}  // namespace

QpSolution solve_qp(const Eigen::MatrixXd& G, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd& M, const Eigen::VectorXd& c,
                    int max_iterations) {
  const Eigen::Index n = G.rows();
  if (G.cols() != n || g.size() != n || M.cols() != n || M.rows() != c.size()) {
    throw ConfigError("QP dimensions are inconsistent");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("QP Hessian is not positive definite");
  }
  const Eigen::MatrixXd Ginv = llt.solve(Eigen::MatrixXd::Identity(n, n));

  // Constraints in >= form: nrm_j' x >= -c_j with nrm_j = -M_j'.
  const Eigen::MatrixXd nrm = -M.transpose();
  auto slack = [&](const Eigen::VectorXd& x, Eigen::Index j) {
    return c[j] - M.row(j).dot(x);
  };
  auto tolerance = [&](const Eigen::VectorXd& x, Eigen::Index j) {
    return 1e-11 * std::max({1.0, std::abs(c[j]), M.row(j).norm() * x.norm()});
  };

  QpSolution sol;
  sol.x = -llt.solve(g);
  sol.multipliers = Eigen::VectorXd::Zero(M.rows());
  std::vector<int>& active = sol.active;
  std::vector<double> u;  // multipliers of `active`, same order

  auto active_normals = [&]() {
    Eigen::MatrixXd N(n, static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) N.col(i) = nrm.col(active[i]);
    return N;
  };

  while (true) {
    // Most violated inactive constraint.
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < M.rows(); ++j) {
      if (std::find(active.begin(), active.end(), j) != active.end()) continue;
      const double s = slack(sol.x, j);
      if (s < -tolerance(sol.x, j) && s < worst) {
        worst = s;
        p = j;
      }
    }
    if (p < 0) break;

    double u_p = 0.0;
    while (true) {
      if (++sol.iterations > max_iterations) {
        throw QpStalled(fmt::format("active-set QP exceeded {} iterations",
                                    max_iterations));
      }
      const ActiveProjection proj = project(Ginv, active_normals());
      const Eigen::VectorXd np = nrm.col(p);
      const Eigen::VectorXd z = proj.H * np;
      const Eigen::VectorXd r = proj.Nstar * np;

      // Partial step: first active multiplier to reach zero.
      double t1 = kInf;
      std::size_t drop = active.size();
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (r[static_cast<Eigen::Index>(i)] > 0.0) {
          const double ratio = u[i] / r[static_cast<Eigen::Index>(i)];
          if (ratio < t1) {
            t1 = ratio;
            drop = i;
          }
        }
      }
      // Full step: constraint p becomes satisfied.
      const double curvature = z.dot(np);
      const bool primal_move =
          curvature > 1e-14 * np.squaredNorm() * Ginv.norm();
      const double t2 = primal_move ? -slack(sol.x, p) / curvature : kInf;
      const double t = std::min(t1, t2);
      if (t == kInf) {
        throw QpInfeasible(
            fmt::format("constraint {} cannot be satisfied together with the "
                        "active set",
                        p));
      }

      for (std::size_t i = 0; i < active.size(); ++i) {
        u[i] -= t * r[static_cast<Eigen::Index>(i)];
      }
      u_p += t;
      if (primal_move) sol.x += t * z;

      if (primal_move && t2 <= t1) {
        active.push_back(static_cast<int>(p));
        u.push_back(u_p);
        break;
      }
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      u.erase(u.begin() + static_cast<std::ptrdiff_t>(drop));
      if (slack(sol.x, p) >= -tolerance(sol.x, p)) break;
    }
  }

  for (std::size_t i = 0; i < active.size(); ++i) {
    sol.multipliers[active[i]] = std::max(u[i], 0.0);
  }
  return sol;
}

double kkt_residual(const Eigen::MatrixXd& G, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd& M, const Eigen::VectorXd& c,
                    const QpSolution& sol) {
  const Eigen::VectorXd& x = sol.x;
  const Eigen::VectorXd& lambda = sol.multipliers;
  double res = (G * x + g + M.transpose() * lambda).cwiseAbs().maxCoeff();
  if (M.rows() > 0) {
    const Eigen::VectorXd s = c - M * x;
    res = std::max(res, (-s).cwiseMax(0.0).maxCoeff());
    res = std::max(res, (-lambda).cwiseMax(0.0).maxCoeff());
    res = std::max(res, lambda.cwiseProduct(s).cwiseAbs().maxCoeff());
  }
  return res;
}

}  // namespace ofotune
