#pragma once

// Exact discrete optimal transport (transportation simplex) for small,
// dense problems such as matching mixture components.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "pianomotion/error.hpp"

namespace pianomotion::transport {

struct TransportPlan {
  Eigen::MatrixXd flow;  // rows: supplies, cols: demands
  double cost = 0.0;
  int pivots = 0;
};

/// Minimises <flow, cost> subject to row sums = supply and column sums =
/// demand. Starts from the north-west corner basis and pivots with Bland's
/// rule (first improving cell, lowest-index leaving cell), which rules out
/// cycling on degenerate problems.
inline TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                                     const Eigen::MatrixXd& cost) {
  const auto m = static_cast<Eigen::Index>(supply.size());
  const auto n = static_cast<Eigen::Index>(demand.size());
  require(m > 0 && n > 0, Errc::InvalidArgument, "transport problem needs at least one supply and one demand");
  require(cost.rows() == m && cost.cols() == n, Errc::DimensionMismatch, "cost matrix shape mismatch");
  require(cost.allFinite(), Errc::NonFinite, "cost matrix contains non-finite values");
  double total_a = 0.0, total_b = 0.0;
  for (double a : supply) {
    require(a >= 0.0 && std::isfinite(a), Errc::InvalidArgument, "supplies must be non-negative");
    total_a += a;
  }
  for (double b : demand) {
    require(b >= 0.0 && std::isfinite(b), Errc::InvalidArgument, "demands must be non-negative");
    total_b += b;
  }
  require(total_a > 0.0 && std::abs(total_a - total_b) <= 1e-9 * std::max(1.0, total_a), Errc::InvalidArgument,
          "supply and demand totals differ");

  // Demands rescaled onto the supply total so the problem is exactly balanced.
  std::vector<double> row_left(supply.begin(), supply.end());
  std::vector<double> col_left(demand.begin(), demand.end());
  for (double& b : col_left) b *= total_a / total_b;

  TransportPlan plan;
  plan.flow = Eigen::MatrixXd::Zero(m, n);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> basis;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> in_basis = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m, n, false);
  {
    Eigen::Index i = 0, j = 0;
    while (true) {
      const double x = std::min(row_left[static_cast<std::size_t>(i)], col_left[static_cast<std::size_t>(j)]);
      plan.flow(i, j) = x;
      basis.emplace_back(i, j);
      in_basis(i, j) = true;
      row_left[static_cast<std::size_t>(i)] -= x;
      col_left[static_cast<std::size_t>(j)] -= x;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1) ++j;
      else if (j == n - 1) ++i;
      else if (row_left[static_cast<std::size_t>(i)] <= col_left[static_cast<std::size_t>(j)]) ++i;
      else ++j;
    }
  }

  const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;
  const Eigen::Index nodes = m + n;  // rows 0..m-1, columns m..m+n-1
  const int max_pivots = static_cast<int>(50 * nodes * nodes + 1000);

  std::vector<double> potential(static_cast<std::size_t>(nodes));
  std::vector<std::vector<std::size_t>> adjacent(static_cast<std::size_t>(nodes));  // basis cell indices
  std::vector<Eigen::Index> parent_node(static_cast<std::size_t>(nodes));
  std::vector<std::size_t> parent_cell(static_cast<std::size_t>(nodes));

  auto other_end = [&](std::size_t cell, Eigen::Index node) {
    const auto [r, c] = basis[cell];
    return node == r ? m + c : r;
  };

  while (true) {
    for (auto& a : adjacent) a.clear();
    for (std::size_t k = 0; k < basis.size(); ++k) {
      adjacent[static_cast<std::size_t>(basis[k].first)].push_back(k);
      adjacent[static_cast<std::size_t>(m + basis[k].second)].push_back(k);
    }
    // Potentials u_i + v_j = c_ij along the basis tree, rooted at row 0.
    std::vector<bool> seen(static_cast<std::size_t>(nodes), false);
    std::vector<Eigen::Index> queue{0};
    seen[0] = true;
    potential[0] = 0.0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const Eigen::Index node = queue[q];
      for (std::size_t cell : adjacent[static_cast<std::size_t>(node)]) {
        const Eigen::Index next = other_end(cell, node);
        if (seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = true;
        const auto [r, c] = basis[cell];
        potential[static_cast<std::size_t>(next)] = cost(r, c) - potential[static_cast<std::size_t>(node)];
        queue.push_back(next);
      }
    }
    require(static_cast<Eigen::Index>(queue.size()) == nodes, Errc::NoConvergence, "transport basis is not a spanning tree");

    Eigen::Index enter_r = -1, enter_c = -1;
    for (Eigen::Index r = 0; r < m && enter_r < 0; ++r)
      for (Eigen::Index c = 0; c < n; ++c) {
        if (in_basis(r, c)) continue;
        const double reduced =
            cost(r, c) - potential[static_cast<std::size_t>(r)] - potential[static_cast<std::size_t>(m + c)];
        if (reduced < -tol) {
          enter_r = r;
          enter_c = c;
          break;
        }
      }
    if (enter_r < 0) break;
    require(++plan.pivots <= max_pivots, Errc::NoConvergence, "transportation simplex exceeded pivot limit");

    // Tree path from row enter_r to column enter_c closes the pivot cycle.
    std::fill(seen.begin(), seen.end(), false);
    queue.assign(1, enter_r);
    seen[static_cast<std::size_t>(enter_r)] = true;
    const Eigen::Index target = m + enter_c;
    for (std::size_t q = 0; q < queue.size() && !seen[static_cast<std::size_t>(target)]; ++q) {
      const Eigen::Index node = queue[q];
      for (std::size_t cell : adjacent[static_cast<std::size_t>(node)]) {
        const Eigen::Index next = other_end(cell, node);
        if (seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = true;
        parent_node[static_cast<std::size_t>(next)] = node;
        parent_cell[static_cast<std::size_t>(next)] = cell;
        queue.push_back(next);
      }
    }
    // Walking back from the column, path cells alternate -, +, -, ...
    std::vector<std::size_t> minus, plus;
    bool take_minus = true;
    for (Eigen::Index node = target; node != enter_r; node = parent_node[static_cast<std::size_t>(node)]) {
      (take_minus ? minus : plus).push_back(parent_cell[static_cast<std::size_t>(node)]);
      take_minus = !take_minus;
    }
    std::size_t leaving = minus.front();
    for (std::size_t k : minus) {
      const auto [r, c] = basis[k];
      const auto [lr, lc] = basis[leaving];
      const double f = plan.flow(r, c), lf = plan.flow(lr, lc);
      if (f < lf || (f == lf && r * n + c < lr * n + lc)) leaving = k;
    }
    const double theta = plan.flow(basis[leaving].first, basis[leaving].second);
    for (std::size_t k : minus) plan.flow(basis[k].first, basis[k].second) -= theta;
    for (std::size_t k : plus) plan.flow(basis[k].first, basis[k].second) += theta;
    plan.flow(enter_r, enter_c) += theta;
    plan.flow(basis[leaving].first, basis[leaving].second) = 0.0;
    in_basis(basis[leaving].first, basis[leaving].second) = false;
    basis[leaving] = {enter_r, enter_c};
    in_basis(enter_r, enter_c) = true;
  }

  plan.flow = plan.flow.cwiseMax(0.0);
  plan.cost = plan.flow.cwiseProduct(cost).sum();
  return plan;
}

}  // namespace pianomotion::transport
