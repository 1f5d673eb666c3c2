// Transportation simplex on the complete bipartite graph rows x cols.
//
// The basis is a spanning tree with rows + cols - 1 cells (degenerate zero
// cells included). Each pivot recomputes the tree structure and the dual
// potentials from scratch; this is O(rows + cols) next to the O(rows * cols)
// pricing pass, and keeps the code free of incremental thread-index updates.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mckv/error.hpp"
#include "mckv/transport.hpp"

namespace mckv::detail {

namespace {

struct Cell {
  std::size_t row;
  std::size_t col;
  double flow;
};

class Tree {
 public:
  Tree(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  // Rebuilds parent links rooted at row 0 and the potentials u (rows), v (cols).
  void build(const std::vector<Cell>& basis, std::span<const double> cost) {
    const std::size_t nodes = rows_ + cols_;
    adjacency_start_.assign(nodes + 1, 0);
    for (const auto& c : basis) {
      ++adjacency_start_[c.row + 1];
      ++adjacency_start_[rows_ + c.col + 1];
    }
    for (std::size_t k = 0; k < nodes; ++k) adjacency_start_[k + 1] += adjacency_start_[k];
    adjacency_.assign(2 * basis.size(), 0);
    std::vector<std::size_t> fill(adjacency_start_.begin(), adjacency_start_.end() - 1);
    for (std::size_t e = 0; e < basis.size(); ++e) {
      adjacency_[fill[basis[e].row]++] = e;
      adjacency_[fill[rows_ + basis[e].col]++] = e;
    }

    parent_edge_.assign(nodes, kNone);
    depth_.assign(nodes, kNone);
    potential_.assign(nodes, 0.0);
    std::vector<std::size_t> queue;
    queue.reserve(nodes);
    queue.push_back(0);
    depth_[0] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t node = queue[head];
      for (std::size_t k = adjacency_start_[node]; k < adjacency_start_[node + 1]; ++k) {
        const std::size_t e = adjacency_[k];
        const std::size_t other = other_end(basis[e], node);
        if (depth_[other] != kNone) continue;
        depth_[other] = depth_[node] + 1;
        parent_edge_[other] = e;
        const double c = cost[basis[e].row * cols_ + basis[e].col];
        potential_[other] = c - potential_[node];
        queue.push_back(other);
      }
    }
    if (queue.size() != nodes) throw NumericalError("transport simplex: basis is not a spanning tree");
  }

  double u(std::size_t row) const { return potential_[row]; }
  double v(std::size_t col) const { return potential_[rows_ + col]; }

  // Tree edges on the path from the column node of `col` to the row node of
  // `row`, in walking order starting at the column.
  std::vector<std::size_t> path(const std::vector<Cell>& basis, std::size_t row,
                                std::size_t col) const {
    std::size_t a = rows_ + col;
    std::size_t b = row;
    std::vector<std::size_t> from_a;
    std::vector<std::size_t> from_b;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        const std::size_t e = parent_edge_[a];
        from_a.push_back(e);
        a = other_end(basis[e], a);
      } else {
        const std::size_t e = parent_edge_[b];
        from_b.push_back(e);
        b = other_end(basis[e], b);
      }
    }
    from_a.insert(from_a.end(), from_b.rbegin(), from_b.rend());
    return from_a;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t other_end(const Cell& c, std::size_t node) const {
    return node < rows_ ? rows_ + c.col : c.row;
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::size_t> adjacency_start_;
  std::vector<std::size_t> adjacency_;
  std::vector<std::size_t> parent_edge_;
  std::vector<std::size_t> depth_;
  std::vector<double> potential_;
};

std::vector<Cell> northwest_corner(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  std::vector<Cell> basis;
  basis.reserve(m + n - 1);
  std::size_t i = 0;
  std::size_t j = 0;
  double ra = a[0];
  double rb = b[0];
  for (;;) {
    const double x = std::min(ra, rb);
    basis.push_back({i, j, x});
    ra -= x;
    rb -= x;
    if (i == m - 1 && j == n - 1) break;
    const bool advance_row = i == m - 1 ? false : (j == n - 1 ? true : ra <= rb);
    if (advance_row) {
      ra = a[++i];
    } else {
      rb = b[++j];
    }
  }
  return basis;
}

}  // namespace

SimplexResult solve_transportation(std::span<const double> a, std::span<const double> b,
                                   std::span<const double> cost) {
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  if (m == 0 || n == 0 || cost.size() != m * n) {
    throw ValidationError("transportation problem: inconsistent shapes");
  }

  double max_cost = 0.0;
  for (double c : cost) max_cost = std::max(max_cost, std::abs(c));
  const double tolerance = 1e-11 * std::max(1.0, max_cost);

  std::vector<Cell> basis = northwest_corner(a, b);
  std::vector<char> in_basis(m * n, 0);
  for (const auto& c : basis) in_basis[c.row * n + c.col] = 1;

  Tree tree(m, n);
  SimplexResult result;
  std::size_t degenerate_run = 0;
  const std::size_t max_pivots = 10 * m * n + 1000;

  for (;;) {
    tree.build(basis, cost);

    // Dantzig pricing; after a long run of degenerate pivots, fall back to
    // Bland's smallest-index rule, which cannot cycle.
    const bool bland = degenerate_run > m + n;
    std::size_t enter = m * n;
    double best = -tolerance;
    for (std::size_t i = 0; i < m && !(bland && enter < m * n); ++i) {
      const double ui = tree.u(i);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = i * n + j;
        if (in_basis[k]) continue;
        const double reduced = cost[k] - ui - tree.v(j);
        if (reduced < best) {
          enter = k;
          if (bland) break;
          best = reduced;
        }
      }
    }
    if (enter == m * n) break;
    if (++result.pivots > max_pivots) {
      throw NumericalError("transport simplex: pivot limit exceeded (" +
                           std::to_string(max_pivots) + ")");
    }

    const std::size_t row = enter / n;
    const std::size_t col = enter % n;
    const auto cycle = tree.path(basis, row, col);
    // Cycle edges alternate -, +, -, ... starting next to the entering column.
    std::size_t leave = cycle.size();
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cycle.size(); k += 2) {
      const Cell& c = basis[cycle[k]];
      const bool better = c.flow < theta ||
                          (bland && c.flow == theta &&
                           c.row * n + c.col < basis[cycle[leave]].row * n + basis[cycle[leave]].col);
      if (better) {
        theta = c.flow;
        leave = k;
      }
    }
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      double& flow = basis[cycle[k]].flow;
      flow = (k % 2 == 0) ? flow - theta : flow + theta;
    }
    degenerate_run = theta == 0.0 ? degenerate_run + 1 : 0;

    Cell& out = basis[cycle[leave]];
    out.flow = 0.0;  // exact by construction; keeps the leaving cell clean
    in_basis[out.row * n + out.col] = 0;
    out = Cell{row, col, theta};
    in_basis[enter] = 1;
  }

  result.flow.assign(m * n, 0.0);
  for (const auto& c : basis) result.flow[c.row * n + c.col] = c.flow;
  for (std::size_t k = 0; k < m * n; ++k) result.cost += result.flow[k] * cost[k];
  return result;
}

}  // namespace mckv::detail
