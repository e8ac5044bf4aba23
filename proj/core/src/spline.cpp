#include "kagnn/spline.hpp"

#include <stdexcept>

namespace kagnn::kan {

namespace {

// Basis values of the requested order for every valid index: the knot vector
// supports knots.size() - 1 - order functions at that order.
std::vector<double> basis_of_order(double x, const std::vector<double>& knots,
                                   int order) {
  int spans = static_cast<int>(knots.size()) - 1;
  std::vector<double> b(static_cast<std::size_t>(spans), 0.0);
  for (int i = 0; i < spans; ++i) {
    bool inside = knots[i] <= x && x < knots[i + 1];
    // Closed right end: the very last span also owns its upper knot, so the
    // basis still sums to one at the domain boundary when order is zero.
    if (i == spans - 1 && x == knots[i + 1]) inside = true;
    b[static_cast<std::size_t>(i)] = inside ? 1.0 : 0.0;
  }
  for (int r = 1; r <= order; ++r) {
    int count = spans - r;
    for (int i = 0; i < count; ++i) {
      double left = 0.0, right = 0.0;
      double dl = knots[i + r] - knots[i];
      if (dl > 0.0) left = (x - knots[i]) / dl * b[static_cast<std::size_t>(i)];
      double dr = knots[i + r + 1] - knots[i + 1];
      if (dr > 0.0)
        right = (knots[i + r + 1] - x) / dr * b[static_cast<std::size_t>(i + 1)];
      b[static_cast<std::size_t>(i)] = left + right;
    }
  }
  b.resize(static_cast<std::size_t>(spans - order));
  return b;
}

}  // namespace

SplineGrid make_grid(int grid_size, int order, double lo, double hi) {
  if (grid_size < 1) throw std::invalid_argument("spline grid_size must be >= 1");
  if (order < 0) throw std::invalid_argument("spline order must be >= 0");
  if (!(hi > lo)) throw std::invalid_argument("spline domain must have hi > lo");
  SplineGrid g;
  g.grid_size = grid_size;
  g.order = order;
  g.lo = lo;
  g.hi = hi;
  double h = (hi - lo) / grid_size;
  int n_knots = grid_size + 2 * order + 1;
  g.knots.resize(static_cast<std::size_t>(n_knots));
  for (int j = 0; j < n_knots; ++j)
    g.knots[static_cast<std::size_t>(j)] = lo + (j - order) * h;
  return g;
}

std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
  return basis_of_order(x, grid.knots, grid.order);
}

std::vector<double> bspline_basis_derivative(double x, const SplineGrid& grid) {
  int k = grid.order;
  int count = grid.basis_count();
  std::vector<double> d(static_cast<std::size_t>(count), 0.0);
  if (k == 0) return d;
  // d/dx B_{i,k} = k * (B_{i,k-1}/(t_{i+k}-t_i) - B_{i+1,k-1}/(t_{i+k+1}-t_{i+1}))
  std::vector<double> lower = basis_of_order(x, grid.knots, k - 1);
  const auto& t = grid.knots;
  for (int i = 0; i < count; ++i) {
    double a = 0.0, b = 0.0;
    double dl = t[i + k] - t[i];
    if (dl > 0.0) a = lower[static_cast<std::size_t>(i)] / dl;
    double dr = t[i + k + 1] - t[i + 1];
    if (dr > 0.0) b = lower[static_cast<std::size_t>(i + 1)] / dr;
    d[static_cast<std::size_t>(i)] = k * (a - b);
  }
  return d;
}

}  // namespace kagnn::kan
