#ifndef KAGNN_SPLINE_HPP
#define KAGNN_SPLINE_HPP

#include <vector>

namespace kagnn::kan {

// Fixed uniform B-spline grid on a closed domain (default [-1, 1]). The
// interior is divided into grid_size equal intervals and the knot vector is
// extended order extra steps past each end, giving grid_size + 2*order + 1
// knots and grid_size + order basis functions of the given order.
struct SplineGrid {
  int grid_size = 3;  // interior interval count
  int order = 3;      // spline degree
  double lo = -1.0;
  double hi = 1.0;
  std::vector<double> knots;

  int basis_count() const { return grid_size + order; }
};

SplineGrid make_grid(int grid_size, int order, double lo = -1.0, double hi = 1.0);

// All order-degree basis functions at x, evaluated by the Cox-de Boor
// recursion. Outside the extended knot range every entry is zero; inside the
// domain the entries are non-negative and sum to one. At most order+1 entries
// are nonzero for any x.
std::vector<double> bspline_basis(double x, const SplineGrid& grid);

// First derivatives of the same basis functions at x.
std::vector<double> bspline_basis_derivative(double x, const SplineGrid& grid);

}  // namespace kagnn::kan

#endif
