#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace saa {

// Structured triangulation of the unit square: n cells per axis, each grid
// square split along the lower-left to upper-right diagonal. Vertices are
// row-major by (iy, ix); cells come in (lower, upper) pairs per square, both
// oriented counterclockwise with area h^2/2.
struct Mesh2D {
  int n = 0;
  double h = 0.0;
  Eigen::Matrix<double, Eigen::Dynamic, 2> vertices;
  Eigen::Matrix<int, Eigen::Dynamic, 3> cells;
  std::vector<bool> boundary;       // per vertex
  std::vector<int> interior_index;  // vertex -> interior index, -1 on the boundary
  std::vector<int> interior_vertex; // interior index -> vertex

  int vertex_count() const { return static_cast<int>(vertices.rows()); }
  int cell_count() const { return static_cast<int>(cells.rows()); }
  int interior_count() const { return static_cast<int>(interior_vertex.size()); }
  double cell_area() const { return 0.5 * h * h; }

  int vertex_id(int ix, int iy) const { return iy * (n + 1) + ix; }

  // Centroid of a cell, used for piecewise coefficient fields.
  Eigen::Vector2d cell_center(int c) const {
    const auto& tri = cells.row(c);
    return (vertices.row(tri[0]) + vertices.row(tri[1]) + vertices.row(tri[2])).transpose() / 3.0;
  }
};

inline Mesh2D build_unit_square_mesh(int n) {
  if (n < 1) throw std::invalid_argument("build_unit_square_mesh: n must be >= 1");
  Mesh2D m;
  m.n = n;
  m.h = 1.0 / n;
  const int nv = (n + 1) * (n + 1);
  m.vertices.resize(nv, 2);
  m.boundary.assign(nv, false);
  m.interior_index.assign(nv, -1);
  for (int iy = 0; iy <= n; ++iy) {
    for (int ix = 0; ix <= n; ++ix) {
      const int v = m.vertex_id(ix, iy);
      m.vertices(v, 0) = ix * m.h;
      m.vertices(v, 1) = iy * m.h;
      if (ix == 0 || ix == n || iy == 0 || iy == n) {
        m.boundary[v] = true;
      } else {
        m.interior_index[v] = static_cast<int>(m.interior_vertex.size());
        m.interior_vertex.push_back(v);
      }
    }
  }
  m.cells.resize(2 * n * n, 3);
  int c = 0;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const int ll = m.vertex_id(ix, iy);
      const int lr = m.vertex_id(ix + 1, iy);
      const int ul = m.vertex_id(ix, iy + 1);
      const int ur = m.vertex_id(ix + 1, iy + 1);
      m.cells.row(c++) << ll, lr, ur;  // lower triangle
      m.cells.row(c++) << ll, ur, ul;  // upper triangle
    }
  }
  return m;
}

}  // namespace saa
