#pragma once

#include <Eigen/Dense>

namespace iontweez {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;

/// N x Dim ion coordinates, one row per ion. Row-major so that the flat view
/// indexes coordinate alpha of ion i at Dim * i + alpha.
template <int Dim>
using Coords = Eigen::Matrix<double, Eigen::Dynamic, Dim, Eigen::RowMajor>;

using Positions = Coords<3>;
using PlanePositions = Coords<2>;

enum Axis : int { kX = 0, kY = 1, kZ = 2 };

template <int Dim>
Vec flatten(const Coords<Dim>& r) {
  return Eigen::Map<const Vec>(r.data(), r.size());
}

template <int Dim>
Coords<Dim> unflatten(const Vec& v) {
  return Eigen::Map<const Coords<Dim>>(v.data(), v.size() / Dim, Dim);
}

/// y,z columns of a 3D configuration.
inline PlanePositions plane_of(const Positions& r) {
  PlanePositions p(r.rows(), 2);
  p.col(0) = r.col(kY);
  p.col(1) = r.col(kZ);
  return p;
}

/// Index of component (i, alpha) of the yz subspace inside the flat 3N vector.
inline int plane_to_full_index(int plane_index) {
  return 3 * (plane_index / 2) + 1 + plane_index % 2;
}

/// Restrict a 3N x 3N matrix to the 2N x 2N yz block, ordered (1y, 1z, 2y, 2z, ...).
inline Mat plane_block(const Mat& full) {
  const int n2 = static_cast<int>(full.rows() / 3) * 2;
  Mat out(n2, n2);
  for (int a = 0; a < n2; ++a) {
    for (int b = 0; b < n2; ++b) {
      out(a, b) = full(plane_to_full_index(a), plane_to_full_index(b));
    }
  }
  return out;
}

inline Vec plane_part(const Vec& full) {
  const int n2 = static_cast<int>(full.size() / 3) * 2;
  Vec out(n2);
  for (int a = 0; a < n2; ++a) out(a) = full(plane_to_full_index(a));
  return out;
}

}  // namespace iontweez
