#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace laminhom {

// Dimension is a runtime value in {2,3}; the MaxRows/MaxCols bounds keep
// every small matrix on the stack.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
// Fourth-order tensors over d x d matrices, flattened as (d*d) x (d*d).
using Mat9 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 9, 9>;

/// Frobenius inner product A : B.
inline double ddot(const Mat& a, const Mat& b) { return a.cwiseProduct(b).sum(); }

/// u (x) e_d, the gradient of a laminate displacement with profile u.
Mat outer_ed(const Vec& u, int dim);

/// Unit matrix e_i (x) e_j.
Mat unit_matrix(int dim, int i, int j);

/// The d*d unit matrices in row-major order, index a = i*d + j.
std::vector<Mat> matrix_basis(int dim);

/// Row-major flattening of a d x d matrix into a vector of length d*d.
Eigen::VectorXd flatten(const Mat& a);
Mat unflatten(const Eigen::VectorXd& v, int dim);

/// dist(F, SO(d)) from the singular values; handles det F <= 0 by flipping
/// the smallest singular value.
double dist_to_rotations(const Mat& f);

/// Rotation in SO(2) by angle theta, or in SO(3) about a unit axis.
Mat rotation2(double theta);
Mat rotation3(const Eigen::Vector3d& axis, double theta);

}  // namespace laminhom
