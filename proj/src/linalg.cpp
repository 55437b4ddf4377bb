#include "laminhom/linalg.hpp"

#include <cmath>

namespace laminhom {

Mat outer_ed(const Vec& u, int dim) {
    Mat g = Mat::Zero(dim, dim);
    g.col(dim - 1) = u;
    return g;
}

Mat unit_matrix(int dim, int i, int j) {
    Mat e = Mat::Zero(dim, dim);
    e(i, j) = 1.0;
    return e;
}

std::vector<Mat> matrix_basis(int dim) {
    std::vector<Mat> basis;
    basis.reserve(static_cast<std::size_t>(dim * dim));
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) basis.push_back(unit_matrix(dim, i, j));
    return basis;
}

Eigen::VectorXd flatten(const Mat& a) {
    const auto d = a.rows();
    Eigen::VectorXd v(d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) v(i * d + j) = a(i, j);
    return v;
}

Mat unflatten(const Eigen::VectorXd& v, int dim) {
    Mat a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = v(i * dim + j);
    return a;
}

double dist_to_rotations(const Mat& f) {
    Eigen::JacobiSVD<Mat> svd(f);
    const Vec s = svd.singularValues();
    // Nearest rotation is U diag(1,..,1,sign det F) V^T; singular values come
    // sorted in decreasing order so the flipped one is the last.
    const double det = f.determinant();
    double acc = 0.0;
    const auto d = s.size();
    for (Eigen::Index i = 0; i + 1 < d; ++i) acc += (s(i) - 1.0) * (s(i) - 1.0);
    const double last = det < 0.0 ? s(d - 1) + 1.0 : s(d - 1) - 1.0;
    acc += last * last;
    return std::sqrt(acc);
}

Mat rotation2(double theta) {
    Mat r(2, 2);
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

Mat rotation3(const Eigen::Vector3d& axis, double theta) {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(theta, axis.normalized()).toRotationMatrix();
    return Mat(r);
}

}  // namespace laminhom
