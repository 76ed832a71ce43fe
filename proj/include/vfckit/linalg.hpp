#pragma once

#include <Eigen/Dense>
#include <vector>

namespace vfckit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec make_vec(std::initializer_list<double> xs) {
    Vec v(xs.size());
    int i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

inline Vec to_vec(const std::vector<double>& xs) {
    Vec v(xs.size());
    for (int i = 0; i < (int)xs.size(); ++i) v[i] = xs[i];
    return v;
}

inline Vec concat(const Vec& a, const Vec& b) {
    Vec v(a.size() + b.size());
    v.head(a.size()) = a;
    v.tail(b.size()) = b;
    return v;
}

// Smallest singular value; 0 for an empty matrix (rank condition vacuous).
inline double sigma_min(const Mat& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues().minCoeff();
}

inline double sigma_max(const Mat& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues().maxCoeff();
}

// Orthonormal basis of ker(m) as columns (right singular vectors with
// singular value below tol).
inline Mat kernel_basis(const Mat& m, double tol = 1e-9) {
    if (m.cols() == 0) return Mat(0, 0);
    if (m.rows() == 0) return Mat::Identity(m.cols(), m.cols());
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) ++rank;
    return svd.matrixV().rightCols(m.cols() - rank);
}

inline bool solve_square(const Mat& a, const Vec& b, Vec& x) {
    Eigen::PartialPivLU<Mat> lu(a);
    x = lu.solve(b);
    return (a * x - b).norm() <= 1e-8 * (1.0 + b.norm());
}

// Least-squares solve for rectangular systems (Gauss-Newton steps).
inline Vec solve_lsq(const Mat& a, const Vec& b) {
    return a.completeOrthogonalDecomposition().solve(b);
}

}  // namespace vfckit
