#pragma once

// Dense kernels shared by the statistic and the data generators. Everything
// here is templated on the Eigen scalar type and free of shared state.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "hdiv/errors.hpp"

namespace hdiv {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// N x K instrument matrix, one observation per row. Construction checks that
/// every entry is finite and that there are at least two observations.
template <typename Scalar>
class BasicInstrumentMatrix {
public:
    using matrix_type = Mat<Scalar>;

    explicit BasicInstrumentMatrix(matrix_type values) : values_(std::move(values)) {
        if (values_.rows() < 2)
            throw Error(Errc::validation, "instrument matrix needs at least 2 rows, got " +
                                              std::to_string(values_.rows()));
        if (values_.cols() < 1)
            throw Error(Errc::validation, "instrument matrix needs at least 1 column");
        if (!values_.allFinite())
            throw Error(Errc::validation, "instrument matrix has a non-finite entry");
    }

    const matrix_type& values() const noexcept { return values_; }
    Eigen::Index n() const noexcept { return values_.rows(); }
    Eigen::Index k() const noexcept { return values_.cols(); }
    double ratio() const noexcept { return double(k()) / double(n()); }

private:
    matrix_type values_;
};

using InstrumentMatrix = BasicInstrumentMatrix<double>;

template <typename Scalar>
struct GramSummary {
    Scalar trace_sbar{};     // tr(ZZ')/N
    Scalar frob_sq_cross{};  // ||Z'Z||_F^2 == ||ZZ'||_F^2
    Vec<Scalar> row_norms_sq;
};

template <typename Scalar>
struct EigenSummary {
    Vec<Scalar> eigenvalues;   // nonincreasing, length min(N, K)
    Mat<Scalar> left_vectors;  // N x min(N, K), orthonormal columns
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
    if (!m.allFinite())
        throw Error(Errc::validation, std::string(what) + " has a non-finite entry");
}

// Squared Frobenius norm of a symmetric matrix stored in its lower triangle.
template <typename Scalar>
Scalar lower_frob_sq(const Mat<Scalar>& g) {
    Scalar total = 0;
    const Eigen::Index d = g.rows();
    for (Eigen::Index j = 0; j < d; ++j) {
        total += g(j, j) * g(j, j);
        if (j + 1 < d)
            total += Scalar(2) * g.col(j).tail(d - j - 1).squaredNorm();
    }
    return total;
}

}  // namespace detail

/// The smaller of Z'Z (K x K) and ZZ' (N x N), lower triangle only.
template <typename Derived>
Mat<typename Derived::Scalar> small_gram(const Eigen::MatrixBase<Derived>& z) {
    using Scalar = typename Derived::Scalar;
    Mat<Scalar> g;
    if (z.cols() < z.rows()) {
        g.setZero(z.cols(), z.cols());
        g.template selfadjointView<Eigen::Lower>().rankUpdate(z.transpose());
    } else {
        g.setZero(z.rows(), z.rows());
        g.template selfadjointView<Eigen::Lower>().rankUpdate(z);
    }
    return g;
}

template <typename Derived>
GramSummary<typename Derived::Scalar> gram_summary(const Eigen::MatrixBase<Derived>& z) {
    using Scalar = typename Derived::Scalar;
    detail::require_finite(z, "instrument matrix");
    if (z.rows() < 2)
        throw Error(Errc::validation, "gram_summary needs N >= 2");
    GramSummary<Scalar> out;
    out.row_norms_sq = z.rowwise().squaredNorm();
    out.trace_sbar = out.row_norms_sq.sum() / Scalar(z.rows());
    out.frob_sq_cross = detail::lower_frob_sq(small_gram(z));
    return out;
}

template <typename Scalar>
GramSummary<Scalar> gram_summary(const BasicInstrumentMatrix<Scalar>& z) {
    return gram_summary(z.values());
}

/// Symmetric PSD square root via eigendecomposition. Eigenvalues in
/// [-1e-10, 0) are clamped to zero; anything more negative is rejected.
template <typename Derived>
Mat<typename Derived::Scalar> sym_sqrt(const Eigen::MatrixBase<Derived>& sigma) {
    using Scalar = typename Derived::Scalar;
    if (sigma.rows() != sigma.cols())
        throw Error(Errc::validation, "sym_sqrt needs a square matrix");
    detail::require_finite(sigma, "sym_sqrt input");
    const Scalar asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
    if (asym > Scalar(1e-10))
        throw Error(Errc::validation, "sym_sqrt input is not symmetric");

    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sigma);
    if (es.info() != Eigen::Success)
        throw Error(Errc::numeric, "symmetric eigendecomposition failed");
    Vec<Scalar> lambda = es.eigenvalues();
    if (lambda.size() > 0 && lambda.minCoeff() < Scalar(-1e-10))
        throw Error(Errc::not_psd, "sym_sqrt input has eigenvalue " +
                                       std::to_string(double(lambda.minCoeff())));
    lambda = lambda.cwiseMax(Scalar(0)).cwiseSqrt();
    Mat<Scalar> root = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
    // symmetrize away rounding
    return (root + root.transpose()) * Scalar(0.5);
}

/// Eigenpairs of ZZ'/N through the thin SVD of Z/sqrt(N). Slow; used to
/// cross-check the quadratic-form path.
template <typename Derived>
EigenSummary<typename Derived::Scalar> eigen_summary(const Eigen::MatrixBase<Derived>& z) {
    using Scalar = typename Derived::Scalar;
    detail::require_finite(z, "instrument matrix");
    const Mat<Scalar> scaled = z / std::sqrt(Scalar(z.rows()));
    Eigen::BDCSVD<Mat<Scalar>> svd(scaled, Eigen::ComputeThinU);
    EigenSummary<Scalar> out;
    out.eigenvalues = svd.singularValues().cwiseAbs2();
    out.left_vectors = svd.matrixU();
    return out;
}

/// sum_l lambda_l (q_l' ybar)^2 from an explicit decomposition.
template <typename Derived, typename VecDerived>
typename Derived::Scalar eigen_quadratic(const Eigen::MatrixBase<Derived>& z,
                                         const Eigen::MatrixBase<VecDerived>& ybar) {
    using Scalar = typename Derived::Scalar;
    if (ybar.size() != z.rows())
        throw Error(Errc::validation, "eigen_quadratic: length mismatch");
    if (std::abs(ybar.norm() - Scalar(1)) > Scalar(1e-10))
        throw Error(Errc::validation, "eigen_quadratic needs a unit vector");
    const auto es = eigen_summary(z);
    const Vec<Scalar> coords = es.left_vectors.transpose() * ybar;
    return (es.eigenvalues.array() * coords.array().square()).sum();
}

template <typename Scalar, typename VecDerived>
Scalar eigen_quadratic(const BasicInstrumentMatrix<Scalar>& z,
                       const Eigen::MatrixBase<VecDerived>& ybar) {
    return eigen_quadratic(z.values(), ybar);
}

}  // namespace hdiv
