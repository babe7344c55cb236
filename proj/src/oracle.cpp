#include "ttc/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <functional>

namespace ttc::oracle {

double naive_tt_entry(const TensorTrain& X, const MultiIndex& idx) {
    require(idx.size() == X.shape().size(), "multi-index order mismatch");
    const Index d = X.order();
    std::function<double(Index, Index)> rec = [&](Index k, Index a) -> double {
        const TTCore& c = X.core(k);
        const Index i = idx[k] - 1;
        if (k == d - 1) return c.at(a, i, 0);
        double s = 0.0;
        for (Index b = 0; b < c.r_right; ++b)
            s += c.at(a, i, b) * rec(k + 1, b);
        return s;
    };
    return rec(0, 0);
}

DenseTensor best_rank_approx_d2(const DenseTensor& X, Index r) {
    require(X.order() == 2, "best_rank_approx_d2 needs an order-2 tensor");
    Eigen::MatrixXd M = unfold(X, 1);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index rr = std::min<Index>(r, svd.singularValues().size());
    Eigen::MatrixXd approx = svd.matrixU().leftCols(rr) *
                             svd.singularValues().head(rr).asDiagonal() *
                             svd.matrixV().leftCols(rr).transpose();
    return tensorize(approx, X.shape(), 1);
}

double dense_opnorm(const Eigen::MatrixXd& M) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

namespace {

// Orthonormal basis of the column span of M, truncated at the declared rank.
Eigen::MatrixXd span_basis(const Eigen::MatrixXd& M, Index rank) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(std::min<Index>(rank, svd.matrixU().cols()));
}

} // namespace

Eigen::MatrixXd dense_projector(const TensorTrain& X) {
    const Index N = num_entries(X.shape());
    require(N <= 20000, "dense_projector guard: prod(n) too large");
    const Index d = X.order();
    const RankTuple r = X.ranks();
    const DenseTensor Z = to_dense(X);

    // P_{<=k} and P_{>=k+1} lifted to vec-space (column-major vec, so the
    // row-side projector is block-diagonal and the column-side projector is
    // a Kronecker factor against identity).
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N, N);
    Eigen::MatrixXd P_le_prev = Eigen::MatrixXd::Identity(N, N);
    for (Index k = 1; k <= d - 1; ++k) {
        Eigen::MatrixXd M = unfold(Z, k);
        Eigen::MatrixXd U = span_basis(M, r[k]);              // column span
        Eigen::MatrixXd V = span_basis(M.transpose(), r[k]);  // row span
        const Index rows = M.rows(), cols = M.cols();
        Eigen::MatrixXd Prow = U * U.transpose();
        Eigen::MatrixXd Pcol = V * V.transpose();
        Eigen::MatrixXd P_le = Eigen::MatrixXd::Zero(N, N);
        for (Index c = 0; c < cols; ++c)
            P_le.block(c * rows, c * rows, rows, rows) = Prow;
        // vec(M Pcol) = (Pcol (x) I_rows) vec(M) since Pcol is symmetric.
        Eigen::MatrixXd P_ge = Eigen::MatrixXd::Zero(N, N);
        for (Index c1 = 0; c1 < cols; ++c1)
            for (Index c2 = 0; c2 < cols; ++c2)
                P_ge.block(c1 * rows, c2 * rows, rows, rows) =
                    Pcol(c2, c1) * Eigen::MatrixXd::Identity(rows, rows);
        P += (P_le_prev - P_le) * P_ge;
        P_le_prev = std::move(P_le);
    }
    P += P_le_prev; // the k = d term: P_{<=d-1} with identity on the right
    return P;
}

Eigen::MatrixXd dense_tangent_basis(const TensorTrain& X) {
    const Eigen::MatrixXd P = dense_projector(X);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(P);
    const auto& vals = eig.eigenvalues();
    Index dim = 0;
    for (Index i = 0; i < vals.size(); ++i) {
        require(vals(i) < 1e-8 || std::abs(vals(i) - 1.0) < 1e-8,
                "dense projector spectrum is not {0,1}");
        if (vals(i) > 0.5) ++dim;
    }
    const RankTuple r = X.ranks();
    Index expect = 0;
    for (Index k = 0; k < X.order(); ++k) {
        expect += r[k] * X.shape()[k] * r[k + 1];
        if (k + 1 < X.order()) expect -= r[k + 1] * r[k + 1];
    }
    require(dim == expect, "tangent space dimension mismatch");
    // Eigenvalues ascend, so the lambda = 1 eigenvectors are the last columns.
    return eig.eigenvectors().rightCols(dim);
}

} // namespace ttc::oracle
