#include "ttc/tangent.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "ttc/rng.hpp"
#include "ttc/sampling.hpp"

namespace ttc {

namespace {

constexpr double kGaugeDrift = 1e-10;
constexpr Index kDenseProjGuard = 20000;

// M holds q x prod_{modes > k} n_j entries (q fastest); contracts the trailing
// modes against the right-orthogonal cores of V, returning M * V_{>= k+2} of
// size q x r_{k+1} (0-based core arithmetic: contracts cores first..d-1).
Eigen::MatrixXd right_contract(const TensorTrain& V, Index first, Eigen::MatrixXd M) {
    for (Index j = V.order() - 1; j >= first; --j) {
        const TTCore& c = V.core(j);
        const Index rows = M.size() / (c.n * c.r_right);
        Eigen::MatrixXd next =
            Eigen::Map<const Eigen::MatrixXd>(M.data(), rows, c.n * c.r_right) *
            c.right_unfold().transpose();
        M = std::move(next);
    }
    return M;
}

void apply_gauge_projection(std::vector<TTCore>& g, const TensorTrain& left) {
    for (Index k = 0; k + 1 < static_cast<Index>(g.size()); ++k) {
        const Eigen::MatrixXd& U = left.core(k).m;
        g[k].m -= U * (U.transpose() * g[k].m);
    }
}

} // namespace

ProjectorHandle::ProjectorHandle(const TensorTrain& X)
    : left_(orthogonalize(X, X.order())), right_(orthogonalize(X, 1)) {}

TangentVector::TangentVector(ProjectorPtr base) : base_(std::move(base)) {
    require(base_ != nullptr, "tangent vector needs a base point");
    const RankTuple r = base_->ranks();
    const Shape& shape = base_->shape();
    gauges_.reserve(shape.size());
    for (std::size_t k = 0; k < shape.size(); ++k)
        gauges_.emplace_back(r[k], shape[k], r[k + 1]);
}

double TangentVector::gauge_residual() const {
    double worst = 0.0;
    for (Index k = 0; k + 1 < static_cast<Index>(gauges_.size()); ++k) {
        const double nrm = gauges_[k].m.norm();
        if (nrm == 0.0) continue;
        const Eigen::MatrixXd& U = base_->left().core(k).m;
        worst = std::max(worst, (U.transpose() * gauges_[k].m).norm() / nrm);
    }
    return worst;
}

void TangentVector::enforce_gauge() {
    apply_gauge_projection(gauges_, base_->left());
}

TangentVector project(const ProjectorPtr& P, const DenseTensor& Z) {
    require(P != nullptr, "null projector handle");
    require(Z.shape() == P->shape(), "shape mismatch in tangent projection");
    const Index d = P->order();
    const RankTuple R = P->ranks();
    TangentVector Y(P);

    // Zhat carries U_{<=k}^T applied to the leading modes: r_k x (n_{k+1}...n_d).
    Eigen::MatrixXd Zhat =
        Eigen::Map<const Eigen::MatrixXd>(Z.data().data(), 1, Z.size());
    for (Index k = 0; k < d; ++k) {
        const Index rows = R[k] * P->shape()[k];
        Eigen::Map<const Eigen::MatrixXd> A(Zhat.data(), rows, Zhat.size() / rows);
        Y.gauges()[k].m = right_contract(P->right(), k + 1, A);
        if (k + 1 < d) {
            Eigen::MatrixXd next = P->left().core(k).m.transpose() * A;
            Zhat = std::move(next);
        }
    }
    apply_gauge_projection(Y.gauges(), P->left());
    return Y;
}

TangentVector project(const ProjectorPtr& P, const TensorTrain& Z) {
    require(P != nullptr, "null projector handle");
    require(Z.shape() == P->shape(), "shape mismatch in tangent projection");
    const Index d = P->order();
    TangentVector Y(P);

    // Right contraction stack against the right-orthogonal interface.
    std::vector<Eigen::MatrixXd> Rmat(d + 1);
    Rmat[d] = Eigen::MatrixXd::Ones(1, 1);
    for (Index k = d - 1; k >= 1; --k) {
        const TTCore& zc = Z.core(k);
        const TTCore& vc = P->right().core(k);
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(zc.r_left, vc.r_left);
        for (Index i = 0; i < zc.n; ++i)
            next.noalias() += zc.slice(i) * Rmat[k + 1] * vc.slice(i).transpose();
        Rmat[k] = std::move(next);
    }
    // Left contraction against the left-orthogonal interface, emitting cores.
    Eigen::MatrixXd L = Eigen::MatrixXd::Ones(1, 1);
    for (Index k = 0; k < d; ++k) {
        const TTCore& zc = Z.core(k);
        TTCore& g = Y.gauges()[k];
        for (Index i = 0; i < zc.n; ++i)
            g.slice(i).noalias() = L * zc.slice(i) * Rmat[k + 1];
        if (k + 1 < d) {
            const TTCore& uc = P->left().core(k);
            Eigen::MatrixXd next = Eigen::MatrixXd::Zero(uc.r_right, zc.r_right);
            for (Index i = 0; i < zc.n; ++i)
                next.noalias() += uc.slice(i).transpose() * L * zc.slice(i);
            L = std::move(next);
        }
    }
    apply_gauge_projection(Y.gauges(), P->left());
    return Y;
}

TangentVector project(const ProjectorPtr& P, const SparseValues& S) {
    require(P != nullptr, "null projector handle");
    require(S.shape == P->shape(), "shape mismatch in tangent projection");
    require(static_cast<Index>(S.offsets.size()) == S.values.size(),
            "sparse offsets/values mismatch");
    const Index d = P->order();
    TangentVector Y(P);

    std::vector<Eigen::RowVectorXd> u(d); // u[k]: interface row through modes < k+1
    std::vector<Eigen::VectorXd> v(d);    // v[k]: interface column through modes > k+1
    std::vector<Index> digits(d);
    for (std::size_t t = 0; t < S.offsets.size(); ++t) {
        Index off = S.offsets[t];
        const double z = S.values[t];
        for (Index k = 0; k < d; ++k) {
            digits[k] = off % P->shape()[k];
            off /= P->shape()[k];
        }
        u[0] = Eigen::RowVectorXd::Ones(1);
        for (Index k = 1; k < d; ++k)
            u[k] = u[k - 1] * P->left().core(k - 1).slice(digits[k - 1]);
        v[d - 1] = Eigen::VectorXd::Ones(1);
        for (Index k = d - 2; k >= 0; --k)
            v[k] = P->right().core(k + 1).slice(digits[k + 1]) * v[k + 1];
        for (Index k = 0; k < d; ++k)
            Y.gauges()[k].slice(digits[k]).noalias() +=
                z * u[k].transpose() * v[k].transpose();
    }
    apply_gauge_projection(Y.gauges(), P->left());
    return Y;
}

TangentVector project(const ProjectorPtr& P, const RankOneSum& S) {
    require(P != nullptr, "null projector handle");
    require(S.shape == P->shape(), "shape mismatch in tangent projection");
    const Index d = P->order();
    require(static_cast<Index>(S.modes.size()) == d, "one mode matrix per mode required");
    const Index count = S.values.size();
    for (Index k = 0; k < d; ++k)
        require(S.modes[k].rows() == S.shape[k] && S.modes[k].cols() == count,
                "mode matrix size mismatch in rank-one sum");
    TangentVector Y(P);

    std::vector<Eigen::RowVectorXd> u(d);
    std::vector<Eigen::VectorXd> v(d);
    for (Index t = 0; t < count; ++t) {
        const double z = S.values[t];
        u[0] = Eigen::RowVectorXd::Ones(1);
        for (Index k = 1; k < d; ++k)
            u[k] = u[k - 1] * P->left().core(k - 1).weighted_slice(S.modes[k - 1].col(t));
        v[d - 1] = Eigen::VectorXd::Ones(1);
        for (Index k = d - 2; k >= 0; --k)
            v[k] = P->right().core(k + 1).weighted_slice(S.modes[k + 1].col(t)) * v[k + 1];
        for (Index k = 0; k < d; ++k) {
            const Eigen::MatrixXd outer = z * u[k].transpose() * v[k].transpose();
            TTCore& g = Y.gauges()[k];
            for (Index i = 0; i < g.n; ++i) {
                const double w = S.modes[k](i, t);
                if (w != 0.0) g.slice(i).noalias() += w * outer;
            }
        }
    }
    apply_gauge_projection(Y.gauges(), P->left());
    return Y;
}

TensorTrain embed(const TangentVector& Y) {
    const ProjectorPtr& P = Y.base();
    require(P != nullptr, "tangent vector has no base point");
    TangentVector fixed = Y;
    if (fixed.gauge_residual() > kGaugeDrift) fixed.enforce_gauge();
    const Index d = P->order();
    const Shape& shape = P->shape();
    if (d == 1) return TensorTrain(shape, {fixed.gauges()[0]});
    const RankTuple R = P->ranks();

    std::vector<TTCore> cores;
    cores.reserve(d);
    for (Index k = 0; k < d; ++k) {
        const TTCore& g = fixed.gauges()[k];
        if (k == 0) {
            const TTCore& U = P->left().core(0);
            TTCore c(1, shape[0], 2 * R[1]);
            for (Index i = 0; i < c.n; ++i) {
                c.slice(i).leftCols(R[1]) = g.slice(i);
                c.slice(i).rightCols(R[1]) = U.slice(i);
            }
            cores.push_back(std::move(c));
        } else if (k == d - 1) {
            const TTCore& V = P->right().core(k);
            TTCore c(2 * R[k], shape[k], 1);
            for (Index i = 0; i < c.n; ++i) {
                c.slice(i).topRows(R[k]) = V.slice(i);
                c.slice(i).bottomRows(R[k]) = g.slice(i);
            }
            cores.push_back(std::move(c));
        } else {
            const TTCore& U = P->left().core(k);
            const TTCore& V = P->right().core(k);
            TTCore c(2 * R[k], shape[k], 2 * R[k + 1]);
            for (Index i = 0; i < c.n; ++i) {
                c.slice(i).topLeftCorner(R[k], R[k + 1]) = V.slice(i);
                c.slice(i).bottomLeftCorner(R[k], R[k + 1]) = g.slice(i);
                c.slice(i).bottomRightCorner(R[k], R[k + 1]) = U.slice(i);
            }
            cores.push_back(std::move(c));
        }
    }
    return TensorTrain(shape, std::move(cores));
}

Index tangent_dimension(const Shape& shape, const std::vector<Index>& ranks) {
    const RankTuple r = normalize_ranks(shape, ranks);
    const Index d = static_cast<Index>(shape.size());
    Index dim = 0;
    for (Index k = 0; k < d; ++k)
        dim += r[static_cast<std::size_t>(k)] * shape[static_cast<std::size_t>(k)] *
               r[static_cast<std::size_t>(k + 1)];
    for (Index k = 1; k < d; ++k)
        dim -= r[static_cast<std::size_t>(k)] * r[static_cast<std::size_t>(k)];
    return dim;
}

TangentVector tangent_axpy(double a, const TangentVector& Y, double b,
                           const TangentVector& W) {
    require(Y.base() != nullptr && Y.base() == W.base(),
            "tangent vectors have mismatched base points");
    TangentVector out(Y.base());
    for (std::size_t k = 0; k < out.gauges().size(); ++k)
        out.gauges()[k].m = a * Y.gauges()[k].m + b * W.gauges()[k].m;
    if (out.gauge_residual() > kGaugeDrift) out.enforce_gauge();
    return out;
}

double tangent_inner(const TangentVector& Y, const TangentVector& W) {
    require(Y.base() != nullptr && Y.base() == W.base(),
            "tangent vectors have mismatched base points");
    double s = 0.0;
    for (std::size_t k = 0; k < Y.gauges().size(); ++k)
        s += (Y.gauges()[k].m.array() * W.gauges()[k].m.array()).sum();
    return s;
}

double tangent_norm(const TangentVector& Y) {
    double s = 0.0;
    for (const TTCore& g : Y.gauges()) s += g.m.squaredNorm();
    return std::sqrt(s);
}

DenseTensor proj_leq(const ProjectorPtr& P, Index k, const DenseTensor& Z) {
    require(P != nullptr, "null projector handle");
    require(Z.shape() == P->shape(), "shape mismatch");
    const Index d = P->order();
    require(k >= 0 && k <= d - 1, "proj_leq position out of range");
    if (k == 0) return Z;
    const RankTuple R = P->ranks();
    Eigen::MatrixXd T =
        Eigen::Map<const Eigen::MatrixXd>(Z.data().data(), 1, Z.size());
    for (Index j = 0; j < k; ++j) {
        const Index rows = R[j] * P->shape()[j];
        Eigen::Map<const Eigen::MatrixXd> A(T.data(), rows, T.size() / rows);
        Eigen::MatrixXd next = P->left().core(j).m.transpose() * A;
        T = std::move(next);
    }
    for (Index j = k - 1; j >= 0; --j) {
        Eigen::MatrixXd big = P->left().core(j).m * T; // (R[j] n_j) x rest
        T = Eigen::Map<const Eigen::MatrixXd>(big.data(), R[j],
                                              big.size() / R[j]);
    }
    return DenseTensor(Z.shape(),
                       Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(T.data(), T.size())));
}

DenseTensor proj_geq(const ProjectorPtr& P, Index j, const DenseTensor& Z) {
    require(P != nullptr, "null projector handle");
    require(Z.shape() == P->shape(), "shape mismatch");
    const Index d = P->order();
    require(j >= 2 && j <= d + 1, "proj_geq position out of range");
    if (j == d + 1) return Z;
    Index lead = 1;
    for (Index t = 0; t < j - 1; ++t) lead *= P->shape()[t];
    Eigen::MatrixXd M =
        Eigen::Map<const Eigen::MatrixXd>(Z.data().data(), lead, Z.size() / lead);
    Eigen::MatrixXd W = right_contract(P->right(), j - 1, M); // lead x r_{j-1}
    for (Index t = j - 1; t < d; ++t) {
        const TTCore& V = P->right().core(t);
        Eigen::MatrixXd big = W * V.right_unfold(); // Q x (n_t r_{t+1})
        const Index q = big.rows();
        W = Eigen::Map<const Eigen::MatrixXd>(big.data(), q * V.n,
                                              big.size() / (q * V.n));
    }
    return DenseTensor(Z.shape(),
                       Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(W.data(), W.size())));
}

CurvatureGap curvature_gap(const TensorTrain& X, const TensorTrain& Xtilde) {
    auto P = std::make_shared<const ProjectorHandle>(Xtilde);
    const TensorTrain G = embed(project(P, X));
    CurvatureGap out;
    out.gap = diff_norm(X, G);
    const double dist = diff_norm(X, Xtilde);
    const double smin = sigma_min_tt(X);
    out.bound = smin > 0.0 ? dist * dist / smin
                           : std::numeric_limits<double>::infinity();
    require(out.gap <= out.bound * (1.0 + 1e-6) + 1e-9 * (1.0 + norm(X)),
            "curvature bound violated beyond roundoff");
    return out;
}

namespace {

// Dense orthonormal basis of the tangent space at the handle's base, one
// column per gauge degree of freedom (only valid at dense-able sizes).
Eigen::MatrixXd dense_basis(const ProjectorPtr& P) {
    const Index d = P->order();
    const RankTuple R = P->ranks();
    const Index N = num_entries(P->shape());
    Index dim = 0;
    for (Index k = 0; k < d; ++k) {
        dim += R[k] * P->shape()[k] * R[k + 1];
        if (k + 1 < d) dim -= R[k + 1] * R[k + 1];
    }
    Eigen::MatrixXd B(N, dim);
    Index col = 0;
    for (Index k = 0; k < d; ++k) {
        const Index rows = R[k] * P->shape()[k];
        if (k + 1 < d) {
            const Eigen::MatrixXd& U = P->left().core(k).m;
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(U);
            Eigen::MatrixXd Nk =
                Eigen::MatrixXd(qr.householderQ()).rightCols(rows - R[k + 1]);
            for (Index p = 0; p < Nk.cols(); ++p)
                for (Index q = 0; q < R[k + 1]; ++q) {
                    TangentVector Y(P);
                    Y.gauges()[k].m.col(q) = Nk.col(p);
                    B.col(col++) = to_dense(embed(Y)).data();
                }
        } else {
            for (Index p = 0; p < rows; ++p) {
                TangentVector Y(P);
                Y.gauges()[k].m(p, 0) = 1.0;
                B.col(col++) = to_dense(embed(Y)).data();
            }
        }
    }
    require(col == dim, "tangent basis dimension bookkeeping failed");
    return B;
}

double one_sided_angle(const Eigen::MatrixXd& G) {
    // max_x ||(I - P) Btilde x|| for unit x, with G = B^T Btilde.
    if (G.cols() > G.rows()) return 1.0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(G);
    const double c = svd.singularValues()(svd.singularValues().size() - 1);
    return std::sqrt(std::max(0.0, 1.0 - c * c));
}

} // namespace

ProjectorDistance projector_distance(const TensorTrain& X, const TensorTrain& Xtilde) {
    require(X.shape() == Xtilde.shape(), "shape mismatch");
    auto PX = std::make_shared<const ProjectorHandle>(X);
    auto PT = std::make_shared<const ProjectorHandle>(Xtilde);
    const Index N = num_entries(X.shape());

    ProjectorDistance out;
    if (N <= kDenseProjGuard) {
        // Principal-angle route on explicit orthonormal bases.
        const Eigen::MatrixXd B = dense_basis(PX);
        const Eigen::MatrixXd Bt = dense_basis(PT);
        const Eigen::MatrixXd G = B.transpose() * Bt;
        out.distance = std::max(one_sided_angle(G),
                                one_sided_angle(Eigen::MatrixXd(G.transpose())));
    } else {
        // Power iteration on the squared difference operator (200 iterations,
        // 1e-8 relative stagnation stop); needs O(prod n) vector memory.
        Rng rng(0x5eedULL);
        Eigen::VectorXd v(N);
        for (Index i = 0; i < N; ++i) v[i] = rng.normal();
        v.normalize();
        auto applyD = [&](const Eigen::VectorXd& w) {
            DenseTensor Zw(X.shape(), w);
            Eigen::VectorXd a = to_dense(embed(project(PX, Zw))).data();
            a -= to_dense(embed(project(PT, Zw))).data();
            return a;
        };
        double est = 0.0;
        for (int it = 0; it < 200; ++it) {
            Eigen::VectorXd a = applyD(v);
            const double cur = a.norm(); // ||D v|| <= ||D||, tight at the top pair
            if (cur == 0.0) { est = 0.0; break; }
            Eigen::VectorXd b = applyD(a / cur);
            const double nb = b.norm();
            if (std::abs(cur - est) <= 1e-8 * std::max(cur, 1e-300)) { est = cur; break; }
            est = cur;
            if (nb == 0.0) break;
            v = b / nb;
        }
        out.distance = est;
    }
    const double dist = diff_norm(X, Xtilde);
    const double smin = sigma_min_tt(X);
    out.bound = smin > 0.0 ? 2.0 * dist / smin
                           : std::numeric_limits<double>::infinity();
    return out;
}

} // namespace ttc
