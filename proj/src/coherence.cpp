#include "ttc/coherence.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ttc/rng.hpp"

namespace ttc {

namespace {

constexpr Index kInterfaceRowGuard = 1000000;
constexpr Index kProjectionGuard = 100000;
constexpr Index kExactTangentGuard = 5000;

double max_row_sqnorm(const Eigen::MatrixXd& F) {
    return F.rowwise().squaredNorm().maxCoeff();
}

double max_slice_spec_sq(const TTCore& c) {
    double best = 0.0;
    for (Index i = 0; i < c.n; ++i) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(c.slice(i));
        best = std::max(best, svd.singularValues()(0));
    }
    return best * best;
}

double shape_product(const Shape& s, Index first, Index last) { // [first, last)
    double p = 1.0;
    for (Index k = first; k < last; ++k) p *= static_cast<double>(s[k]);
    return p;
}

} // namespace

double subspace_coherence(const Eigen::MatrixXd& U) {
    const Index n = U.rows(), r = U.cols();
    require(r >= 1 && n >= r, "expected a tall matrix with at least one column");
    const double ortho =
        (U.transpose() * U - Eigen::MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();
    require(ortho <= 1e-10, "columns are not orthonormal");
    return static_cast<double>(n) / static_cast<double>(r) * max_row_sqnorm(U);
}

InterfaceCoherence interface_coherence(const TensorTrain& X) {
    const Index d = X.order();
    InterfaceCoherence out;
    if (d < 2) return out;
    out.left.assign(d - 1, 0.0);
    out.right.assign(d - 1, 0.0);

    double mu_c = 0.0; // fetched only if a guard trips
    bool mu_c_ready = false;
    const auto power_bound = [&](Index exponent) {
        if (!mu_c_ready) {
            mu_c = core_coherence(X).max;
            mu_c_ready = true;
        }
        return std::pow(mu_c, static_cast<double>(exponent));
    };

    // Span of modes 1..k from the fully left-orthogonal form: the interface
    // matrix itself has orthonormal columns, so only its row norms matter.
    {
        const TensorTrain L = orthogonalize(X, d);
        const RankTuple r = L.ranks();
        Eigen::MatrixXd F = L.core(0).left_unfold();
        out.left[0] = shape_product(X.shape(), 0, 1) / static_cast<double>(r[1]) *
                      max_row_sqnorm(F);
        for (Index c = 1; c + 1 < d; ++c) {
            const Index n_c = X.shape()[c];
            if (F.rows() * n_c > kInterfaceRowGuard) {
                out.exact = false;
                for (Index j = c; j + 1 < d; ++j) out.left[j] = power_bound(j + 1);
                break;
            }
            Eigen::MatrixXd next(F.rows() * n_c, r[c + 1]);
            for (Index i = 0; i < n_c; ++i)
                next.middleRows(F.rows() * i, F.rows()).noalias() = F * L.core(c).slice(i);
            F = std::move(next);
            out.left[c] = shape_product(X.shape(), 0, c + 1) /
                          static_cast<double>(r[c + 1]) * max_row_sqnorm(F);
        }
    }
    // Span of modes k+2..d (0-based entry k) from the right-orthogonal form.
    {
        const TensorTrain R = orthogonalize(X, 1);
        const RankTuple r = R.ranks();
        Eigen::MatrixXd F(X.shape()[d - 1], r[d - 1]);
        for (Index i = 0; i < X.shape()[d - 1]; ++i)
            F.row(i) = R.core(d - 1).slice(i).transpose();
        out.right[d - 2] = shape_product(X.shape(), d - 1, d) /
                           static_cast<double>(r[d - 1]) * max_row_sqnorm(F);
        for (Index c = d - 2; c >= 1; --c) {
            const Index n_c = X.shape()[c];
            if (F.rows() * n_c > kInterfaceRowGuard) {
                out.exact = false;
                for (Index j = c - 1; j >= 0; --j) out.right[j] = power_bound(d - j - 1);
                break;
            }
            Eigen::MatrixXd next(F.rows() * n_c, r[c]);
            for (Index i = 0; i < n_c; ++i)
                next.middleRows(F.rows() * i, F.rows()).noalias() =
                    F * R.core(c).slice(i).transpose();
            F = std::move(next);
            out.right[c - 1] = shape_product(X.shape(), c, d) /
                               static_cast<double>(r[c]) * max_row_sqnorm(F);
        }
    }
    out.max = std::max(*std::max_element(out.left.begin(), out.left.end()),
                       *std::max_element(out.right.begin(), out.right.end()));
    return out;
}

CoreCoherence core_coherence(const TensorTrain& X) {
    const Index d = X.order();
    CoreCoherence out;
    if (d < 2) return out;
    out.left.assign(d - 1, 0.0);
    out.right.assign(d - 1, 0.0);

    const TensorTrain L = orthogonalize(X, d);
    const RankTuple rl = L.ranks();
    for (Index c = 0; c + 1 < d; ++c)
        out.left[c] = static_cast<double>(rl[c] * X.shape()[c]) /
                      static_cast<double>(rl[c + 1]) * max_slice_spec_sq(L.core(c));

    const TensorTrain R = orthogonalize(X, 1);
    const RankTuple rr = R.ranks();
    for (Index c = 1; c < d; ++c)
        out.right[c - 1] = static_cast<double>(rr[c + 1] * X.shape()[c]) /
                           static_cast<double>(rr[c]) * max_slice_spec_sq(R.core(c));

    out.max = std::max(*std::max_element(out.left.begin(), out.left.end()),
                       *std::max_element(out.right.begin(), out.right.end()));
    return out;
}

double bound_c0(double mu0, const Shape& shape, const RankTuple& ranks) {
    require(mu0 > 0.0, "coherence must be positive");
    const Index d = static_cast<Index>(shape.size());
    require(d >= 2, "need at least two modes");
    const RankTuple r = normalize_ranks(shape, ranks);
    double mid = 0.0;
    for (Index c = 1; c + 1 < d; ++c)
        mid += static_cast<double>(r[c] * shape[c] * r[c + 1]);
    const double ends = static_cast<double>(shape[0] * r[1]) +
                        static_cast<double>(r[d - 1] * shape[d - 1]);
    return mu0 / shape_product(shape, 0, d) * (ends + mu0 * mid);
}

double bound_c1(double mu1, const Shape& shape, const RankTuple& ranks) {
    require(mu1 > 0.0, "coherence must be positive");
    const Index d = static_cast<Index>(shape.size());
    require(d >= 2, "need at least two modes");
    const RankTuple r = normalize_ranks(shape, ranks);
    double sum = 0.0;
    for (Index c = 0; c < d; ++c) sum += static_cast<double>(r[c] * shape[c] * r[c + 1]);
    return std::pow(mu1, static_cast<double>(d - 1)) / shape_product(shape, 0, d) * sum;
}

double bound_c2(double mu1, double mu2, const Shape& shape_n, const Shape& shape_m,
                const RankTuple& ranks) {
    require(mu1 > 0.0 && mu2 > 0.0, "coherences must be positive");
    const Index d = static_cast<Index>(shape_n.size());
    require(d >= 2, "need at least two modes");
    require(shape_m.size() == shape_n.size(), "shape order mismatch");
    for (Index k = 0; k < d; ++k)
        require(shape_m[k] <= shape_n[k], "reduced mode sizes may not exceed full ones");
    const RankTuple r = normalize_ranks(shape_m, ranks);
    double sum = 0.0;
    for (Index c = 0; c < d; ++c) sum += static_cast<double>(r[c] * shape_m[c] * r[c + 1]);
    return std::pow(mu1, static_cast<double>(d - 1)) * mu2 / shape_product(shape_n, 0, d) *
           sum;
}

double projection_coherence(const TensorTrain& X) {
    const Index N = num_entries(X.shape());
    require(N <= kProjectionGuard, "grid too large for exhaustive enumeration");
    const auto P = std::make_shared<const ProjectorHandle>(X);
    SparseValues one;
    one.shape = X.shape();
    one.offsets = {0};
    one.values = Eigen::VectorXd::Ones(1);
    double best = 0.0;
    for (Index off = 0; off < N; ++off) {
        one.offsets[0] = off;
        const double nrm = tangent_norm(project(P, one));
        best = std::max(best, nrm * nrm);
    }
    const InterfaceCoherence ic = interface_coherence(X);
    const CoreCoherence cc = core_coherence(X);
    const double slack = 1e-9;
    if (ic.exact) {
        const double c0 = bound_c0(ic.max, X.shape(), X.ranks());
        require(best <= c0 * (1.0 + slack) + 1e-12,
                "projection coherence exceeded its interface-based ceiling");
    }
    const double c1 = bound_c1(cc.max, X.shape(), X.ranks());
    require(best <= c1 * (1.0 + slack) + 1e-12,
            "projection coherence exceeded its core-based ceiling");
    return best;
}

namespace {

struct TangentBasis {
    std::vector<Eigen::MatrixXd> comp; // per k < d-1: complement of U_k^L
    std::vector<Index> offset;         // d+1 prefix offsets into coefficients
    Index dim = 0;
};

TangentBasis build_tangent_basis(const ProjectorHandle& P) {
    const Index d = P.order();
    const RankTuple r = P.ranks();
    TangentBasis B;
    B.comp.resize(d > 0 ? d - 1 : 0);
    B.offset.assign(d + 1, 0);
    for (Index k = 0; k < d; ++k) {
        Index block;
        if (k + 1 < d) {
            const Eigen::MatrixXd& U = P.left().core(k).m;
            const Index M = U.rows(), cols = U.cols();
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(U);
            const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(M, M);
            B.comp[k] = Q.rightCols(M - cols);
            block = (M - cols) * cols;
        } else {
            block = r[d - 1] * P.shape()[d - 1];
        }
        B.offset[k + 1] = B.offset[k] + block;
    }
    B.dim = B.offset[d];
    return B;
}

// Coefficient vector, in the orthonormal tangent basis, of the rank-1 tensor
// whose mode vectors are q_k (canonical e_{i_k} in the plain case).
void sample_coefficients(const ProjectorHandle& P, const TangentBasis& B,
                         const std::vector<Eigen::VectorXd>& q,
                         Eigen::Ref<Eigen::VectorXd> out) {
    const Index d = P.order();
    const RankTuple r = P.ranks();
    std::vector<Eigen::RowVectorXd> u(d);
    std::vector<Eigen::VectorXd> v(d);
    u[0] = Eigen::RowVectorXd::Ones(1);
    for (Index k = 1; k < d; ++k)
        u[k] = u[k - 1] * P.left().core(k - 1).weighted_slice(q[k - 1]);
    v[d - 1] = Eigen::VectorXd::Ones(1);
    for (Index k = d - 2; k >= 0; --k)
        v[k] = P.right().core(k + 1).weighted_slice(q[k + 1]) * v[k + 1];

    out.setZero();
    for (Index k = 0; k < d; ++k) {
        const Index nk = P.shape()[k];
        if (k + 1 < d) {
            const Index cols = B.comp[k].cols();
            if (cols == 0) continue;
            // N_k^T (q_k kron u_k), accumulated block row by block row.
            Eigen::VectorXd nw = Eigen::VectorXd::Zero(cols);
            for (Index i = 0; i < nk; ++i)
                if (q[k][i] != 0.0)
                    nw.noalias() += q[k][i] * (B.comp[k].middleRows(r[k] * i, r[k])
                                                   .transpose() *
                                               u[k].transpose());
            Eigen::Map<Eigen::MatrixXd>(out.data() + B.offset[k], cols, r[k + 1]) =
                nw * v[k].transpose();
        } else {
            Eigen::Map<Eigen::MatrixXd> seg(out.data() + B.offset[k], r[k], nk);
            for (Index i = 0; i < nk; ++i)
                if (q[k][i] != 0.0) seg.col(i) = q[k][i] * u[k].transpose();
        }
    }
}

RipEstimate rip_exact(const ProjectorHandle& P, const SampleSet& omega,
                      const std::vector<Eigen::MatrixXd>* maps) {
    const Index d = P.order();
    const TangentBasis B = build_tangent_basis(P);
    const Index S = omega.unique_count();
    Eigen::MatrixXd W(B.dim, S);
    std::vector<Eigen::VectorXd> q(d);
    for (Index t = 0; t < S; ++t) {
        Index off = omega.uniq[t];
        for (Index k = 0; k < d; ++k) {
            const Index i = off % omega.shape[k];
            off /= omega.shape[k];
            if (maps) {
                q[k] = (*maps)[k].row(i).transpose();
            } else {
                q[k] = Eigen::VectorXd::Zero(omega.shape[k]);
                q[k][i] = 1.0;
            }
        }
        sample_coefficients(P, B, q, W.col(t));
        W.col(t) *= std::sqrt(omega.mult[t]);
    }
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(B.dim, B.dim);
    G.selfadjointView<Eigen::Lower>().rankUpdate(W);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff() / omega.rho;
    const double hi = eig.eigenvalues().maxCoeff() / omega.rho;
    RipEstimate out;
    out.epsilon = std::max(std::abs(1.0 - lo), std::abs(1.0 - hi));
    out.rho = omega.rho;
    out.tangent_dim = B.dim;
    out.exact = true;
    return out;
}

RipEstimate rip_power(const ProjectorPtr& P, const SampleSet& omega,
                      const std::vector<Eigen::MatrixXd>* maps, Index dim) {
    const Index d = P->order();
    RipEstimate out;
    out.rho = omega.rho;
    out.tangent_dim = dim;
    out.exact = false;

    RankOneSum ros; // reused when sampling is conjugated by mode maps
    if (maps) {
        ros.shape = P->shape();
        ros.modes.resize(d);
        for (Index k = 0; k < d; ++k)
            ros.modes[k].resize(P->shape()[k], omega.unique_count());
        for (Index t = 0; t < omega.unique_count(); ++t) {
            Index off = omega.uniq[t];
            for (Index k = 0; k < d; ++k) {
                const Index i = off % omega.shape[k];
                off /= omega.shape[k];
                ros.modes[k].col(t) = (*maps)[k].row(i).transpose();
            }
        }
    }

    TangentVector Y(P);
    Rng rng(0x52495031u);
    for (TTCore& g : Y.gauges())
        for (Index j = 0; j < g.m.size(); ++j) g.m.data()[j] = rng.normal();
    Y.enforce_gauge();
    {
        const double nrm = tangent_norm(Y);
        require(nrm > 0.0, "degenerate tangent space");
        Y = tangent_axpy(1.0 / nrm, Y, 0.0, Y);
    }
    double prev = 0.0, nz = 0.0;
    for (int it = 0; it < 200; ++it) {
        const TensorTrain E = embed(Y);
        TangentVector PRY;
        if (maps) {
            Eigen::VectorXd vals = evaluate_at_mapped(E, omega, *maps);
            for (Index t = 0; t < vals.size(); ++t) vals[t] *= omega.mult[t];
            ros.values = std::move(vals);
            PRY = project(P, ros);
        } else {
            PRY = project(P, apply_sampling(E, omega));
        }
        TangentVector Z = tangent_axpy(1.0, Y, -1.0 / omega.rho, PRY);
        nz = tangent_norm(Z);
        if (nz == 0.0) break;
        Y = tangent_axpy(1.0 / nz, Z, 0.0, Z);
        if (std::abs(nz - prev) <= 1e-8 * nz) break;
        prev = nz;
    }
    out.epsilon = nz;
    return out;
}

Index tangent_dimension(const ProjectorHandle& P) {
    return ttc::tangent_dimension(P.shape(), P.ranks());
}

} // namespace

RipEstimate rip_estimate(const TensorTrain& X, const SampleSet& omega) {
    require(X.shape() == omega.shape, "shape mismatch");
    const auto P = std::make_shared<const ProjectorHandle>(X);
    const Index dim = tangent_dimension(*P);
    if (dim <= kExactTangentGuard) return rip_exact(*P, omega, nullptr);
    return rip_power(P, omega, nullptr, dim);
}

RipEstimate rip_estimate_weighted(const TensorTrain& X, const SampleSet& omega,
                                  const std::vector<Eigen::MatrixXd>& mode_maps) {
    const Index d = X.order();
    require(static_cast<Index>(omega.shape.size()) == d, "order mismatch");
    require(static_cast<Index>(mode_maps.size()) == d, "one mode map per mode required");
    for (Index k = 0; k < d; ++k) {
        require(mode_maps[k].rows() == omega.shape[k] &&
                    mode_maps[k].cols() == X.shape()[k],
                "mode map size mismatch");
        const Eigen::MatrixXd gram = mode_maps[k].transpose() * mode_maps[k];
        require((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
                        .cwiseAbs()
                        .maxCoeff() <= 1e-10,
                "mode map columns are not orthonormal");
    }
    const auto P = std::make_shared<const ProjectorHandle>(X);
    const Index dim = tangent_dimension(*P);
    if (dim <= kExactTangentGuard) return rip_exact(*P, omega, &mode_maps);
    return rip_power(P, omega, &mode_maps, dim);
}

CoherenceReport coherence_report(const TensorTrain& X) {
    require(X.order() >= 2, "need at least two modes");
    CoherenceReport rep;
    rep.shape = X.shape();
    rep.ranks = X.ranks();
    rep.interface = interface_coherence(X);
    rep.core = core_coherence(X);
    rep.c0 = bound_c0(rep.interface.max, rep.shape, rep.ranks);
    rep.c1 = bound_c1(rep.core.max, rep.shape, rep.ranks);
    return rep;
}

std::string to_json(const CoherenceReport& rep) {
    nlohmann::json j;
    j["shape"] = rep.shape;
    j["ranks"] = rep.ranks;
    j["interface"] = {{"left", rep.interface.left},
                      {"right", rep.interface.right},
                      {"max", rep.interface.max},
                      {"exact", rep.interface.exact}};
    j["core"] = {{"left", rep.core.left},
                 {"right", rep.core.right},
                 {"max", rep.core.max}};
    j["c0"] = rep.c0;
    j["c1"] = rep.c1;
    return j.dump(2);
}

} // namespace ttc
