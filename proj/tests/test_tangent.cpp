#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "ttc/common.hpp"
#include "ttc/dense_tensor.hpp"
#include "ttc/oracle.hpp"
#include "ttc/rng.hpp"
#include "ttc/sampling.hpp"
#include "ttc/tangent.hpp"
#include "ttc/tensor_train.hpp"

using namespace ttc;

namespace {

DenseTensor random_dense(const Shape& shape, std::uint64_t seed) {
    DenseTensor X(shape);
    Rng rng(seed);
    for (Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    return X;
}

const Eigen::VectorXd& vec_of(const DenseTensor& X) { return X.data(); }

DenseTensor tangent_as_dense(const TangentVector& Y) { return to_dense(embed(Y)); }

double rel_diff(const DenseTensor& A, const DenseTensor& B) {
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < A.size(); ++i) {
        const double d = A.data()[i] - B.data()[i];
        num += d * d;
        den += B.data()[i] * B.data()[i];
    }
    return std::sqrt(num) / std::max(1e-300, std::sqrt(den));
}

} // namespace

TEST_CASE("dense projection matches the dense oracle projector") {
    const Shape shape{4, 4, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 19);
    const auto P = std::make_shared<const ProjectorHandle>(X);
    const Eigen::MatrixXd Pd = oracle::dense_projector(X);

    for (std::uint64_t s = 0; s < 20; ++s) {
        const DenseTensor Z = random_dense(shape, 100 + s);
        const TangentVector Y = project(P, Z);
        CHECK(Y.gauge_residual() < 1e-12);
        const Eigen::VectorXd got = vec_of(tangent_as_dense(Y));
        const Eigen::VectorXd want = Pd * vec_of(Z);
        CHECK((got - want).norm() / want.norm() < 1e-10);
    }
}

TEST_CASE("oracle projector is symmetric and idempotent with the right trace") {
    const Shape shape{3, 4, 3};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 29);
    const Eigen::MatrixXd Pd = oracle::dense_projector(X);
    CHECK((Pd - Pd.transpose()).norm() < 1e-10);
    CHECK((Pd * Pd - Pd).norm() < 1e-10);
    const Index dim = tangent_dimension(shape, {2, 2});
    CHECK(Pd.trace() == doctest::Approx(static_cast<double>(dim)).epsilon(1e-8));

    const Eigen::MatrixXd B = oracle::dense_tangent_basis(X);
    CHECK(B.cols() == dim);
    CHECK((B.transpose() * B - Eigen::MatrixXd::Identity(dim, dim)).norm() < 1e-10);
    CHECK((B * B.transpose() - Pd).norm() < 1e-8);
}

TEST_CASE("projection is idempotent and self-adjoint through the production path") {
    const Shape shape{4, 3, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 3}, 7);
    const auto P = std::make_shared<const ProjectorHandle>(X);
    const DenseTensor Z = random_dense(shape, 1);
    const DenseTensor W = random_dense(shape, 2);

    const DenseTensor PZ = tangent_as_dense(project(P, Z));
    const DenseTensor PPZ = tangent_as_dense(project(P, PZ));
    CHECK(rel_diff(PPZ, PZ) < 1e-12);

    const DenseTensor PW = tangent_as_dense(project(P, W));
    CHECK(inner(PZ, W) == doctest::Approx(inner(Z, PW)).epsilon(1e-12));

    // The base point is its own tangent vector.
    const DenseTensor PX = tangent_as_dense(project(P, to_dense(X)));
    CHECK(rel_diff(PX, to_dense(X)) < 1e-12);

    // Projecting an embedded tangent vector reproduces it.
    const TangentVector Y = project(P, Z);
    const TangentVector Y2 = project(P, embed(Y));
    CHECK(tangent_norm(tangent_axpy(1.0, Y, -1.0, Y2)) < 1e-12 * tangent_norm(Y));
}

TEST_CASE("dense, train, and sparse inputs project identically") {
    const Shape shape{4, 4, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 3);
    const auto P = std::make_shared<const ProjectorHandle>(X);

    const TensorTrain Ztt = gaussian_tt(shape, {3, 3}, 12);
    const DenseTensor Zd = to_dense(Ztt);
    const DenseTensor A = tangent_as_dense(project(P, Zd));
    const DenseTensor B = tangent_as_dense(project(P, Ztt));
    CHECK(rel_diff(B, A) < 1e-12);

    SparseValues S;
    S.shape = shape;
    Rng rng(77);
    for (Index off = 0; off < 64; off += 3) S.offsets.push_back(off);
    S.values.resize(static_cast<Index>(S.offsets.size()));
    for (Index j = 0; j < S.values.size(); ++j) S.values[j] = rng.normal();
    const DenseTensor Sd = densify(S);
    const DenseTensor C = tangent_as_dense(project(P, S));
    const DenseTensor Cd = tangent_as_dense(project(P, Sd));
    CHECK(rel_diff(C, Cd) < 1e-12);
}

TEST_CASE("rank-one-sum projection matches its densified form") {
    const Shape shape{4, 3, 5};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 31);
    const auto P = std::make_shared<const ProjectorHandle>(X);

    const Index S = 4;
    RankOneSum R;
    R.shape = shape;
    R.values.resize(S);
    Rng rng(8);
    for (std::size_t k = 0; k < shape.size(); ++k) {
        Eigen::MatrixXd M(shape[k], S);
        for (Index j = 0; j < S; ++j)
            for (Index i = 0; i < shape[k]; ++i) M(i, j) = rng.normal();
        R.modes.push_back(M);
    }
    for (Index j = 0; j < S; ++j) R.values[j] = rng.normal();

    DenseTensor D(shape);
    for (Index s = 0; s < S; ++s)
        for (Index c = 0; c < shape[2]; ++c)
            for (Index b = 0; b < shape[1]; ++b)
                for (Index a = 0; a < shape[0]; ++a)
                    D({a + 1, b + 1, c + 1}) += R.values[s] * R.modes[0](a, s) *
                                                R.modes[1](b, s) * R.modes[2](c, s);

    const DenseTensor got = tangent_as_dense(project(P, R));
    const DenseTensor want = tangent_as_dense(project(P, D));
    CHECK(rel_diff(got, want) < 1e-12);

    // Canonical mode vectors reduce to the sparse special case.
    RankOneSum Rc;
    Rc.shape = shape;
    Rc.values = Eigen::VectorXd::Ones(2);
    for (std::size_t k = 0; k < shape.size(); ++k)
        Rc.modes.push_back(Eigen::MatrixXd::Zero(shape[k], 2));
    // entries (1,1,1) and (2,3,4) in 1-based terms
    Rc.modes[0](0, 0) = 1;
    Rc.modes[1](0, 0) = 1;
    Rc.modes[2](0, 0) = 1;
    Rc.modes[0](1, 1) = 1;
    Rc.modes[1](2, 1) = 1;
    Rc.modes[2](3, 1) = 1;
    SparseValues Sc;
    Sc.shape = shape;
    Sc.offsets = {linear_offset(shape, {1, 1, 1}), linear_offset(shape, {2, 3, 4})};
    Sc.values = Eigen::VectorXd::Ones(2);
    const DenseTensor g1 = tangent_as_dense(project(P, Rc));
    const DenseTensor g2 = tangent_as_dense(project(P, Sc));
    CHECK(rel_diff(g1, g2) < 1e-13);
}

TEST_CASE("embedding has the advertised rank profile and norm") {
    const Shape shape{4, 4, 4, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 2, 2}, 40);
    const auto P = std::make_shared<const ProjectorHandle>(X);
    const TangentVector Y = project(P, random_dense(shape, 41));
    const TensorTrain E = embed(Y);
    CHECK(E.ranks() == RankTuple{1, 4, 4, 4, 1});
    CHECK(norm(E) == doctest::Approx(tangent_norm(Y)).epsilon(1e-12));

    double g2 = 0.0;
    for (const TTCore& c : Y.gauges()) g2 += c.m.squaredNorm();
    CHECK(tangent_norm(Y) == doctest::Approx(std::sqrt(g2)).epsilon(1e-12));
}

TEST_CASE("tangent_dimension closed forms") {
    CHECK(tangent_dimension({6, 7}, {3}) == 3 * (6 + 7 - 3));
    CHECK(tangent_dimension({4, 4, 4}, {2, 2}) == (1 * 4 * 2 + 2 * 4 * 2 + 2 * 4 * 1) - (4 + 4));
    CHECK(tangent_dimension({4, 4, 4}, {1, 2, 2, 1}) == tangent_dimension({4, 4, 4}, {2, 2}));
    const TensorTrain X = gaussian_tt({3, 4, 3}, {2, 2}, 5);
    CHECK(oracle::dense_tangent_basis(X).cols() == tangent_dimension({3, 4, 3}, {2, 2}));
}

TEST_CASE("tangent arithmetic is linear and consistent with embeddings") {
    const Shape shape{3, 4, 5};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 61);
    const auto P = std::make_shared<const ProjectorHandle>(X);
    const TangentVector Y = project(P, random_dense(shape, 62));
    const TangentVector W = project(P, random_dense(shape, 63));

    const TangentVector Z = tangent_axpy(0.5, Y, -2.0, W);
    const DenseTensor DY = tangent_as_dense(Y);
    const DenseTensor DW = tangent_as_dense(W);
    const DenseTensor DZ = tangent_as_dense(Z);
    for (Index i = 0; i < DZ.size(); ++i)
        CHECK(DZ.data()[i] ==
              doctest::Approx(0.5 * DY.data()[i] - 2.0 * DW.data()[i]).epsilon(1e-10));

    CHECK(tangent_inner(Y, W) == doctest::Approx(inner(DY, DW)).epsilon(1e-12));
    CHECK(tangent_norm(Y) == doctest::Approx(frob_norm(DY)).epsilon(1e-12));

    const TangentVector Z0(P); // zero vector
    CHECK(tangent_norm(Z0) == 0.0);
    CHECK(tangent_inner(Z0, Y) == 0.0);
    double mx = 0.0;
    const DenseTensor D0 = tangent_as_dense(Z0);
    for (Index i = 0; i < D0.size(); ++i) mx = std::max(mx, std::abs(D0.data()[i]));
    CHECK(mx == 0.0);
}

TEST_CASE("mixing tangent vectors from different base points is rejected") {
    const Shape shape{3, 3, 3};
    const auto P1 = std::make_shared<const ProjectorHandle>(gaussian_tt(shape, {2, 2}, 1));
    const auto P2 = std::make_shared<const ProjectorHandle>(gaussian_tt(shape, {2, 2}, 2));
    const DenseTensor Z = random_dense(shape, 3);
    const TangentVector Y1 = project(P1, Z);
    const TangentVector Y2 = project(P2, Z);
    CHECK_THROWS_AS(tangent_axpy(1.0, Y1, 1.0, Y2), Error);
    CHECK_THROWS_AS(tangent_inner(Y1, Y2), Error);
}

TEST_CASE("gauge residual detects drift and enforce_gauge removes it") {
    const Shape shape{4, 4, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 9);
    const auto P = std::make_shared<const ProjectorHandle>(X);
    TangentVector Y = project(P, random_dense(shape, 10));
    REQUIRE(Y.gauge_residual() < 1e-12);

    Rng rng(11);
    for (Index i = 0; i < Y.gauges()[0].m.size(); ++i)
        Y.gauges()[0].m.data()[i] += 0.1 * rng.normal();
    CHECK(Y.gauge_residual() > 1e-3);
    Y.enforce_gauge();
    CHECK(Y.gauge_residual() < 1e-12);
}

TEST_CASE("interface projections act on the matching unfoldings") {
    const Shape shape{3, 4, 5};
    const TensorTrain X = gaussian_tt(shape, {2, 3}, 83);
    const auto P = std::make_shared<const ProjectorHandle>(X);
    const DenseTensor Z = random_dense(shape, 84);

    CHECK(rel_diff(proj_leq(P, 0, Z), Z) < 1e-15);
    CHECK(rel_diff(proj_geq(P, 4, Z), Z) < 1e-15);

    const TensorTrain L = orthogonalize(X, 3); // left interfaces orthonormal
    const TensorTrain R = orthogonalize(X, 1); // right interfaces orthonormal
    for (Index k = 1; k <= 2; ++k) {
        const Eigen::MatrixXd U = interface_left(L, k);
        Eigen::MatrixXd want = U * (U.transpose() * unfold(Z, k));
        const DenseTensor got = proj_leq(P, k, Z);
        CHECK((unfold(got, k) - want).norm() / want.norm() < 1e-12);
    }
    for (Index j = 2; j <= 3; ++j) {
        const Eigen::MatrixXd V = interface_right(R, j);
        Eigen::MatrixXd want = (unfold(Z, j - 1) * V) * V.transpose();
        const DenseTensor got = proj_geq(P, j, Z);
        CHECK((unfold(got, j - 1) - want).norm() / want.norm() < 1e-12);
    }
}

TEST_CASE("curvature gap obeys its bound and decays at second order") {
    const Shape shape{4, 4, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 51);

    const CurvatureGap same = curvature_gap(X, X);
    CHECK(same.gap < 1e-10 * norm(X));
    CHECK(same.bound < 1e-20);

    std::vector<double> log_dist, log_gap;
    for (double t : {3e-2, 1e-2, 3e-3, 1e-3}) {
        const TensorTrain E = gaussian_tt(shape, {2, 2}, 52);
        TensorTrain Xt =
            tt_round(tt_axpy(1.0, X, t * norm(X) / norm(E), E), {2, 2},
                     /*keep_declared_rank=*/true);
        const CurvatureGap cg = curvature_gap(X, Xt);
        CHECK(cg.gap <= cg.bound * (1.0 + 1e-9));
        log_dist.push_back(std::log(diff_norm(X, Xt)));
        log_gap.push_back(std::log(cg.gap));
    }
    // Least-squares slope of log gap against log distance.
    const auto n = static_cast<double>(log_dist.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < log_dist.size(); ++i) {
        sx += log_dist[i];
        sy += log_gap[i];
        sxx += log_dist[i] * log_dist[i];
        sxy += log_dist[i] * log_gap[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("projector distance matches the dense oracle and its bound") {
    const Shape shape{4, 4, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 71);
    const TensorTrain E = gaussian_tt(shape, {2, 2}, 72);
    for (double t : {0.05, 0.005}) {
        const TensorTrain Xt =
            tt_round(tt_axpy(1.0, X, t * norm(X) / norm(E), E), {2, 2},
                     /*keep_declared_rank=*/true);
        const ProjectorDistance pd = projector_distance(X, Xt);
        const double want =
            oracle::dense_opnorm(oracle::dense_projector(X) - oracle::dense_projector(Xt));
        CHECK(pd.distance == doctest::Approx(want).epsilon(1e-8));
        CHECK(pd.distance <= pd.bound * (1.0 + 1e-9));
    }
}
