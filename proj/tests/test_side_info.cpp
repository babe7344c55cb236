#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "ttc/coherence.hpp"
#include "ttc/common.hpp"
#include "ttc/dense_tensor.hpp"
#include "ttc/rgd.hpp"
#include "ttc/rng.hpp"
#include "ttc/sampling.hpp"
#include "ttc/side_info.hpp"
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

Eigen::MatrixXd random_matrix(Index rows, Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd M(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) M(i, j) = rng.normal();
    return M;
}

SideInfo random_side_info(const Shape& big, const Shape& small,
                          std::uint64_t seed) {
    std::vector<Eigen::MatrixXd> factors;
    for (std::size_t k = 0; k < big.size(); ++k)
        factors.push_back(random_matrix(big[k], small[k], seed + 10 * k));
    return make_side_info(std::move(factors));
}

SideInfo identity_side_info(const Shape& shape) {
    std::vector<Eigen::MatrixXd> factors;
    for (Index n : shape) factors.push_back(Eigen::MatrixXd::Identity(n, n));
    return make_side_info(std::move(factors));
}

} // namespace

TEST_CASE("construction validates and orthonormalizes the factors") {
    const Shape big{8, 7, 9};
    const Shape small{3, 4, 2};
    const SideInfo Q = random_side_info(big, small, 5);
    CHECK(Q.outer_shape() == big);
    CHECK(Q.inner_shape() == small);
    for (Index k = 0; k < Q.order(); ++k) {
        const Eigen::MatrixXd& F = Q.factors[k];
        CHECK((F.transpose() * F -
               Eigen::MatrixXd::Identity(F.cols(), F.cols()))
                  .norm() < 1e-10);
    }

    // Orthonormalization preserves the column span of full-rank input.
    const Eigen::MatrixXd raw = random_matrix(8, 3, 99);
    const SideInfo Q1 = make_side_info({raw, Eigen::MatrixXd::Identity(7, 7),
                                        Eigen::MatrixXd::Identity(9, 9)});
    const Eigen::MatrixXd span_raw =
        raw * (raw.transpose() * raw).inverse() * raw.transpose();
    const Eigen::MatrixXd span_ortho =
        Q1.factors[0] * Q1.factors[0].transpose();
    CHECK((span_raw - span_ortho).norm() < 1e-10);

    // Rank-deficient factors carry no usable subspace.
    Eigen::MatrixXd dup(6, 2);
    dup.col(0) = Eigen::VectorXd::Ones(6);
    dup.col(1) = 2.0 * Eigen::VectorXd::Ones(6);
    CHECK_THROWS_AS(make_side_info({dup}), Error);

    // More columns than rows is impossible for an injective embedding.
    CHECK_THROWS_AS(make_side_info({random_matrix(3, 5, 1)}), Error);
    CHECK_THROWS_AS(make_side_info({}), Error);
}

TEST_CASE("identity side information is the identity map") {
    const Shape shape{4, 5, 3};
    const SideInfo Q = identity_side_info(shape);
    const TensorTrain W = gaussian_tt(shape, {2, 2}, 3);
    const TensorTrain A = q_apply(Q, W);
    CHECK(diff_norm(A, W) < 1e-14 * norm(W));
    const DenseTensor Wd = random_dense(shape, 4);
    const DenseTensor Ad = q_apply(Q, Wd);
    for (Index i = 0; i < Wd.size(); ++i)
        CHECK(Ad.data()[i] == doctest::Approx(Wd.data()[i]).epsilon(1e-15));
}

TEST_CASE("adjoint is a left inverse and the composition a projector") {
    const Shape big{9, 8, 7};
    const Shape small{3, 4, 3};
    const SideInfo Q = random_side_info(big, small, 11);

    const TensorTrain W = gaussian_tt(small, {2, 2}, 7);
    const TensorTrain back = q_adjoint(Q, q_apply(Q, W));
    CHECK(diff_norm(back, W) < 1e-12 * norm(W));

    const DenseTensor Wd = random_dense(small, 8);
    const DenseTensor backd = q_adjoint(Q, q_apply(Q, Wd));
    double diff = 0.0;
    for (Index i = 0; i < Wd.size(); ++i)
        diff += std::pow(backd.data()[i] - Wd.data()[i], 2);
    CHECK(std::sqrt(diff) < 1e-12 * frob_norm(Wd));

    // Q Q* : idempotent and self-adjoint on the big grid.
    const DenseTensor X = random_dense(big, 9);
    const DenseTensor Y = random_dense(big, 10);
    const DenseTensor PX = q_apply(Q, q_adjoint(Q, X));
    const DenseTensor PPX = q_apply(Q, q_adjoint(Q, PX));
    double idem = 0.0;
    for (Index i = 0; i < PX.size(); ++i)
        idem += std::pow(PPX.data()[i] - PX.data()[i], 2);
    CHECK(std::sqrt(idem) < 1e-12 * frob_norm(PX));
    const DenseTensor PY = q_apply(Q, q_adjoint(Q, Y));
    CHECK(inner(PX, Y) == doctest::Approx(inner(X, PY)).epsilon(1e-12));
}

TEST_CASE("the embedding preserves ranks, norms, and the spectral floor") {
    const Shape big{12, 10, 11};
    const Shape small{4, 5, 4};
    const SideInfo Q = random_side_info(big, small, 21);
    const TensorTrain W = gaussian_tt(small, {2, 3}, 22);
    const TensorTrain A = q_apply(Q, W);

    CHECK(A.shape() == big);
    CHECK(A.ranks() == W.ranks());
    CHECK(tt_rank(A) == tt_rank(W));
    CHECK(norm(A) == doctest::Approx(norm(W)).epsilon(1e-12));
    CHECK(sigma_min_tt(A) == doctest::Approx(sigma_min_tt(W)).epsilon(1e-10));

    // Against the dense multilinear definition.
    DenseTensor want = to_dense(W);
    for (Index k = 0; k < 3; ++k) want = mode_product(want, k + 1, Q.factors[k]);
    const DenseTensor got = to_dense(A);
    double diff = 0.0;
    for (Index i = 0; i < got.size(); ++i)
        diff += std::pow(got.data()[i] - want.data()[i], 2);
    CHECK(std::sqrt(diff) < 1e-12 * frob_norm(want));
}

TEST_CASE("membership check separates the model subspace") {
    const Shape big{8, 8, 8};
    const Shape small{3, 3, 3};
    const SideInfo Q = random_side_info(big, small, 31);

    const TensorTrain B = gaussian_tt(small, {2, 2}, 32);
    const TensorTrain A = q_apply(Q, B);
    CHECK(membership_check(Q, A, 1e-10));

    for (std::uint64_t s = 0; s < 20; ++s)
        CHECK_FALSE(membership_check(Q, gaussian_tt(big, {2, 2}, 200 + s), 1e-10));

    // Constructed violation: add a rank-one term whose first-mode fiber is
    // orthogonal to col(Q_1).
    Eigen::MatrixXd full =
        Eigen::HouseholderQR<Eigen::MatrixXd>(
            Eigen::MatrixXd(Q.factors[0]))
            .householderQ();
    const Eigen::VectorXd outside = full.col(7); // complement direction
    std::vector<TTCore> cores;
    TTCore c0(1, 8, 1);
    for (Index i = 0; i < 8; ++i) c0.at(0, i, 0) = outside[i];
    cores.push_back(c0);
    for (Index k = 1; k < 3; ++k) {
        TTCore c(1, 8, 1);
        c.at(0, 0, 0) = 1.0;
        cores.push_back(c);
    }
    const TensorTrain spike(big, cores);
    const TensorTrain tainted = tt_axpy(1.0, A, 0.05 * norm(A), spike);
    CHECK_FALSE(membership_check(Q, tainted, 1e-10));
}

TEST_CASE("side coherence: identity, canonical embedding, generic range") {
    const Shape shape{6, 6, 6};
    const SideCoherence id = side_coherence(identity_side_info(shape));
    for (double v : id.per_mode) CHECK(v == doctest::Approx(1.0));

    // First-m-columns embedding concentrates all leverage on m rows.
    Eigen::MatrixXd canon = Eigen::MatrixXd::Zero(8, 2);
    canon(0, 0) = 1.0;
    canon(1, 1) = 1.0;
    const SideInfo Qc = make_side_info(
        {canon, Eigen::MatrixXd::Identity(6, 6), Eigen::MatrixXd::Identity(6, 6)});
    const SideCoherence sc = side_coherence(Qc);
    CHECK(sc.per_mode[0] == doctest::Approx(8.0 / 2.0));
    CHECK(sc.max == doctest::Approx(4.0));

    const SideInfo Qr = random_side_info({30, 30, 30}, {5, 5, 5}, 41);
    const SideCoherence rc = side_coherence(Qr);
    for (double v : rc.per_mode) {
        CHECK(v >= 1.0);
        CHECK(v <= 30.0 / 5.0);
    }
}

TEST_CASE("observing through the embedding equals observing the lifted train") {
    const Shape big{10, 9, 8};
    const Shape small{4, 3, 4};
    const SideInfo Q = random_side_info(big, small, 51);
    const TensorTrain W = gaussian_tt(small, {2, 2}, 52);
    const SampleSet omega = sample_uniform(big, 120, 53);

    const Observations a = observe_through(Q, W, omega);
    const Observations b = observe(q_apply(Q, W), omega);
    CHECK(a.set.draws == b.set.draws);
    CHECK((a.values - b.values).norm() < 1e-12 * b.values.norm());
    CHECK((a.unique_values - b.unique_values).norm() <
          1e-12 * b.unique_values.norm());

    // Residual identity at a random iterate.
    const TensorTrain V = gaussian_tt(small, {2, 2}, 54);
    const double rs = side_residual(V, a, Q);
    const double rc = sample_residual(q_apply(Q, V), a);
    CHECK(rs == doctest::Approx(rc).epsilon(1e-12));
}

TEST_CASE("identity side information reproduces the completion iterates") {
    const Shape shape{5, 5, 5};
    const std::vector<Index> ranks{2, 2};
    const SideInfo Q = identity_side_info(shape);
    const TensorTrain A = gaussian_tt(shape, ranks, 61);
    const Observations obs = observe(A, sample_uniform(shape, 400, 62));

    TensorTrain Ws = gaussian_tt(shape, ranks, 63);
    TensorTrain Wc = Ws;
    for (int t = 0; t < 5; ++t) {
        auto [Ws1, rs] = rgd_step_side(Ws, obs, Q, ranks);
        auto [Wc1, rc] = rgd_step_completion(Wc, obs, ranks);
        CHECK(rs.alpha == doctest::Approx(rc.alpha).epsilon(1e-12));
        CHECK(rs.grad_norm == doctest::Approx(rc.grad_norm).epsilon(1e-12));
        CHECK(rs.residual == doctest::Approx(rc.residual).epsilon(1e-12));
        CHECK(diff_norm(Ws1, Wc1) < 1e-12 * norm(A));
        Ws = std::move(Ws1);
        Wc = std::move(Wc1);
    }
}

TEST_CASE("reduced-space error equals full-space error along the iteration") {
    const Shape big{12, 12, 12};
    const Shape small{4, 4, 4};
    const std::vector<Index> ranks{2, 2};
    const SideInfo Q = random_side_info(big, small, 71);
    const TensorTrain B = gaussian_tt(small, ranks, 72);
    const TensorTrain A = q_apply(Q, B);
    const Observations obs = observe_through(Q, B, sample_uniform(big, 500, 73));

    TensorTrain W = gaussian_tt(small, ranks, 74);
    for (int t = 0; t < 6; ++t) {
        CHECK(diff_norm(W, B) ==
              doctest::Approx(diff_norm(q_apply(Q, W), A)).epsilon(1e-10));
        auto [W1, row] = rgd_step_side(W, obs, Q, ranks);
        W = std::move(W1);
    }
}

TEST_CASE("sample size scales with the reduced grid, not the ambient one") {
    // d=3, n=30, m=10, r=2: recover from a sample sized for the small grid.
    const Shape big{30, 30, 30};
    const Shape small{10, 10, 10};
    const std::vector<Index> ranks{2, 2};
    int successes = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const SideInfo Q = random_side_info(big, small, 80 + seed);
        const TensorTrain B = gaussian_tt(small, ranks, 90 + seed);
        const Observations obs =
            observe_through(Q, B, sample_uniform(big, 1200, 100 + seed));
        const Observations test =
            observe_through(Q, B, sample_uniform(big, 2000, 110 + seed));
        SolverConfig cfg;
        cfg.ranks = ranks;
        cfg.max_iters = 300;
        cfg.seed = 120 + seed;
        const SolveResult res = solve_side(obs, Q, cfg, nullptr, &B, &test);
        if (res.success && res.test_error < 1e-4) ++successes;
    }
    CHECK(successes >= 2);
}

TEST_CASE("tangent isometry through the embedding") {
    const Shape small{5, 5, 5};
    const std::vector<Index> ranks{2, 2};

    // Full grid with identity side information: exact isometry.
    const Shape s3 = small;
    const SideInfo Qid = identity_side_info(s3);
    const TensorTrain W = gaussian_tt(s3, ranks, 7);
    std::vector<MultiIndex> all;
    for (Index off = 0; off < num_entries(s3); ++off)
        all.push_back(multi_index_of(s3, off));
    const RipEstimate full = rip_estimate_side(W, sample_set_from_indices(s3, all), Qid);
    CHECK(full.epsilon < 1e-12);
    CHECK(full.rho == doctest::Approx(1.0));

    // The estimate depends on the reduced dimensions, not the ambient ones:
    // medians over seeds at fixed |Omega| and m agree across n within 25%.
    const Shape m3{6, 6, 6};
    const TensorTrain Wm = gaussian_tt(m3, ranks, 8);
    auto median_eps = [&](Index n) {
        const Shape big{n, n, n};
        std::vector<double> es;
        for (std::uint64_t s = 0; s < 5; ++s) {
            const SideInfo Q = random_side_info(big, m3, 300 + 7 * s + n);
            const SampleSet omega = sample_uniform(big, 600, 400 + s);
            es.push_back(rip_estimate_side(Wm, omega, Q).epsilon);
        }
        std::sort(es.begin(), es.end());
        return es[2];
    };
    const double e20 = median_eps(20);
    const double e40 = median_eps(40);
    CHECK(std::abs(e20 - e40) <= 0.25 * std::max(e20, e40));

    // Denser sampling tightens the isometry.
    auto median_eps_rho = [&](Index draws) {
        const Shape big{18, 18, 18};
        std::vector<double> es;
        for (std::uint64_t s = 0; s < 5; ++s) {
            const SideInfo Q = random_side_info(big, m3, 500 + 9 * s);
            es.push_back(
                rip_estimate_side(Wm, sample_uniform(big, draws, 600 + s), Q).epsilon);
        }
        std::sort(es.begin(), es.end());
        return es[2];
    };
    const double lo = median_eps_rho(400);
    const double mid = median_eps_rho(1600);
    const double hi = median_eps_rho(6400);
    CHECK(lo > mid);
    CHECK(mid > hi);
}

TEST_CASE("projection of embedded basis tensors stays under the c2 ceiling") {
    const Shape big{6, 6, 6};
    const Shape small{3, 3, 3};
    const std::vector<Index> ranks{2, 2};
    const SideInfo Q = random_side_info(big, small, 91);
    const TensorTrain B = gaussian_tt(small, ranks, 92);
    const auto P = std::make_shared<const ProjectorHandle>(B);

    const double mu1 = core_coherence(B).max;
    const double mu2 = side_coherence(Q).max;
    const double ceiling =
        bound_c2(mu1, mu2, big, small, normalize_ranks(small, ranks));

    double worst = 0.0;
    for (Index off = 0; off < num_entries(big); ++off) {
        const MultiIndex idx = multi_index_of(big, off);
        RankOneSum one;
        one.shape = small;
        one.values = Eigen::VectorXd::Ones(1);
        for (Index k = 0; k < 3; ++k)
            one.modes.push_back(Q.factors[k].row(idx[k] - 1).transpose());
        const double n2 = std::pow(tangent_norm(project(P, one)), 2);
        worst = std::max(worst, n2);
    }
    CHECK(worst <= ceiling * (1.0 + 1e-10));
    CHECK(worst > 0.0);
}

TEST_CASE("side information files round-trip") {
    const Shape big{7, 6, 8};
    const Shape small{3, 3, 2};
    const SideInfo Q = random_side_info(big, small, 101);
    const std::string path = "side_roundtrip.txt";
    save_side_info(Q, path);
    const SideInfo L = load_side_info(path);
    REQUIRE(L.order() == Q.order());
    for (Index k = 0; k < Q.order(); ++k) {
        REQUIRE(L.factors[k].rows() == Q.factors[k].rows());
        REQUIRE(L.factors[k].cols() == Q.factors[k].cols());
        CHECK((L.factors[k] - Q.factors[k]).norm() < 1e-14);
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_side_info("no_such_side_info.txt"), Error);
}

TEST_CASE("shape mismatches are rejected") {
    const Shape big{8, 8, 8};
    const Shape small{3, 3, 3};
    const SideInfo Q = random_side_info(big, small, 111);
    const TensorTrain Wbig = gaussian_tt(big, {2, 2}, 1);
    CHECK_THROWS_AS(q_apply(Q, Wbig), Error);
    const TensorTrain Wsmall = gaussian_tt(small, {2, 2}, 2);
    CHECK_THROWS_AS(q_adjoint(Q, Wsmall), Error);

    const Observations obs =
        observe_through(Q, Wsmall, sample_uniform(big, 50, 3));
    CHECK_THROWS_AS(rgd_step_side(Wbig, obs, Q, {2, 2}), Error);
}
