#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "ttc/oracle.hpp"
#include "ttc/tangent.hpp"
#include "ttc/tensor_train.hpp"

using namespace ttc;

namespace {

DenseTensor random_dense(const Shape& shape, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> gauss;
    DenseTensor X(shape);
    for (Index off = 0; off < X.size(); ++off) {
        X.at_offset(off) = gauss(eng);
    }
    return X;
}

MultiIndex random_index(const Shape& shape, std::mt19937_64& eng) {
    MultiIndex idx(shape.size());
    for (std::size_t k = 0; k < shape.size(); ++k) {
        std::uniform_int_distribution<Index> pick(1, shape[k]);
        idx[k] = pick(eng);
    }
    return idx;
}

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            M(i, j) = gauss(eng);
        }
    }
    return M;
}

} // namespace

TEST_CASE("naive entry evaluation matches dense materialization") {
    const Shape shape{3, 4, 2, 3};
    const TensorTrain X = gaussian_tt(shape, {2, 3, 2}, 901);
    const DenseTensor D = to_dense(X);
    std::mt19937_64 eng(77);
    for (int probe = 0; probe < 60; ++probe) {
        const MultiIndex idx = random_index(shape, eng);
        const double slow = oracle::naive_tt_entry(X, idx);
        CHECK(slow == doctest::Approx(D(idx)).epsilon(1e-12));
        CHECK(slow == doctest::Approx(tt_entry(X, idx)).epsilon(1e-12));
    }
}

TEST_CASE("naive entry evaluation on the all-ones rank-1 train") {
    const Shape shape{2, 3, 2};
    std::vector<TTCore> cores;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        TTCore core(1, shape[k], 1);
        core.m.setOnes();
        cores.push_back(core);
    }
    const TensorTrain X(shape, std::move(cores));
    std::mt19937_64 eng(5);
    for (int probe = 0; probe < 12; ++probe) {
        CHECK(oracle::naive_tt_entry(X, random_index(shape, eng)) ==
              doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("best rank-r order-2 approximation is the Eckart-Young optimum") {
    const Shape shape{7, 9};
    const DenseTensor X = random_dense(shape, 40);
    const Eigen::MatrixXd M =
        Eigen::Map<const Eigen::MatrixXd>(X.data().data(), 7, 9);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();

    for (Index r : {Index{1}, Index{3}, Index{6}}) {
        const DenseTensor B = oracle::best_rank_approx_d2(X, r);
        REQUIRE(B.shape() == shape);

        // Error matches the discarded tail of the spectrum exactly.
        double tail = 0.0;
        for (Eigen::Index j = r; j < sv.size(); ++j) {
            tail += sv[j] * sv[j];
        }
        const double err = (X.data() - B.data()).norm();
        CHECK(err == doctest::Approx(std::sqrt(tail)).epsilon(1e-12));

        // The result really has rank at most r.
        const Eigen::MatrixXd Bm =
            Eigen::Map<const Eigen::MatrixXd>(B.data().data(), 7, 9);
        Eigen::JacobiSVD<Eigen::MatrixXd> bsvd(Bm);
        for (Eigen::Index j = r; j < bsvd.singularValues().size(); ++j) {
            CHECK(bsvd.singularValues()[j] <= 1e-10 * sv[0]);
        }

        // No competing rank-r candidate we can construct does better.
        const TensorTrain T = tt_svd(X, {r});
        CHECK(err <= (X.data() - to_dense(T).data()).norm() + 1e-12);
    }

    // Full rank reproduces the input.
    const DenseTensor F = oracle::best_rank_approx_d2(X, 7);
    CHECK((X.data() - F.data()).norm() <= 1e-12 * X.data().norm());
}

TEST_CASE("dense operator norm equals the leading singular value") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Eigen::MatrixXd M = random_matrix(11, 7, seed);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
        CHECK(oracle::dense_opnorm(M) ==
              doctest::Approx(svd.singularValues()[0]).epsilon(1e-12));
        // Transpose invariance and positive homogeneity.
        CHECK(oracle::dense_opnorm(M.transpose()) ==
              doctest::Approx(oracle::dense_opnorm(M)).epsilon(1e-12));
        CHECK(oracle::dense_opnorm(2.5 * M) ==
              doctest::Approx(2.5 * oracle::dense_opnorm(M)).epsilon(1e-12));
    }

    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(4, 4);
    D.diagonal() << -3.0, 1.0, 2.0, -0.5;
    CHECK(oracle::dense_opnorm(D) == doctest::Approx(3.0).epsilon(1e-14));

    const Eigen::MatrixXd Q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(6, 6, 9))
            .householderQ();
    CHECK(oracle::dense_opnorm(Q) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dense tangent projector is a symmetric idempotent of known trace") {
    const Shape shape{4, 3, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 31);
    const Eigen::MatrixXd P = oracle::dense_projector(X);
    const auto N = static_cast<Eigen::Index>(num_entries(shape));
    REQUIRE(P.rows() == N);
    REQUIRE(P.cols() == N);

    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((P * P - P).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(P.trace() ==
          doctest::Approx(static_cast<double>(tangent_dimension(X.shape(), tt_rank(X))))
              .epsilon(1e-8));

    // The base point lies in its own tangent space.
    const Eigen::VectorXd x = to_dense(X).data();
    CHECK((P * x - x).norm() <= 1e-10 * x.norm());
}

TEST_CASE("dense tangent basis spans the projector range orthonormally") {
    const Shape shape{3, 4, 3};
    const TensorTrain X = gaussian_tt(shape, {2, 3}, 62);
    const Eigen::MatrixXd B = oracle::dense_tangent_basis(X);
    const Eigen::MatrixXd P = oracle::dense_projector(X);

    CHECK(B.cols() == static_cast<Eigen::Index>(tangent_dimension(X.shape(), tt_rank(X))));
    const Eigen::MatrixXd G = B.transpose() * B;
    CHECK((G - Eigen::MatrixXd::Identity(B.cols(), B.cols()))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    CHECK((B * B.transpose() - P).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("dense basis reproduces the production tangent projection") {
    const Shape shape{4, 4, 4};
    const TensorTrain X = gaussian_tt(shape, {2, 2}, 88);
    const Eigen::MatrixXd B = oracle::dense_tangent_basis(X);
    const auto H = std::make_shared<const ProjectorHandle>(X);
    for (int probe = 0; probe < 20; ++probe) {
        const DenseTensor Z =
            random_dense(shape, 3000 + static_cast<std::uint64_t>(probe));
        const Eigen::VectorXd via_basis = B * (B.transpose() * Z.data());
        const Eigen::VectorXd via_production =
            to_dense(embed(project(H, Z))).data();
        CHECK((via_basis - via_production).norm() <=
              1e-10 * std::max(1.0, Z.data().norm()));
    }
}

TEST_CASE("oracle size guards reject large instances") {
    // prod(n) = 27000 > 20000: projector materialization must refuse.
    const Shape shape{30, 30, 30};
    const TensorTrain big = gaussian_tt(shape, {2, 2}, 4);
    CHECK_THROWS_AS((void)oracle::dense_projector(big), Error);
    CHECK_THROWS_AS((void)oracle::dense_tangent_basis(big), Error);
}
