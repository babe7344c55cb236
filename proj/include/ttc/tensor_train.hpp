#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ttc/dense_tensor.hpp"

namespace ttc {

// Bond dimensions r_0, r_1, ..., r_d with r_0 = r_d = 1.
using RankTuple = std::vector<Index>;

// Order-3 core of size r_left x n x r_right. Stored as the left unfolding:
// a (r_left * n) x r_right column-major matrix whose row (a + r_left * i)
// holds entry (a, i, b) in column b. With this layout the right unfolding
// r_left x (n * r_right) is the same buffer reinterpreted, and the mode slice
// G(:, i, :) is a contiguous row block.
struct TTCore {
    Index r_left = 1, n = 1, r_right = 1;
    Eigen::MatrixXd m; // left unfolding

    TTCore() = default;
    TTCore(Index rl, Index n_, Index rr)
        : r_left(rl), n(n_), r_right(rr), m(Eigen::MatrixXd::Zero(rl * n_, rr)) {}

    double at(Index a, Index i, Index b) const { return m(a + r_left * i, b); }
    double& at(Index a, Index i, Index b) { return m(a + r_left * i, b); }

    // r_left x r_right slice for fixed mode index i (0-based).
    auto slice(Index i) const { return m.middleRows(r_left * i, r_left); }
    auto slice(Index i) { return m.middleRows(r_left * i, r_left); }

    const Eigen::MatrixXd& left_unfold() const { return m; }
    Eigen::Map<const Eigen::MatrixXd> right_unfold() const {
        return {m.data(), r_left, n * r_right};
    }

    // sum_i q[i] * slice(i). Zero weights are skipped, so a canonical basis
    // weight vector reproduces plain slice indexing bit for bit.
    Eigen::MatrixXd weighted_slice(const Eigen::Ref<const Eigen::VectorXd>& q) const {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r_left, r_right);
        for (Index i = 0; i < n; ++i)
            if (q[i] != 0.0) out.noalias() += q[i] * slice(i);
        return out;
    }
};

// Tensor in tensor-train form: element (i_1..i_d) is the chained product
// G_1(:, i_1, :) * G_2(:, i_2, :) * ... * G_d(:, i_d, :), a 1x1 matrix.
class TensorTrain {
public:
    TensorTrain() = default;
    TensorTrain(Shape shape, std::vector<TTCore> cores);

    const Shape& shape() const { return shape_; }
    Index order() const { return static_cast<Index>(shape_.size()); }
    // 0-based core access (core k holds mode k+1).
    const TTCore& core(Index k) const { return cores_[k]; }
    TTCore& core(Index k) { return cores_[k]; }
    const std::vector<TTCore>& cores() const { return cores_; }

    RankTuple ranks() const;

private:
    Shape shape_;
    std::vector<TTCore> cores_;
};

// Largest representable TT-rank: r_k = min(prod_{j<=k} n_j, prod_{j>k} n_j).
RankTuple max_ranks(const Shape& shape);

// Expands inner ranks (r_1..r_{d-1}) or a full tuple to a validated full
// tuple; enforces r_0 = r_d = 1, positivity, and the unfolding bound.
RankTuple normalize_ranks(const Shape& shape, const std::vector<Index>& r);

double tt_entry(const TensorTrain& X, const MultiIndex& idx);

// Materializes the full tensor. Guarded: throws above 2e7 entries.
DenseTensor to_dense(const TensorTrain& X);

// <X, Y> by sweeping the shared modes once; O(d n r^2 r'^2) worst case.
double inner(const TensorTrain& X, const TensorTrain& Y);

// ||X||_F via an orthogonalization sweep (no cancellation, unlike inner(X,X)).
double norm(const TensorTrain& X);

// Formal linear combination a*X + b*Y with ranks r + r' (no rounding).
TensorTrain tt_axpy(double a, const TensorTrain& X, double b, const TensorTrain& Y);

// ||X - Y||_F, stable for nearly equal inputs.
double diff_norm(const TensorTrain& X, const TensorTrain& Y);

// TT-SVD of a dense tensor with target ranks r (inner or full tuple):
// successive truncated SVDs of the split unfoldings, left to right. Cores
// 1..d-1 of the result are left-orthogonal. Ranks are truncated to what the
// data supports, never inflated. The squared error is at most the sum of the
// squared discarded singular values, which makes the result quasi-optimal
// within sqrt(d-1) of the best rank-r approximation.
TensorTrain tt_svd(const DenseTensor& X, const std::vector<Index>& r);

// Rank truncation of a TT without densifying: right-to-left orthogonalization
// sweep followed by a left-to-right truncated-SVD sweep. Agrees with
// tt_svd(to_dense(X), r) up to roundoff. If keep_declared_rank is set,
// singular directions below the numerical floor are retained instead of
// truncated so the output keeps the requested rank when representable (used
// by the descent loop, where rank collapse would change the search manifold).
TensorTrain tt_round(const TensorTrain& X, const std::vector<Index>& r,
                     bool keep_declared_rank = false);

// Moves X into the k-orthogonal representation (1-based position k in [1,d]):
// cores 1..k-1 left-orthogonal, cores k+1..d right-orthogonal, same tensor.
// Requires a minimal representation: a rank-deficient QR along the sweep
// (diagonal entry below 1e-14 of the largest) throws.
TensorTrain orthogonalize(const TensorTrain& X, Index k);

// As above but tolerates rank deficiency (bond ranks may shrink); used
// internally where non-minimal inputs are legitimate (e.g. rounding).
TensorTrain orthogonalize_unchecked(const TensorTrain& X, Index k);

// Interface matrices. interface_left(X, k) is the (n_1...n_k) x r_k matrix
// X_{<=k} with rows first-index-fastest; k = 0 gives 1x1 [1]. interface_right
// (X, j) is the (n_j...n_d) x r_{j-1} matrix X_{>=j}; j = d+1 gives 1x1 [1].
// Guarded: throws above 1e7 rows.
Eigen::MatrixXd interface_left(const TensorTrain& X, Index k);
Eigen::MatrixXd interface_right(const TensorTrain& X, Index j);

// Singular values of every split unfolding X^<k>, k = 1..d-1, computed from
// the k-orthogonal center core (the interfaces are orthonormal, so the center
// carries the spectrum). spectra[k-1] is the descending spectrum at split k.
std::vector<Eigen::VectorXd> bond_spectra(const TensorTrain& X);

// TT-rank: per split, the number of singular values above 1e-14 * sigma_max.
RankTuple tt_rank(const TensorTrain& X);

// Smallest-singular-value aggregate across splits:
// sigma = ( sum_k 1/sigma_min(X^<k>) )^{-1}, sigma_min taken over singular
// values above the 1e-14 * sigma_max floor.
double sigma_min_tt(const TensorTrain& X);

// Random TT with iid standard normal core entries. Cores are filled in order
// 1..d, each in storage order, from Rng(seed); bit-reproducible for a seed.
TensorTrain gaussian_tt(const Shape& shape, const std::vector<Index>& r,
                        std::uint64_t seed);

// --- Serialization ---------------------------------------------------------
// Text:   "ttc tt 1" / dims line / ranks line (r_0..r_d) / then each core's
//         entries one per line in storage order, cores in order.
// Binary: magic "TTCTT__1", u64 d, u64 dims[d], u64 ranks[d+1], then f64 core
//         data in storage order, little-endian.
void save_tt_text(const TensorTrain& X, const std::string& path);
TensorTrain load_tt_text(const std::string& path);
void save_tt_binary(const TensorTrain& X, const std::string& path);
TensorTrain load_tt_binary(const std::string& path);

} // namespace ttc
