#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "ttc/dense_tensor.hpp"
#include "ttc/tensor_train.hpp"

namespace ttc {

struct SparseValues; // defined in sampling.hpp

// Frozen data of a point X on the rank-r manifold, prepared for tangent-space
// work: the same tensor in fully left-orthogonal form (cores U_1..U_{d-1}
// left-orthogonal, last core carries the weight) and fully right-orthogonal
// form (cores V_2..V_d right-orthogonal). Tangent vectors reference one
// handle; mixing handles is an error.
class ProjectorHandle {
public:
    explicit ProjectorHandle(const TensorTrain& X);

    const TensorTrain& left() const { return left_; }
    const TensorTrain& right() const { return right_; }
    const Shape& shape() const { return left_.shape(); }
    Index order() const { return left_.order(); }
    RankTuple ranks() const { return left_.ranks(); }

    // Identity used to detect mismatched-base arithmetic.
    const void* id() const { return this; }

private:
    TensorTrain left_;
    TensorTrain right_;
};

using ProjectorPtr = std::shared_ptr<const ProjectorHandle>;

// Element of the tangent space at the handle's base point, stored in the
// gauged parametrization: one core Y_k of size r_{k-1} x n_k x r_k per mode,
// with the gauge condition U_k^T(left unfolding) Y_k = 0 for k < d. The
// represented tensor is sum_k U_{<k} Y_k V_{>k}, the norm is the root of
// sum_k ||Y_k||_F^2, and blocks for different k are orthogonal.
class TangentVector {
public:
    TangentVector() = default;
    // Zero tangent vector at the given base.
    explicit TangentVector(ProjectorPtr base);

    const ProjectorPtr& base() const { return base_; }
    const std::vector<TTCore>& gauges() const { return gauges_; }
    std::vector<TTCore>& gauges() { return gauges_; }

    // Frobenius norm of the largest gauge-condition violation, relative to
    // the core norms; exact tangent vectors sit at roundoff level.
    double gauge_residual() const;
    // Re-impose the gauge condition in place (cheap; applied automatically by
    // operations when drift exceeds 1e-10).
    void enforce_gauge();

private:
    ProjectorPtr base_;
    std::vector<TTCore> gauges_;
};

// Orthogonal projection of an ambient tensor onto the tangent space. Three
// input forms: dense (O(prod n * d r^2) sweep), tensor train (contraction
// sweeps, never densifies), and sparse values on a sample multiset
// (O(nnz * d r^2) after O(nnz * d r) staging; never densifies).
TangentVector project(const ProjectorPtr& P, const DenseTensor& Z);
TangentVector project(const ProjectorPtr& P, const TensorTrain& Z);
TangentVector project(const ProjectorPtr& P, const SparseValues& Z);

// Sum of S rank-1 terms values[s] * (q_1 o ... o q_d) with per-mode vectors
// q_k = modes[k].col(s) of length n_k. Canonical entries are the special case
// q_k = e_{i_k}; dense per-mode vectors arise when a sampling operator is
// conjugated by per-mode linear maps. Cost O(S * d * n r^2).
struct RankOneSum {
    Shape shape;
    std::vector<Eigen::MatrixXd> modes; // modes[k]: n_k x S
    Eigen::VectorXd values;             // S
};
TangentVector project(const ProjectorPtr& P, const RankOneSum& Z);

// The tangent vector as an explicit tensor train of rank exactly 2r (rank
// r_1 + r_1, ..., capped by nothing: first core [Y_1 U_1], middle cores
// [[V_k 0],[Y_k U_k]], last core [V_d ; Y_d]); no rounding applied.
TensorTrain embed(const TangentVector& Y);

// Dimension of the tangent space (= dimension of the rank-r manifold):
// sum_k r_{k-1} n_k r_k - sum_{k<d} r_k^2. ranks may be the inner or the full
// tuple.
Index tangent_dimension(const Shape& shape, const std::vector<Index>& ranks);

// Linear combination a*Y + b*W (same base required).
TangentVector tangent_axpy(double a, const TangentVector& Y, double b,
                           const TangentVector& W);
double tangent_inner(const TangentVector& Y, const TangentVector& W);
double tangent_norm(const TangentVector& Y);

// Interface projections applied to a dense tensor: proj_leq(P, k, Z) applies
// P_{<=k} (k = 0 is the identity), proj_geq(P, j, Z) applies P_{>=j}
// (j = d+1 is the identity).
DenseTensor proj_leq(const ProjectorPtr& P, Index k, const DenseTensor& Z);
DenseTensor proj_geq(const ProjectorPtr& P, Index j, const DenseTensor& Z);

// || (Id - P_{T at Xtilde}) X ||_F and the curvature bound
// ||X - Xtilde||_F^2 / sigma_min_tt(X). The gap never exceeds the bound
// (checked; violation beyond roundoff slack throws). Computed with TT
// arithmetic, so it works beyond densifiable sizes.
struct CurvatureGap {
    double gap = 0.0;
    double bound = 0.0;
};
CurvatureGap curvature_gap(const TensorTrain& X, const TensorTrain& Xtilde);

// Operator norm || P_{T at X} - P_{T at Xtilde} || and its bound
// 2 ||X - Xtilde||_F / sigma_min_tt(X). Dense spectral norm when
// prod(n) <= 20000; otherwise power iteration (200 iterations, 1e-8 relative
// tolerance) on the symmetric difference operator.
struct ProjectorDistance {
    double distance = 0.0;
    double bound = 0.0;
};
ProjectorDistance projector_distance(const TensorTrain& X, const TensorTrain& Xtilde);

} // namespace ttc
