#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ttc/sampling.hpp"
#include "ttc/tangent.hpp"
#include "ttc/tensor_train.hpp"

namespace ttc {

// (n/r) * max_i ||row_i(U)||^2 for U with orthonormal columns. Always in
// [1, n/r]; invariant under right-multiplication by an orthogonal matrix.
double subspace_coherence(const Eigen::MatrixXd& U);

// Coherences of the column spans of the chain's interface matrices. Entry
// k-1 of `left` covers modes 1..k, entry k-1 of `right` covers modes k+1..d,
// for k = 1..d-1. Computed by expanding interface rows level by level (row
// count grows as prod n_j and is guarded at 10^6); beyond the guard the
// per-level power of the slice-block coherence is reported instead and
// `exact` is cleared.
struct InterfaceCoherence {
    std::vector<double> left;
    std::vector<double> right;
    double max = 0.0;
    bool exact = true;
};
InterfaceCoherence interface_coherence(const TensorTrain& X);

// Slice-block coherences of the orthogonalized cores: for the fully
// left-orthogonal form, left[k-1] = (r_{k-1} n_k / r_k) * max_i
// sigma_max(slice_i)^2 of core k, k = 1..d-1; `right` likewise from the fully
// right-orthogonal form, cores 2..d. Both lists are invariant under the
// choice of minimal representation.
struct CoreCoherence {
    std::vector<double> left;
    std::vector<double> right;
    double max = 0.0;
};
CoreCoherence core_coherence(const TensorTrain& X);

// Closed-form ceilings for max_omega ||P E_omega||_F^2 over canonical basis
// tensors. `ranks` accepts the interior tuple (d-1 values) or the full one.
double bound_c0(double mu0, const Shape& shape, const RankTuple& ranks);
double bound_c1(double mu1, const Shape& shape, const RankTuple& ranks);
// Variant for sampling conjugated by per-mode maps from a smaller shape m:
// the normalizer is the big grid size, the parameter count the small one.
double bound_c2(double mu1, double mu2, const Shape& shape_n,
                const Shape& shape_m, const RankTuple& ranks);

// Exact max over every canonical basis tensor of ||P_{T_X} E_omega||_F^2,
// by exhaustive enumeration (guarded at 10^5 entries). Checked in-function
// against bound_c0 / bound_c1 evaluated at the measured coherences.
double projection_coherence(const TensorTrain& X);

// Largest absolute eigenvalue of Id - rho^{-1} R_Omega compressed to the
// tangent space at X: epsilon such that
//   (1 - epsilon) ||Y||^2 <= rho^{-1} <R_Omega Y, Y> <= (1 + epsilon) ||Y||^2
// for all tangent Y, with equality attained. Exact mode builds an orthonormal
// tangent basis (dimension sum r_{k-1} n_k r_k - sum_{k<d} r_k^2, guarded at
// 5000) and solves the dense symmetric eigenproblem; above the guard a power
// iteration on the tangent-space operator is used (200 iterations, 1e-8
// relative stagnation tolerance).
struct RipEstimate {
    double epsilon = 0.0;
    double rho = 0.0;
    Index tangent_dim = 0;
    bool exact = true;
};
RipEstimate rip_estimate(const TensorTrain& X, const SampleSet& omega);

// Same estimate for the conjugated operator: samples live on the big shape
// (mode_maps[k] is n_k x m_k with orthonormal columns) while X lives on the
// small shape, and each sample contributes the rank-1 tensor with mode
// vectors mode_maps[k]^T e_{i_k}.
RipEstimate rip_estimate_weighted(const TensorTrain& X, const SampleSet& omega,
                                  const std::vector<Eigen::MatrixXd>& mode_maps);

// Everything above for one tensor, plus the derived ceilings.
struct CoherenceReport {
    Shape shape;
    RankTuple ranks;
    InterfaceCoherence interface;
    CoreCoherence core;
    double c0 = 0.0; // bound_c0 at the measured interface coherence
    double c1 = 0.0; // bound_c1 at the measured core coherence
};
CoherenceReport coherence_report(const TensorTrain& X);
std::string to_json(const CoherenceReport& report);

} // namespace ttc
