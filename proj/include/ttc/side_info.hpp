#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ttc/coherence.hpp"
#include "ttc/rgd.hpp"
#include "ttc/sampling.hpp"
#include "ttc/tensor_train.hpp"

namespace ttc {

// Per-mode side information: matrices Q_k of size n_k x m_k (m_k <= n_k) with
// orthonormal columns whose ranges are known to contain the mode-k fibers of
// the target. The target then factors as A = W x_1 Q_1 ... x_d Q_d for some
// core tensor W on the reduced grid m_1 x ... x m_d, and completion runs in
// the reduced space.
struct SideInfo {
    std::vector<Eigen::MatrixXd> factors;

    Index order() const { return static_cast<Index>(factors.size()); }
    Shape outer_shape() const; // n_1..n_d (rows)
    Shape inner_shape() const; // m_1..m_d (columns)
};

// Validates sizes and orthonormalizes each factor's columns (QR). A factor
// that was not orthonormal to begin with is replaced by an orthonormal basis
// of its range and a note is printed to stderr.
SideInfo make_side_info(std::vector<Eigen::MatrixXd> factors);

// W x_1 Q_1 ... x_d Q_d (reduced -> full grid). The train version transforms
// each core in place, mode by mode, and preserves the bond ranks.
DenseTensor q_apply(const SideInfo& Q, const DenseTensor& W);
TensorTrain q_apply(const SideInfo& Q, const TensorTrain& W);

// Adjoint map: X x_1 Q_1^T ... x_d Q_d^T (full -> reduced grid).
DenseTensor q_adjoint(const SideInfo& Q, const DenseTensor& X);
TensorTrain q_adjoint(const SideInfo& Q, const TensorTrain& X);

// Whether A lies in the model subspace: || Q Q* A - A ||_F <= tol ||A||_F.
bool membership_check(const SideInfo& Q, const TensorTrain& A, double tol);

// Incoherence of the side information: per mode, (n_k / m_k) * max_i
// || e_i^T Q_k ||^2, and the maximum over modes (the worst-case leverage of a
// single row, normalized so that 1 means perfectly spread).
struct SideCoherence {
    std::vector<double> per_mode;
    double max = 0.0;
};
SideCoherence side_coherence(const SideInfo& Q);

// Observations of Q W on a full-grid sample (what a measurement device
// produces when the ground truth is W seen through Q).
Observations observe_through(const SideInfo& Q, const TensorTrain& W,
                             const SampleSet& omega);

// Relative residual of the reduced-space iterate against full-grid
// observations: || R_Omega (Q W) - R_Omega A ||_F / || R_Omega A ||_F.
double side_residual(const TensorTrain& W, const Observations& obs, const SideInfo& Q);

// One descent step in the reduced space for the operator Q* R_Omega Q: the
// iterate W lives on m_1 x ... x m_d while the observations live on the full
// grid. Per step O(|Omega| d (m r^2 + n m)) — still no dense tensor.
std::pair<TensorTrain, TraceRow> rgd_step_side(const TensorTrain& W,
                                               const Observations& obs,
                                               const SideInfo& Q,
                                               const std::vector<Index>& ranks);

// Full reduced-space solve; mirrors solve_completion. X0/truth live on the
// reduced grid, obs/test on the full grid.
SolveResult solve_side(const Observations& obs, const SideInfo& Q,
                       const SolverConfig& cfg, const TensorTrain* X0 = nullptr,
                       const TensorTrain* truth = nullptr,
                       const Observations* test = nullptr);

// Restricted-isometry constant of rho^{-1} Q* R_Omega Q on the tangent space
// at W (reduced grid); thin wrapper over rip_estimate_weighted.
RipEstimate rip_estimate_side(const TensorTrain& W, const SampleSet& omega,
                              const SideInfo& Q);

// Text format: header line, order, then per factor its dimensions and
// column-major entries.
void save_side_info(const SideInfo& Q, const std::string& path);
SideInfo load_side_info(const std::string& path);

} // namespace ttc
