#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ttc/dense_tensor.hpp"
#include "ttc/sampling.hpp"
#include "ttc/tangent.hpp"
#include "ttc/tensor_train.hpp"

namespace ttc {

struct SolverConfig {
    std::vector<Index> ranks;      // inner tuple r_1..r_{d-1} (or full tuple)
    int max_iters = 500;
    double success_tol = 1e-4;     // relative error threshold for success
    double stall_tol = 1e-12;      // relative residual change considered flat
    int stall_window = 25;         // consecutive flat iterations before stopping
    double floor_residual = 1e-13; // stop once the relative residual is below
    std::uint64_t seed = 0;        // draws the default starting point
    bool record_trace = true;
};

// Validates max_iters >= 1, positive tolerances, stall_window >= 1,
// floor_residual >= 0; called by every solve entry point.
void require_valid(const SolverConfig& cfg);

struct TraceRow {
    int iter = 0;
    double residual = 0.0;   // relative, on the training data
    double true_error = std::numeric_limits<double>::quiet_NaN();
    double alpha = 0.0;      // exact line-search step size
    double grad_norm = 0.0;  // tangent-space gradient norm
    Index max_rank = 0;      // largest bond rank of the new iterate
    Index work_elements = 0; // doubles allocated by the step's iterate-sized
                             // and sample-sized buffers (cost accounting)
};

// One row per step, holding the metrics of the iterate the step started from
// (residual, true_error) together with the step taken from it (alpha,
// grad_norm) and the rank of the iterate it produced. If the solve stops on a
// freshly produced iterate, a terminal row with alpha = grad_norm = 0 closes
// the trace, so the residual/error columns always cover the final iterate.
struct ConvergenceTrace {
    std::vector<TraceRow> rows;
};
// CSV columns: iter,residual,true_error,alpha,grad_norm,max_rank.
void save_trace_csv(const ConvergenceTrace& trace, const std::string& path);

// Linear measurement map R from dense tensors to vectors. Implementations
// must form an adjoint pair: <forward(X), y> = <X, adjoint(y)> (the caller's
// contract; adjoint_consistent spot-checks it on random probes). The descent
// analysis additionally assumes a declared bound on ||R* R||, which is not
// verified here.
class MeasurementOp {
public:
    virtual ~MeasurementOp() = default;
    virtual Shape shape() const = 0;
    virtual Index sample_count() const = 0;
    virtual Eigen::VectorXd forward(const DenseTensor& X) const = 0;
    virtual DenseTensor adjoint(const Eigen::VectorXd& y) const = 0;
    // <R*R X, X> = ||forward(X)||^2.
    double quadratic(const DenseTensor& X) const { return forward(X).squaredNorm(); }
};
bool adjoint_consistent(const MeasurementOp& R, std::uint64_t seed, double tol);

// R = vectorization (every entry observed once).
class IdentityOp : public MeasurementOp {
public:
    explicit IdentityOp(Shape shape) : shape_(std::move(shape)) {}
    Shape shape() const override { return shape_; }
    Index sample_count() const override { return num_entries(shape_); }
    Eigen::VectorXd forward(const DenseTensor& X) const override;
    DenseTensor adjoint(const Eigen::VectorXd& y) const override;

private:
    Shape shape_;
};

// R given by an explicit s x prod(n) matrix acting on vectorized tensors.
class DenseLinearOp : public MeasurementOp {
public:
    DenseLinearOp(Shape shape, Eigen::MatrixXd M);
    Shape shape() const override { return shape_; }
    Index sample_count() const override { return M_.rows(); }
    Eigen::VectorXd forward(const DenseTensor& X) const override;
    DenseTensor adjoint(const Eigen::VectorXd& y) const override;

private:
    Shape shape_;
    Eigen::MatrixXd M_;
};

enum class SolveStatus {
    ran_all_iterations,
    stalled,          // residual stopped changing for a full window
    reached_floor,    // residual under floor_residual
    zero_gradient,    // exact fixed point
};

struct SolveResult {
    TensorTrain X;
    ConvergenceTrace trace;
    bool success = false;
    SolveStatus status = SolveStatus::ran_all_iterations;
    int iterations = 0;
    double final_residual = std::numeric_limits<double>::quiet_NaN();
    double test_error = std::numeric_limits<double>::quiet_NaN();
};

// tt_round(X - alpha Y, ranks) where X is the base point of Y: the
// combination is assembled inside the tangent parametrization (rank <= 2r),
// so the rounding never sees anything larger. Declared ranks are kept even if
// the numerical rank of the combination is lower.
TensorTrain retract_step(const TangentVector& Y, double alpha,
                         const std::vector<Index>& ranks);

// One descent step for a generic measurement operator, dense ambient space:
//   Y = P_X R*[R X - data],  alpha = ||Y||^2 / ||R Y||^2,
//   X' = tt_round(X - alpha Y, r)
// where X - alpha Y is assembled inside the tangent space of X (rank <= 2r).
// A zero gradient returns X unchanged; ||R Y|| = 0 with Y != 0 throws.
std::pair<TensorTrain, TraceRow> rgd_step_recovery(const TensorTrain& X,
                                                   const MeasurementOp& R,
                                                   const Eigen::VectorXd& data,
                                                   const std::vector<Index>& ranks);

// One descent step for entry sampling. data = observed values of the target
// on omega. Residual evaluation, tangent projection, and the line search all
// work on the sample multiset only: O(|Omega| d r^2 + d n r^3) per step, no
// dense tensor is ever formed.
std::pair<TensorTrain, TraceRow> rgd_step_completion(const TensorTrain& X,
                                                     const Observations& obs,
                                                     const std::vector<Index>& ranks);

// Relative residual on a sample: the observed-entry mismatch under the
// sampling operator, || R_Omega X - R_Omega A ||_F / || R_Omega A ||_F
// (absolute when the data part vanishes).
double sample_residual(const TensorTrain& X, const Observations& obs);

// Full completion solve. X0 (optional) must match shape and ranks; by default
// the start is gaussian_tt(shape, ranks, cfg.seed). truth (optional) fills
// true_error in the trace. test (optional) decides success: relative error on
// the test sample below cfg.success_tol at termination; without a test set
// the final training residual is used instead.
SolveResult solve_completion(const Observations& obs, const SolverConfig& cfg,
                             const TensorTrain* X0 = nullptr,
                             const TensorTrain* truth = nullptr,
                             const Observations* test = nullptr);

// Full solve for a generic measurement operator (dense ambient space).
SolveResult solve_recovery(const MeasurementOp& R, const Eigen::VectorXd& data,
                           const SolverConfig& cfg, const TensorTrain* X0 = nullptr,
                           const TensorTrain* truth = nullptr);

// Per-step contraction-factor ceiling and the starting-radius condition under
// which the iteration provably contracts. rel_err = ||X_t - A||_F /
// sigma_min_tt(A). `admissible` is cleared (never thrown) when the constants
// leave the range where the bound means anything.
struct RateBound {
    double beta = 0.0;  // ||X_{t+1} - A|| <= beta ||X_t - A||
    double basin = 0.0; // right-hand side of the rel_err starting condition
    bool admissible = false;
};

// Operator with restricted-isometry constant delta on rank-2r tensors and
// ||R*R|| <= opnorm_c.
RateBound recovery_rate(Index d, double delta, double opnorm_c, double rel_err);

// Sampling with RIP constant eps on the tangent space at the target, density
// rho, ||R_Omega|| <= opnorm_c.
RateBound completion_rate(Index d, double eps, double opnorm_c, double rho,
                          double rel_err);

// RIP constant transported to a tangent space at projector distance delta:
// eps + delta (1 + 2 opnorm_c / rho).
double rip_neighborhood(double eps, double delta, double opnorm_c, double rho);

} // namespace ttc
