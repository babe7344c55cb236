#include "ttc/rgd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ttc/rng.hpp"

namespace ttc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Index tt_elements(const TensorTrain& X) {
    Index total = 0;
    for (const auto& c : X.cores()) total += static_cast<Index>(c.m.size());
    return total;
}

Index gauge_elements(const TangentVector& Y) {
    Index total = 0;
    for (const auto& g : Y.gauges()) total += static_cast<Index>(g.m.size());
    return total;
}

Index max_rank_of(const TensorTrain& X) {
    const RankTuple r = X.ranks();
    return *std::max_element(r.begin(), r.end());
}

std::vector<Index> inner_of(const RankTuple& full) {
    return std::vector<Index>(full.begin() + 1, full.end() - 1);
}

void require_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) throw Error(std::string("shape mismatch: ") + what);
}

} // namespace

// Scaling every gauge core by -alpha and adding the weight-carrying last core
// of the base point's left-orthogonal form to the last slot represents
// X - alpha * Y as a single rank <= 2r train, which the rounding then brings
// back to the declared ranks.
TensorTrain retract_step(const TangentVector& Y, double alpha,
                         const std::vector<Index>& ranks) {
    TangentVector Z = tangent_axpy(-alpha, Y, 0.0, Y);
    const TensorTrain& L = Z.base()->left();
    const Index d = L.order();
    Z.gauges()[static_cast<std::size_t>(d - 1)].m += L.core(d - 1).m;
    const RankTuple full = normalize_ranks(L.shape(), ranks);
    return tt_round(embed(Z), std::vector<Index>(full.begin() + 1, full.end() - 1),
                    /*keep_declared_rank=*/true);
}

void save_trace_csv(const ConvergenceTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "iter,residual,true_error,alpha,grad_norm,max_rank\n";
    char buf[512];
    for (const TraceRow& r : trace.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%lld\n", r.iter,
                      r.residual, r.true_error, r.alpha, r.grad_norm,
                      static_cast<long long>(r.max_rank));
        out << buf;
    }
    if (!out) throw Error("write failed: " + path);
}

bool adjoint_consistent(const MeasurementOp& R, std::uint64_t seed, double tol) {
    const Shape shape = R.shape();
    const Index N = num_entries(shape);
    const Index s = R.sample_count();
    Rng rng(seed);
    for (int probe = 0; probe < 3; ++probe) {
        DenseTensor X(shape);
        for (Index i = 0; i < N; ++i) X.data()[i] = rng.normal();
        Eigen::VectorXd y(s);
        for (Index i = 0; i < s; ++i) y[i] = rng.normal();
        const double lhs = R.forward(X).dot(y);
        const double rhs = X.data().dot(R.adjoint(y).data());
        const double scale = std::max({std::abs(lhs), std::abs(rhs), 1.0});
        if (std::abs(lhs - rhs) > tol * scale) return false;
    }
    return true;
}

Eigen::VectorXd IdentityOp::forward(const DenseTensor& X) const {
    require_shape(X.shape(), shape_, "IdentityOp::forward");
    return X.data();
}

DenseTensor IdentityOp::adjoint(const Eigen::VectorXd& y) const {
    if (y.size() != num_entries(shape_))
        throw Error("IdentityOp::adjoint: wrong length");
    return DenseTensor(shape_, y);
}

DenseLinearOp::DenseLinearOp(Shape shape, Eigen::MatrixXd M)
    : shape_(std::move(shape)), M_(std::move(M)) {
    if (M_.cols() != num_entries(shape_))
        throw Error("DenseLinearOp: columns must match entry count");
    if (M_.rows() < 1) throw Error("DenseLinearOp: empty operator");
}

Eigen::VectorXd DenseLinearOp::forward(const DenseTensor& X) const {
    require_shape(X.shape(), shape_, "DenseLinearOp::forward");
    return M_ * X.data();
}

DenseTensor DenseLinearOp::adjoint(const Eigen::VectorXd& y) const {
    if (y.size() != M_.rows())
        throw Error("DenseLinearOp::adjoint: wrong length");
    return DenseTensor(shape_, M_.transpose() * y);
}

void require_valid(const SolverConfig& cfg) {
    require(cfg.max_iters >= 1, "solver config: max_iters must be at least 1");
    require(cfg.success_tol > 0.0, "solver config: success_tol must be positive");
    require(cfg.stall_tol > 0.0, "solver config: stall_tol must be positive");
    require(cfg.stall_window >= 1, "solver config: stall_window must be at least 1");
    require(cfg.floor_residual >= 0.0,
            "solver config: floor_residual may not be negative");
}

std::pair<TensorTrain, TraceRow> rgd_step_recovery(const TensorTrain& X,
                                                   const MeasurementOp& R,
                                                   const Eigen::VectorXd& data,
                                                   const std::vector<Index>& ranks) {
    require_shape(X.shape(), R.shape(), "rgd_step_recovery");
    if (data.size() != R.sample_count())
        throw Error("rgd_step_recovery: data length != sample count");
    const RankTuple full = normalize_ranks(X.shape(), ranks);
    const std::vector<Index> inner = inner_of(full);

    auto P = std::make_shared<const ProjectorHandle>(X);
    // Evaluate on the caller's representation, not the canonicalized one:
    // when X reproduces the data bit for bit the residual is exactly zero
    // and the fixed point is exact.
    const DenseTensor Xd = to_dense(X);
    const Eigen::VectorXd res = R.forward(Xd) - data;
    const double dn = data.norm();

    TraceRow row;
    row.residual = dn > 0 ? res.norm() / dn : res.norm();
    row.work_elements = 2 * Xd.size() + static_cast<Index>(2 * res.size());

    const DenseTensor G = R.adjoint(res);
    TangentVector Y = project(P, G);
    const double ny = tangent_norm(Y);
    row.grad_norm = ny;
    row.work_elements += gauge_elements(Y);
    if (ny == 0.0) {
        row.max_rank = max_rank_of(X);
        return {X, row}; // exact fixed point
    }

    const DenseTensor Yd = to_dense(embed(Y));
    const double denom = R.forward(Yd).squaredNorm();
    row.work_elements += Yd.size();
    if (denom <= 0.0)
        throw Error(
            "rgd_step_recovery: measurement of a nonzero descent direction "
            "vanished; exact line search is undefined");
    const double alpha = ny * ny / denom;

    TensorTrain Xn = retract_step(Y, alpha, inner);
    row.alpha = alpha;
    row.max_rank = max_rank_of(Xn);
    row.work_elements += tt_elements(Xn);
    return {std::move(Xn), row};
}

double sample_residual(const TensorTrain& X, const Observations& obs) {
    const Eigen::VectorXd xv = evaluate_at(X, obs.set);
    double r2 = 0.0, d2 = 0.0;
    for (Index j = 0; j < obs.set.unique_count(); ++j) {
        const double w = obs.set.mult[static_cast<std::size_t>(j)];
        const double rj = w * (xv[j] - obs.unique_values[j]);
        const double dj = w * obs.unique_values[j];
        r2 += rj * rj;
        d2 += dj * dj;
    }
    return d2 > 0 ? std::sqrt(r2 / d2) : std::sqrt(r2);
}

std::pair<TensorTrain, TraceRow> rgd_step_completion(const TensorTrain& X,
                                                     const Observations& obs,
                                                     const std::vector<Index>& ranks) {
    const SampleSet& omega = obs.set;
    require_shape(X.shape(), omega.shape, "rgd_step_completion");
    const RankTuple full = normalize_ranks(X.shape(), ranks);
    const std::vector<Index> inner = inner_of(full);
    const Index m = omega.unique_count();

    auto P = std::make_shared<const ProjectorHandle>(X);
    // Evaluate on the caller's representation, not the canonicalized one:
    // observed values produced from the same cores then cancel bit for bit,
    // making the fixed point exact.
    const Eigen::VectorXd xv = evaluate_at(X, omega);

    // Residual coefficients of R_Omega X - R_Omega A on the unique offsets.
    Eigen::VectorXd coeffs(m);
    double r2 = 0.0, d2 = 0.0;
    for (Index j = 0; j < m; ++j) {
        const double w = omega.mult[static_cast<std::size_t>(j)];
        const double diff = xv[j] - obs.unique_values[j];
        coeffs[j] = w * diff;
        r2 += (w * diff) * (w * diff);
        const double dj = w * obs.unique_values[j];
        d2 += dj * dj;
    }

    TraceRow row;
    row.residual = d2 > 0 ? std::sqrt(r2 / d2) : std::sqrt(r2);
    row.work_elements = 2 * m;

    TangentVector Y = project(P, SparseValues{omega.shape, omega.uniq, coeffs});
    const double ny = tangent_norm(Y);
    row.grad_norm = ny;
    row.work_elements += gauge_elements(Y);
    if (ny == 0.0) {
        row.max_rank = max_rank_of(X);
        return {X, row}; // exact fixed point
    }

    // Exact line search: <R_Omega Y, Y> over the sample multiset.
    const TensorTrain E = embed(Y);
    const Eigen::VectorXd yv = evaluate_at(E, omega);
    double denom = 0.0;
    for (Index j = 0; j < m; ++j)
        denom += omega.mult[static_cast<std::size_t>(j)] * yv[j] * yv[j];
    row.work_elements += tt_elements(E) + m;
    if (denom <= 0.0)
        throw Error(
            "rgd_step_completion: the sample does not see the descent "
            "direction; exact line search is undefined (observation set too "
            "sparse for this rank)");
    const double alpha = ny * ny / denom;

    TensorTrain Xn = retract_step(Y, alpha, inner);
    row.alpha = alpha;
    row.max_rank = max_rank_of(Xn);
    row.work_elements += tt_elements(Xn);
    return {std::move(Xn), row};
}

namespace {

// Shared driver: step(X) -> (X', row with residual/grad of X).
template <typename StepFn, typename FinalResidualFn>
SolveResult solve_loop(TensorTrain X, const SolverConfig& cfg, const TensorTrain* truth,
                       StepFn step, FinalResidualFn final_residual) {
    SolveResult out;
    const double truth_norm = truth ? norm(*truth) : 0.0;
    double prev = kNaN;
    int flat = 0;

    for (int t = 0; t < cfg.max_iters; ++t) {
        auto [Xn, row] = step(X);
        row.iter = t;
        if (truth)
            row.true_error =
                truth_norm > 0 ? diff_norm(X, *truth) / truth_norm : diff_norm(X, *truth);
        if (cfg.record_trace) out.trace.rows.push_back(row);

        if (row.grad_norm == 0.0) {
            out.status = SolveStatus::zero_gradient; // X_t is a fixed point
            break;
        }
        if (row.residual <= cfg.floor_residual) {
            out.status = SolveStatus::reached_floor; // stop before stepping off it
            break;
        }
        if (t > 0) {
            const double change = std::abs(row.residual - prev) / std::max(prev, 1e-300);
            flat = change < cfg.stall_tol ? flat + 1 : 0;
        }
        prev = row.residual;

        X = std::move(Xn);
        out.iterations = t + 1;

        if (flat >= cfg.stall_window) {
            out.status = SolveStatus::stalled;
            break;
        }
    }

    out.final_residual = final_residual(X);
    if (cfg.record_trace &&
        out.iterations == static_cast<int>(out.trace.rows.size())) {
        TraceRow last; // terminal row: the final iterate, no step taken
        last.iter = out.iterations;
        last.residual = out.final_residual;
        if (truth)
            last.true_error =
                truth_norm > 0 ? diff_norm(X, *truth) / truth_norm : diff_norm(X, *truth);
        last.max_rank = max_rank_of(X);
        out.trace.rows.push_back(last);
    }
    out.X = std::move(X);
    return out;
}

} // namespace

SolveResult solve_completion(const Observations& obs, const SolverConfig& cfg,
                             const TensorTrain* X0, const TensorTrain* truth,
                             const Observations* test) {
    require_valid(cfg);
    const Shape& shape = obs.set.shape;
    const RankTuple full = normalize_ranks(shape, cfg.ranks);
    TensorTrain start = X0 ? *X0 : gaussian_tt(shape, inner_of(full), cfg.seed);
    require_shape(start.shape(), shape, "solve_completion: start vs observations");

    SolveResult out = solve_loop(
        std::move(start), cfg, truth,
        [&](const TensorTrain& X) { return rgd_step_completion(X, obs, cfg.ranks); },
        [&](const TensorTrain& X) { return sample_residual(X, obs); });

    if (test) {
        out.test_error = sample_residual(out.X, *test);
        out.success = out.test_error < cfg.success_tol;
    } else {
        out.success = out.final_residual < cfg.success_tol;
    }
    return out;
}

SolveResult solve_recovery(const MeasurementOp& R, const Eigen::VectorXd& data,
                           const SolverConfig& cfg, const TensorTrain* X0,
                           const TensorTrain* truth) {
    require_valid(cfg);
    const Shape shape = R.shape();
    const RankTuple full = normalize_ranks(shape, cfg.ranks);
    TensorTrain start = X0 ? *X0 : gaussian_tt(shape, inner_of(full), cfg.seed);
    require_shape(start.shape(), shape, "solve_recovery: start vs operator");
    const double dn = data.norm();

    SolveResult out = solve_loop(
        std::move(start), cfg, truth,
        [&](const TensorTrain& X) { return rgd_step_recovery(X, R, data, cfg.ranks); },
        [&](const TensorTrain& X) {
            const double r = (R.forward(to_dense(X)) - data).norm();
            return dn > 0 ? r / dn : r;
        });

    out.success = out.final_residual < cfg.success_tol;
    return out;
}

RateBound recovery_rate(Index d, double delta, double opnorm_c, double rel_err) {
    RateBound out;
    if (d < 2 || delta < 0 || opnorm_c <= 0 || rel_err < 0) return out;
    const double s = 1.0 + std::sqrt(static_cast<double>(d - 1));
    out.beta = delta < 1
                   ? s * (2 * delta / (1 - delta) + (1 + opnorm_c / (1 - delta)) * rel_err)
                   : std::numeric_limits<double>::infinity();
    const double num = (1 - delta) / s - 2 * delta;
    const double den = 1 + opnorm_c - delta;
    out.basin = den > 0 ? num / den : 0.0;
    out.admissible = delta < 1.0 / (3.0 + 2.0 * std::sqrt(static_cast<double>(d - 1))) &&
                     den > 0;
    return out;
}

double rip_neighborhood(double eps, double delta, double opnorm_c, double rho) {
    return eps + delta * (1.0 + 2.0 * opnorm_c / rho);
}

RateBound completion_rate(Index d, double eps, double opnorm_c, double rho,
                          double rel_err) {
    RateBound out;
    if (d < 2 || eps < 0 || opnorm_c <= 0 || rho <= 0 || rel_err < 0) return out;
    const double s = 1.0 + std::sqrt(static_cast<double>(d - 1));
    const double eps_t = rip_neighborhood(eps, 2 * rel_err, opnorm_c, rho);
    out.beta = eps_t < 1
                   ? s * (2 * eps_t / (1 - eps_t) + (1 + opnorm_c / (1 - eps_t)) * rel_err)
                   : std::numeric_limits<double>::infinity();
    const double num = (1 - eps) / s - 2 * eps;
    const double den =
        5 + opnorm_c + 8 * opnorm_c / rho + (2 + 4 * opnorm_c / rho) / s - eps;
    out.basin = den > 0 ? num / den : 0.0;
    out.admissible = eps < 1.0 / (3.0 + 2.0 * std::sqrt(static_cast<double>(d - 1))) &&
                     eps_t < 1 && den > 0;
    return out;
}

} // namespace ttc
