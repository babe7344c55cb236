#include "ttc/side_info.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "ttc/tangent.hpp"

namespace ttc {
namespace {

constexpr double kOrthoTol = 1e-12;

void require_side(const SideInfo& Q) {
    if (Q.factors.empty()) throw Error("side info: no factors");
    for (const auto& F : Q.factors)
        if (F.rows() < 1 || F.cols() < 1 || F.cols() > F.rows())
            throw Error(
                "side info: each factor must be n_k x m_k with 1 <= m_k <= n_k");
}

// Transform mode k+1 of a train in place: slice'(i) = sum_j M(i, j) slice(j).
TTCore transform_core(const TTCore& c, const Eigen::MatrixXd& M) {
    TTCore out(c.r_left, M.rows(), c.r_right);
    for (Index i = 0; i < M.rows(); ++i)
        out.slice(i) = c.weighted_slice(M.row(i).transpose());
    return out;
}

TensorTrain mode_transformed(const std::vector<Eigen::MatrixXd>& maps,
                             const TensorTrain& X, bool transpose) {
    const Index d = X.order();
    if (static_cast<Index>(maps.size()) != d)
        throw Error("side info: order mismatch");
    Shape shape(static_cast<std::size_t>(d));
    std::vector<TTCore> cores;
    cores.reserve(static_cast<std::size_t>(d));
    for (Index k = 0; k < d; ++k) {
        const Eigen::MatrixXd& F = maps[static_cast<std::size_t>(k)];
        const Eigen::MatrixXd M = transpose ? F.transpose() : F;
        if (M.cols() != X.shape()[static_cast<std::size_t>(k)])
            throw Error("side info: mode size mismatch");
        cores.push_back(transform_core(X.core(k), M));
        shape[static_cast<std::size_t>(k)] = M.rows();
    }
    return TensorTrain(std::move(shape), std::move(cores));
}

// One column per unique offset of omega: modes[k].col(t) = Q_k^T e_{i_k(t)},
// i.e. the adjoint of a canonical basis tensor is a rank-1 tensor with these
// dense mode vectors.
RankOneSum adjoint_rank_one(const SideInfo& Q, const SampleSet& omega,
                            const Eigen::VectorXd& values) {
    const Index d = Q.order();
    const Index S = omega.unique_count();
    RankOneSum z;
    z.shape = Q.inner_shape();
    z.values = values;
    z.modes.resize(static_cast<std::size_t>(d));
    for (Index k = 0; k < d; ++k)
        z.modes[static_cast<std::size_t>(k)].resize(
            Q.factors[static_cast<std::size_t>(k)].cols(), S);
    for (Index t = 0; t < S; ++t) {
        Index off = omega.uniq[static_cast<std::size_t>(t)];
        for (Index k = 0; k < d; ++k) {
            const Index nk = omega.shape[static_cast<std::size_t>(k)];
            const Index ik = off % nk;
            off /= nk;
            z.modes[static_cast<std::size_t>(k)].col(t) =
                Q.factors[static_cast<std::size_t>(k)].row(ik).transpose();
        }
    }
    return z;
}

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

} // namespace

Shape SideInfo::outer_shape() const {
    Shape s;
    s.reserve(factors.size());
    for (const auto& F : factors) s.push_back(F.rows());
    return s;
}

Shape SideInfo::inner_shape() const {
    Shape s;
    s.reserve(factors.size());
    for (const auto& F : factors) s.push_back(F.cols());
    return s;
}

SideInfo make_side_info(std::vector<Eigen::MatrixXd> factors) {
    SideInfo Q{std::move(factors)};
    require_side(Q);
    for (std::size_t k = 0; k < Q.factors.size(); ++k) {
        Eigen::MatrixXd& F = Q.factors[k];
        const Eigen::MatrixXd gram = F.transpose() * F;
        const double drift =
            (gram - Eigen::MatrixXd::Identity(F.cols(), F.cols())).norm();
        if (drift <= kOrthoTol) continue;
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(F);
        Eigen::MatrixXd thinQ =
            qr.householderQ() * Eigen::MatrixXd::Identity(F.rows(), F.cols());
        if (qr.matrixQR().diagonal().cwiseAbs().minCoeff() <
            1e-12 * qr.matrixQR().diagonal().cwiseAbs().maxCoeff())
            throw Error(
                "side info: factor for mode " + std::to_string(k + 1) +
                " is numerically rank-deficient");
        std::cerr << "side info: factor for mode " << k + 1
                  << " was not orthonormal (defect " << drift
                  << "); replaced by an orthonormal basis of its range\n";
        F = std::move(thinQ);
    }
    return Q;
}

DenseTensor q_apply(const SideInfo& Q, const DenseTensor& W) {
    require_side(Q);
    if (W.shape() != Q.inner_shape())
        throw Error("q_apply: tensor lives on the wrong grid");
    DenseTensor out = W;
    for (Index k = 0; k < Q.order(); ++k)
        out = mode_product(out, k + 1, Q.factors[static_cast<std::size_t>(k)]);
    return out;
}

TensorTrain q_apply(const SideInfo& Q, const TensorTrain& W) {
    require_side(Q);
    if (W.shape() != Q.inner_shape())
        throw Error("q_apply: train lives on the wrong grid");
    return mode_transformed(Q.factors, W, /*transpose=*/false);
}

DenseTensor q_adjoint(const SideInfo& Q, const DenseTensor& X) {
    require_side(Q);
    if (X.shape() != Q.outer_shape())
        throw Error("q_adjoint: tensor lives on the wrong grid");
    DenseTensor out = X;
    for (Index k = 0; k < Q.order(); ++k)
        out = mode_product(out, k + 1,
                           Q.factors[static_cast<std::size_t>(k)].transpose());
    return out;
}

TensorTrain q_adjoint(const SideInfo& Q, const TensorTrain& X) {
    require_side(Q);
    if (X.shape() != Q.outer_shape())
        throw Error("q_adjoint: train lives on the wrong grid");
    return mode_transformed(Q.factors, X, /*transpose=*/true);
}

bool membership_check(const SideInfo& Q, const TensorTrain& A, double tol) {
    const TensorTrain back = q_apply(Q, q_adjoint(Q, A));
    const double na = norm(A);
    return diff_norm(back, A) <= tol * (na > 0 ? na : 1.0);
}

SideCoherence side_coherence(const SideInfo& Q) {
    require_side(Q);
    SideCoherence out;
    out.per_mode.reserve(Q.factors.size());
    for (const auto& F : Q.factors) {
        const double ratio =
            static_cast<double>(F.rows()) / static_cast<double>(F.cols());
        out.per_mode.push_back(ratio * F.rowwise().squaredNorm().maxCoeff());
        out.max = std::max(out.max, out.per_mode.back());
    }
    return out;
}

Observations observe_through(const SideInfo& Q, const TensorTrain& W,
                             const SampleSet& omega) {
    if (omega.shape != Q.outer_shape())
        throw Error("observe_through: sample on the wrong grid");
    const Eigen::VectorXd uniq_vals = evaluate_at_mapped(W, omega, Q.factors);
    Eigen::VectorXd per_draw(omega.draw_count());
    for (Index j = 0; j < omega.draw_count(); ++j) {
        const auto it = std::lower_bound(omega.uniq.begin(), omega.uniq.end(),
                                         omega.draws[static_cast<std::size_t>(j)]);
        per_draw[j] = uniq_vals[it - omega.uniq.begin()];
    }
    return observations_from(omega, std::move(per_draw));
}

double side_residual(const TensorTrain& W, const Observations& obs,
                     const SideInfo& Q) {
    const Eigen::VectorXd xv = evaluate_at_mapped(W, obs.set, Q.factors);
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

std::pair<TensorTrain, TraceRow> rgd_step_side(const TensorTrain& W,
                                               const Observations& obs,
                                               const SideInfo& Q,
                                               const std::vector<Index>& ranks) {
    const SampleSet& omega = obs.set;
    if (omega.shape != Q.outer_shape() || W.shape() != Q.inner_shape())
        throw Error("rgd_step_side: grid mismatch");
    const RankTuple full = normalize_ranks(W.shape(), ranks);
    const std::vector<Index> inner(full.begin() + 1, full.end() - 1);
    const Index m = omega.unique_count();

    auto P = std::make_shared<const ProjectorHandle>(W);
    const Eigen::VectorXd xv = evaluate_at_mapped(P->left(), omega, Q.factors);

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

    // Gradient in the reduced space: P_W Q* [R_Omega Q W - R_Omega A], where
    // Q* of a sparse tensor is a sum of rank-1 terms with dense mode vectors.
    TangentVector Y = project(P, adjoint_rank_one(Q, omega, coeffs));
    const double ny = tangent_norm(Y);
    row.grad_norm = ny;
    row.work_elements += gauge_elements(Y);
    if (ny == 0.0) {
        row.max_rank = max_rank_of(W);
        return {W, row};
    }

    const TensorTrain E = embed(Y);
    const Eigen::VectorXd yv = evaluate_at_mapped(E, omega, Q.factors);
    double denom = 0.0;
    for (Index j = 0; j < m; ++j)
        denom += omega.mult[static_cast<std::size_t>(j)] * yv[j] * yv[j];
    row.work_elements += tt_elements(E) + m;
    if (denom <= 0.0)
        throw Error(
            "rgd_step_side: the sample does not see the descent direction; "
            "exact line search is undefined");
    const double alpha = ny * ny / denom;

    TensorTrain Wn = retract_step(Y, alpha, inner);
    row.alpha = alpha;
    row.max_rank = max_rank_of(Wn);
    row.work_elements += tt_elements(Wn);
    return {std::move(Wn), row};
}

SolveResult solve_side(const Observations& obs, const SideInfo& Q,
                       const SolverConfig& cfg, const TensorTrain* X0,
                       const TensorTrain* truth, const Observations* test) {
    require_valid(cfg);
    const Shape inner_shape = Q.inner_shape();
    const RankTuple full = normalize_ranks(inner_shape, cfg.ranks);
    TensorTrain X =
        X0 ? *X0
           : gaussian_tt(inner_shape,
                         std::vector<Index>(full.begin() + 1, full.end() - 1),
                         cfg.seed);
    if (X.shape() != inner_shape)
        throw Error("solve_side: start lives on the wrong grid");
    const double truth_norm = truth ? norm(*truth) : 0.0;

    SolveResult out;
    double prev = std::numeric_limits<double>::quiet_NaN();
    int flat = 0;
    for (int t = 0; t < cfg.max_iters; ++t) {
        auto [Xn, row] = rgd_step_side(X, obs, Q, cfg.ranks);
        row.iter = t;
        if (truth)
            row.true_error = truth_norm > 0 ? diff_norm(X, *truth) / truth_norm
                                            : diff_norm(X, *truth);
        if (cfg.record_trace) out.trace.rows.push_back(row);

        if (row.grad_norm == 0.0) {
            out.status = SolveStatus::zero_gradient;
            break;
        }
        if (row.residual <= cfg.floor_residual) {
            out.status = SolveStatus::reached_floor;
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

    out.final_residual = side_residual(X, obs, Q);
    if (cfg.record_trace &&
        out.iterations == static_cast<int>(out.trace.rows.size())) {
        TraceRow last;
        last.iter = out.iterations;
        last.residual = out.final_residual;
        if (truth)
            last.true_error = truth_norm > 0 ? diff_norm(X, *truth) / truth_norm
                                             : diff_norm(X, *truth);
        last.max_rank = max_rank_of(X);
        out.trace.rows.push_back(last);
    }
    out.X = std::move(X);

    if (test) {
        out.test_error = side_residual(out.X, *test, Q);
        out.success = out.test_error < cfg.success_tol;
    } else {
        out.success = out.final_residual < cfg.success_tol;
    }
    return out;
}

RipEstimate rip_estimate_side(const TensorTrain& W, const SampleSet& omega,
                              const SideInfo& Q) {
    if (omega.shape != Q.outer_shape() || W.shape() != Q.inner_shape())
        throw Error("rip_estimate_side: grid mismatch");
    return rip_estimate_weighted(W, omega, Q.factors);
}

void save_side_info(const SideInfo& Q, const std::string& path) {
    require_side(Q);
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "ttc si 1\n" << Q.factors.size() << "\n";
    char buf[64];
    for (const auto& F : Q.factors) {
        out << F.rows() << " " << F.cols() << "\n";
        for (Index j = 0; j < F.cols(); ++j)
            for (Index i = 0; i < F.rows(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g\n", F(i, j));
                out << buf;
            }
    }
    if (!out) throw Error("write failed: " + path);
}

SideInfo load_side_info(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "ttc si 1")
        throw Error("not a side-info file: " + path);
    std::size_t d = 0;
    in >> d;
    if (!in || d == 0) throw Error("bad side-info order: " + path);
    std::vector<Eigen::MatrixXd> factors(d);
    for (std::size_t k = 0; k < d; ++k) {
        Index rows = 0, cols = 0;
        in >> rows >> cols;
        if (!in || rows < 1 || cols < 1 || cols > rows)
            throw Error("bad side-info factor header: " + path);
        factors[k].resize(rows, cols);
        for (Index j = 0; j < cols; ++j)
            for (Index i = 0; i < rows; ++i)
                if (!(in >> factors[k](i, j)))
                    throw Error("truncated side-info file: " + path);
    }
    return make_side_info(std::move(factors));
}

} // namespace ttc
