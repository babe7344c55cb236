#include "ttc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "ttc/coherence.hpp"
#include "ttc/rng.hpp"
#include "ttc/tangent.hpp"

namespace ttc {
namespace {

void require(bool ok, const char* what) {
    if (!ok) throw Error(what);
}

Shape cube(Index d, Index n) { return Shape(static_cast<std::size_t>(d), n); }

std::vector<Index> uniform_ranks(Index d, Index r) {
    return std::vector<Index>(static_cast<std::size_t>(d - 1), r);
}

// Dispatch `count` independent tasks over a small pool. Results must be
// written to preallocated per-task slots, so the outcome is identical for any
// thread count or interleaving.
void run_pool(int threads, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const int workers = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(threads), count));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) break;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

struct Task {
    std::size_t cell = 0; // index into the cell table
    int trial = 0;
};

// A trial that dies (rank-deficient iterate, degenerate line search, ...) is
// an unsuccessful trial, not a crashed experiment.
template <typename TrialFn>
std::vector<PhaseCell> run_cells(std::vector<PhaseCell> cells, int trials, int threads,
                                 TrialFn trial_fn) {
    std::vector<Task> tasks;
    tasks.reserve(cells.size() * static_cast<std::size_t>(trials));
    for (std::size_t c = 0; c < cells.size(); ++c)
        for (int t = 0; t < trials; ++t) tasks.push_back(Task{c, t});
    std::vector<char> ok(tasks.size(), 0);
    run_pool(threads, tasks.size(), [&](std::size_t i) {
        const Task& task = tasks[i];
        bool success = false;
        try {
            success = trial_fn(cells[task.cell], task.trial);
        } catch (const std::exception&) {
            success = false;
        }
        ok[i] = success ? 1 : 0;
    });
    for (std::size_t i = 0; i < tasks.size(); ++i)
        cells[tasks[i].cell].successes += ok[i];
    for (auto& cell : cells)
        cell.frequency = static_cast<double>(cell.successes) / cell.trials;
    return cells;
}

void append_sorted_unique(std::vector<Index>& grid) {
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
}

} // namespace

double reference_samples(Index d, Index n, Index rank, double power) {
    return std::pow(static_cast<double>(d), power) * static_cast<double>(rank * rank) *
           static_cast<double>(n) * std::log(static_cast<double>(n)) / 10.0;
}

std::vector<Index> default_sample_grid(Index d, Index n, Index rank) {
    const Index dim = tangent_dimension(cube(d, n), uniform_ranks(d, rank));
    const double ref = reference_samples(d, n, rank, 2.0);
    std::vector<Index> grid = {
        std::max<Index>(1, static_cast<Index>(0.6 * dim)),
        static_cast<Index>(1.2 * dim),
        static_cast<Index>(ref / 2),
        static_cast<Index>(ref),
        static_cast<Index>(2 * ref),
        static_cast<Index>(4 * ref),
    };
    append_sorted_unique(grid);
    return grid;
}

std::vector<Index> default_side_sample_grid(Index d, Index m, Index rank) {
    const Index dim = tangent_dimension(cube(d, m), uniform_ranks(d, rank));
    std::vector<Index> grid = {
        std::max<Index>(1, static_cast<Index>(0.6 * dim)),
        static_cast<Index>(1.2 * dim),
        2 * dim,
        3 * dim,
        5 * d * m * rank * rank,
    };
    append_sorted_unique(grid);
    return grid;
}

std::vector<PhaseCell> run_phase_plot(const ExperimentConfig& cfg) {
    require(cfg.n >= 2, "phase plot: n must be at least 2");
    require(!cfg.dims.empty(), "phase plot: empty list of orders");
    for (Index d : cfg.dims) require(d >= 2, "phase plot: order must be at least 2");
    require(cfg.rank >= 1, "phase plot: rank must be positive");
    require(cfg.trials >= 1, "phase plot: trials must be at least 1");
    require(cfg.threads >= 1, "phase plot: threads must be at least 1");
    for (Index s : cfg.sample_grid) require(s >= 1, "phase plot: sample sizes must be positive");

    std::vector<PhaseCell> cells;
    for (Index d : cfg.dims) {
        const std::vector<Index> grid = cfg.sample_grid.empty()
                                            ? default_sample_grid(d, cfg.n, cfg.rank)
                                            : cfg.sample_grid;
        for (Index s : grid) {
            PhaseCell cell;
            cell.axis = d;
            cell.samples = s;
            cell.trials = cfg.trials;
            cell.ref_d2 = reference_samples(d, cfg.n, cfg.rank, 2.0);
            cell.ref_d22 = reference_samples(d, cfg.n, cfg.rank, 2.2);
            cells.push_back(cell);
        }
    }

    return run_cells(std::move(cells), cfg.trials, cfg.threads,
                     [&cfg](const PhaseCell& cell, int trial) {
        const Index d = cell.axis;
        const Shape shape = cube(d, cfg.n);
        const std::vector<Index> ranks = uniform_ranks(d, cfg.rank);
        auto seed_of = [&](std::uint64_t purpose) {
            return derive_seed(cfg.master_seed, static_cast<std::uint64_t>(d),
                               static_cast<std::uint64_t>(cell.samples),
                               static_cast<std::uint64_t>(trial), purpose);
        };
        const TensorTrain A = gaussian_tt(shape, ranks, seed_of(1));
        const TensorTrain X0 = gaussian_tt(shape, ranks, seed_of(2));
        const Observations obs = observe(A, sample_uniform(shape, cell.samples, seed_of(3)));
        const Observations test = observe(A, sample_uniform(shape, cell.samples, seed_of(4)));
        SolverConfig sc = cfg.solver;
        sc.ranks = ranks;
        sc.record_trace = false;
        return solve_completion(obs, sc, &X0, nullptr, &test).success;
    });
}

std::vector<PhaseCell> run_phase_plot_side(const SidePhaseConfig& cfg) {
    require(!cfg.ns.empty(), "side phase plot: empty list of grid sizes");
    require(cfg.d >= 2, "side phase plot: order must be at least 2");
    require(cfg.m >= 2, "side phase plot: m must be at least 2");
    for (Index n : cfg.ns)
        require(n >= cfg.m, "side phase plot: n must be at least m");
    require(cfg.rank >= 1, "side phase plot: rank must be positive");
    require(cfg.trials >= 1, "side phase plot: trials must be at least 1");
    require(cfg.threads >= 1, "side phase plot: threads must be at least 1");
    for (Index s : cfg.sample_grid)
        require(s >= 1, "side phase plot: sample sizes must be positive");

    const std::vector<Index> grid = cfg.sample_grid.empty()
                                        ? default_side_sample_grid(cfg.d, cfg.m, cfg.rank)
                                        : cfg.sample_grid;
    std::vector<PhaseCell> cells;
    for (Index n : cfg.ns) {
        for (Index s : grid) {
            PhaseCell cell;
            cell.axis = n;
            cell.samples = s;
            cell.trials = cfg.trials;
            cell.ref_d2 = reference_samples(cfg.d, cfg.m, cfg.rank, 2.0);
            cell.ref_d22 = reference_samples(cfg.d, cfg.m, cfg.rank, 2.2);
            cells.push_back(cell);
        }
    }

    return run_cells(std::move(cells), cfg.trials, cfg.threads,
                     [&cfg](const PhaseCell& cell, int trial) {
        const Index n = cell.axis;
        const Shape outer = cube(cfg.d, n);
        const Shape inner = cube(cfg.d, cfg.m);
        const std::vector<Index> ranks = uniform_ranks(cfg.d, cfg.rank);

        // The reduced-space truth and start use axis key 0, so every n faces
        // the same W; only the side factors and the sample depend on n.
        auto shared_seed = [&](std::uint64_t purpose) {
            return derive_seed(cfg.master_seed, std::uint64_t{0},
                               static_cast<std::uint64_t>(cell.samples),
                               static_cast<std::uint64_t>(trial), purpose);
        };
        auto seed_of = [&](std::uint64_t purpose) {
            return derive_seed(cfg.master_seed, static_cast<std::uint64_t>(n),
                               static_cast<std::uint64_t>(cell.samples),
                               static_cast<std::uint64_t>(trial), purpose);
        };

        std::vector<Eigen::MatrixXd> factors(static_cast<std::size_t>(cfg.d));
        for (Index k = 0; k < cfg.d; ++k) {
            Rng rng(derive_seed(cfg.master_seed, std::uint64_t{5},
                                static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(n)));
            Eigen::MatrixXd F(n, cfg.m);
            for (Index j = 0; j < cfg.m; ++j)
                for (Index i = 0; i < n; ++i) F(i, j) = rng.normal();
            // Orthonormalize here: raw Gaussian factors would make the
            // side-info constructor print a replacement note per trial.
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(std::move(F));
            factors[static_cast<std::size_t>(k)] =
                qr.householderQ() * Eigen::MatrixXd::Identity(n, cfg.m);
        }
        const SideInfo Q = make_side_info(std::move(factors));

        const TensorTrain W = gaussian_tt(inner, ranks, shared_seed(1));
        const TensorTrain X0 = gaussian_tt(inner, ranks, shared_seed(2));
        const Observations obs =
            observe_through(Q, W, sample_uniform(outer, cell.samples, seed_of(3)));
        const Observations test =
            observe_through(Q, W, sample_uniform(outer, cell.samples, seed_of(4)));
        SolverConfig sc = cfg.solver;
        sc.ranks = ranks;
        sc.record_trace = false;
        return solve_side(obs, Q, sc, &X0, nullptr, &test).success;
    });
}

void save_phase_csv(const std::vector<PhaseCell>& cells, const std::string& axis_name,
                    const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << axis_name << ",samples,successes,trials,frequency,ref_d2,ref_d22\n";
    char buf[256];
    for (const PhaseCell& c : cells) {
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%d,%d,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(c.axis), static_cast<long long>(c.samples),
                      c.successes, c.trials, c.frequency, c.ref_d2, c.ref_d22);
        out << buf;
    }
    if (!out) throw Error("write failed: " + path);
}

namespace {

nlohmann::json solver_json(const SolverConfig& sc) {
    return {{"max_iters", sc.max_iters},
            {"success_tol", sc.success_tol},
            {"stall_tol", sc.stall_tol},
            {"stall_window", sc.stall_window},
            {"floor_residual", sc.floor_residual}};
}

constexpr const char* kSeedScheme =
    "trial seed = derive_seed(master, axis, samples, trial, purpose); "
    "purposes: 1 truth, 2 start, 3 training sample, 4 test sample; side runs "
    "draw truth/start with axis key 0 (shared across n) and factors with "
    "derive_seed(master, 5, mode, n)";

} // namespace

std::string phase_metadata_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["experiment"] = "phase_plot_orders";
    j["n"] = cfg.n;
    j["dims"] = cfg.dims;
    j["rank"] = cfg.rank;
    j["sample_grid"] = cfg.sample_grid; // empty = per-order default grid
    j["trials"] = cfg.trials;
    j["master_seed"] = cfg.master_seed;
    j["solver"] = solver_json(cfg.solver);
    j["threads"] = cfg.threads;
    j["test_set"] = "independent uniform sample of the same size, overlap allowed";
    j["seed_scheme"] = kSeedScheme;
    return j.dump(2);
}

std::string phase_metadata_json(const SidePhaseConfig& cfg) {
    nlohmann::json j;
    j["experiment"] = "phase_plot_side_information";
    j["ns"] = cfg.ns;
    j["m"] = cfg.m;
    j["d"] = cfg.d;
    j["rank"] = cfg.rank;
    j["sample_grid"] = cfg.sample_grid;
    j["trials"] = cfg.trials;
    j["master_seed"] = cfg.master_seed;
    j["solver"] = solver_json(cfg.solver);
    j["threads"] = cfg.threads;
    j["test_set"] = "independent uniform sample of the same size, overlap allowed";
    j["seed_scheme"] = kSeedScheme;
    return j.dump(2);
}

std::vector<ChiMedianRow> run_chi_median(Index r, Index k_max, Index samples,
                                         std::uint64_t seed) {
    require(r >= 1, "chi median: r must be positive");
    require(k_max >= 1, "chi median: k_max must be positive");
    require(samples >= 10000, "chi median: need at least 10^4 samples");

    std::vector<std::vector<double>> prods(
        static_cast<std::size_t>(k_max),
        std::vector<double>(static_cast<std::size_t>(samples)));
    std::vector<double> sums(static_cast<std::size_t>(k_max), 0.0);
    Rng rng(seed);
    for (Index s = 0; s < samples; ++s) {
        double p = 1.0;
        for (Index k = 0; k < k_max; ++k) {
            p *= rng.chi_squared(static_cast<int>(r));
            prods[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)] = p;
            sums[static_cast<std::size_t>(k)] += p;
        }
    }

    std::vector<ChiMedianRow> rows(static_cast<std::size_t>(k_max));
    for (Index k = 0; k < k_max; ++k) {
        auto& v = prods[static_cast<std::size_t>(k)];
        const std::size_t half = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + half, v.end());
        double med = v[half];
        if (v.size() % 2 == 0) {
            const double below = *std::max_element(v.begin(), v.begin() + half);
            med = 0.5 * (med + below);
        }
        ChiMedianRow& row = rows[static_cast<std::size_t>(k)];
        row.k = static_cast<int>(k + 1);
        row.median = med;
        row.mean = sums[static_cast<std::size_t>(k)] / static_cast<double>(samples);
        row.mean_reference = std::pow(static_cast<double>(r), static_cast<double>(k + 1));
    }
    return rows;
}

void save_chi_csv(const std::vector<ChiMedianRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << "k,median,mean,mean_reference\n";
    char buf[160];
    for (const ChiMedianRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.k, r.median, r.mean,
                      r.mean_reference);
        out << buf;
    }
    if (!out) throw Error("write failed: " + path);
}

std::string report_json(const TensorTrain& X, const SampleSet* omega, double beta) {
    nlohmann::json j = nlohmann::json::parse(to_json(coherence_report(X)));
    const Index max_n = *std::max_element(X.shape().begin(), X.shape().end());
    if (max_n >= 16 && beta > 1.0) {
        j["repetition_bound"] = repetition_bound(X.order(), max_n, beta);
        j["repetition_beta"] = beta;
    } else {
        j["repetition_bound"] = nullptr;
    }
    if (omega != nullptr) {
        const RipEstimate est = rip_estimate(X, *omega);
        j["rip"] = {{"epsilon", est.epsilon},
                    {"rho", est.rho},
                    {"tangent_dim", est.tangent_dim},
                    {"exact", est.exact},
                    {"draws", omega->draw_count()}};
    }
    return j.dump(2);
}

} // namespace ttc
