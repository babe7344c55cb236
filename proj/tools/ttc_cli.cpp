// Command-line front end: completion solves, phase plots, coherence/RIP
// reports, the chi-squared-product study, and random instance generation.
// Every subcommand accepts --config <json> whose keys mirror the long flag
// names; explicit flags override config-file values. Errors exit nonzero with
// a one-line JSON object on stderr.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ttc/coherence.hpp"
#include "ttc/harness.hpp"
#include "ttc/rgd.hpp"
#include "ttc/rng.hpp"
#include "ttc/sampling.hpp"
#include "ttc/side_info.hpp"
#include "ttc/tensor_train.hpp"

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    json j;
    in >> j;
    if (!j.is_object()) throw std::runtime_error("config must be a JSON object");
    return j;
}

// Seed struct fields from config keys before CLI11 applies flag overrides.
template <typename T>
void from_config(const json& cfg, const char* key, T& value) {
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

std::string find_config_path(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") return argv[i + 1];
    return "";
}

ttc::TensorTrain load_tt_any(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open tensor file: " + path);
    char magic[8] = {};
    in.read(magic, 8);
    in.close();
    if (std::string(magic, 8) == "TTCTT__1") return ttc::load_tt_binary(path);
    return ttc::load_tt_text(path);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

struct GenerateSpec {
    std::vector<ttc::Index> shape;
    std::vector<ttc::Index> ranks;
    std::uint64_t seed = 1;
};

ttc::TensorTrain make_or_load(const std::string& tensor_path, const GenerateSpec& gen) {
    if (!tensor_path.empty()) return load_tt_any(tensor_path);
    if (gen.shape.empty() || gen.ranks.empty())
        throw std::runtime_error("provide --tensor, or --shape and --ranks to generate");
    return ttc::gaussian_tt(gen.shape, gen.ranks, gen.seed);
}

void add_generate_flags(CLI::App* cmd, const json& cfgj, GenerateSpec& gen) {
    from_config(cfgj, "shape", gen.shape);
    from_config(cfgj, "ranks", gen.ranks);
    from_config(cfgj, "seed", gen.seed);
    cmd->add_option("--shape", gen.shape, "mode sizes n_1..n_d");
    cmd->add_option("--ranks", gen.ranks, "TT-ranks r_1..r_{d-1}");
    cmd->add_option("--seed", gen.seed, "generator seed");
}

json solve_summary(const ttc::SolveResult& res) {
    const char* status = "ran_all_iterations";
    switch (res.status) {
        case ttc::SolveStatus::stalled: status = "stalled"; break;
        case ttc::SolveStatus::reached_floor: status = "reached_floor"; break;
        case ttc::SolveStatus::zero_gradient: status = "zero_gradient"; break;
        default: break;
    }
    json j;
    j["success"] = res.success;
    j["status"] = status;
    j["iterations"] = res.iterations;
    j["final_residual"] = res.final_residual;
    if (std::isfinite(res.test_error)) j["test_error"] = res.test_error;
    j["ranks"] = res.X.ranks();
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensor-train completion toolkit"};
    app.require_subcommand(1);
    std::string config_path;

    try {
        config_path = find_config_path(argc, argv);
        const json cfgj = load_config(config_path);

        // ---- complete ------------------------------------------------------
        auto* complete = app.add_subcommand("complete", "run a completion solve");
        complete->add_option("--config", config_path, "JSON config file");
        std::string obs_path, test_path, truth_path, trace_path, save_x;
        GenerateSpec cgen;
        std::vector<ttc::Index> cshape;
        ttc::SolverConfig scfg;
        ttc::Index csamples = 0;
        std::uint64_t sample_seed = 7;
        std::uint64_t start_seed = 0;
        from_config(cfgj, "obs", obs_path);
        from_config(cfgj, "test", test_path);
        from_config(cfgj, "truth", truth_path);
        from_config(cfgj, "trace", trace_path);
        from_config(cfgj, "save-x", save_x);
        from_config(cfgj, "obs-shape", cshape);
        from_config(cfgj, "solve-ranks", scfg.ranks);
        from_config(cfgj, "max-iters", scfg.max_iters);
        from_config(cfgj, "success-tol", scfg.success_tol);
        from_config(cfgj, "samples", csamples);
        from_config(cfgj, "sample-seed", sample_seed);
        from_config(cfgj, "start-seed", start_seed);
        complete->add_option("--obs", obs_path,
                             "observations file (.csv needs --obs-shape; .json is self-describing)");
        complete->add_option("--obs-shape", cshape, "shape for CSV observation files");
        complete->add_option("--test", test_path, "test observations file (same format)");
        complete->add_option("--truth", truth_path, "ground-truth tensor file (for error traces)");
        complete->add_option("--trace", trace_path, "write per-iteration CSV here");
        complete->add_option("--save-x", save_x, "write the final iterate here (text format)");
        complete->add_option("--solve-ranks", scfg.ranks, "solver TT-ranks r_1..r_{d-1}")
            ->required();
        complete->add_option("--max-iters", scfg.max_iters, "iteration cap");
        complete->add_option("--success-tol", scfg.success_tol, "relative-error success threshold");
        complete->add_option("--samples", csamples,
                             "if no --obs: draw this many observations of a generated tensor");
        complete->add_option("--sample-seed", sample_seed, "seed for the drawn sample");
        complete->add_option("--start-seed", start_seed, "seed of the random starting point");
        add_generate_flags(complete, cfgj, cgen);

        complete->callback([&]() {
            std::optional<ttc::TensorTrain> truth;
            if (!truth_path.empty()) truth = load_tt_any(truth_path);
            ttc::Observations obs;
            if (!obs_path.empty()) {
                if (obs_path.size() > 5 && obs_path.substr(obs_path.size() - 5) == ".json")
                    obs = ttc::load_observations_json(obs_path);
                else
                    obs = ttc::load_observations_csv(obs_path, cshape);
            } else {
                if (csamples <= 0)
                    throw std::runtime_error("provide --obs or --samples with generator flags");
                if (!truth) truth = make_or_load("", cgen);
                obs = ttc::observe(*truth, ttc::sample_uniform(truth->shape(), csamples,
                                                               sample_seed));
            }
            std::optional<ttc::Observations> test;
            if (!test_path.empty()) {
                if (test_path.size() > 5 && test_path.substr(test_path.size() - 5) == ".json")
                    test = ttc::load_observations_json(test_path);
                else
                    test = ttc::load_observations_csv(test_path, cshape);
            } else if (obs_path.empty() && truth) {
                test = ttc::observe(*truth,
                                    ttc::sample_uniform(truth->shape(), obs.set.draw_count(),
                                                        ttc::derive_seed(sample_seed)));
            }
            scfg.seed = start_seed;
            const ttc::SolveResult res = ttc::solve_completion(
                obs, scfg, nullptr, truth ? &*truth : nullptr, test ? &*test : nullptr);
            if (!trace_path.empty()) ttc::save_trace_csv(res.trace, trace_path);
            if (!save_x.empty()) ttc::save_tt_text(res.X, save_x);
            std::cout << solve_summary(res).dump(2) << "\n";
        });

        // ---- phase-plot ------------------------------------------------------
        auto* phase = app.add_subcommand("phase-plot", "success-frequency grid over tensor order");
        phase->add_option("--config", config_path, "JSON config file");
        ttc::ExperimentConfig pcfg;
        std::string phase_out = "phase.csv", phase_meta;
        from_config(cfgj, "n", pcfg.n);
        from_config(cfgj, "dims", pcfg.dims);
        from_config(cfgj, "rank", pcfg.rank);
        from_config(cfgj, "samples-grid", pcfg.sample_grid);
        from_config(cfgj, "trials", pcfg.trials);
        from_config(cfgj, "master-seed", pcfg.master_seed);
        from_config(cfgj, "threads", pcfg.threads);
        from_config(cfgj, "max-iters", pcfg.solver.max_iters);
        from_config(cfgj, "success-tol", pcfg.solver.success_tol);
        from_config(cfgj, "out", phase_out);
        from_config(cfgj, "meta", phase_meta);
        phase->add_option("--n", pcfg.n, "mode size of the cube");
        phase->add_option("--dims", pcfg.dims, "tensor orders to sweep");
        phase->add_option("--rank", pcfg.rank, "uniform TT-rank");
        phase->add_option("--samples-grid", pcfg.sample_grid,
                          "shared |Omega| grid (default: per-order auto grid)");
        phase->add_option("--trials", pcfg.trials, "trials per cell");
        phase->add_option("--master-seed", pcfg.master_seed, "master seed");
        phase->add_option("--threads", pcfg.threads, "worker threads");
        phase->add_option("--max-iters", pcfg.solver.max_iters, "iteration cap per trial");
        phase->add_option("--success-tol", pcfg.solver.success_tol, "success threshold");
        phase->add_option("--out", phase_out, "output CSV path");
        phase->add_option("--meta", phase_meta, "metadata JSON path (default: <out>.meta.json)");
        phase->callback([&]() {
            const auto cells = ttc::run_phase_plot(pcfg);
            ttc::save_phase_csv(cells, "d", phase_out);
            const std::string meta =
                phase_meta.empty() ? phase_out + ".meta.json" : phase_meta;
            write_text(meta, ttc::phase_metadata_json(pcfg));
            std::cout << "wrote " << cells.size() << " cells to " << phase_out << "\n";
        });

        // ---- phase-plot-si ---------------------------------------------------
        auto* phase_si = app.add_subcommand(
            "phase-plot-si", "success-frequency grid over full-grid size, with side information");
        phase_si->add_option("--config", config_path, "JSON config file");
        ttc::SidePhaseConfig sicfg;
        std::string si_out = "phase_si.csv", si_meta;
        from_config(cfgj, "ns", sicfg.ns);
        from_config(cfgj, "m", sicfg.m);
        from_config(cfgj, "d", sicfg.d);
        from_config(cfgj, "rank", sicfg.rank);
        from_config(cfgj, "samples-grid", sicfg.sample_grid);
        from_config(cfgj, "trials", sicfg.trials);
        from_config(cfgj, "master-seed", sicfg.master_seed);
        from_config(cfgj, "threads", sicfg.threads);
        from_config(cfgj, "max-iters", sicfg.solver.max_iters);
        from_config(cfgj, "success-tol", sicfg.solver.success_tol);
        from_config(cfgj, "out", si_out);
        from_config(cfgj, "meta", si_meta);
        phase_si->add_option("--ns", sicfg.ns, "full-grid mode sizes to sweep");
        phase_si->add_option("--m", sicfg.m, "reduced-grid mode size");
        phase_si->add_option("--d", sicfg.d, "tensor order");
        phase_si->add_option("--rank", sicfg.rank, "uniform TT-rank");
        phase_si->add_option("--samples-grid", sicfg.sample_grid,
                             "shared |Omega| grid (default: auto from the reduced grid)");
        phase_si->add_option("--trials", sicfg.trials, "trials per cell");
        phase_si->add_option("--master-seed", sicfg.master_seed, "master seed");
        phase_si->add_option("--threads", sicfg.threads, "worker threads");
        phase_si->add_option("--max-iters", sicfg.solver.max_iters, "iteration cap per trial");
        phase_si->add_option("--success-tol", sicfg.solver.success_tol, "success threshold");
        phase_si->add_option("--out", si_out, "output CSV path");
        phase_si->add_option("--meta", si_meta, "metadata JSON path (default: <out>.meta.json)");
        phase_si->callback([&]() {
            const auto cells = ttc::run_phase_plot_side(sicfg);
            ttc::save_phase_csv(cells, "n", si_out);
            const std::string meta = si_meta.empty() ? si_out + ".meta.json" : si_meta;
            write_text(meta, ttc::phase_metadata_json(sicfg));
            std::cout << "wrote " << cells.size() << " cells to " << si_out << "\n";
        });

        // ---- coherence -------------------------------------------------------
        auto* coh = app.add_subcommand("coherence", "coherence report for a tensor");
        coh->add_option("--config", config_path, "JSON config file");
        std::string coh_tensor, coh_out;
        GenerateSpec coh_gen;
        double coh_beta = 2.0;
        from_config(cfgj, "tensor", coh_tensor);
        from_config(cfgj, "out", coh_out);
        from_config(cfgj, "beta", coh_beta);
        coh->add_option("--tensor", coh_tensor, "tensor file (text or binary)");
        coh->add_option("--out", coh_out, "write JSON here (default: stdout)");
        coh->add_option("--beta", coh_beta, "confidence exponent for the repetition bound");
        add_generate_flags(coh, cfgj, coh_gen);
        coh->callback([&]() {
            const ttc::TensorTrain X = make_or_load(coh_tensor, coh_gen);
            write_text(coh_out, ttc::report_json(X, nullptr, coh_beta));
        });

        // ---- rip-estimate ----------------------------------------------------
        auto* rip = app.add_subcommand(
            "rip-estimate", "restricted-isometry constant of a sample on a tangent space");
        rip->add_option("--config", config_path, "JSON config file");
        std::string rip_tensor, rip_out;
        GenerateSpec rip_gen;
        ttc::Index rip_samples = 0;
        double rip_rho = 0.0, rip_beta = 2.0;
        std::uint64_t rip_seed = 7;
        from_config(cfgj, "tensor", rip_tensor);
        from_config(cfgj, "out", rip_out);
        from_config(cfgj, "samples", rip_samples);
        from_config(cfgj, "rho", rip_rho);
        from_config(cfgj, "sample-seed", rip_seed);
        from_config(cfgj, "beta", rip_beta);
        rip->add_option("--tensor", rip_tensor, "tensor file (text or binary)");
        rip->add_option("--out", rip_out, "write JSON here (default: stdout)");
        rip->add_option("--samples", rip_samples, "number of uniform draws");
        rip->add_option("--rho", rip_rho, "draws as a fraction of the grid (alternative)");
        rip->add_option("--sample-seed", rip_seed, "seed for the drawn sample");
        rip->add_option("--beta", rip_beta, "confidence exponent for the repetition bound");
        add_generate_flags(rip, cfgj, rip_gen);
        rip->callback([&]() {
            const ttc::TensorTrain X = make_or_load(rip_tensor, rip_gen);
            ttc::Index count = rip_samples;
            if (count <= 0 && rip_rho > 0)
                count = static_cast<ttc::Index>(rip_rho *
                                                static_cast<double>(ttc::num_entries(X.shape())));
            if (count <= 0)
                throw std::runtime_error("provide --samples or --rho");
            const ttc::SampleSet omega = ttc::sample_uniform(X.shape(), count, rip_seed);
            write_text(rip_out, ttc::report_json(X, &omega, rip_beta));
        });

        // ---- chi-median ------------------------------------------------------
        auto* chi = app.add_subcommand(
            "chi-median", "median and mean of products of chi-squared variables");
        chi->add_option("--config", config_path, "JSON config file");
        ttc::Index chi_r = 5, chi_kmax = 8, chi_samples = 100000;
        std::uint64_t chi_seed = 1;
        std::string chi_out;
        from_config(cfgj, "r", chi_r);
        from_config(cfgj, "k-max", chi_kmax);
        from_config(cfgj, "samples", chi_samples);
        from_config(cfgj, "seed", chi_seed);
        from_config(cfgj, "out", chi_out);
        chi->add_option("--r", chi_r, "degrees of freedom per factor");
        chi->add_option("--k-max", chi_kmax, "longest product");
        chi->add_option("--samples", chi_samples, "Monte Carlo draws (>= 10^4)");
        chi->add_option("--seed", chi_seed, "generator seed");
        chi->add_option("--out", chi_out, "output CSV path (default: stdout as JSON)");
        chi->callback([&]() {
            const auto rows = ttc::run_chi_median(chi_r, chi_kmax, chi_samples, chi_seed);
            if (!chi_out.empty()) {
                ttc::save_chi_csv(rows, chi_out);
                std::cout << "wrote " << rows.size() << " rows to " << chi_out << "\n";
            } else {
                json j = json::array();
                for (const auto& row : rows)
                    j.push_back({{"k", row.k},
                                 {"median", row.median},
                                 {"mean", row.mean},
                                 {"mean_reference", row.mean_reference}});
                std::cout << j.dump(2) << "\n";
            }
        });

        // ---- generate --------------------------------------------------------
        auto* gen = app.add_subcommand("generate", "write a random tensor train (and a sample)");
        gen->add_option("--config", config_path, "JSON config file");
        GenerateSpec ggen;
        std::string gen_out = "tensor.tt", gen_obs;
        bool gen_binary = false;
        ttc::Index gen_samples = 0;
        std::uint64_t gen_sample_seed = 7;
        from_config(cfgj, "out", gen_out);
        from_config(cfgj, "binary", gen_binary);
        from_config(cfgj, "samples", gen_samples);
        from_config(cfgj, "sample-seed", gen_sample_seed);
        from_config(cfgj, "obs-out", gen_obs);
        gen->add_option("--out", gen_out, "tensor output path");
        gen->add_flag("--binary", gen_binary, "binary tensor format");
        gen->add_option("--samples", gen_samples, "also draw this many observations");
        gen->add_option("--sample-seed", gen_sample_seed, "seed for the drawn sample");
        gen->add_option("--obs-out", gen_obs,
                        "observations output path (.json or .csv; needs --samples)");
        add_generate_flags(gen, cfgj, ggen);
        gen->callback([&]() {
            const ttc::TensorTrain X = make_or_load("", ggen);
            if (gen_binary)
                ttc::save_tt_binary(X, gen_out);
            else
                ttc::save_tt_text(X, gen_out);
            std::cout << "wrote tensor to " << gen_out << "\n";
            if (gen_samples > 0 && !gen_obs.empty()) {
                const ttc::Observations obs =
                    ttc::observe(X, ttc::sample_uniform(X.shape(), gen_samples,
                                                        gen_sample_seed));
                if (gen_obs.size() > 5 && gen_obs.substr(gen_obs.size() - 5) == ".json")
                    ttc::save_observations_json(obs, gen_obs);
                else
                    ttc::save_observations_csv(obs, gen_obs);
                std::cout << "wrote " << obs.set.draw_count() << " observations to "
                          << gen_obs << "\n";
            }
        });

        app.parse(argc, argv);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << "\n";
        const int code = e.get_exit_code();
        return code == 0 ? 1 : code;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << "\n";
        return 1;
    }
}
