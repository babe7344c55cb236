#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ttc/rgd.hpp"
#include "ttc/sampling.hpp"
#include "ttc/side_info.hpp"
#include "ttc/tensor_train.hpp"

namespace ttc {

// Experiment driver for phase plots and studies. All randomness derives from
// one master seed through the documented scheme
//   derive_seed(master, axis value, sample count, trial index, purpose)
// with purpose codes 1 = ground truth, 2 = starting point, 3 = training
// sample, 4 = test sample; side-information factors use
//   derive_seed(master, 5, mode index, mode size)
// so they are shared across the sample-size cells of one grid. Identical
// config + master seed therefore reproduces every cell bit for bit, in any
// execution order.

// Phase plot over tensor order: cube shape n^d, uniform rank, one row of
// cells per d, columns = training sample sizes.
struct ExperimentConfig {
    Index n = 20;
    std::vector<Index> dims = {3, 4, 5};
    Index rank = 3;
    std::vector<Index> sample_grid; // shared |Omega| grid; empty = per-d auto
    int trials = 5;
    std::uint64_t master_seed = 1;
    SolverConfig solver;            // .ranks is filled per cell from `rank`
    int threads = 1;                // worker threads for the cell/trial pool
};

// Phase plot over full-grid size with fixed side information: reduced grid
// m^d, outer grids n^d for each n in `ns`; the sample grid is shared across n
// so frequency columns are directly comparable.
struct SidePhaseConfig {
    std::vector<Index> ns = {20, 40};
    Index m = 10;
    Index d = 3;
    Index rank = 2;
    std::vector<Index> sample_grid; // empty = auto from the reduced grid
    int trials = 5;
    std::uint64_t master_seed = 1;
    SolverConfig solver;
    int threads = 1;
};

// One cell of a phase plot. axis is the varying parameter (d for the order
// sweep, n for the side-information sweep). ref_d2 / ref_d22 are the
// reference sample counts d^2 r^2 n log(n) / 10 and d^2.2 r^2 n log(n) / 10
// for the cell's order (repeated per row for plotting convenience).
struct PhaseCell {
    Index axis = 0;
    Index samples = 0;
    int successes = 0;
    int trials = 0;
    double frequency = 0.0;
    double ref_d2 = 0.0;
    double ref_d22 = 0.0;
};

// Reference sample count c * r^2 n log(n) / 10 with c = d^power.
double reference_samples(Index d, Index n, Index rank, double power);

// Default |Omega| grids: brackets of the manifold dimension (below it nothing
// can work) up to multiples of the d^2 reference curve (where everything
// should).
std::vector<Index> default_sample_grid(Index d, Index n, Index rank);
std::vector<Index> default_side_sample_grid(Index d, Index m, Index rank);

std::vector<PhaseCell> run_phase_plot(const ExperimentConfig& cfg);
std::vector<PhaseCell> run_phase_plot_side(const SidePhaseConfig& cfg);

// CSV: "<axis_name>,samples,successes,trials,frequency,ref_d2,ref_d22".
void save_phase_csv(const std::vector<PhaseCell>& cells, const std::string& axis_name,
                    const std::string& path);

// Config echo + seed-derivation description, for result provenance.
std::string phase_metadata_json(const ExperimentConfig& cfg);
std::string phase_metadata_json(const SidePhaseConfig& cfg);

// Median / mean of the product of k iid chi-squared(r) variables, k = 1..k_max,
// over `samples` Monte Carlo draws, against the exact mean r^k. The median
// falls ever farther below the mean as k grows, which is the concentration
// effect the sampling bounds lean on.
struct ChiMedianRow {
    int k = 0;
    double median = 0.0;
    double mean = 0.0;
    double mean_reference = 0.0;
};
std::vector<ChiMedianRow> run_chi_median(Index r, Index k_max, Index samples,
                                         std::uint64_t seed);
// CSV: "k,median,mean,mean_reference".
void save_chi_csv(const std::vector<ChiMedianRow>& rows, const std::string& path);

// Diagnostic report for a tensor: shape, ranks, interface/core coherences,
// the two projection-coherence bounds, the repetition-bound value (largest
// mode size >= 16, beta as given; null otherwise), and, when a sample is
// supplied, the restricted-isometry estimate on the tangent space.
std::string report_json(const TensorTrain& X, const SampleSet* omega, double beta);

} // namespace ttc
