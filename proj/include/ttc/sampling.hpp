#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ttc/dense_tensor.hpp"
#include "ttc/tensor_train.hpp"

namespace ttc {

// Multiset of entry positions drawn with replacement. Draws are kept in draw
// order (offsets under the first-index-fastest linearization) together with a
// deduplicated view. rho = draws / prod(n) may exceed 1.
struct SampleSet {
    Shape shape;
    std::vector<Index> draws;   // linear offsets, one per draw
    std::vector<Index> uniq;    // unique offsets, ascending
    std::vector<double> mult;   // multiplicity per unique offset
    double rho = 0.0;

    Index draw_count() const { return static_cast<Index>(draws.size()); }
    Index unique_count() const { return static_cast<Index>(uniq.size()); }
};

// Sparse tensor sum(values[j] * E_{offsets[j]}); the form taken by sampling
// operators and accepted by the tangent-space projector.
struct SparseValues {
    Shape shape;
    std::vector<Index> offsets; // unique linear offsets
    Eigen::VectorXd values;
};

// count iid draws from the uniform distribution on the entry grid,
// reproducible from the seed. count >= 1.
SampleSet sample_uniform(const Shape& shape, Index count, std::uint64_t seed);

// Build a SampleSet from explicit (possibly repeated) 1-based multi-indices.
SampleSet sample_set_from_indices(const Shape& shape,
                                  const std::vector<MultiIndex>& indices);

Index max_multiplicity(const SampleSet& omega);

// Entry values X(omega) for each unique offset, in uniq order.
Eigen::VectorXd evaluate_at(const TensorTrain& X, const SampleSet& omega);
Eigen::VectorXd evaluate_at(const DenseTensor& X, const SampleSet& omega);

// Generalized entries through per-mode maps: offsets decode on omega.shape
// (rows of the maps) while X lives on the maps' column shape; value t chains
// the core slices weighted by row i_k of mode_maps[k]. With identity maps
// this reduces to evaluate_at exactly.
Eigen::VectorXd evaluate_at_mapped(const TensorTrain& X, const SampleSet& omega,
                                   const std::vector<Eigen::MatrixXd>& mode_maps);

// The sampling operator R_Omega X = sum_{draws} X(omega) E_omega
// = sum_{unique} mult * X(omega) E_omega. Self-adjoint and positive
// semidefinite on the ambient space.
SparseValues apply_sampling(const TensorTrain& X, const SampleSet& omega);
SparseValues apply_sampling(const DenseTensor& X, const SampleSet& omega);

// Adjoint of the per-draw evaluation map: given one coefficient per unique
// offset, the sparse tensor sum coeffs[j] E_{uniq[j]}.
SparseValues adjoint_from_unique(const SampleSet& omega, const Eigen::VectorXd& coeffs);

DenseTensor densify(const SparseValues& s);

// ||sum values E||_F over a sparse tensor.
double sparse_norm(const SparseValues& s);

// Principal branch of the Lambert W function on [0, inf):
// W(x) e^{W(x)} = x, via Halley iteration to 1e-14 relative residual.
double lambert_w(double x);

// High-probability ceiling for the maximum multiplicity of uniform-with-
// replacement sampling on a d-way cube of side n: d beta log(n) / W(d),
// valid with probability at least 1 - n^{d(1-beta)} for n >= 16, beta > 1.
double repetition_bound(Index d, Index n, double beta);

// Entry positions with observed values: the draws of `set` aligned with
// `values` (one value per draw; repeated draws carry the first value seen).
struct Observations {
    SampleSet set;
    Eigen::VectorXd values;        // per draw
    Eigen::VectorXd unique_values; // per unique offset, uniq order
};

Observations observe(const TensorTrain& X, const SampleSet& omega);
Observations observe(const DenseTensor& X, const SampleSet& omega);
Observations observations_from(SampleSet set, Eigen::VectorXd per_draw_values);

// CSV: header "i1,...,id,value", one draw per row, 1-based indices.
// JSON: {"shape": [...], "indices": [[...],...], "values": [...]}.
void save_observations_csv(const Observations& obs, const std::string& path);
Observations load_observations_csv(const std::string& path, const Shape& shape);
void save_observations_json(const Observations& obs, const std::string& path);
Observations load_observations_json(const std::string& path);

} // namespace ttc
