#pragma once

#include <Eigen/Dense>

#include "ttc/dense_tensor.hpp"
#include "ttc/tensor_train.hpp"

// Slow, dense reference implementations with no shared code paths with the
// production routines they are used to validate. Everything here scales
// exponentially in d or quadratically in prod(n): test-sized inputs only.
namespace ttc::oracle {

// Chained-core element by literal summation over all bond index tuples
// (O(r^(d-1)) work); shares no matrix algebra with tt_entry.
double naive_tt_entry(const TensorTrain& X, const MultiIndex& idx);

// Best rank-r approximation of an order-2 tensor via one truncated SVD of its
// matrix unfolding (the Eckart-Young optimum).
DenseTensor best_rank_approx_d2(const DenseTensor& X, Index r);

// Largest singular value of a dense matrix.
double dense_opnorm(const Eigen::MatrixXd& M);

// The orthogonal projector onto the tangent space of the fixed-rank manifold
// at X, assembled densely from SVDs of the unfoldings of the materialized
// tensor: P = sum_{k<d} (P_{<=k-1} - P_{<=k}) P_{>=k+1} + P_{<=d-1}, where the
// factors act on vec(Z) as Kronecker products with identity. Requires prod(n)
// <= 20000 (the result is prod(n)^2 in memory).
Eigen::MatrixXd dense_projector(const TensorTrain& X);

// Orthonormal basis of the same tangent space: the eigenvectors of
// dense_projector with eigenvalue 1. Verifies the spectrum is {0,1} and that
// the dimension equals sum_k r_{k-1} n_k r_k - sum_{k<d} r_k^2, and throws
// otherwise.
Eigen::MatrixXd dense_tangent_basis(const TensorTrain& X);

} // namespace ttc::oracle
