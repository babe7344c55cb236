#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ttc/common.hpp"

namespace ttc {

using Index = std::int64_t;
// Mode sizes n_1, ..., n_d.
using Shape = std::vector<Index>;
// 1-based entry address (i_1, ..., i_d), 1 <= i_k <= n_k.
using MultiIndex = std::vector<Index>;

Index num_entries(const Shape& shape);

// Storage offset of a 1-based multi-index under the first-index-fastest
// linearization: offset = (i_1-1) + n_1 (i_2-1) + n_1 n_2 (i_3-1) + ...
Index linear_offset(const Shape& shape, const MultiIndex& idx);

// Inverse of linear_offset (returns a 1-based multi-index).
MultiIndex multi_index_of(const Shape& shape, Index offset);

// Dense d-way array. Data is stored first-index-fastest, which makes every
// split unfolding a zero-copy column-major matrix view.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(Shape shape);
    DenseTensor(Shape shape, Eigen::VectorXd data);

    const Shape& shape() const { return shape_; }
    Index order() const { return static_cast<Index>(shape_.size()); }
    Index size() const { return data_.size(); }

    double operator()(const MultiIndex& idx) const {
        return data_[linear_offset(shape_, idx)];
    }
    double& operator()(const MultiIndex& idx) {
        return data_[linear_offset(shape_, idx)];
    }
    double at_offset(Index off) const { return data_[off]; }
    double& at_offset(Index off) { return data_[off]; }

    const Eigen::VectorXd& data() const { return data_; }
    Eigen::VectorXd& data() { return data_; }

private:
    Shape shape_;
    Eigen::VectorXd data_;
};

// Split unfolding X^<k>: rows indexed by (i_1..i_k), columns by (i_{k+1}..i_d),
// both first-index-fastest. k may be 0..d (degenerate row/column vector at the
// ends). Zero-copy views.
Eigen::Map<const Eigen::MatrixXd> unfold(const DenseTensor& X, Index k);
Eigen::Map<Eigen::MatrixXd> unfold(DenseTensor& X, Index k);

// Inverse of unfold: reinterpret a (prod_{j<=k} n_j) x (prod_{j>k} n_j) matrix
// as a tensor of the given shape.
DenseTensor tensorize(const Eigen::MatrixXd& M, const Shape& shape, Index k);

// Mode-k flattening X_(k): rows indexed by i_k alone, columns by the remaining
// indices (i_1..i_{k-1}, i_{k+1}..i_d) first-index-fastest. Requires a copy.
Eigen::MatrixXd flatten(const DenseTensor& X, Index k);

// Contract mode k with a matrix M (m x n_k): result has n_k replaced by m and
// flatten(result, k) = M * flatten(X, k).
DenseTensor mode_product(const DenseTensor& X, Index k, const Eigen::MatrixXd& M);

// Outer product of standard basis vectors: 1 at idx, 0 elsewhere.
DenseTensor basis_tensor(const Shape& shape, const MultiIndex& idx);

double inner(const DenseTensor& X, const DenseTensor& Y);
double frob_norm(const DenseTensor& X);

// --- Serialization ---------------------------------------------------------
// Text format:   line 1 "ttc dense 1"; line 2 the dims separated by spaces;
//                then one value per line (%.17g), first-index-fastest order.
// Binary format: magic "TTCDENS1", then little-endian u64 d, u64 dims[d],
//                f64 data[prod n] in storage order.
void save_dense_text(const DenseTensor& X, const std::string& path);
DenseTensor load_dense_text(const std::string& path);
void save_dense_binary(const DenseTensor& X, const std::string& path);
DenseTensor load_dense_binary(const std::string& path);

} // namespace ttc
