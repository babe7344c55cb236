#include "ttc/dense_tensor.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace ttc {

Index num_entries(const Shape& shape) {
    require(!shape.empty(), "shape must have at least one mode");
    Index n = 1;
    for (Index nk : shape) {
        require(nk >= 1, "mode sizes must be positive");
        n *= nk;
    }
    return n;
}

Index linear_offset(const Shape& shape, const MultiIndex& idx) {
    require(idx.size() == shape.size(), "multi-index order mismatch");
    Index off = 0;
    Index stride = 1;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        require(idx[k] >= 1 && idx[k] <= shape[k], "multi-index out of range");
        off += stride * (idx[k] - 1);
        stride *= shape[k];
    }
    return off;
}

MultiIndex multi_index_of(const Shape& shape, Index offset) {
    MultiIndex idx(shape.size());
    for (std::size_t k = 0; k < shape.size(); ++k) {
        idx[k] = offset % shape[k] + 1;
        offset /= shape[k];
    }
    return idx;
}

DenseTensor::DenseTensor(Shape shape)
    : shape_(std::move(shape)), data_(Eigen::VectorXd::Zero(num_entries(shape_))) {}

DenseTensor::DenseTensor(Shape shape, Eigen::VectorXd data) : shape_(std::move(shape)) {
    require(data.size() == num_entries(shape_), "data size does not match shape");
    data_ = std::move(data);
}

namespace {
std::pair<Index, Index> split_sizes(const Shape& shape, Index k) {
    require(k >= 0 && k <= static_cast<Index>(shape.size()), "split position out of range");
    Index rows = 1, cols = 1;
    for (Index j = 0; j < static_cast<Index>(shape.size()); ++j)
        (j < k ? rows : cols) *= shape[j];
    return {rows, cols};
}
} // namespace

Eigen::Map<const Eigen::MatrixXd> unfold(const DenseTensor& X, Index k) {
    auto [rows, cols] = split_sizes(X.shape(), k);
    return {X.data().data(), rows, cols};
}

Eigen::Map<Eigen::MatrixXd> unfold(DenseTensor& X, Index k) {
    auto [rows, cols] = split_sizes(X.shape(), k);
    return {X.data().data(), rows, cols};
}

DenseTensor tensorize(const Eigen::MatrixXd& M, const Shape& shape, Index k) {
    auto [rows, cols] = split_sizes(shape, k);
    require(M.rows() == rows && M.cols() == cols, "matrix does not match shape split");
    Eigen::VectorXd data = Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
    return DenseTensor(shape, std::move(data));
}

Eigen::MatrixXd flatten(const DenseTensor& X, Index k) {
    const Shape& shape = X.shape();
    const Index d = X.order();
    require(k >= 1 && k <= d, "flatten mode out of range");
    Index P = 1, Q = 1;
    for (Index j = 0; j < k - 1; ++j) P *= shape[j];
    for (Index j = k; j < d; ++j) Q *= shape[j];
    const Index nk = shape[k - 1];
    Eigen::MatrixXd out(nk, P * Q);
    const double* src = X.data().data();
    for (Index q = 0; q < Q; ++q)
        for (Index i = 0; i < nk; ++i)
            for (Index p = 0; p < P; ++p)
                out(i, p + P * q) = src[p + P * (i + nk * q)];
    return out;
}

DenseTensor mode_product(const DenseTensor& X, Index k, const Eigen::MatrixXd& M) {
    const Shape& shape = X.shape();
    const Index d = X.order();
    require(k >= 1 && k <= d, "mode out of range");
    const Index nk = shape[k - 1];
    require(M.cols() == nk, "matrix columns must match mode size");
    const Index m = M.rows();
    Index P = 1, Q = 1;
    for (Index j = 0; j < k - 1; ++j) P *= shape[j];
    for (Index j = k; j < d; ++j) Q *= shape[j];

    Shape out_shape = shape;
    out_shape[k - 1] = m;
    DenseTensor out(out_shape);
    // View the data as Q slabs of P x n_k (column-major); contract each slab.
    for (Index q = 0; q < Q; ++q) {
        Eigen::Map<const Eigen::MatrixXd> slab(X.data().data() + q * P * nk, P, nk);
        Eigen::Map<Eigen::MatrixXd> dst(out.data().data() + q * P * m, P, m);
        dst.noalias() = slab * M.transpose();
    }
    return out;
}

DenseTensor basis_tensor(const Shape& shape, const MultiIndex& idx) {
    DenseTensor E(shape);
    E.at_offset(linear_offset(shape, idx)) = 1.0;
    return E;
}

double inner(const DenseTensor& X, const DenseTensor& Y) {
    require(X.shape() == Y.shape(), "shape mismatch in inner product");
    return X.data().dot(Y.data());
}

double frob_norm(const DenseTensor& X) { return X.data().norm(); }

// --- Serialization ---------------------------------------------------------

void save_dense_text(const DenseTensor& X, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "cannot open " + path + " for writing");
    f << "ttc dense 1\n";
    for (std::size_t k = 0; k < X.shape().size(); ++k)
        f << X.shape()[k] << (k + 1 < X.shape().size() ? ' ' : '\n');
    char buf[40];
    for (Index i = 0; i < X.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", X.at_offset(i));
        f << buf << '\n';
    }
    require(f.good(), "write failed: " + path);
}

DenseTensor load_dense_text(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open " + path);
    std::string tag, kind;
    int version = 0;
    f >> tag >> kind >> version;
    require(f.good() && tag == "ttc" && kind == "dense" && version == 1,
            "not a ttc dense text file: " + path);
    std::string line;
    std::getline(f, line); // consume end of header line
    std::getline(f, line);
    Shape shape;
    {
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && line[pos] == ' ') ++pos;
            if (pos >= line.size()) break;
            std::size_t used = 0;
            shape.push_back(std::stoll(line.substr(pos), &used));
            pos += used;
        }
    }
    const Index n = num_entries(shape);
    Eigen::VectorXd data(n);
    for (Index i = 0; i < n; ++i) {
        f >> data[i];
        require(!f.fail(), "truncated dense text file: " + path);
    }
    return DenseTensor(shape, std::move(data));
}

namespace {
constexpr char kDenseMagic[8] = {'T', 'T', 'C', 'D', 'E', 'N', 'S', '1'};

void write_u64(std::ofstream& f, std::uint64_t v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint64_t read_u64(std::ifstream& f) {
    std::uint64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
} // namespace

void save_dense_binary(const DenseTensor& X, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open " + path + " for writing");
    f.write(kDenseMagic, sizeof kDenseMagic);
    write_u64(f, X.shape().size());
    for (Index nk : X.shape()) write_u64(f, static_cast<std::uint64_t>(nk));
    f.write(reinterpret_cast<const char*>(X.data().data()),
            static_cast<std::streamsize>(sizeof(double) * X.size()));
    require(f.good(), "write failed: " + path);
}

DenseTensor load_dense_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open " + path);
    char magic[8];
    f.read(magic, sizeof magic);
    require(f.good() && std::memcmp(magic, kDenseMagic, 8) == 0,
            "not a ttc dense binary file: " + path);
    const std::uint64_t d = read_u64(f);
    require(d >= 1 && d <= 64, "implausible tensor order in " + path);
    Shape shape(d);
    for (auto& nk : shape) nk = static_cast<Index>(read_u64(f));
    const Index n = num_entries(shape);
    Eigen::VectorXd data(n);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(sizeof(double) * n));
    require(f.good(), "truncated dense binary file: " + path);
    return DenseTensor(shape, std::move(data));
}

} // namespace ttc
