#include "ttc/tensor_train.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "ttc/rng.hpp"

namespace ttc {

namespace {

constexpr double kRankFloor = 1e-14; // relative singular value cutoff
constexpr Index kDenseGuard = 20'000'000;
constexpr Index kInterfaceGuard = 10'000'000;

// Contract a transform into the left bond: new slice_i = T * slice_i.
TTCore absorb_left(const TTCore& c, const Eigen::MatrixXd& T) {
    TTCore out(T.rows(), c.n, c.r_right);
    for (Index i = 0; i < c.n; ++i) out.slice(i).noalias() = T * c.slice(i);
    return out;
}

// Contract a transform into the right bond: new left unfolding = m * T.
TTCore absorb_right(const TTCore& c, const Eigen::MatrixXd& T) {
    TTCore out(c.r_left, c.n, T.cols());
    out.m.noalias() = c.m * T;
    return out;
}

void check_full_rank(const Eigen::MatrixXd& R, Index want) {
    // R is the triangular factor of a thin QR; a collapsed diagonal entry
    // (or too few rows) means the bond rank is not minimal.
    require(R.rows() >= want, "rank deficiency: representation is not minimal");
    double dmax = 0.0;
    for (Index i = 0; i < want; ++i) dmax = std::max(dmax, std::abs(R(i, i)));
    for (Index i = 0; i < want; ++i)
        require(std::abs(R(i, i)) > kRankFloor * dmax,
                "rank deficiency: representation is not minimal");
}

// Make core j left-orthogonal, pushing the triangular factor into core j+1.
void left_orth_step(std::vector<TTCore>& cores, Index j, bool check) {
    TTCore& c = cores[j];
    const Index t = std::min<Index>(c.m.rows(), c.m.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(c.m);
    Eigen::MatrixXd R = qr.matrixQR().topRows(t).triangularView<Eigen::Upper>();
    if (check) check_full_rank(R, c.m.cols());
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(c.m.rows(), t);
    cores[j + 1] = absorb_left(cores[j + 1], R);
    c.m = std::move(Q);
    c.r_right = t;
}

// Make core j right-orthogonal, pushing the triangular factor into core j-1.
void right_orth_step(std::vector<TTCore>& cores, Index j, bool check) {
    TTCore& c = cores[j];
    Eigen::MatrixXd A = c.right_unfold().transpose(); // (n r_right) x r_left
    const Index t = std::min<Index>(A.rows(), A.cols());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd R = qr.matrixQR().topRows(t).triangularView<Eigen::Upper>();
    if (check) check_full_rank(R, A.cols());
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), t);
    // right_unfold(new core) = Q^T, left bond becomes t.
    TTCore nc(t, c.n, c.r_right);
    Eigen::Map<Eigen::MatrixXd>(nc.m.data(), t, c.n * c.r_right) = Q.transpose();
    cores[j - 1] = absorb_right(cores[j - 1], R.transpose());
    c = std::move(nc);
}

std::vector<TTCore> orthogonalize_impl(const TensorTrain& X, Index k, bool check) {
    const Index d = X.order();
    require(k >= 1 && k <= d, "orthogonalization position out of range");
    std::vector<TTCore> cores = X.cores();
    for (Index j = 0; j + 1 < k; ++j) left_orth_step(cores, j, check);
    for (Index j = d - 1; j >= k; --j) right_orth_step(cores, j, check);
    return cores;
}

} // namespace

TensorTrain::TensorTrain(Shape shape, std::vector<TTCore> cores)
    : shape_(std::move(shape)), cores_(std::move(cores)) {
    require(!shape_.empty() && shape_.size() == cores_.size(),
            "core count must match tensor order");
    require(cores_.front().r_left == 1 && cores_.back().r_right == 1,
            "boundary bond ranks must be 1");
    for (std::size_t k = 0; k < cores_.size(); ++k) {
        require(cores_[k].n == shape_[k], "core mode size mismatch");
        if (k + 1 < cores_.size())
            require(cores_[k].r_right == cores_[k + 1].r_left, "bond rank mismatch");
    }
}

RankTuple TensorTrain::ranks() const {
    RankTuple r(order() + 1, 1);
    for (Index k = 0; k < order(); ++k) r[k + 1] = cores_[k].r_right;
    return r;
}

RankTuple max_ranks(const Shape& shape) {
    const Index d = static_cast<Index>(shape.size());
    RankTuple r(d + 1, 1);
    Index left = 1;
    std::vector<Index> right(d + 1, 1);
    for (Index k = d - 1; k >= 0; --k) right[k] = right[k + 1] * shape[k];
    for (Index k = 1; k < d; ++k) {
        left *= shape[k - 1];
        r[k] = std::min(left, right[k]);
    }
    return r;
}

RankTuple normalize_ranks(const Shape& shape, const std::vector<Index>& r) {
    const Index d = static_cast<Index>(shape.size());
    RankTuple full;
    if (static_cast<Index>(r.size()) == d - 1) {
        full.push_back(1);
        full.insert(full.end(), r.begin(), r.end());
        full.push_back(1);
    } else if (static_cast<Index>(r.size()) == d + 1) {
        full = r;
    } else {
        throw Error("rank tuple must have d-1 or d+1 entries");
    }
    require(full.front() == 1 && full.back() == 1, "boundary bond ranks must be 1");
    const RankTuple bound = max_ranks(shape);
    for (Index k = 0; k <= d; ++k) {
        require(full[k] >= 1, "bond ranks must be positive");
        require(full[k] <= bound[k], "bond rank exceeds the unfolding bound");
    }
    return full;
}

double tt_entry(const TensorTrain& X, const MultiIndex& idx) {
    require(idx.size() == X.shape().size(), "multi-index order mismatch");
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Ones(1);
    for (Index k = 0; k < X.order(); ++k) {
        const Index i = idx[k] - 1;
        require(i >= 0 && i < X.shape()[k], "multi-index out of range");
        v = v * X.core(k).slice(i);
    }
    return v(0);
}

DenseTensor to_dense(const TensorTrain& X) {
    const Index total = num_entries(X.shape());
    require(total <= kDenseGuard, "to_dense guard: tensor too large to materialize");
    // Expand interfaces left to right: B_k is (n_1...n_k) x r_k.
    Eigen::MatrixXd B = Eigen::MatrixXd::Ones(1, 1);
    for (Index k = 0; k < X.order(); ++k) {
        const TTCore& c = X.core(k);
        Eigen::MatrixXd next(B.rows() * c.n, c.r_right);
        for (Index i = 0; i < c.n; ++i)
            next.middleRows(i * B.rows(), B.rows()).noalias() = B * c.slice(i);
        B = std::move(next);
    }
    return DenseTensor(X.shape(), Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(B.data(), total)));
}

double inner(const TensorTrain& X, const TensorTrain& Y) {
    require(X.shape() == Y.shape(), "shape mismatch in inner product");
    Eigen::MatrixXd M = Eigen::MatrixXd::Ones(1, 1);
    for (Index k = 0; k < X.order(); ++k) {
        const TTCore& cx = X.core(k);
        const TTCore& cy = Y.core(k);
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(cx.r_right, cy.r_right);
        for (Index i = 0; i < cx.n; ++i)
            next.noalias() += cx.slice(i).transpose() * M * cy.slice(i);
        M = std::move(next);
    }
    return M(0, 0);
}

double norm(const TensorTrain& X) {
    auto cores = orthogonalize_impl(X, 1, false);
    return cores[0].m.norm();
}

TensorTrain tt_axpy(double a, const TensorTrain& X, double b, const TensorTrain& Y) {
    require(X.shape() == Y.shape(), "shape mismatch in tt_axpy");
    const Index d = X.order();
    if (d == 1) {
        TTCore c(1, X.shape()[0], 1);
        c.m = a * X.core(0).m + b * Y.core(0).m;
        return TensorTrain(X.shape(), {c});
    }
    std::vector<TTCore> cores;
    cores.reserve(d);
    for (Index k = 0; k < d; ++k) {
        const TTCore& cx = X.core(k);
        const TTCore& cy = Y.core(k);
        if (k == 0) {
            TTCore c(1, cx.n, cx.r_right + cy.r_right);
            for (Index i = 0; i < cx.n; ++i) {
                c.slice(i).leftCols(cx.r_right) = a * cx.slice(i);
                c.slice(i).rightCols(cy.r_right) = b * cy.slice(i);
            }
            cores.push_back(std::move(c));
        } else if (k == d - 1) {
            TTCore c(cx.r_left + cy.r_left, cx.n, 1);
            for (Index i = 0; i < cx.n; ++i) {
                c.slice(i).topRows(cx.r_left) = cx.slice(i);
                c.slice(i).bottomRows(cy.r_left) = cy.slice(i);
            }
            cores.push_back(std::move(c));
        } else {
            TTCore c(cx.r_left + cy.r_left, cx.n, cx.r_right + cy.r_right);
            for (Index i = 0; i < cx.n; ++i) {
                c.slice(i).topLeftCorner(cx.r_left, cx.r_right) = cx.slice(i);
                c.slice(i).bottomRightCorner(cy.r_left, cy.r_right) = cy.slice(i);
            }
            cores.push_back(std::move(c));
        }
    }
    return TensorTrain(X.shape(), std::move(cores));
}

double diff_norm(const TensorTrain& X, const TensorTrain& Y) {
    return norm(tt_axpy(1.0, X, -1.0, Y));
}

TensorTrain tt_svd(const DenseTensor& X, const std::vector<Index>& r) {
    const Shape& shape = X.shape();
    const Index d = X.order();
    const RankTuple req = normalize_ranks(shape, r);
    std::vector<TTCore> cores;
    cores.reserve(d);

    Index r_prev = 1;
    Index tail = num_entries(shape);
    Eigen::MatrixXd M = unfold(X, 1); // n_1 x (n_2...n_d)
    for (Index k = 0; k < d - 1; ++k) {
        tail /= shape[k];
        // M is (r_prev * n_k) x tail here.
        Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        Index avail = sv.size();
        while (avail > 1 && sv(avail - 1) <= kRankFloor * sv(0)) --avail;
        const Index rk = std::min(req[k + 1], avail);
        TTCore c(r_prev, shape[k], rk);
        c.m = svd.matrixU().leftCols(rk);
        cores.push_back(std::move(c));
        Eigen::MatrixXd carry =
            sv.head(rk).asDiagonal() * svd.matrixV().leftCols(rk).transpose();
        // Reshape (rk x tail) into (rk * n_{k+1}) x (tail / n_{k+1}): zero-copy
        // in column-major order.
        M = Eigen::Map<Eigen::MatrixXd>(carry.data(), rk * shape[k + 1],
                                        tail / shape[k + 1]);
        r_prev = rk;
    }
    TTCore last(r_prev, shape[d - 1], 1);
    last.m = Eigen::Map<Eigen::VectorXd>(M.data(), M.size());
    cores.push_back(std::move(last));
    return TensorTrain(shape, std::move(cores));
}

TensorTrain tt_round(const TensorTrain& X, const std::vector<Index>& r,
                     bool keep_declared_rank) {
    const Shape& shape = X.shape();
    const Index d = X.order();
    const RankTuple req = normalize_ranks(shape, r);

    // Right-to-left orthogonalization, then left-to-right truncated SVDs.
    std::vector<TTCore> cores = orthogonalize_impl(X, 1, false);
    for (Index k = 0; k < d - 1; ++k) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(cores[k].m,
                                           Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        Index avail = sv.size();
        if (!keep_declared_rank)
            while (avail > 1 && sv(avail - 1) <= kRankFloor * sv(0)) --avail;
        const Index rk = std::min(req[k + 1], avail);
        Eigen::MatrixXd carry =
            sv.head(rk).asDiagonal() * svd.matrixV().leftCols(rk).transpose();
        cores[k].m = svd.matrixU().leftCols(rk);
        cores[k].r_right = rk;
        cores[k + 1] = absorb_left(cores[k + 1], carry);
    }
    return TensorTrain(shape, std::move(cores));
}

TensorTrain orthogonalize(const TensorTrain& X, Index k) {
    return TensorTrain(X.shape(), orthogonalize_impl(X, k, true));
}

TensorTrain orthogonalize_unchecked(const TensorTrain& X, Index k) {
    return TensorTrain(X.shape(), orthogonalize_impl(X, k, false));
}

Eigen::MatrixXd interface_left(const TensorTrain& X, Index k) {
    require(k >= 0 && k <= X.order(), "interface position out of range");
    Index rows = 1;
    for (Index j = 0; j < k; ++j) {
        rows *= X.shape()[j];
        require(rows <= kInterfaceGuard, "interface_left guard: too many rows");
    }
    Eigen::MatrixXd B = Eigen::MatrixXd::Ones(1, 1);
    for (Index j = 0; j < k; ++j) {
        const TTCore& c = X.core(j);
        Eigen::MatrixXd next(B.rows() * c.n, c.r_right);
        for (Index i = 0; i < c.n; ++i)
            next.middleRows(i * B.rows(), B.rows()).noalias() = B * c.slice(i);
        B = std::move(next);
    }
    return B;
}

Eigen::MatrixXd interface_right(const TensorTrain& X, Index j) {
    const Index d = X.order();
    require(j >= 1 && j <= d + 1, "interface position out of range");
    Index rows = 1;
    for (Index t = j - 1; t < d; ++t) {
        rows *= X.shape()[t];
        require(rows <= kInterfaceGuard, "interface_right guard: too many rows");
    }
    Eigen::MatrixXd B = Eigen::MatrixXd::Ones(1, 1);
    for (Index t = d - 1; t >= j - 1; --t) {
        const TTCore& c = X.core(t);
        Eigen::MatrixXd next(c.n * B.rows(), c.r_left);
        for (Index row = 0; row < B.rows(); ++row)
            for (Index i = 0; i < c.n; ++i)
                next.row(i + c.n * row) = B.row(row) * c.slice(i).transpose();
        B = std::move(next);
    }
    return B;
}

std::vector<Eigen::VectorXd> bond_spectra(const TensorTrain& X) {
    const Index d = X.order();
    std::vector<Eigen::VectorXd> spectra(std::max<Index>(d - 1, 0));
    if (d < 2) return spectra;
    std::vector<TTCore> cores = orthogonalize_impl(X, d, false);
    for (Index j = d - 1; j >= 1; --j) {
        right_orth_step(cores, j, false);
        // Center now sits at 1-based position j; its left unfolding carries
        // the singular values of the split-j unfolding.
        Eigen::BDCSVD<Eigen::MatrixXd> svd(cores[j - 1].m);
        spectra[j - 1] = svd.singularValues();
    }
    return spectra;
}

RankTuple tt_rank(const TensorTrain& X) {
    RankTuple r(X.order() + 1, 1);
    auto spectra = bond_spectra(X);
    for (std::size_t k = 0; k < spectra.size(); ++k) {
        const auto& sv = spectra[k];
        Index cnt = 0;
        for (Index i = 0; i < sv.size(); ++i)
            if (sv(i) > kRankFloor * sv(0)) ++cnt;
        r[k + 1] = cnt;
    }
    return r;
}

double sigma_min_tt(const TensorTrain& X) {
    auto spectra = bond_spectra(X);
    double acc = 0.0;
    for (const auto& sv : spectra) {
        double smin = 0.0;
        for (Index i = sv.size() - 1; i >= 0; --i)
            if (sv(i) > kRankFloor * sv(0)) { smin = sv(i); break; }
        if (smin == 0.0) return 0.0;
        acc += 1.0 / smin;
    }
    return acc == 0.0 ? 0.0 : 1.0 / acc;
}

TensorTrain gaussian_tt(const Shape& shape, const std::vector<Index>& r,
                        std::uint64_t seed) {
    const RankTuple full = normalize_ranks(shape, r);
    Rng rng(seed);
    std::vector<TTCore> cores;
    cores.reserve(shape.size());
    for (std::size_t k = 0; k < shape.size(); ++k) {
        TTCore c(full[k], shape[k], full[k + 1]);
        for (Index i = 0; i < c.m.size(); ++i) c.m.data()[i] = rng.normal();
        cores.push_back(std::move(c));
    }
    return TensorTrain(shape, std::move(cores));
}

// --- Serialization ---------------------------------------------------------

void save_tt_text(const TensorTrain& X, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "cannot open " + path + " for writing");
    f << "ttc tt 1\n";
    for (Index k = 0; k < X.order(); ++k)
        f << X.shape()[k] << (k + 1 < X.order() ? ' ' : '\n');
    const RankTuple r = X.ranks();
    for (std::size_t k = 0; k < r.size(); ++k)
        f << r[k] << (k + 1 < r.size() ? ' ' : '\n');
    char buf[40];
    for (Index k = 0; k < X.order(); ++k) {
        const auto& m = X.core(k).m;
        for (Index i = 0; i < m.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", m.data()[i]);
            f << buf << '\n';
        }
    }
    require(f.good(), "write failed: " + path);
}

TensorTrain load_tt_text(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open " + path);
    std::string tag, kind;
    int version = 0;
    f >> tag >> kind >> version;
    require(f.good() && tag == "ttc" && kind == "tt" && version == 1,
            "not a ttc tt text file: " + path);
    std::string line;
    std::getline(f, line);
    auto read_ints = [&](std::vector<Index>& out) {
        std::getline(f, line);
        std::size_t pos = 0;
        while (pos < line.size()) {
            while (pos < line.size() && line[pos] == ' ') ++pos;
            if (pos >= line.size()) break;
            std::size_t used = 0;
            out.push_back(std::stoll(line.substr(pos), &used));
            pos += used;
        }
    };
    Shape shape;
    RankTuple ranks;
    read_ints(shape);
    read_ints(ranks);
    require(ranks.size() == shape.size() + 1, "rank tuple length mismatch in " + path);
    std::vector<TTCore> cores;
    for (std::size_t k = 0; k < shape.size(); ++k) {
        TTCore c(ranks[k], shape[k], ranks[k + 1]);
        for (Index i = 0; i < c.m.size(); ++i) {
            f >> c.m.data()[i];
            require(!f.fail(), "truncated tt text file: " + path);
        }
        cores.push_back(std::move(c));
    }
    return TensorTrain(shape, std::move(cores));
}

namespace {
constexpr char kTTMagic[8] = {'T', 'T', 'C', 'T', 'T', '_', '_', '1'};
} // namespace

void save_tt_binary(const TensorTrain& X, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open " + path + " for writing");
    f.write(kTTMagic, sizeof kTTMagic);
    auto put = [&](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    put(X.order());
    for (Index k = 0; k < X.order(); ++k) put(X.shape()[k]);
    for (Index rk : X.ranks()) put(rk);
    for (Index k = 0; k < X.order(); ++k) {
        const auto& m = X.core(k).m;
        f.write(reinterpret_cast<const char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
    require(f.good(), "write failed: " + path);
}

TensorTrain load_tt_binary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open " + path);
    char magic[8];
    f.read(magic, sizeof magic);
    require(f.good() && std::memcmp(magic, kTTMagic, 8) == 0,
            "not a ttc tt binary file: " + path);
    auto get = [&]() {
        std::uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    const std::uint64_t d = get();
    require(d >= 1 && d <= 64, "implausible tensor order in " + path);
    Shape shape(d);
    for (auto& nk : shape) nk = static_cast<Index>(get());
    RankTuple ranks(d + 1);
    for (auto& rk : ranks) rk = static_cast<Index>(get());
    std::vector<TTCore> cores;
    for (std::size_t k = 0; k < d; ++k) {
        TTCore c(ranks[k], shape[k], ranks[k + 1]);
        f.read(reinterpret_cast<char*>(c.m.data()),
               static_cast<std::streamsize>(sizeof(double) * c.m.size()));
        cores.push_back(std::move(c));
    }
    require(f.good(), "truncated tt binary file: " + path);
    return TensorTrain(shape, std::move(cores));
}

} // namespace ttc
