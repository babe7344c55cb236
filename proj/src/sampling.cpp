#include "ttc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "ttc/rng.hpp"

namespace ttc {

namespace {

void finalize(SampleSet& s) {
    std::vector<Index> sorted = s.draws;
    std::sort(sorted.begin(), sorted.end());
    s.uniq.clear();
    s.mult.clear();
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        s.uniq.push_back(sorted[i]);
        s.mult.push_back(static_cast<double>(j - i));
        i = j;
    }
    s.rho = static_cast<double>(s.draws.size()) /
            static_cast<double>(num_entries(s.shape));
}

Index unique_position(const SampleSet& s, Index offset) {
    auto it = std::lower_bound(s.uniq.begin(), s.uniq.end(), offset);
    require(it != s.uniq.end() && *it == offset, "offset not in sample set");
    return static_cast<Index>(it - s.uniq.begin());
}

} // namespace

SampleSet sample_uniform(const Shape& shape, Index count, std::uint64_t seed) {
    require(count >= 1, "sample count must be positive");
    const Index N = num_entries(shape);
    SampleSet s;
    s.shape = shape;
    s.draws.resize(count);
    Rng rng(seed);
    for (Index i = 0; i < count; ++i)
        s.draws[i] = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(N)));
    finalize(s);
    return s;
}

SampleSet sample_set_from_indices(const Shape& shape,
                                  const std::vector<MultiIndex>& indices) {
    require(!indices.empty(), "sample set needs at least one index");
    SampleSet s;
    s.shape = shape;
    s.draws.reserve(indices.size());
    for (const MultiIndex& idx : indices) s.draws.push_back(linear_offset(shape, idx));
    finalize(s);
    return s;
}

Index max_multiplicity(const SampleSet& omega) {
    double m = 0.0;
    for (double v : omega.mult) m = std::max(m, v);
    return static_cast<Index>(m);
}

Eigen::VectorXd evaluate_at(const TensorTrain& X, const SampleSet& omega) {
    require(X.shape() == omega.shape, "shape mismatch");
    const Index d = X.order();
    Eigen::VectorXd out(omega.unique_count());
    Eigen::RowVectorXd v;
    for (Index t = 0; t < omega.unique_count(); ++t) {
        Index off = omega.uniq[t];
        v = Eigen::RowVectorXd::Ones(1);
        for (Index k = 0; k < d; ++k) {
            const Index i = off % X.shape()[k];
            off /= X.shape()[k];
            v = v * X.core(k).slice(i);
        }
        out[t] = v(0);
    }
    return out;
}

Eigen::VectorXd evaluate_at(const DenseTensor& X, const SampleSet& omega) {
    require(X.shape() == omega.shape, "shape mismatch");
    Eigen::VectorXd out(omega.unique_count());
    for (Index t = 0; t < omega.unique_count(); ++t) out[t] = X.at_offset(omega.uniq[t]);
    return out;
}

Eigen::VectorXd evaluate_at_mapped(const TensorTrain& X, const SampleSet& omega,
                                   const std::vector<Eigen::MatrixXd>& mode_maps) {
    const Index d = X.order();
    require(static_cast<Index>(omega.shape.size()) == d, "order mismatch");
    require(static_cast<Index>(mode_maps.size()) == d, "one mode map per mode required");
    for (Index k = 0; k < d; ++k)
        require(mode_maps[k].rows() == omega.shape[k] && mode_maps[k].cols() == X.shape()[k],
                "mode map size mismatch");
    Eigen::VectorXd out(omega.unique_count());
    Eigen::RowVectorXd v;
    for (Index t = 0; t < omega.unique_count(); ++t) {
        Index off = omega.uniq[t];
        v = Eigen::RowVectorXd::Ones(1);
        for (Index k = 0; k < d; ++k) {
            const Index i = off % omega.shape[k];
            off /= omega.shape[k];
            v = v * X.core(k).weighted_slice(mode_maps[k].row(i).transpose());
        }
        out[t] = v(0);
    }
    return out;
}

namespace {
SparseValues weighted(const SampleSet& omega, Eigen::VectorXd vals) {
    for (Index t = 0; t < omega.unique_count(); ++t) vals[t] *= omega.mult[t];
    SparseValues s;
    s.shape = omega.shape;
    s.offsets = omega.uniq;
    s.values = std::move(vals);
    return s;
}
} // namespace

SparseValues apply_sampling(const TensorTrain& X, const SampleSet& omega) {
    return weighted(omega, evaluate_at(X, omega));
}

SparseValues apply_sampling(const DenseTensor& X, const SampleSet& omega) {
    return weighted(omega, evaluate_at(X, omega));
}

SparseValues adjoint_from_unique(const SampleSet& omega, const Eigen::VectorXd& coeffs) {
    require(coeffs.size() == omega.unique_count(), "coefficient count mismatch");
    SparseValues s;
    s.shape = omega.shape;
    s.offsets = omega.uniq;
    s.values = coeffs;
    return s;
}

DenseTensor densify(const SparseValues& s) {
    DenseTensor X(s.shape);
    for (std::size_t t = 0; t < s.offsets.size(); ++t)
        X.at_offset(s.offsets[t]) += s.values[t];
    return X;
}

double sparse_norm(const SparseValues& s) { return s.values.norm(); }

double lambert_w(double x) {
    require(x >= 0.0, "lambert_w defined on [0, inf) here");
    if (x == 0.0) return 0.0;
    double w = x < 3.0 ? 0.5 : std::log(x) - std::log(std::log(x));
    for (int it = 0; it < 100; ++it) {
        const double e = std::exp(w);
        const double f = w * e - x;
        const double step = f / (e * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
        w -= step;
        if (std::abs(f) <= 1e-14 * std::abs(x)) break;
    }
    return w;
}

double repetition_bound(Index d, Index n, double beta) {
    require(n >= 16, "repetition bound requires n >= 16");
    require(beta > 1.0, "repetition bound requires beta > 1");
    return static_cast<double>(d) * beta * std::log(static_cast<double>(n)) /
           lambert_w(static_cast<double>(d));
}

Observations observe(const TensorTrain& X, const SampleSet& omega) {
    Observations obs;
    obs.set = omega;
    obs.unique_values = evaluate_at(X, omega);
    obs.values.resize(omega.draw_count());
    for (Index t = 0; t < omega.draw_count(); ++t)
        obs.values[t] = obs.unique_values[unique_position(omega, omega.draws[t])];
    return obs;
}

Observations observe(const DenseTensor& X, const SampleSet& omega) {
    Observations obs;
    obs.set = omega;
    obs.unique_values = evaluate_at(X, omega);
    obs.values.resize(omega.draw_count());
    for (Index t = 0; t < omega.draw_count(); ++t)
        obs.values[t] = obs.unique_values[unique_position(omega, omega.draws[t])];
    return obs;
}

Observations observations_from(SampleSet set, Eigen::VectorXd per_draw_values) {
    require(per_draw_values.size() == set.draw_count(), "one value per draw required");
    Observations obs;
    obs.unique_values.resize(set.unique_count());
    std::unordered_map<Index, double> first;
    first.reserve(set.draws.size());
    for (Index t = 0; t < set.draw_count(); ++t)
        first.emplace(set.draws[t], per_draw_values[t]); // first value seen wins
    for (Index t = 0; t < set.unique_count(); ++t)
        obs.unique_values[t] = first.at(set.uniq[t]);
    obs.set = std::move(set);
    obs.values = std::move(per_draw_values);
    return obs;
}

void save_observations_csv(const Observations& obs, const std::string& path) {
    std::ofstream f(path);
    require(f.good(), "cannot open " + path + " for writing");
    const Index d = static_cast<Index>(obs.set.shape.size());
    for (Index k = 1; k <= d; ++k) f << 'i' << k << ',';
    f << "value\n";
    char buf[40];
    for (Index t = 0; t < obs.set.draw_count(); ++t) {
        const MultiIndex idx = multi_index_of(obs.set.shape, obs.set.draws[t]);
        for (Index k = 0; k < d; ++k) f << idx[k] << ',';
        std::snprintf(buf, sizeof buf, "%.17g", obs.values[t]);
        f << buf << '\n';
    }
    require(f.good(), "write failed: " + path);
}

Observations load_observations_csv(const std::string& path, const Shape& shape) {
    std::ifstream f(path);
    require(f.good(), "cannot open " + path);
    std::string line;
    require(static_cast<bool>(std::getline(f, line)), "empty observations file: " + path);
    const Index d = static_cast<Index>(shape.size());
    std::vector<MultiIndex> indices;
    std::vector<double> values;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        MultiIndex idx(d);
        std::string cell;
        for (Index k = 0; k < d; ++k) {
            require(static_cast<bool>(std::getline(ss, cell, ',')), "short row in " + path);
            idx[k] = std::stoll(cell);
        }
        require(static_cast<bool>(std::getline(ss, cell, ',')), "missing value in " + path);
        indices.push_back(idx);
        values.push_back(std::stod(cell));
    }
    SampleSet set = sample_set_from_indices(shape, indices);
    return observations_from(std::move(set),
                             Eigen::Map<Eigen::VectorXd>(values.data(), values.size()));
}

void save_observations_json(const Observations& obs, const std::string& path) {
    nlohmann::json j;
    j["shape"] = obs.set.shape;
    std::vector<MultiIndex> indices;
    indices.reserve(obs.set.draws.size());
    for (Index off : obs.set.draws) indices.push_back(multi_index_of(obs.set.shape, off));
    j["indices"] = indices;
    j["values"] = std::vector<double>(obs.values.data(), obs.values.data() + obs.values.size());
    std::ofstream f(path);
    require(f.good(), "cannot open " + path + " for writing");
    f << j.dump(2) << '\n';
    require(f.good(), "write failed: " + path);
}

Observations load_observations_json(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open " + path);
    nlohmann::json j;
    f >> j;
    const Shape shape = j.at("shape").get<Shape>();
    const auto indices = j.at("indices").get<std::vector<MultiIndex>>();
    const auto values = j.at("values").get<std::vector<double>>();
    require(indices.size() == values.size(), "indices/values length mismatch in " + path);
    SampleSet set = sample_set_from_indices(shape, indices);
    return observations_from(std::move(set),
                             Eigen::Map<const Eigen::VectorXd>(values.data(), values.size()));
}

} // namespace ttc
