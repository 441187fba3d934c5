#include "gml/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gml/errors.hpp"

namespace gml {

Matrix preprocess(const Matrix& embeddings) {
    Matrix out = embeddings;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        const double norm = std::sqrt(dot(row, row));
        if (norm == 0.0) throw DataError("cannot normalize zero row " + std::to_string(i));
        for (auto& v : row) v /= norm;
    }
    return out;
}

CentroidSet class_centroids(std::span<const Matrix> normalized, std::span<const int> labels, int ways) {
    CentroidSet set;
    set.support_only = true;
    for (const auto& mat : normalized) {
        if (labels.size() != mat.rows()) throw DataError("label count does not match embedding rows");
        Matrix centroids(static_cast<std::size_t>(ways), mat.cols());
        std::vector<int> counts(static_cast<std::size_t>(ways), 0);
        for (std::size_t i = 0; i < mat.rows(); ++i) {
            if (labels[i] < 0) continue;
            if (labels[i] >= ways) throw DataError("label out of range at row " + std::to_string(i));
            auto dst = centroids.row(static_cast<std::size_t>(labels[i]));
            const auto src = mat.row(i);
            for (std::size_t d = 0; d < dst.size(); ++d) dst[d] += src[d];
            ++counts[static_cast<std::size_t>(labels[i])];
        }
        for (int c = 0; c < ways; ++c) {
            if (counts[c] == 0) throw DataError("class " + std::to_string(c) + " has no labeled samples");
            for (auto& v : centroids.row(static_cast<std::size_t>(c))) v /= counts[c];
        }
        set.per_backbone.push_back(std::move(centroids));
    }
    return set;
}

double ccd(std::span<const double> sample, std::span<const double> centroid) {
    const double nx = std::sqrt(dot(sample, sample));
    const double ny = std::sqrt(dot(centroid, centroid));
    if (nx == 0.0 || ny == 0.0) throw DataError("ccd of a zero vector");
    return std::clamp(1.0 - dot(sample, centroid) / (nx * ny), 0.0, 2.0);
}

std::vector<KnnEdge> knn_graph(const Matrix& normalized, int k) {
    const std::size_t n = normalized.rows();
    if (k < 1 || static_cast<std::size_t>(k) >= n) {
        throw ConfigError("k must lie in [1, " + std::to_string(n) + " - 1], got " + std::to_string(k));
    }
    Matrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        sim(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = std::clamp(dot(normalized.row(i), normalized.row(j)), -1.0, 1.0);
            sim(i, j) = s;
            sim(j, i) = s;
        }
    }

    std::vector<char> adjacent(n * n, 0);
    std::vector<std::size_t> order(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pos = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) order[pos++] = j;
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](std::size_t x, std::size_t y) {
            if (sim(i, x) != sim(i, y)) return sim(i, x) > sim(i, y);
            return x < y;
        });
        for (int r = 0; r < k; ++r) {
            const std::size_t j = order[static_cast<std::size_t>(r)];
            adjacent[std::min(i, j) * n + std::max(i, j)] = 1;
        }
    }

    std::vector<KnnEdge> edges;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (adjacent[a * n + b]) edges.push_back({a, b, sim(a, b)});
    return edges;
}

}  // namespace gml
