#pragma once

#include <span>
#include <vector>

#include "gml/episode.hpp"
#include "gml/matrix.hpp"

namespace gml {

/// Scales every row to unit Euclidean norm. Throws DataError on a zero row.
Matrix preprocess(const Matrix& embeddings);

/// Class centroids for every backbone, built from labeled rows only.
struct CentroidSet {
    std::vector<Matrix> per_backbone;  // ways x dim each
    bool support_only = true;          // false once centroids absorbed labeled queries

    int ways() const { return per_backbone.empty() ? 0 : static_cast<int>(per_backbone.front().rows()); }
};

/// centroid[c] is the mean of the preprocessed rows whose label is c. `labels`
/// holds one entry per sample, -1 for rows that must not contribute.
/// Throws DataError when some class has no labeled row.
CentroidSet class_centroids(std::span<const Matrix> normalized, std::span<const int> labels, int ways);

/// 1 - cos(sample, centroid), clamped to [0, 2]. Throws DataError on a zero vector.
double ccd(std::span<const double> sample, std::span<const double> centroid);

struct KnnEdge {
    std::size_t a = 0;  // a < b
    std::size_t b = 0;
    double similarity = 0.0;

    bool operator==(const KnnEdge&) const = default;
};

/// Symmetric k-nearest-neighbor graph by cosine similarity over all rows of
/// `normalized` (unit rows). Each row's k most similar other rows, ties broken by
/// ascending index, contribute one undirected edge; duplicates collapse. Edges are
/// returned sorted by (a, b). Throws ConfigError unless 1 <= k < rows.
std::vector<KnnEdge> knn_graph(const Matrix& normalized, int k);

}  // namespace gml
