#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gml/episode.hpp"
#include "gml/evidence.hpp"
#include "gml/features.hpp"
#include "gml/graph.hpp"
#include "gml/influence.hpp"
#include "gml/report.hpp"

namespace gml {

struct InferenceConfig {
    int k = 6;             // KNN neighbors per sample
    int m = 50;            // candidates kept by evidential support
    int n = 10;            // finalists kept by approximate entropy
    int batch = 10;        // labels committed per iteration
    int refit_every = 1;   // iterations between influence refits
    bool update_centroids = false;
    std::uint64_t seed = 0;
    FitOptions fit;

    /// Throws ConfigError unless 1 <= batch <= n <= m, k >= 1 and refit_every >= 1.
    void validate() const;
    ReportConfig echo() const;
};

/// -(p log2 p + (1 - p) log2 (1 - p)) with p clamped to [eps, 1 - eps].
double binary_entropy(double p_max);

/// Evidential certainty: 1 / H.
double certainty(double entropy);

/// Initial evidence. Support labels, plus for 1-shot episodes one query per class
/// (classes in ascending order): the unclaimed query with the smallest CCD to
/// that class averaged over backbones, ties to the lower index.
std::vector<int> bootstrap(const Episode& episode, std::span<const Matrix> normalized, const CentroidSet& centroids);

/// Entropy of the max marginal under the given fits, without refitting.
double approximate_entropy(const FactorGraph& graph, std::size_t v, const FeatureFits& fits);

/// Labels every query, easiest first, and records the full trace.
PredictionReport gradual_inference(const Episode& episode, const InferenceConfig& config);

}  // namespace gml
