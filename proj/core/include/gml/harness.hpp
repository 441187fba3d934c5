#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gml/episode.hpp"
#include "gml/inference.hpp"
#include "gml/report.hpp"

namespace gml {

/// Inductive reference: each query takes the class whose support-only centroid
/// has the smallest CCD averaged over backbones (ties to the lower class).
/// Returns one label per sample, -1 for support rows.
std::vector<int> nearest_centroid(const Episode& episode);

/// Fraction of ground-truth queries whose label matches; nullopt without ground truth.
std::optional<double> accuracy(const Episode& episode, const std::vector<int>& labels);

/// Checks a finished run against the driver's invariants: every query labeled
/// exactly once, write-once labels, committed entropies no larger than the
/// uncommitted finalists', evidence growth equal to the clamped batch, and the
/// iteration-count formula. Returns human-readable violations (empty = clean).
std::vector<std::string> verify_trace(const Episode& episode, const PredictionReport& report,
                                      const InferenceConfig& config);

struct EpisodeScore {
    std::string id;
    double gml = 0.0;
    double baseline = 0.0;
    std::size_t iterations = 0;
    std::string trace_digest;  // FNV-1a of the serialized trace
    bool operator==(const EpisodeScore&) const = default;
};

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * sample stddev / sqrt(count), 0 for a single value
    bool operator==(const MeanCi&) const = default;
};

MeanCi mean_ci(const std::vector<double>& values);

struct EvalSummary {
    int query_count = 0;  // 0 when episodes come from bundles with mixed sizes
    std::size_t episode_count = 0;
    std::vector<EpisodeScore> episodes;  // sorted by id
    MeanCi gml;
    MeanCi baseline;
    MeanCi gap;  // per-episode gml - baseline
    bool operator==(const EvalSummary&) const = default;
};

/// Recomputes the statistics from `episodes` (sorting them by id first).
void summarize(EvalSummary& summary);

struct EpisodeSource {
    std::string id;
    std::function<Episode()> load;
};

/// Runs GML and the baseline on every source using up to `jobs` threads. Every
/// run is checked with verify_trace; a violation throws std::logic_error.
/// Sources without ground truth throw DataError.
EvalSummary evaluate(const std::vector<EpisodeSource>& sources, const InferenceConfig& config, int jobs);

/// Default regime of synthetic evaluation: 5-way 1-shot, 15 queries per class,
/// 64 dimensions, 2 backbones, separation 0.4 against unit noise. The
/// nearest-centroid baseline scores about 67% there.
SyntheticParams benchmark_params();

/// Synthetic sources with seeds base_seed, base_seed + 1, ...
std::vector<EpisodeSource> synthetic_sources(const SyntheticParams& params, std::size_t count);

std::string summary_to_string(const std::vector<EvalSummary>& rows);
std::vector<EvalSummary> summary_from_string(const std::string& text);

std::uint64_t fnv1a(const std::string& text);

}  // namespace gml
