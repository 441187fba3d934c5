#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gml/matrix.hpp"

namespace gml {

inline constexpr const char* kEpisodeFormat = "gml-episode/1";

struct BackboneSpec {
    std::string name;
    std::size_t dim = 0;
    std::string data_file;  // relative to the bundle directory

    bool operator==(const BackboneSpec&) const = default;
};

/// Everything in `manifest.json` once class names have been mapped to dense indices.
///
/// Samples are addressed by their position in `sample_ids`; `labels[i]` is the
/// class of support sample i and -1 for queries. `truth[i]` is the ground-truth
/// class of query i when known, -1 otherwise (and always -1 for support rows).
struct EpisodeManifest {
    int ways = 0;
    int shots = 0;
    int query_count = 0;
    std::vector<std::string> class_names;  // index -> external label
    std::vector<BackboneSpec> backbones;
    std::vector<std::string> sample_ids;
    std::vector<int> labels;
    std::vector<int> truth;

    std::size_t sample_count() const noexcept { return sample_ids.size(); }
    bool is_support(std::size_t i) const { return labels[i] >= 0; }
    bool has_ground_truth() const;
    std::vector<std::size_t> support_indices() const;
    std::vector<std::size_t> query_indices() const;

    bool operator==(const EpisodeManifest&) const = default;
};

struct Episode {
    EpisodeManifest manifest;
    std::vector<Matrix> embeddings;  // one per backbone, rows aligned with sample_ids

    std::size_t backbone_count() const noexcept { return embeddings.size(); }
    bool operator==(const Episode&) const = default;
};

/// Checks every manifest and embedding invariant. Throws DataError naming the
/// offending sample, row, or file.
void validate_episode(const Episode& episode);

/// Loads `<bundle>/manifest.json` and the per-backbone matrices (`.f32` raw
/// little-endian float32, or `.csv` for fewer than 10,000 values).
Episode load_episode(const std::filesystem::path& bundle);

/// Writes a bundle loadable by load_episode. Matrices are stored as `.f32`
/// unless `csv` is set.
void save_episode(const Episode& episode, const std::filesystem::path& bundle, bool csv = false);

struct SyntheticParams {
    int ways = 5;
    int shots = 1;
    int queries = 15;
    int dim = 64;
    int backbones = 2;
    double separation = 2.0;
    double noise = 1.0;
    std::uint64_t seed = 0;
};

/// Gaussian class clusters around random directions, one independent set of
/// class means per backbone. Ground truth is always filled in.
Episode generate_synthetic(const SyntheticParams& params);

}  // namespace gml
