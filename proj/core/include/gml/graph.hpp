#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gml/features.hpp"
#include "gml/influence.hpp"
#include "gml/matrix.hpp"

namespace gml {

enum class FactorKind { unary_ccd, binary_knn };

struct Factor {
    FactorKind kind = FactorKind::unary_ccd;
    int backbone = 0;
    int cls = -1;           // unary only
    std::size_t first = 0;  // variable index
    std::size_t second = 0; // binary only, first < second
    double value = 0.0;     // CCD distance or cosine similarity

    bool is_unary() const noexcept { return kind == FactorKind::unary_ccd; }
    std::size_t other(std::size_t v) const noexcept { return v == first ? second : first; }
};

struct Variable {
    int label = -1;  // committed class, -1 while an inference variable
    std::vector<std::size_t> factors;  // unary by (backbone, class), then binary by (backbone, neighbor)

    bool is_evidence() const noexcept { return label >= 0; }
};

/// One fitted influence model per feature family and backbone. The CCD model is
/// shared by the class-specific CCD factors of a backbone: its training pairs
/// pool every (evidence variable, class) combination.
struct FeatureFits {
    int ways = 0;
    std::vector<FitState> ccd;  // index backbone
    std::vector<FitState> knn;  // index backbone

    const FitState& ccd_fit(int backbone) const { return ccd[static_cast<std::size_t>(backbone)]; }
    const FitState& knn_fit(int backbone) const { return knn[static_cast<std::size_t>(backbone)]; }
};

/// Factor graph over every sample of an episode. Unary factor ids are laid out
/// as (variable, backbone, class); binary factors follow.
class FactorGraph {
public:
    FactorGraph(int ways, int backbones, std::size_t variables);

    int ways() const noexcept { return ways_; }
    int backbones() const noexcept { return backbones_; }
    std::size_t variable_count() const noexcept { return variables_.size(); }
    std::size_t factor_count() const noexcept { return factors_.size(); }
    std::size_t unary_count() const noexcept { return variables_.size() * static_cast<std::size_t>(ways_ * backbones_); }
    std::size_t binary_count() const noexcept { return factors_.size() - unary_count(); }

    const Variable& variable(std::size_t v) const { return variables_[v]; }
    const Factor& factor(std::size_t f) const { return factors_[f]; }
    const std::vector<Factor>& factors() const noexcept { return factors_; }

    std::size_t unary_id(std::size_t v, int backbone, int cls) const {
        return v * static_cast<std::size_t>(ways_ * backbones_) + static_cast<std::size_t>(backbone * ways_ + cls);
    }
    double ccd_value(std::size_t v, int backbone, int cls) const { return factors_[unary_id(v, backbone, cls)].value; }

    std::vector<std::size_t> inference_variables() const;
    std::vector<std::size_t> evidence_variables() const;

    /// Turns an inference variable into evidence. Relabeling evidence is a
    /// programming error and throws std::logic_error.
    void commit_label(std::size_t v, int cls);

    /// Replaces the CCD values of every unary factor (centroid refresh).
    void set_ccd_values(const std::vector<Matrix>& normalized, const CentroidSet& centroids);

    const SigmoidParams& ccd_default(int backbone) const { return ccd_defaults_[static_cast<std::size_t>(backbone)]; }
    const SigmoidParams& knn_default(int backbone) const { return knn_defaults_[static_cast<std::size_t>(backbone)]; }

    friend FactorGraph build_graph(const std::vector<Matrix>&, const CentroidSet&,
                                   const std::vector<std::vector<KnnEdge>>&, std::span<const int>, int);
    friend class GraphBuilder;

private:
    int ways_;
    int backbones_;
    std::vector<Variable> variables_;
    std::vector<Factor> factors_;
    std::vector<SigmoidParams> ccd_defaults_;
    std::vector<SigmoidParams> knn_defaults_;
};

/// Hand assembly of small graphs (tests, oracles). Unary factors must be set for
/// every (variable, backbone, class) before the graph is used.
class GraphBuilder {
public:
    GraphBuilder(int ways, int backbones, std::size_t variables);
    GraphBuilder& unary(std::size_t v, int backbone, int cls, double ccd_value);
    GraphBuilder& binary(std::size_t a, std::size_t b, int backbone, double similarity);
    GraphBuilder& label(std::size_t v, int cls);
    GraphBuilder& defaults(int backbone, SigmoidParams ccd, SigmoidParams knn);
    FactorGraph build();

private:
    FactorGraph graph_;
};

/// One variable per sample; ways * backbones CCD factors per variable; one KNN
/// factor per edge per backbone. `labels` gives the initial evidence (-1 = inference).
FactorGraph build_graph(const std::vector<Matrix>& normalized, const CentroidSet& centroids,
                        const std::vector<std::vector<KnnEdge>>& knn_edges, std::span<const int> labels, int ways);

/// Fits every feature's influence model on the current evidence.
FeatureFits fit_features(const FactorGraph& graph, const FitOptions& options = {});

/// Log-weight of a factor when its class condition holds (unary: v = cls; binary: labels agree).
double factor_weight(const FactorGraph& graph, const FeatureFits& fits, std::size_t factor_id);

struct Subgraph {
    std::size_t variable = 0;
    std::vector<std::size_t> unary;     // factor ids
    std::vector<std::size_t> binary;    // factor ids linking to evidence
    std::vector<std::size_t> evidence;  // evidence endpoints, parallel to `binary`
};

/// The variable, all of its unary factors, and its binary factors whose other
/// endpoint is evidence. Throws std::logic_error for an evidence variable.
Subgraph subgraph(const FactorGraph& graph, std::size_t v);

/// Clamps into [eps, 1 - eps]: components below eps are raised to eps and the
/// excess is taken from the largest component, so the sum stays 1.
void clamp_probabilities(std::vector<double>& p);

/// Softmax over class scores (unary weights of the class plus binary weights to
/// evidence of that class), clamped.
std::vector<double> infer_marginal(const FactorGraph& graph, const Subgraph& sub, const FeatureFits& fits);

inline constexpr std::size_t kBruteForceLimit = 6;

/// Exact marginals of the full joint by enumeration over every inference
/// variable. Entry v is empty for evidence variables. Throws std::invalid_argument
/// above kBruteForceLimit inference variables.
std::vector<std::vector<double>> brute_force_joint(const FactorGraph& graph, const FeatureFits& fits);

}  // namespace gml
