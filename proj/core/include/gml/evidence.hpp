#pragma once

#include <cstddef>
#include <vector>

#include "gml/graph.hpp"
#include "gml/influence.hpp"

namespace gml {

/// Mass over the frame {class singletons} + {ignorance}.
struct MassFunction {
    std::vector<double> singleton;
    double ignorance = 1.0;

    static MassFunction vacuous(int ways) { return {std::vector<double>(static_cast<std::size_t>(ways), 0.0), 1.0}; }

    int ways() const noexcept { return static_cast<int>(singleton.size()); }
    double belief_max() const;
};

/// Simple support function for one feature: mass theta * max(0, 2p - 1) on
/// `target_class`, the rest on ignorance.
MassFunction feature_mass(int ways, int target_class, double probability, Confidence confidence);

struct Combination {
    MassFunction mass;
    bool contradicted = false;  // total conflict; `mass` is vacuous
};

/// Dempster's rule on the restricted frame. Conflict is the product mass on
/// distinct singleton pairs.
Combination dempster_combine(const MassFunction& a, const MassFunction& b);

struct EvidentialSupport {
    std::size_t variable = 0;
    MassFunction mass;
    bool contradicted = false;
    double score = 0.0;  // max singleton mass; 0 when contradicted
};

/// Per-feature masses of an inference variable, in its factor order: CCD
/// factors by (backbone, class), then KNN factors by (backbone, neighbor).
/// KNN factors to unlabeled neighbors yield vacuous masses.
std::vector<MassFunction> feature_masses(const FactorGraph& graph, std::size_t v, const FeatureFits& fits);

/// Dempster combination of feature_masses in order.
EvidentialSupport evidential_support(const FactorGraph& graph, std::size_t v, const FeatureFits& fits);

}  // namespace gml
