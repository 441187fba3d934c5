#include "gml/evidence.hpp"

#include <algorithm>
#include <stdexcept>

namespace gml {

double MassFunction::belief_max() const {
    return singleton.empty() ? 0.0 : *std::max_element(singleton.begin(), singleton.end());
}

MassFunction feature_mass(int ways, int target_class, double probability, Confidence confidence) {
    auto m = MassFunction::vacuous(ways);
    const double mass = confidence.theta * std::max(0.0, 2.0 * probability - 1.0);
    m.singleton[static_cast<std::size_t>(target_class)] = mass;
    m.ignorance = 1.0 - mass;
    return m;
}

Combination dempster_combine(const MassFunction& a, const MassFunction& b) {
    if (a.singleton.size() != b.singleton.size()) throw std::invalid_argument("mass functions over different frames");
    const std::size_t n = a.singleton.size();
    double sum_a = 0.0, sum_b = 0.0, agree = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        sum_a += a.singleton[c];
        sum_b += b.singleton[c];
        agree += a.singleton[c] * b.singleton[c];
    }
    // Sum over distinct singleton pairs = (sum a)(sum b) - sum over equal pairs.
    const double conflict = sum_a * sum_b - agree;
    const double norm = 1.0 - conflict;
    if (norm <= 1e-15) return {MassFunction::vacuous(static_cast<int>(n)), true};

    MassFunction out;
    out.singleton.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        out.singleton[c] = (a.singleton[c] * b.singleton[c] + a.singleton[c] * b.ignorance + a.ignorance * b.singleton[c]) / norm;
    }
    out.ignorance = a.ignorance * b.ignorance / norm;
    return {std::move(out), false};
}

std::vector<MassFunction> feature_masses(const FactorGraph& graph, std::size_t v, const FeatureFits& fits) {
    if (graph.variable(v).is_evidence()) throw std::logic_error("evidential support of an evidence variable");
    std::vector<MassFunction> masses;
    for (std::size_t f : graph.variable(v).factors) {
        const auto& factor = graph.factor(f);
        if (factor.is_unary()) {
            const auto& fit = fits.ccd_fit(factor.backbone);
            masses.push_back(feature_mass(graph.ways(), factor.cls, sigmoid_eval(fit.params, factor.value),
                                          confidence_theta(fit, factor.value)));
            continue;
        }
        const auto& neighbor = graph.variable(factor.other(v));
        if (!neighbor.is_evidence()) {
            masses.push_back(MassFunction::vacuous(graph.ways()));
            continue;
        }
        const auto& fit = fits.knn_fit(factor.backbone);
        masses.push_back(feature_mass(graph.ways(), neighbor.label, sigmoid_eval(fit.params, factor.value),
                                      confidence_theta(fit, factor.value)));
    }
    return masses;
}

EvidentialSupport evidential_support(const FactorGraph& graph, std::size_t v, const FeatureFits& fits) {
    EvidentialSupport out;
    out.variable = v;
    out.mass = MassFunction::vacuous(graph.ways());
    for (const auto& m : feature_masses(graph, v, fits)) {
        auto combined = dempster_combine(out.mass, m);
        if (combined.contradicted) {
            out.mass = std::move(combined.mass);
            out.contradicted = true;
            out.score = 0.0;
            return out;
        }
        out.mass = std::move(combined.mass);
    }
    out.score = out.mass.belief_max();
    return out;
}

}  // namespace gml
