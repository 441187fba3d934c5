#include "gml/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "gml/errors.hpp"

namespace gml {

namespace {

constexpr double kDefaultCcdTau = -10.0;
constexpr double kDefaultKnnTau = 10.0;

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

// Orders each variable's binary factors by (backbone, neighbor index).
void sort_adjacency(std::vector<Variable>& variables, const std::vector<Factor>& factors, std::size_t unary_per_var) {
    for (std::size_t v = 0; v < variables.size(); ++v) {
        auto& list = variables[v].factors;
        std::stable_sort(list.begin() + static_cast<std::ptrdiff_t>(unary_per_var), list.end(),
                         [&](std::size_t x, std::size_t y) {
                             const auto& fx = factors[x];
                             const auto& fy = factors[y];
                             if (fx.backbone != fy.backbone) return fx.backbone < fy.backbone;
                             return fx.other(v) < fy.other(v);
                         });
    }
}

}  // namespace

FactorGraph::FactorGraph(int ways, int backbones, std::size_t variables)
    : ways_(ways), backbones_(backbones), variables_(variables) {
    if (ways < 2) throw ConfigError("a factor graph needs at least two classes");
    if (backbones < 1) throw ConfigError("a factor graph needs at least one backbone");
    const std::size_t per_var = static_cast<std::size_t>(ways * backbones);
    factors_.reserve(variables * per_var);
    for (std::size_t v = 0; v < variables; ++v) {
        for (int b = 0; b < backbones; ++b) {
            for (int c = 0; c < ways; ++c) {
                variables_[v].factors.push_back(factors_.size());
                factors_.push_back({FactorKind::unary_ccd, b, c, v, v, 0.0});
            }
        }
    }
    ccd_defaults_.assign(static_cast<std::size_t>(backbones), {0.5, kDefaultCcdTau, Direction::decreasing});
    knn_defaults_.assign(static_cast<std::size_t>(backbones), {0.5, kDefaultKnnTau, Direction::increasing});
}

std::vector<std::size_t> FactorGraph::inference_variables() const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < variables_.size(); ++v)
        if (!variables_[v].is_evidence()) out.push_back(v);
    return out;
}

std::vector<std::size_t> FactorGraph::evidence_variables() const {
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < variables_.size(); ++v)
        if (variables_[v].is_evidence()) out.push_back(v);
    return out;
}

void FactorGraph::commit_label(std::size_t v, int cls) {
    if (v >= variables_.size()) throw std::out_of_range("variable index out of range");
    if (variables_[v].is_evidence()) {
        throw std::logic_error("evidence variable " + std::to_string(v) + " cannot be relabeled");
    }
    if (cls < 0 || cls >= ways_) throw std::out_of_range("class index out of range");
    variables_[v].label = cls;
}

void FactorGraph::set_ccd_values(const std::vector<Matrix>& normalized, const CentroidSet& centroids) {
    for (std::size_t v = 0; v < variables_.size(); ++v)
        for (int b = 0; b < backbones_; ++b)
            for (int c = 0; c < ways_; ++c)
                factors_[unary_id(v, b, c)].value =
                    ccd(normalized[static_cast<std::size_t>(b)].row(v),
                        centroids.per_backbone[static_cast<std::size_t>(b)].row(static_cast<std::size_t>(c)));
}

GraphBuilder::GraphBuilder(int ways, int backbones, std::size_t variables) : graph_(ways, backbones, variables) {}

GraphBuilder& GraphBuilder::unary(std::size_t v, int backbone, int cls, double ccd_value) {
    graph_.factors_[graph_.unary_id(v, backbone, cls)].value = ccd_value;
    return *this;
}

GraphBuilder& GraphBuilder::binary(std::size_t a, std::size_t b, int backbone, double similarity) {
    if (a == b) throw std::invalid_argument("binary factor needs two distinct variables");
    const std::size_t lo = std::min(a, b), hi = std::max(a, b);
    const std::size_t id = graph_.factors_.size();
    graph_.factors_.push_back({FactorKind::binary_knn, backbone, -1, lo, hi, similarity});
    graph_.variables_[lo].factors.push_back(id);
    graph_.variables_[hi].factors.push_back(id);
    return *this;
}

GraphBuilder& GraphBuilder::label(std::size_t v, int cls) {
    graph_.commit_label(v, cls);
    return *this;
}

GraphBuilder& GraphBuilder::defaults(int backbone, SigmoidParams ccd, SigmoidParams knn) {
    graph_.ccd_defaults_[static_cast<std::size_t>(backbone)] = ccd;
    graph_.knn_defaults_[static_cast<std::size_t>(backbone)] = knn;
    return *this;
}

FactorGraph GraphBuilder::build() {
    sort_adjacency(graph_.variables_, graph_.factors_, static_cast<std::size_t>(graph_.ways_ * graph_.backbones_));
    return graph_;
}

FactorGraph build_graph(const std::vector<Matrix>& normalized, const CentroidSet& centroids,
                        const std::vector<std::vector<KnnEdge>>& knn_edges, std::span<const int> labels, int ways) {
    if (normalized.empty()) throw DataError("no embedding matrices");
    if (centroids.per_backbone.size() != normalized.size() || knn_edges.size() != normalized.size()) {
        throw DataError("feature inputs disagree on the number of backbones");
    }
    if (centroids.ways() != ways) throw DataError("centroid count does not match the number of classes");
    const std::size_t n = normalized.front().rows();
    if (labels.size() != n) throw DataError("label count does not match sample count");
    const int backbones = static_cast<int>(normalized.size());

    FactorGraph g(ways, backbones, n);
    g.set_ccd_values(normalized, centroids);

    for (int b = 0; b < backbones; ++b) {
        const auto& mat = normalized[static_cast<std::size_t>(b)];
        if (mat.rows() != n) throw DataError("embedding matrices disagree on the sample count");
        std::vector<double> ccds;
        ccds.reserve(n * static_cast<std::size_t>(ways));
        for (std::size_t v = 0; v < n; ++v)
            for (int c = 0; c < ways; ++c) ccds.push_back(g.ccd_value(v, b, c));
        const double mean_ccd = std::accumulate(ccds.begin(), ccds.end(), 0.0) / static_cast<double>(ccds.size());
        g.ccd_defaults_[static_cast<std::size_t>(b)] = {mean_ccd, kDefaultCcdTau, Direction::decreasing};

        std::vector<double> sims;
        for (const auto& e : knn_edges[static_cast<std::size_t>(b)]) {
            if (e.a >= n || e.b >= n || e.a == e.b) throw DataError("KNN edge references an invalid sample");
            const std::size_t lo = std::min(e.a, e.b), hi = std::max(e.a, e.b);
            const std::size_t id = g.factors_.size();
            g.factors_.push_back({FactorKind::binary_knn, b, -1, lo, hi, e.similarity});
            g.variables_[lo].factors.push_back(id);
            g.variables_[hi].factors.push_back(id);
            sims.push_back(e.similarity);
        }
        g.knn_defaults_[static_cast<std::size_t>(b)] = {median(sims), kDefaultKnnTau, Direction::increasing};
    }
    sort_adjacency(g.variables_, g.factors_, static_cast<std::size_t>(ways * backbones));

    for (std::size_t v = 0; v < n; ++v) {
        if (labels[v] >= ways) throw DataError("label out of range for sample " + std::to_string(v));
        if (labels[v] >= 0) g.variables_[v].label = labels[v];
    }
    return g;
}

FeatureFits fit_features(const FactorGraph& graph, const FitOptions& options) {
    const int ways = graph.ways();
    const int backbones = graph.backbones();
    const auto evidence = graph.evidence_variables();

    FeatureFits fits;
    fits.ways = ways;
    for (int b = 0; b < backbones; ++b) {
        std::vector<FitPair> pairs;
        for (int c = 0; c < ways; ++c)
            for (std::size_t v : evidence)
                pairs.push_back({graph.ccd_value(v, b, c), graph.variable(v).label == c ? 1.0 : 0.0});
        fits.ccd.push_back(fit_sigmoid(std::move(pairs), graph.ccd_default(b), options));
    }
    std::vector<std::vector<FitPair>> knn_pairs(static_cast<std::size_t>(backbones));
    for (std::size_t f = graph.unary_count(); f < graph.factor_count(); ++f) {
        const auto& factor = graph.factor(f);
        const auto& a = graph.variable(factor.first);
        const auto& b = graph.variable(factor.second);
        if (a.is_evidence() && b.is_evidence()) {
            knn_pairs[static_cast<std::size_t>(factor.backbone)].push_back({factor.value, a.label == b.label ? 1.0 : 0.0});
        }
    }
    for (int b = 0; b < backbones; ++b) {
        fits.knn.push_back(fit_sigmoid(std::move(knn_pairs[static_cast<std::size_t>(b)]), graph.knn_default(b), options));
    }
    return fits;
}

double factor_weight(const FactorGraph& graph, const FeatureFits& fits, std::size_t factor_id) {
    const auto& f = graph.factor(factor_id);
    if (f.is_unary()) {
        const auto& fit = fits.ccd_fit(f.backbone);
        return unary_weight(confidence_theta(fit, f.value), fit.params, f.value);
    }
    const auto& fit = fits.knn_fit(f.backbone);
    return binary_weight(confidence_theta(fit, f.value), fit.params, f.value);
}

Subgraph subgraph(const FactorGraph& graph, std::size_t v) {
    const auto& var = graph.variable(v);
    if (var.is_evidence()) throw std::logic_error("subgraph requested for evidence variable " + std::to_string(v));
    Subgraph sub;
    sub.variable = v;
    for (std::size_t f : var.factors) {
        const auto& factor = graph.factor(f);
        if (factor.is_unary()) {
            sub.unary.push_back(f);
        } else {
            const std::size_t u = factor.other(v);
            if (graph.variable(u).is_evidence()) {
                sub.binary.push_back(f);
                sub.evidence.push_back(u);
            }
        }
    }
    return sub;
}

void clamp_probabilities(std::vector<double>& p) {
    if (p.empty()) return;
    const auto top = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    double excess = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i != top && p[i] < kProbabilityEpsilon) {
            excess += kProbabilityEpsilon - p[i];
            p[i] = kProbabilityEpsilon;
        }
    }
    p[top] -= excess;
}

namespace {

std::vector<double> softmax(const std::vector<double>& scores) {
    const double hi = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double z = 0.0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        p[c] = std::exp(scores[c] - hi);
        z += p[c];
    }
    for (auto& x : p) x /= z;
    return p;
}

}  // namespace

std::vector<double> infer_marginal(const FactorGraph& graph, const Subgraph& sub, const FeatureFits& fits) {
    std::vector<double> score(static_cast<std::size_t>(graph.ways()), 0.0);
    for (std::size_t f : sub.unary) score[static_cast<std::size_t>(graph.factor(f).cls)] += factor_weight(graph, fits, f);
    for (std::size_t i = 0; i < sub.binary.size(); ++i) {
        score[static_cast<std::size_t>(graph.variable(sub.evidence[i]).label)] += factor_weight(graph, fits, sub.binary[i]);
    }
    auto p = softmax(score);
    clamp_probabilities(p);
    return p;
}

std::vector<std::vector<double>> brute_force_joint(const FactorGraph& graph, const FeatureFits& fits) {
    const auto free_vars = graph.inference_variables();
    if (free_vars.size() > kBruteForceLimit) {
        throw std::invalid_argument("brute_force_joint supports at most " + std::to_string(kBruteForceLimit) +
                                    " inference variables");
    }
    const std::size_t ways = static_cast<std::size_t>(graph.ways());
    std::vector<int> assignment(graph.variable_count(), -1);
    for (std::size_t v = 0; v < graph.variable_count(); ++v) assignment[v] = graph.variable(v).label;

    std::vector<double> weights(graph.factor_count());
    for (std::size_t f = 0; f < graph.factor_count(); ++f) weights[f] = factor_weight(graph, fits, f);

    std::size_t total = 1;
    for (std::size_t i = 0; i < free_vars.size(); ++i) total *= ways;

    // Log-weights of every joint state, then a log-sum-exp marginalization.
    std::vector<double> log_weight(total);
    for (std::size_t state = 0; state < total; ++state) {
        std::size_t rest = state;
        for (std::size_t i = 0; i < free_vars.size(); ++i) {
            assignment[free_vars[i]] = static_cast<int>(rest % ways);
            rest /= ways;
        }
        double lw = 0.0;
        for (std::size_t f = 0; f < graph.factor_count(); ++f) {
            const auto& factor = graph.factor(f);
            const bool active = factor.is_unary() ? assignment[factor.first] == factor.cls
                                                  : assignment[factor.first] == assignment[factor.second];
            if (active) lw += weights[f];
        }
        log_weight[state] = lw;
    }
    const double hi = *std::max_element(log_weight.begin(), log_weight.end());

    std::vector<std::vector<double>> marginals(graph.variable_count());
    for (std::size_t v : free_vars) marginals[v].assign(ways, 0.0);
    double z = 0.0;
    for (std::size_t state = 0; state < total; ++state) {
        const double w = std::exp(log_weight[state] - hi);
        z += w;
        std::size_t rest = state;
        for (std::size_t i = 0; i < free_vars.size(); ++i) {
            marginals[free_vars[i]][rest % ways] += w;
            rest /= ways;
        }
    }
    for (std::size_t v : free_vars) {
        for (auto& x : marginals[v]) x /= z;
        clamp_probabilities(marginals[v]);
    }
    return marginals;
}

}  // namespace gml
