#include "gml/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gml/errors.hpp"

namespace gml {

void InferenceConfig::validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (batch < 1) throw ConfigError("batch must be at least 1");
    if (batch > n) throw ConfigError("constraint violated: batch <= n (batch = " + std::to_string(batch) +
                                     ", n = " + std::to_string(n) + ")");
    if (n > m) throw ConfigError("constraint violated: n <= m (n = " + std::to_string(n) + ", m = " +
                                 std::to_string(m) + ")");
    if (refit_every < 1) throw ConfigError("refit_every must be at least 1");
    if (fit.max_iterations < 1 || !(fit.tolerance > 0.0)) throw ConfigError("invalid optimizer settings");
    if (!(fit.tau_min > 0.0) || !(fit.tau_max >= fit.tau_min)) throw ConfigError("invalid tau box");
}

ReportConfig InferenceConfig::echo() const { return {k, m, n, batch, refit_every, update_centroids, seed}; }

double binary_entropy(double p_max) {
    const double p = std::clamp(p_max, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

double certainty(double entropy) { return 1.0 / entropy; }

std::vector<int> bootstrap(const Episode& episode, std::span<const Matrix> normalized, const CentroidSet& centroids) {
    const auto& m = episode.manifest;
    std::vector<int> labels = m.labels;
    if (m.shots != 1) return labels;

    const auto queries = m.query_indices();
    const double backbones = static_cast<double>(normalized.size());
    for (int c = 0; c < m.ways; ++c) {
        std::size_t best = 0;
        double best_dist = 0.0;
        bool found = false;
        for (std::size_t q : queries) {
            if (labels[q] >= 0) continue;
            double dist = 0.0;
            for (std::size_t b = 0; b < normalized.size(); ++b) {
                dist += ccd(normalized[b].row(q), centroids.per_backbone[b].row(static_cast<std::size_t>(c)));
            }
            dist /= backbones;
            if (!found || dist < best_dist) {
                best = q;
                best_dist = dist;
                found = true;
            }
        }
        if (found) labels[best] = c;
    }
    return labels;
}

double approximate_entropy(const FactorGraph& graph, std::size_t v, const FeatureFits& fits) {
    const auto p = infer_marginal(graph, subgraph(graph, v), fits);
    return binary_entropy(*std::max_element(p.begin(), p.end()));
}

namespace {

std::vector<FitSnapshot> snapshot(const FeatureFits& fits, const Episode& episode) {
    const auto& m = episode.manifest;
    std::vector<FitSnapshot> out;
    for (std::size_t b = 0; b < m.backbones.size(); ++b) {
        const auto& f = fits.ccd_fit(static_cast<int>(b));
        out.push_back({"ccd/" + m.backbones[b].name, f.params.alpha, f.params.tau, f.trusted, f.count});
    }
    for (std::size_t b = 0; b < m.backbones.size(); ++b) {
        const auto& f = fits.knn_fit(static_cast<int>(b));
        out.push_back({"knn/" + m.backbones[b].name, f.params.alpha, f.params.tau, f.trusted, f.count});
    }
    return out;
}

std::vector<double> one_hot(int ways, int cls) {
    std::vector<double> p(static_cast<std::size_t>(ways), 0.0);
    p[static_cast<std::size_t>(cls)] = 1.0;
    clamp_probabilities(p);
    return p;
}

int argmax(const std::vector<double>& p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace

PredictionReport gradual_inference(const Episode& episode, const InferenceConfig& config) {
    config.validate();
    validate_episode(episode);
    const auto& manifest = episode.manifest;
    const std::size_t samples = manifest.sample_count();
    if (static_cast<std::size_t>(config.k) >= samples) {
        throw ConfigError("k = " + std::to_string(config.k) + " needs more than " + std::to_string(samples) + " samples");
    }

    std::vector<Matrix> normalized;
    for (const auto& mat : episode.embeddings) normalized.push_back(preprocess(mat));

    const auto support_centroids = class_centroids(normalized, manifest.labels, manifest.ways);
    const auto labels = bootstrap(episode, normalized, support_centroids);
    auto centroids = class_centroids(normalized, labels, manifest.ways);
    centroids.support_only = labels == manifest.labels;

    std::vector<std::vector<KnnEdge>> edges;
    for (const auto& mat : normalized) edges.push_back(knn_graph(mat, config.k));
    FactorGraph graph = build_graph(normalized, centroids, edges, labels, manifest.ways);

    PredictionReport report;
    report.class_names = manifest.class_names;
    report.config = config.echo();

    std::vector<std::vector<double>> final_probs(samples);
    std::vector<int> labeled_at(samples, -1);
    for (std::size_t v = 0; v < samples; ++v) {
        if (labels[v] >= 0 && manifest.labels[v] < 0) {
            final_probs[v] = one_hot(manifest.ways, labels[v]);
            labeled_at[v] = 0;
            report.trace.bootstrap.push_back({manifest.sample_ids[v], labels[v], final_probs[v]});
        }
    }

    FeatureFits fits = fit_features(graph, config.fit);
    for (int iteration = 1;; ++iteration) {
        const auto unlabeled = graph.inference_variables();
        if (unlabeled.empty()) break;
        IterationRecord record;
        record.iteration = iteration;

        // Screen by evidential support.
        std::vector<EvidentialSupport> supports;
        supports.reserve(unlabeled.size());
        for (std::size_t v : unlabeled) supports.push_back(evidential_support(graph, v, fits));
        std::stable_sort(supports.begin(), supports.end(), [](const EvidentialSupport& a, const EvidentialSupport& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.variable < b.variable;
        });
        const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(config.m), unlabeled.size());
        supports.resize(m);
        for (const auto& s : supports) record.candidates.push_back({manifest.sample_ids[s.variable], s.score});

        // Rank candidates by approximate entropy under the current fits.
        struct Ranked {
            std::size_t variable;
            double approx;
            double exact = 0.0;
            std::vector<double> probabilities;
        };
        std::vector<Ranked> ranked;
        for (const auto& s : supports) ranked.push_back({s.variable, approximate_entropy(graph, s.variable, fits), 0.0, {}});
        std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
            if (a.approx != b.approx) return a.approx < b.approx;
            return a.variable < b.variable;
        });
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(config.n), ranked.size());
        ranked.resize(n);

        // Refit on the current evidence, then exact subgraph inference for the finalists.
        if ((iteration - 1) % config.refit_every == 0) {
            fits = fit_features(graph, config.fit);
            record.refit = true;
        }
        for (auto& r : ranked) {
            r.probabilities = infer_marginal(graph, subgraph(graph, r.variable), fits);
            r.exact = binary_entropy(*std::max_element(r.probabilities.begin(), r.probabilities.end()));
            record.finalists.push_back({manifest.sample_ids[r.variable], r.approx, r.exact});
        }
        std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
            if (a.exact != b.exact) return a.exact < b.exact;
            return a.variable < b.variable;
        });
        const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch), ranked.size());
        record.boundary_tie = batch < ranked.size() && ranked[batch].exact == ranked[batch - 1].exact;

        for (std::size_t i = 0; i < batch; ++i) {
            const auto& r = ranked[i];
            const int label = argmax(r.probabilities);
            graph.commit_label(r.variable, label);
            final_probs[r.variable] = r.probabilities;
            labeled_at[r.variable] = iteration;
            record.committed.push_back({manifest.sample_ids[r.variable], label, r.probabilities});
        }

        if (config.update_centroids) {
            std::vector<int> evidence(samples, -1);
            for (std::size_t v = 0; v < samples; ++v) evidence[v] = graph.variable(v).label;
            centroids = class_centroids(normalized, evidence, manifest.ways);
            centroids.support_only = false;
            graph.set_ccd_values(normalized, centroids);
        }
        record.fits = snapshot(fits, episode);
        report.trace.iterations.push_back(std::move(record));
    }

    for (std::size_t v = 0; v < samples; ++v) {
        if (manifest.labels[v] >= 0) continue;
        Prediction p;
        p.id = manifest.sample_ids[v];
        p.label = graph.variable(v).label;
        p.probabilities = final_probs[v];
        p.iteration = labeled_at[v];
        p.truth = manifest.truth[v];
        report.predictions.push_back(std::move(p));
    }
    score_report(report);
    return report;
}

}  // namespace gml
