#include "gml/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "gml/errors.hpp"
#include "gml/features.hpp"

namespace gml {

using json = nlohmann::ordered_json;

std::vector<int> nearest_centroid(const Episode& episode) {
    const auto& m = episode.manifest;
    std::vector<Matrix> normalized;
    for (const auto& mat : episode.embeddings) normalized.push_back(preprocess(mat));
    const auto centroids = class_centroids(normalized, m.labels, m.ways);
    std::vector<int> out(m.sample_count(), -1);
    for (std::size_t q : m.query_indices()) {
        int best = 0;
        double best_dist = 0.0;
        for (int c = 0; c < m.ways; ++c) {
            double d = 0.0;
            for (std::size_t b = 0; b < normalized.size(); ++b) {
                d += ccd(normalized[b].row(q), centroids.per_backbone[b].row(static_cast<std::size_t>(c)));
            }
            d /= static_cast<double>(normalized.size());
            if (c == 0 || d < best_dist) {
                best = c;
                best_dist = d;
            }
        }
        out[q] = best;
    }
    return out;
}

std::optional<double> accuracy(const Episode& episode, const std::vector<int>& labels) {
    const auto& m = episode.manifest;
    std::size_t scored = 0, correct = 0;
    for (std::size_t i = 0; i < m.sample_count(); ++i) {
        if (m.truth[i] < 0) continue;
        ++scored;
        if (labels[i] == m.truth[i]) ++correct;
    }
    if (scored == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(scored);
}

std::vector<std::string> verify_trace(const Episode& episode, const PredictionReport& report,
                                      const InferenceConfig& config) {
    std::vector<std::string> problems;
    const auto& m = episode.manifest;
    std::unordered_set<std::string> queries;
    for (std::size_t q : m.query_indices()) queries.insert(m.sample_ids[q]);

    std::unordered_map<std::string, int> committed;  // id -> label
    auto commit = [&](const CommitRecord& c, int iteration) {
        if (!queries.count(c.id)) problems.push_back("committed non-query " + c.id);
        if (!committed.emplace(c.id, c.label).second) {
            problems.push_back("label of " + c.id + " written twice (iteration " + std::to_string(iteration) + ")");
        }
    };
    for (const auto& c : report.trace.bootstrap) commit(c, 0);

    const std::size_t bootstrap = report.trace.bootstrap.size();
    std::size_t remaining = queries.size() - std::min(queries.size(), bootstrap);
    const auto batch = static_cast<std::size_t>(config.batch);
    const std::size_t expected_iterations = (remaining + batch - 1) / batch;
    if (report.trace.iterations.size() != expected_iterations) {
        problems.push_back("expected " + std::to_string(expected_iterations) + " iterations, found " +
                           std::to_string(report.trace.iterations.size()));
    }

    int last_iteration = 0;
    for (const auto& it : report.trace.iterations) {
        const std::string where = " (iteration " + std::to_string(it.iteration) + ")";
        if (it.iteration <= last_iteration) problems.push_back("iteration indices not increasing" + where);
        last_iteration = it.iteration;
        for (const auto& c : it.candidates) {
            if (committed.count(c.id)) problems.push_back("labeled sample " + c.id + " reappeared as candidate" + where);
        }
        const std::size_t want = std::min(batch, remaining);
        if (it.committed.size() != want) {
            problems.push_back("evidence grew by " + std::to_string(it.committed.size()) + " instead of " +
                               std::to_string(want) + where);
        }
        std::set<std::string> chosen;
        for (const auto& c : it.committed) chosen.insert(c.id);
        double worst_committed = -1.0;
        double best_rest = 2.0;
        for (const auto& f : it.finalists) {
            if (chosen.count(f.id)) {
                worst_committed = std::max(worst_committed, f.exact_entropy);
            } else {
                best_rest = std::min(best_rest, f.exact_entropy);
            }
        }
        if (worst_committed > best_rest) problems.push_back("committed a harder finalist before an easier one" + where);
        for (const auto& c : it.committed) {
            if (!std::any_of(it.finalists.begin(), it.finalists.end(), [&](const FinalistRecord& f) { return f.id == c.id; })) {
                problems.push_back("committed " + c.id + " which was not a finalist" + where);
            }
            commit(c, it.iteration);
        }
        remaining -= std::min(remaining, it.committed.size());
    }

    std::unordered_set<std::string> predicted;
    for (const auto& p : report.predictions) {
        if (!predicted.insert(p.id).second) problems.push_back("duplicate prediction for " + p.id);
        const auto it = committed.find(p.id);
        if (it == committed.end()) {
            problems.push_back("query " + p.id + " never labeled");
        } else if (it->second != p.label) {
            problems.push_back("final label of " + p.id + " differs from its committed label");
        }
        double sum = 0.0;
        for (double x : p.probabilities) sum += x;
        if (std::abs(sum - 1.0) > 1e-9) problems.push_back("probabilities of " + p.id + " do not sum to 1");
    }
    if (predicted.size() != queries.size()) problems.push_back("prediction count differs from query count");
    return problems;
}

MeanCi mean_ci(const std::vector<double>& values) {
    MeanCi out;
    if (values.empty()) return out;
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / n;
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.half_width = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return out;
}

void summarize(EvalSummary& summary) {
    std::sort(summary.episodes.begin(), summary.episodes.end(),
              [](const EpisodeScore& a, const EpisodeScore& b) { return a.id < b.id; });
    summary.episode_count = summary.episodes.size();
    std::vector<double> gml, base, gap;
    for (const auto& e : summary.episodes) {
        gml.push_back(e.gml);
        base.push_back(e.baseline);
        gap.push_back(e.gml - e.baseline);
    }
    summary.gml = mean_ci(gml);
    summary.baseline = mean_ci(base);
    summary.gap = mean_ci(gap);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

EpisodeScore run_one(const EpisodeSource& source, const InferenceConfig& config) {
    const Episode episode = source.load();
    if (!episode.manifest.has_ground_truth()) throw DataError("episode " + source.id + " has no ground truth");
    const auto report = gradual_inference(episode, config);
    const auto problems = verify_trace(episode, report, config);
    if (!problems.empty()) throw std::logic_error("trace invariant violated in " + source.id + ": " + problems.front());
    EpisodeScore score;
    score.id = source.id;
    score.gml = report.accuracy.value_or(0.0);
    score.baseline = accuracy(episode, nearest_centroid(episode)).value_or(0.0);
    score.iterations = report.trace.iterations.size();
    score.trace_digest = hex(fnv1a(trace_to_string(report.trace)));
    return score;
}

json summary_to_json(const EvalSummary& s) {
    json episodes = json::array();
    for (const auto& e : s.episodes) {
        episodes.push_back({{"id", e.id},
                            {"gml_accuracy", e.gml},
                            {"baseline_accuracy", e.baseline},
                            {"iterations", e.iterations},
                            {"trace_digest", e.trace_digest}});
    }
    return {{"query_count", s.query_count},
            {"episode_count", s.episode_count},
            {"gml_mean", s.gml.mean},
            {"gml_ci95", s.gml.half_width},
            {"baseline_mean", s.baseline.mean},
            {"baseline_ci95", s.baseline.half_width},
            {"gap_mean", s.gap.mean},
            {"gap_ci95", s.gap.half_width},
            {"episodes", std::move(episodes)}};
}

}  // namespace

EvalSummary evaluate(const std::vector<EpisodeSource>& sources, const InferenceConfig& config, int jobs) {
    config.validate();
    if (sources.empty()) throw DataError("no episodes to evaluate");
    std::vector<EpisodeScore> scores(sources.size());
    std::vector<std::exception_ptr> errors(sources.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < sources.size(); i = next++) {
            try {
                scores[i] = run_one(sources[i], config);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, sources.size());
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    EvalSummary summary;
    summary.episodes = std::move(scores);
    summarize(summary);
    return summary;
}

SyntheticParams benchmark_params() {
    SyntheticParams p;
    p.separation = 0.4;
    p.noise = 1.0;
    return p;
}

std::vector<EpisodeSource> synthetic_sources(const SyntheticParams& params, std::size_t count) {
    std::vector<EpisodeSource> out;
    char buf[48];
    for (std::size_t i = 0; i < count; ++i) {
        SyntheticParams p = params;
        p.seed = params.seed + i;
        std::snprintf(buf, sizeof buf, "synth-%06zu", i);
        out.push_back({buf, [p] { return generate_synthetic(p); }});
    }
    return out;
}

std::string summary_to_string(const std::vector<EvalSummary>& rows) {
    json j;
    j["format"] = "gml-eval/1";
    j["rows"] = json::array();
    for (const auto& r : rows) j["rows"].push_back(summary_to_json(r));
    return j.dump(1);
}

std::vector<EvalSummary> summary_from_string(const std::string& text) {
    std::vector<EvalSummary> rows;
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != "gml-eval/1") throw DataError("unsupported summary format");
        for (const auto& r : j.at("rows")) {
            EvalSummary s;
            r.at("query_count").get_to(s.query_count);
            r.at("episode_count").get_to(s.episode_count);
            r.at("gml_mean").get_to(s.gml.mean);
            r.at("gml_ci95").get_to(s.gml.half_width);
            r.at("baseline_mean").get_to(s.baseline.mean);
            r.at("baseline_ci95").get_to(s.baseline.half_width);
            r.at("gap_mean").get_to(s.gap.mean);
            r.at("gap_ci95").get_to(s.gap.half_width);
            for (const auto& e : r.at("episodes")) {
                EpisodeScore score;
                e.at("id").get_to(score.id);
                e.at("gml_accuracy").get_to(score.gml);
                e.at("baseline_accuracy").get_to(score.baseline);
                e.at("iterations").get_to(score.iterations);
                e.at("trace_digest").get_to(score.trace_digest);
                s.episodes.push_back(std::move(score));
            }
            rows.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed summary: ") + e.what());
    }
    return rows;
}

}  // namespace gml
