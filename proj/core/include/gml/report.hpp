#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gml {

inline constexpr const char* kReportFormat = "gml-report/1";

struct CandidateRecord {
    std::string id;
    double support = 0.0;
    bool operator==(const CandidateRecord&) const = default;
};

struct FinalistRecord {
    std::string id;
    double approx_entropy = 0.0;
    double exact_entropy = 0.0;
    bool operator==(const FinalistRecord&) const = default;
};

struct CommitRecord {
    std::string id;
    int label = -1;
    std::vector<double> probabilities;
    bool operator==(const CommitRecord&) const = default;
};

struct FitSnapshot {
    std::string feature;  // "ccd/<backbone>" or "knn/<backbone>"
    double alpha = 0.0;
    double tau = 0.0;
    bool trusted = false;
    std::size_t pairs = 0;
    bool operator==(const FitSnapshot&) const = default;
};

struct IterationRecord {
    int iteration = 0;
    std::vector<CandidateRecord> candidates;  // top-m by evidential support, ranked
    std::vector<FinalistRecord> finalists;    // top-n by approximate entropy, ranked
    std::vector<CommitRecord> committed;      // in ascending exact-entropy order
    bool refit = false;
    bool boundary_tie = false;  // a finalist outside the batch tied the last committed entropy
    std::vector<FitSnapshot> fits;
    bool operator==(const IterationRecord&) const = default;
};

struct InferenceTrace {
    std::vector<CommitRecord> bootstrap;  // queries auto-labeled before the first iteration
    std::vector<IterationRecord> iterations;
    bool operator==(const InferenceTrace&) const = default;
};

struct ReportConfig {
    int k = 6;
    int m = 50;
    int n = 10;
    int batch = 10;
    int refit_every = 1;
    bool update_centroids = false;
    std::uint64_t seed = 0;
    bool operator==(const ReportConfig&) const = default;
};

struct Prediction {
    std::string id;
    int label = -1;
    std::vector<double> probabilities;
    int iteration = 0;  // 0 for bootstrap auto-labels
    int truth = -1;     // -1 when unknown
    bool operator==(const Prediction&) const = default;
};

struct PredictionReport {
    std::vector<std::string> class_names;
    ReportConfig config;
    std::vector<Prediction> predictions;  // one per query, manifest order
    std::optional<double> accuracy;       // over queries with ground truth
    std::size_t correct = 0;
    std::size_t scored = 0;
    InferenceTrace trace;
    bool operator==(const PredictionReport&) const = default;
};

/// Recomputes correct/scored/accuracy from the predictions' truth fields.
void score_report(PredictionReport& report);

std::string report_to_string(const PredictionReport& report);
PredictionReport report_from_string(const std::string& text);

/// Throws DataError on I/O failure or malformed content.
void save_report(const PredictionReport& report, const std::filesystem::path& path);
PredictionReport load_report(const std::filesystem::path& path);

/// Canonical serialization of the trace alone; two runs are equivalent iff these match.
std::string trace_to_string(const InferenceTrace& trace);

}  // namespace gml
