#include "gml/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gml/errors.hpp"

namespace gml {

using json = nlohmann::ordered_json;

void to_json(json& j, const CandidateRecord& r) { j = {{"id", r.id}, {"support", r.support}}; }
void from_json(const json& j, CandidateRecord& r) {
    j.at("id").get_to(r.id);
    j.at("support").get_to(r.support);
}

void to_json(json& j, const FinalistRecord& r) {
    j = {{"id", r.id}, {"approx_entropy", r.approx_entropy}, {"exact_entropy", r.exact_entropy}};
}
void from_json(const json& j, FinalistRecord& r) {
    j.at("id").get_to(r.id);
    j.at("approx_entropy").get_to(r.approx_entropy);
    j.at("exact_entropy").get_to(r.exact_entropy);
}

void to_json(json& j, const CommitRecord& r) { j = {{"id", r.id}, {"label", r.label}, {"probabilities", r.probabilities}}; }
void from_json(const json& j, CommitRecord& r) {
    j.at("id").get_to(r.id);
    j.at("label").get_to(r.label);
    j.at("probabilities").get_to(r.probabilities);
}

void to_json(json& j, const FitSnapshot& r) {
    j = {{"feature", r.feature}, {"alpha", r.alpha}, {"tau", r.tau}, {"trusted", r.trusted}, {"pairs", r.pairs}};
}
void from_json(const json& j, FitSnapshot& r) {
    j.at("feature").get_to(r.feature);
    j.at("alpha").get_to(r.alpha);
    j.at("tau").get_to(r.tau);
    j.at("trusted").get_to(r.trusted);
    j.at("pairs").get_to(r.pairs);
}

void to_json(json& j, const IterationRecord& r) {
    j = {{"iteration", r.iteration}, {"candidates", r.candidates}, {"finalists", r.finalists},
         {"committed", r.committed}, {"refit", r.refit},          {"boundary_tie", r.boundary_tie},
         {"fits", r.fits}};
}
void from_json(const json& j, IterationRecord& r) {
    j.at("iteration").get_to(r.iteration);
    j.at("candidates").get_to(r.candidates);
    j.at("finalists").get_to(r.finalists);
    j.at("committed").get_to(r.committed);
    j.at("refit").get_to(r.refit);
    j.at("boundary_tie").get_to(r.boundary_tie);
    j.at("fits").get_to(r.fits);
}

void to_json(json& j, const InferenceTrace& t) { j = {{"bootstrap", t.bootstrap}, {"iterations", t.iterations}}; }
void from_json(const json& j, InferenceTrace& t) {
    j.at("bootstrap").get_to(t.bootstrap);
    j.at("iterations").get_to(t.iterations);
}

void to_json(json& j, const ReportConfig& c) {
    j = {{"k", c.k},
         {"m", c.m},
         {"n", c.n},
         {"batch", c.batch},
         {"refit_every", c.refit_every},
         {"update_centroids", c.update_centroids},
         {"seed", c.seed}};
}
void from_json(const json& j, ReportConfig& c) {
    j.at("k").get_to(c.k);
    j.at("m").get_to(c.m);
    j.at("n").get_to(c.n);
    j.at("batch").get_to(c.batch);
    j.at("refit_every").get_to(c.refit_every);
    j.at("update_centroids").get_to(c.update_centroids);
    j.at("seed").get_to(c.seed);
}

void score_report(PredictionReport& report) {
    report.correct = 0;
    report.scored = 0;
    for (const auto& p : report.predictions) {
        if (p.truth < 0) continue;
        ++report.scored;
        if (p.label == p.truth) ++report.correct;
    }
    report.accuracy.reset();
    if (report.scored > 0) report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.scored);
}

std::string report_to_string(const PredictionReport& report) {
    json j;
    j["format"] = kReportFormat;
    j["classes"] = report.class_names;
    j["config"] = report.config;
    j["accuracy"] = report.accuracy ? json(*report.accuracy) : json(nullptr);
    j["correct"] = report.correct;
    j["scored"] = report.scored;
    json preds = json::array();
    for (const auto& p : report.predictions) {
        json e = {{"id", p.id},
                  {"label", p.label},
                  {"class", report.class_names.at(static_cast<std::size_t>(p.label))},
                  {"probabilities", p.probabilities},
                  {"iteration", p.iteration}};
        if (p.truth >= 0) e["truth"] = report.class_names.at(static_cast<std::size_t>(p.truth));
        preds.push_back(std::move(e));
    }
    j["predictions"] = std::move(preds);
    j["trace"] = report.trace;
    return j.dump(1);
}

PredictionReport report_from_string(const std::string& text) {
    PredictionReport r;
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != kReportFormat) throw DataError("unsupported report format");
        j.at("classes").get_to(r.class_names);
        j.at("config").get_to(r.config);
        for (const auto& e : j.at("predictions")) {
            Prediction p;
            e.at("id").get_to(p.id);
            e.at("label").get_to(p.label);
            e.at("probabilities").get_to(p.probabilities);
            e.at("iteration").get_to(p.iteration);
            if (e.contains("truth")) {
                const auto name = e.at("truth").get<std::string>();
                const auto it = std::find(r.class_names.begin(), r.class_names.end(), name);
                if (it == r.class_names.end()) throw DataError("unknown truth class " + name);
                p.truth = static_cast<int>(it - r.class_names.begin());
            }
            r.predictions.push_back(std::move(p));
        }
        j.at("trace").get_to(r.trace);
        if (!j.at("accuracy").is_null()) r.accuracy = j.at("accuracy").get<double>();
        j.at("correct").get_to(r.correct);
        j.at("scored").get_to(r.scored);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed report: ") + e.what());
    }
    return r;
}

void save_report(const PredictionReport& report, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report " + path.string());
    out << report_to_string(report) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

PredictionReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return report_from_string(ss.str());
}

std::string trace_to_string(const InferenceTrace& trace) { return json(trace).dump(); }

}  // namespace gml
