#include "commands.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "gml/episode.hpp"
#include "gml/errors.hpp"
#include "gml/harness.hpp"
#include "gml/inference.hpp"
#include "gml/report.hpp"

namespace gml::cli {

namespace fs = std::filesystem;

namespace {

struct EngineFlags {
    InferenceConfig config;
    int jobs = 1;
};

void add_engine_flags(CLI::App& cmd, EngineFlags& f) {
    cmd.add_option("--k", f.config.k, "KNN neighbors per sample (recommended 5-7)")->capture_default_str();
    cmd.add_option("--m", f.config.m, "candidates kept by evidential support")->capture_default_str();
    cmd.add_option("--n", f.config.n, "finalists kept by approximate entropy")->capture_default_str();
    cmd.add_option("--batch", f.config.batch, "labels committed per iteration")->capture_default_str();
    cmd.add_option("--refit-every", f.config.refit_every, "iterations between influence refits")->capture_default_str();
    cmd.add_flag("--update-centroids", f.config.update_centroids, "recompute class centroids from all evidence");
    cmd.add_option("--seed", f.config.seed, "seed (recorded; synthetic episodes derive from it)")->capture_default_str();
    cmd.add_option("--jobs", f.jobs, "episodes evaluated in parallel")->capture_default_str();
}

void add_synth_flags(CLI::App& cmd, SyntheticParams& p) {
    cmd.add_option("--ways", p.ways, "classes per episode")->capture_default_str();
    cmd.add_option("--shots", p.shots, "support samples per class")->capture_default_str();
    cmd.add_option("--queries", p.queries, "query samples per class")->capture_default_str();
    cmd.add_option("--dim", p.dim, "embedding dimension")->capture_default_str();
    cmd.add_option("--backbones", p.backbones, "embedding spaces per episode")->capture_default_str();
    cmd.add_option("--separation", p.separation, "norm of the class means")->capture_default_str();
    cmd.add_option("--noise", p.noise, "expected norm of the per-sample noise")->capture_default_str();
}

// Bundle directories matching `pattern`; wildcards are honored in the last component only.
std::vector<fs::path> expand_glob(const std::string& pattern) {
    const fs::path p(pattern);
    const std::string leaf = p.filename().string().empty() ? p.parent_path().filename().string() : p.filename().string();
    const fs::path dir = p.filename().string().empty() ? p.parent_path().parent_path() : p.parent_path();
    std::vector<fs::path> out;
    if (leaf.find_first_of("*?[") == std::string::npos) {
        if (fs::exists(p / "manifest.json")) out.push_back(p);
        return out;
    }
    const fs::path base = dir.empty() ? fs::path(".") : dir;
    if (!fs::is_directory(base)) return out;
    for (const auto& entry : fs::directory_iterator(base)) {
        if (!entry.is_directory()) continue;
        if (fnmatch(leaf.c_str(), entry.path().filename().c_str(), 0) != 0) continue;
        if (fs::exists(entry.path() / "manifest.json")) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<std::size_t> parse_count(const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) return std::nullopt;
    return static_cast<std::size_t>(std::stoull(s));
}

void print_summary(std::ostream& out, const EvalSummary& s) {
    char line[256];
    std::snprintf(line, sizeof line, "%8d %9zu   %7.2f +- %5.2f   %7.2f +- %5.2f   %+6.2f +- %5.2f\n", s.query_count,
                  s.episode_count, 100.0 * s.gml.mean, 100.0 * s.gml.half_width, 100.0 * s.baseline.mean,
                  100.0 * s.baseline.half_width, 100.0 * s.gap.mean, 100.0 * s.gap.half_width);
    out << line;
}

int cmd_run(const std::string& bundle, const EngineFlags& flags, const std::string& output, std::ostream& out) {
    flags.config.validate();
    const Episode episode = load_episode(bundle);
    const auto report = gradual_inference(episode, flags.config);
    const fs::path path = output.empty() ? fs::path(bundle) / "report.json" : fs::path(output);
    save_report(report, path);
    out << "labeled " << report.predictions.size() << " queries in " << report.trace.iterations.size()
        << " iterations; report written to " << path.string() << '\n';
    if (report.accuracy) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "accuracy %.4f (%zu/%zu)\n", *report.accuracy, report.correct, report.scored);
        out << buf;
    }
    return kOk;
}

int cmd_synth(SyntheticParams params, std::uint64_t seed, const std::string& output, bool csv, std::ostream& out) {
    params.seed = seed;
    const Episode episode = generate_synthetic(params);
    save_episode(episode, output, csv);
    out << "wrote " << episode.manifest.sample_count() << " samples x " << episode.backbone_count() << " backbones to "
        << output << '\n';
    return kOk;
}

int cmd_eval(const std::string& source, const EngineFlags& flags, SyntheticParams synth,
             const std::vector<int>& sweep, const std::string& output, std::ostream& out) {
    flags.config.validate();
    synth.seed = flags.config.seed;
    std::vector<EvalSummary> rows;
    if (const auto count = parse_count(source)) {
        if (*count == 0) throw DataError("zero episodes requested");
        std::vector<int> query_counts = sweep.empty() ? std::vector<int>{synth.queries} : sweep;
        for (int q : query_counts) {
            SyntheticParams p = synth;
            p.queries = q;
            auto summary = evaluate(synthetic_sources(p, *count), flags.config, flags.jobs);
            summary.query_count = q;
            rows.push_back(std::move(summary));
        }
    } else {
        if (!sweep.empty()) throw ConfigError("--sweep-queries applies to synthetic episode counts only");
        const auto bundles = expand_glob(source);
        if (bundles.empty()) throw DataError("no episode bundles match " + source);
        std::vector<EpisodeSource> sources;
        for (const auto& b : bundles) sources.push_back({b.filename().string(), [b] { return load_episode(b); }});
        auto summary = evaluate(sources, flags.config, flags.jobs);
        // Sizes may differ between bundles; report one only when they agree.
        std::optional<int> q;
        for (const auto& b : bundles) {
            const int qc = load_episode(b).manifest.query_count;
            if (!q) {
                q = qc;
            } else if (*q != qc) {
                q = 0;
                break;
            }
        }
        summary.query_count = q.value_or(0);
        rows.push_back(std::move(summary));
    }

    out << "queries  episodes   GML acc (%)        baseline (%)       gap (points)\n";
    for (const auto& r : rows) print_summary(out, r);
    if (!output.empty()) {
        const fs::path path(output);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream file(path);
        if (!file) throw DataError("cannot write " + output);
        file << summary_to_string(rows) << '\n';
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gradual machine learning for transductive few-shot classification"};
    app.name("gml");
    app.require_subcommand(1);

    EngineFlags run_flags;
    std::string run_bundle, run_output;
    auto* run_cmd = app.add_subcommand("run", "label the queries of one episode bundle");
    run_cmd->add_option("bundle", run_bundle, "episode bundle directory")->required();
    run_cmd->add_option("-o,--output", run_output, "report path (default <bundle>/report.json)");
    add_engine_flags(*run_cmd, run_flags);

    SyntheticParams synth_params;
    std::uint64_t synth_seed = 0;
    std::string synth_output;
    bool synth_csv = false;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic episode bundle");
    add_synth_flags(*synth_cmd, synth_params);
    synth_cmd->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
    synth_cmd->add_option("-o,--output", synth_output, "bundle directory")->required();
    synth_cmd->add_flag("--csv", synth_csv, "store matrices as CSV instead of raw float32");

    EngineFlags eval_flags;
    SyntheticParams eval_synth = benchmark_params();
    std::string eval_source, eval_output;
    std::vector<int> sweep;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate GML against the nearest-centroid baseline");
    eval_cmd->add_option("source", eval_source, "episode count (synthetic) or bundle directory glob")->required();
    eval_cmd->add_option("-o,--output", eval_output, "summary path");
    eval_cmd->add_option("--sweep-queries", sweep, "query counts to sweep, e.g. 15,30,50")->delimiter(',');
    add_engine_flags(*eval_cmd, eval_flags);
    add_synth_flags(*eval_cmd, eval_synth);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run_cmd) return cmd_run(run_bundle, run_flags, run_output, out);
        if (*synth_cmd) return cmd_synth(synth_params, synth_seed, synth_output, synth_csv, out);
        if (*eval_cmd) return cmd_eval(eval_source, eval_flags, eval_synth, sweep, eval_output, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace gml::cli
