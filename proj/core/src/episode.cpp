#include "gml/episode.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "gml/errors.hpp"
#include "rng.hpp"

namespace gml {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kCsvValueLimit = 10000;

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Matrix read_f32(const fs::path& path, std::size_t rows, std::size_t dim) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("data file not found: " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    const std::size_t expected = rows * dim * sizeof(float);
    if (bytes != expected) {
        throw DataError("dimension mismatch in " + path.filename().string() + ": expected " +
                        std::to_string(rows) + " rows x " + std::to_string(dim) + " float32 (" +
                        std::to_string(expected) + " bytes), found " + std::to_string(bytes) + " bytes");
    }
    in.seekg(0);
    std::vector<std::uint32_t> raw(rows * dim);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
    if (!in) throw DataError("short read from " + path.string());
    std::vector<double> values(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::uint32_t word = raw[i];
        if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
        values[i] = static_cast<double>(std::bit_cast<float>(word));
    }
    return Matrix(rows, dim, std::move(values));
}

void write_f32(const fs::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (double v : m.data()) {
        std::uint32_t word = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
        out.write(reinterpret_cast<const char*>(&word), sizeof(word));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

Matrix read_csv(const fs::path& path, std::size_t rows, std::size_t dim) {
    if (rows * dim >= kCsvValueLimit) {
        throw DataError("CSV matrices must hold fewer than " + std::to_string(kCsvValueLimit) +
                        " values; use .f32 for " + path.filename().string());
    }
    if (!fs::exists(path)) throw DataError("data file not found: " + path.string());
    const std::string text = read_text(path);
    std::vector<double> values;
    values.reserve(rows * dim);
    std::size_t row = 0;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t cols = 0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            double v = 0.0;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{}) {
                throw DataError("unparsable value in " + path.filename().string() + " row " +
                                std::to_string(row));
            }
            values.push_back(v);
            ++cols;
            p = next;
            while (p < end && (*p == ' ' || *p == '\t')) ++p;
            if (p < end) {
                if (*p != ',') {
                    throw DataError("expected ',' in " + path.filename().string() + " row " +
                                    std::to_string(row));
                }
                ++p;
            }
        }
        if (cols != dim) {
            throw DataError("dimension mismatch in " + path.filename().string() + " row " +
                            std::to_string(row) + ": expected " + std::to_string(dim) + " values, found " +
                            std::to_string(cols));
        }
        ++row;
    }
    if (row != rows) {
        throw DataError("dimension mismatch in " + path.filename().string() + ": expected " +
                        std::to_string(rows) + " rows, found " + std::to_string(row));
    }
    return Matrix(rows, dim, std::move(values));
}

void write_csv(const fs::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << m(i, j);
        }
        out << '\n';
    }
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Resolves a manifest label (class name string or integer index) to a dense index.
int resolve_label(const json& value, const std::vector<std::string>& class_names, const std::string& id) {
    if (value.is_number_integer()) {
        const auto idx = value.get<long long>();
        if (idx < 0 || idx >= static_cast<long long>(class_names.size())) {
            throw DataError("class index out of range for sample " + id + ": " + std::to_string(idx));
        }
        return static_cast<int>(idx);
    }
    if (value.is_string()) {
        const auto name = value.get<std::string>();
        auto it = std::find(class_names.begin(), class_names.end(), name);
        if (it == class_names.end()) throw DataError("unknown class '" + name + "' for sample " + id);
        return static_cast<int>(it - class_names.begin());
    }
    throw DataError("label for sample " + id + " must be a string or integer");
}

template <typename T>
T require(const json& j, const char* key) {
    if (!j.contains(key)) throw DataError(std::string("manifest missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(std::string("manifest field '") + key + "' has the wrong type: " + e.what());
    }
}

EpisodeManifest parse_manifest(const json& j) {
    EpisodeManifest m;
    const auto format = require<std::string>(j, "format");
    if (format != kEpisodeFormat) throw DataError("unsupported manifest format '" + format + "'");
    m.ways = require<int>(j, "ways");
    m.shots = require<int>(j, "shots");
    m.query_count = require<int>(j, "query_count");
    if (m.ways <= 0 || m.shots <= 0 || m.query_count <= 0) {
        throw DataError("ways, shots and query_count must be positive");
    }
    if (!j.contains("backbones") || !j["backbones"].is_array()) {
        throw DataError("manifest missing field 'backbones'");
    }
    for (const auto& b : j["backbones"]) {
        BackboneSpec spec;
        spec.name = require<std::string>(b, "name");
        const auto dim = require<long long>(b, "dim");
        if (dim <= 0) throw DataError("backbone " + spec.name + " has non-positive dim");
        spec.dim = static_cast<std::size_t>(dim);
        spec.data_file = require<std::string>(b, "data_file");
        m.backbones.push_back(std::move(spec));
    }
    if (m.backbones.empty()) throw DataError("manifest lists no backbones");
    m.sample_ids = require<std::vector<std::string>>(j, "sample_ids");
    const auto query_ids = require<std::vector<std::string>>(j, "query_ids");
    if (!j.contains("support_labels") || !j["support_labels"].is_object()) {
        throw DataError("manifest missing field 'support_labels'");
    }
    const json& support = j["support_labels"];

    if (j.contains("classes")) {
        m.class_names = require<std::vector<std::string>>(j, "classes");
    } else {
        bool all_int = true;
        std::set<std::string> names;
        for (const auto& [id, label] : support.items()) {
            if (!label.is_number_integer()) all_int = false;
            if (label.is_string()) names.insert(label.get<std::string>());
        }
        if (all_int) {
            for (int c = 0; c < m.ways; ++c) m.class_names.push_back(std::to_string(c));
        } else {
            m.class_names.assign(names.begin(), names.end());
        }
    }
    if (static_cast<int>(m.class_names.size()) != m.ways) {
        throw DataError("class count mismatch: ways = " + std::to_string(m.ways) + " but " +
                        std::to_string(m.class_names.size()) + " classes found");
    }

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < m.sample_ids.size(); ++i) {
        if (!index.emplace(m.sample_ids[i], i).second) {
            throw DataError("duplicate sample id " + m.sample_ids[i]);
        }
    }
    m.labels.assign(m.sample_ids.size(), -1);
    m.truth.assign(m.sample_ids.size(), -1);
    std::vector<char> seen(m.sample_ids.size(), 0);
    for (const auto& [id, label] : support.items()) {
        auto it = index.find(id);
        if (it == index.end()) throw DataError("support sample " + id + " is not listed in sample_ids");
        m.labels[it->second] = resolve_label(label, m.class_names, id);
        seen[it->second] = 1;
    }
    std::unordered_set<std::string> query_set;
    for (const auto& id : query_ids) {
        auto it = index.find(id);
        if (it == index.end()) throw DataError("query sample " + id + " is not listed in sample_ids");
        if (!query_set.insert(id).second) throw DataError("duplicate sample id " + id);
        if (m.labels[it->second] >= 0) throw DataError("sample " + id + " is both support and query");
        seen[it->second] = 1;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) throw DataError("sample " + m.sample_ids[i] + " is neither support nor query");
    }
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
        for (const auto& [id, label] : j["ground_truth"].items()) {
            if (!query_set.count(id)) throw DataError("ground truth given for non-query sample " + id);
            m.truth[index.at(id)] = resolve_label(label, m.class_names, id);
        }
    }
    return m;
}

json manifest_to_json(const EpisodeManifest& m) {
    json j;
    j["format"] = kEpisodeFormat;
    j["ways"] = m.ways;
    j["shots"] = m.shots;
    j["query_count"] = m.query_count;
    j["classes"] = m.class_names;
    j["backbones"] = json::array();
    for (const auto& b : m.backbones) {
        j["backbones"].push_back({{"name", b.name}, {"dim", b.dim}, {"data_file", b.data_file}});
    }
    j["sample_ids"] = m.sample_ids;
    json support = json::object();
    json queries = json::array();
    json truth = json::object();
    for (std::size_t i = 0; i < m.sample_ids.size(); ++i) {
        if (m.labels[i] >= 0) {
            support[m.sample_ids[i]] = m.class_names[m.labels[i]];
        } else {
            queries.push_back(m.sample_ids[i]);
            if (m.truth[i] >= 0) truth[m.sample_ids[i]] = m.class_names[m.truth[i]];
        }
    }
    j["support_labels"] = std::move(support);
    j["query_ids"] = std::move(queries);
    if (!truth.empty()) j["ground_truth"] = std::move(truth);
    return j;
}

}  // namespace

bool EpisodeManifest::has_ground_truth() const {
    return std::any_of(truth.begin(), truth.end(), [](int t) { return t >= 0; });
}

std::vector<std::size_t> EpisodeManifest::support_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) out.push_back(i);
    return out;
}

std::vector<std::size_t> EpisodeManifest::query_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0) out.push_back(i);
    return out;
}

void validate_episode(const Episode& episode) {
    const auto& m = episode.manifest;
    const std::size_t n = m.sample_ids.size();
    if (m.ways <= 0 || m.shots <= 0 || m.query_count <= 0) {
        throw DataError("ways, shots and query_count must be positive");
    }
    if (static_cast<int>(m.class_names.size()) != m.ways) throw DataError("class count mismatch");
    if (m.labels.size() != n || m.truth.size() != n) throw DataError("label arrays do not match sample count");

    std::unordered_set<std::string> ids;
    for (const auto& id : m.sample_ids)
        if (!ids.insert(id).second) throw DataError("duplicate sample id " + id);

    std::vector<int> per_class(m.ways, 0);
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (m.labels[i] >= m.ways) throw DataError("class index out of range for sample " + m.sample_ids[i]);
        if (m.labels[i] >= 0) {
            ++per_class[m.labels[i]];
            ++support;
            if (m.truth[i] >= 0) throw DataError("ground truth given for support sample " + m.sample_ids[i]);
        }
        if (m.truth[i] >= m.ways) throw DataError("ground-truth class out of range for " + m.sample_ids[i]);
    }
    if (support != static_cast<std::size_t>(m.ways) * m.shots) {
        throw DataError("class count mismatch: expected " + std::to_string(m.ways * m.shots) +
                        " support samples, found " + std::to_string(support));
    }
    for (int c = 0; c < m.ways; ++c) {
        if (per_class[c] != m.shots) {
            throw DataError("class count mismatch: class " + m.class_names[c] + " has " +
                            std::to_string(per_class[c]) + " support samples, expected " +
                            std::to_string(m.shots));
        }
    }
    if (n - support != static_cast<std::size_t>(m.ways) * m.query_count) {
        throw DataError("class count mismatch: expected " + std::to_string(m.ways * m.query_count) +
                        " queries, found " + std::to_string(n - support));
    }

    if (episode.embeddings.size() != m.backbones.size()) {
        throw DataError("expected one embedding matrix per backbone");
    }
    for (std::size_t b = 0; b < m.backbones.size(); ++b) {
        const auto& mat = episode.embeddings[b];
        const auto& spec = m.backbones[b];
        if (mat.rows() != n || mat.cols() != spec.dim) {
            throw DataError("dimension mismatch in " + spec.data_file + ": expected " + std::to_string(n) +
                            " x " + std::to_string(spec.dim));
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = mat.row(i);
            bool zero = true;
            for (double v : row) {
                if (!std::isfinite(v)) {
                    throw DataError("non-finite value for sample " + m.sample_ids[i] + " in backbone " + spec.name);
                }
                if (v != 0.0) zero = false;
            }
            if (zero) {
                throw DataError("zero vector for sample " + m.sample_ids[i] + " (row " + std::to_string(i) +
                                ") in backbone " + spec.name);
            }
        }
    }
}

Episode load_episode(const fs::path& bundle) {
    const fs::path manifest_path = bundle / "manifest.json";
    if (!fs::exists(manifest_path)) throw DataError("manifest not found: " + manifest_path.string());
    json j;
    try {
        j = json::parse(read_text(manifest_path));
    } catch (const json::parse_error& e) {
        throw DataError("manifest is not valid JSON: " + std::string(e.what()));
    }
    Episode ep;
    ep.manifest = parse_manifest(j);
    const std::size_t n = ep.manifest.sample_ids.size();
    for (const auto& spec : ep.manifest.backbones) {
        const fs::path path = bundle / spec.data_file;
        if (ends_with(spec.data_file, ".f32")) {
            ep.embeddings.push_back(read_f32(path, n, spec.dim));
        } else if (ends_with(spec.data_file, ".csv")) {
            ep.embeddings.push_back(read_csv(path, n, spec.dim));
        } else {
            throw DataError("unsupported data file extension: " + spec.data_file);
        }
    }
    validate_episode(ep);
    return ep;
}

void save_episode(const Episode& episode, const fs::path& bundle, bool csv) {
    validate_episode(episode);
    fs::create_directories(bundle);
    EpisodeManifest m = episode.manifest;
    for (std::size_t b = 0; b < m.backbones.size(); ++b) {
        m.backbones[b].data_file = m.backbones[b].name + (csv ? ".csv" : ".f32");
        const fs::path path = bundle / m.backbones[b].data_file;
        if (csv) {
            write_csv(path, episode.embeddings[b]);
        } else {
            write_f32(path, episode.embeddings[b]);
        }
    }
    std::ofstream out(bundle / "manifest.json");
    if (!out) throw DataError("cannot write " + (bundle / "manifest.json").string());
    out << manifest_to_json(m).dump(2) << '\n';
}

Episode generate_synthetic(const SyntheticParams& p) {
    if (p.ways <= 0 || p.shots <= 0 || p.queries <= 0 || p.dim <= 0 || p.backbones <= 0) {
        throw ConfigError("synthetic episode counts must be positive");
    }
    if (!(p.noise > 0.0) || !(p.separation >= 0.0) || !std::isfinite(p.noise) || !std::isfinite(p.separation)) {
        throw ConfigError("synthetic episode needs noise > 0 and separation >= 0");
    }
    detail::Rng rng(p.seed);
    const auto dim = static_cast<std::size_t>(p.dim);
    const std::size_t support = static_cast<std::size_t>(p.ways) * p.shots;
    const std::size_t queries = static_cast<std::size_t>(p.ways) * p.queries;
    const std::size_t n = support + queries;

    Episode ep;
    auto& m = ep.manifest;
    m.ways = p.ways;
    m.shots = p.shots;
    m.query_count = p.queries;
    for (int c = 0; c < p.ways; ++c) m.class_names.push_back("c" + std::to_string(c));

    // Row layout: support rows class-major, then queries in a seeded shuffle.
    std::vector<int> row_class;
    for (int c = 0; c < p.ways; ++c)
        for (int s = 0; s < p.shots; ++s) row_class.push_back(c);
    std::vector<int> query_class;
    for (int c = 0; c < p.ways; ++c)
        for (int q = 0; q < p.queries; ++q) query_class.push_back(c);
    for (std::size_t i = query_class.size(); i > 1; --i) {
        std::swap(query_class[i - 1], query_class[rng.below(i)]);
    }
    row_class.insert(row_class.end(), query_class.begin(), query_class.end());

    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        if (i < support) {
            std::snprintf(buf, sizeof buf, "s%04zu", i);
            m.labels.push_back(row_class[i]);
            m.truth.push_back(-1);
        } else {
            std::snprintf(buf, sizeof buf, "q%04zu", i - support);
            m.labels.push_back(-1);
            m.truth.push_back(row_class[i]);
        }
        m.sample_ids.emplace_back(buf);
    }

    const double sigma = p.noise / std::sqrt(static_cast<double>(dim));
    for (int b = 0; b < p.backbones; ++b) {
        BackboneSpec spec{"bb" + std::to_string(b), dim, "bb" + std::to_string(b) + ".f32"};
        m.backbones.push_back(spec);

        Matrix means(static_cast<std::size_t>(p.ways), dim);
        for (int c = 0; c < p.ways; ++c) {
            auto row = means.row(static_cast<std::size_t>(c));
            double norm2 = 0.0;
            for (auto& v : row) {
                v = rng.normal();
                norm2 += v * v;
            }
            const double scale = p.separation / std::sqrt(norm2);
            for (auto& v : row) v *= scale;
        }
        Matrix x(n, dim);
        for (std::size_t i = 0; i < n; ++i) {
            const auto mean = means.row(static_cast<std::size_t>(row_class[i]));
            auto row = x.row(i);
            for (std::size_t d = 0; d < dim; ++d) row[d] = mean[d] + sigma * rng.normal();
        }
        // Round through float32 so a saved bundle reloads to the identical episode.
        std::vector<double> rounded(x.data().begin(), x.data().end());
        for (auto& v : rounded) v = static_cast<double>(static_cast<float>(v));
        ep.embeddings.emplace_back(n, dim, std::move(rounded));
    }
    validate_episode(ep);
    return ep;
}

}  // namespace gml
