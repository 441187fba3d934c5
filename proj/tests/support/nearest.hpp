#pragma once

#include <cmath>
#include <vector>

#include "gml/episode.hpp"

namespace oracle {

// Nearest support centroid by cosine distance averaged over backbones, written
// without the library's feature code. Returns accuracy over ground-truth queries.
inline double nearest_centroid_accuracy(const gml::Episode& ep) {
    const auto& m = ep.manifest;
    const std::size_t n = m.sample_count();
    auto unit = [](std::vector<double> v) {
        double s = 0;
        for (double x : v) s += x * x;
        for (double& x : v) x /= std::sqrt(s);
        return v;
    };
    std::vector<std::vector<std::vector<double>>> centroid(ep.embeddings.size());
    for (std::size_t b = 0; b < ep.embeddings.size(); ++b) {
        const auto& e = ep.embeddings[b];
        centroid[b].assign(static_cast<std::size_t>(m.ways), std::vector<double>(e.cols(), 0.0));
        std::vector<int> count(static_cast<std::size_t>(m.ways), 0);
        for (std::size_t i = 0; i < n; ++i) {
            if (m.labels[i] < 0) continue;
            const auto u = unit({e.row(i).begin(), e.row(i).end()});
            auto& c = centroid[b][static_cast<std::size_t>(m.labels[i])];
            for (std::size_t j = 0; j < u.size(); ++j) c[j] += u[j];
            ++count[static_cast<std::size_t>(m.labels[i])];
        }
        for (int c = 0; c < m.ways; ++c)
            for (double& x : centroid[b][static_cast<std::size_t>(c)]) x /= count[static_cast<std::size_t>(c)];
    }
    int correct = 0, scored = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (m.truth[i] < 0) continue;
        int best = 0;
        double best_d = 1e300;
        for (int c = 0; c < m.ways; ++c) {
            double d = 0;
            for (std::size_t b = 0; b < ep.embeddings.size(); ++b) {
                const auto x = unit({ep.embeddings[b].row(i).begin(), ep.embeddings[b].row(i).end()});
                const auto y = unit(centroid[b][static_cast<std::size_t>(c)]);
                double dot = 0;
                for (std::size_t j = 0; j < x.size(); ++j) dot += x[j] * y[j];
                d += 1.0 - dot;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        ++scored;
        if (best == m.truth[i]) ++correct;
    }
    return static_cast<double>(correct) / scored;
}

}  // namespace oracle
