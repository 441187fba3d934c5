#include "doctest.h"

#include <cmath>
#include <random>

#include "gml/errors.hpp"
#include "gml/features.hpp"
#include "support/oracles.hpp"

using namespace gml;
using doctest::Approx;

namespace {

Matrix random_matrix(std::mt19937_64& gen, std::size_t rows, std::size_t cols) {
    std::normal_distribution<double> g;
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = g(gen);
    return m;
}

std::vector<std::vector<double>> as_rows(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).begin(), m.row(i).end());
    return out;
}

}  // namespace

TEST_CASE("preprocess") {
    const auto out = preprocess(Matrix(1, 2, {3.0, 4.0}));
    CHECK(out(0, 0) == Approx(0.6).epsilon(1e-15));
    CHECK(out(0, 1) == Approx(0.8).epsilon(1e-15));

    const Matrix unit(1, 3, {0.0, 1.0, 0.0});
    CHECK(preprocess(unit) == unit);

    std::mt19937_64 gen(1);
    const auto m = random_matrix(gen, 10, 7);
    const auto once = preprocess(m), twice = preprocess(once);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) CHECK(std::abs(once(i, j) - twice(i, j)) < 1e-12);

    CHECK_THROWS_AS(preprocess(Matrix(2, 2, {1, 0, 0, 0})), DataError);
}

TEST_CASE("class_centroids") {
    SUBCASE("single support row") {
        const std::vector<Matrix> mats{preprocess(Matrix(2, 2, {2, 0, 0, 5}))};
        const std::vector<int> labels{1, 0};
        const auto c = class_centroids(mats, labels, 2);
        CHECK(c.per_backbone[0](0, 1) == 1.0);
        CHECK(c.per_backbone[0](1, 0) == 1.0);
    }
    SUBCASE("mean of two rows") {
        const std::vector<Matrix> mats{Matrix(3, 2, {1, 0, 0, 1, 1, 1})};
        const std::vector<int> labels{0, 0, -1};
        const auto c = class_centroids(mats, labels, 1);
        CHECK(c.per_backbone[0](0, 0) == 0.5);
        CHECK(c.per_backbone[0](0, 1) == 0.5);
    }
    SUBCASE("row order does not matter") {
        const std::vector<Matrix> a{Matrix(3, 2, {1, 2, 3, 4, 5, 6})};
        const std::vector<Matrix> b{Matrix(3, 2, {5, 6, 1, 2, 3, 4})};
        CHECK(class_centroids(a, std::vector<int>{0, 1, 0}, 2).per_backbone ==
              class_centroids(b, std::vector<int>{0, 0, 1}, 2).per_backbone);
    }
    SUBCASE("empty class") {
        const std::vector<Matrix> mats{Matrix(2, 2, {1, 0, 0, 1})};
        CHECK_THROWS_AS(class_centroids(mats, std::vector<int>{0, 0}, 2), DataError);
    }
}

TEST_CASE("ccd") {
    const std::vector<double> x{1, 0}, y{0, 1}, z{-1, 0};
    CHECK(ccd(x, x) == 0.0);
    CHECK(ccd(x, y) == Approx(1.0).epsilon(1e-15));
    CHECK(ccd(x, z) == 2.0);
    const std::vector<double> zero{0, 0};
    CHECK_THROWS_AS(ccd(x, zero), DataError);
}

TEST_CASE("knn_graph examples") {
    SUBCASE("three samples, k = 1") {
        // Unit vectors with Gram matrix s(a,b) = 0.9, s(a,c) = 0.1, s(b,c) = 0 (Cholesky factor rows).
        const double b1 = std::sqrt(1 - 0.81);
        const double c1 = (0.0 - 0.9 * 0.1) / b1;
        const double c2 = std::sqrt(1 - 0.01 - c1 * c1);
        const Matrix m(3, 3, {1, 0, 0, 0.9, b1, 0, 0.1, c1, c2});
        const auto edges = knn_graph(m, 1);
        REQUIRE(edges.size() == 2);
        CHECK(edges[0].a == 0);
        CHECK(edges[0].b == 1);
        CHECK(edges[0].similarity == Approx(0.9).epsilon(1e-12));
        CHECK(edges[1].a == 0);
        CHECK(edges[1].b == 2);
        CHECK(edges[1].similarity == Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("k = n - 1 gives the complete graph") {
        std::mt19937_64 gen(2);
        const auto m = preprocess(random_matrix(gen, 6, 4));
        CHECK(knn_graph(m, 5).size() == 15);
    }
    SUBCASE("duplicate rows are linked with similarity 1") {
        const Matrix m = preprocess(Matrix(4, 2, {1, 0, 1, 0, 0, 1, -1, 1}));
        const auto edges = knn_graph(m, 1);
        REQUIRE_FALSE(edges.empty());
        CHECK(edges[0].a == 0);
        CHECK(edges[0].b == 1);
        CHECK(edges[0].similarity == Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("k out of range") {
        const Matrix m = preprocess(Matrix(3, 2, {1, 0, 0, 1, 1, 1}));
        CHECK_THROWS_AS(knn_graph(m, 0), ConfigError);
        CHECK_THROWS_AS(knn_graph(m, 3), ConfigError);
    }
}

TEST_CASE("knn_graph matches brute-force enumeration") {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(trial);
        const int k = 1 + trial % 7;
        if (static_cast<std::size_t>(k) >= n) continue;
        const auto m = preprocess(random_matrix(gen, n, 6));
        const auto edges = knn_graph(m, k);
        const auto expected = oracle::knn_edges(as_rows(m), k);
        REQUIRE(edges.size() == expected.size());
        std::size_t i = 0;
        for (const auto& [a, b] : expected) {
            CHECK(edges[i].a == a);
            CHECK(edges[i].b == b);
            CHECK(std::abs(edges[i].similarity - oracle::cosine(as_rows(m)[a], as_rows(m)[b])) < 1e-12);
            ++i;
        }
        // Edge count bounds for a symmetric union.
        CHECK(edges.size() >= (n * static_cast<std::size_t>(k) + 1) / 2);
        CHECK(edges.size() <= n * static_cast<std::size_t>(k));
    }
}

TEST_CASE("ccd and knn are scale invariant") {
    std::mt19937_64 gen(4);
    const auto m = random_matrix(gen, 12, 5);
    Matrix scaled = m;
    std::uniform_real_distribution<double> u(0.1, 50.0);
    for (std::size_t i = 0; i < scaled.rows(); ++i) {
        const double s = u(gen);
        for (auto& v : scaled.row(i)) v *= s;
    }
    const auto a = preprocess(m), b = preprocess(scaled);
    const auto ea = knn_graph(a, 3), eb = knn_graph(b, 3);
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
        CHECK(ea[i].a == eb[i].a);
        CHECK(ea[i].b == eb[i].b);
    }
    for (std::size_t i = 1; i < m.rows(); ++i) CHECK(std::abs(ccd(m.row(i), m.row(0)) - ccd(scaled.row(i), scaled.row(0))) < 1e-12);
}
