#include <cmath>
#include <set>

#include "doctest.h"
#include "spillover/spatial.hpp"
#include "test_helpers.hpp"

using namespace spillover;

namespace {

Eigen::MatrixXd line_coords(int n) {
    Eigen::MatrixXd c(n, 2);
    for (int i = 0; i < n; ++i) {
        c(i, 0) = i;
        c(i, 1) = 0;
    }
    return c;
}

Eigen::MatrixXd grid_coords(int rows, int cols) {
    Eigen::MatrixXd c(rows * cols, 2);
    for (int i = 0; i < rows * cols; ++i) {
        c(i, 0) = i % cols;
        c(i, 1) = i / cols;
    }
    return c;
}

}  // namespace

TEST_CASE("distance_matrix basics") {
    Eigen::MatrixXd c(2, 2);
    c << 0, 0, 3, 4;
    DistanceMatrix D = distance_matrix(c);
    CHECK(D.dist(0, 1) == doctest::Approx(5.0).epsilon(1e-15));

    Eigen::MatrixXd g = grid_coords(20, 20);
    DistanceMatrix Dg = distance_matrix(g);
    CHECK(Dg.dist.maxCoeff() == doctest::Approx(19.0 * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("coincident units are allowed and flagged in diagnostics") {
    Eigen::MatrixXd y(2, 1);
    y << 1, 2;
    Eigen::MatrixXi z(2, 1);
    z << 0, 1;
    auto p = testutil::line_panel(y, z);
    p.coords.row(1) = p.coords.row(0);
    auto diag = validate_panel(p);
    CHECK(diag.has_coincident_units);
}

TEST_CASE("circle mean on a 3-unit line") {
    DistanceMatrix D = distance_matrix(line_coords(3));
    Eigen::VectorXd v(3);
    v << 1, 2, 3;

    SUBCASE("d=1 averages the neighbors") {
        SpilloverMapping m = circle_mean_weights(D, 1.0, 0.0);
        auto out = apply_mapping(m, v);
        CHECK(out.values(0) == doctest::Approx(2.0));
        CHECK(out.values(1) == doctest::Approx(2.0));  // (1+3)/2
        CHECK(out.values(2) == doctest::Approx(2.0));
    }
    SUBCASE("d=0 is the identity") {
        SpilloverMapping m = circle_mean_weights(D, 0.0, 0.5);
        auto out = apply_mapping(m, v);
        CHECK((out.values - v).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("no pair at distance 10") {
        CHECK_THROWS_AS(circle_mean_weights(D, 10.0, 0.0), EmptyCircle);
    }
}

TEST_CASE("range mean on a 3-unit line") {
    DistanceMatrix D = distance_matrix(line_coords(3));
    Eigen::VectorXd v(3);
    v << 1, 2, 3;
    SUBCASE("d=1") {
        SpilloverMapping m = range_mean_weights(D, 1.0);
        auto out = apply_mapping(m, v);
        CHECK(out.values(1) == doctest::Approx(2.0));  // units 1 and 3
        CHECK(out.values(0) == doctest::Approx(2.0));  // unit 2 only
    }
    SUBCASE("d beyond the diameter averages all other units") {
        SpilloverMapping m = range_mean_weights(D, 10.0);
        auto out = apply_mapping(m, v);
        CHECK(out.values(0) == doctest::Approx(2.5));
        CHECK(out.values(1) == doctest::Approx(2.0));
        CHECK(out.values(2) == doctest::Approx(1.5));
    }
    SUBCASE("d below the minimum spacing") {
        CHECK_THROWS_AS(range_mean_weights(D, 0.5), EmptyCircle);
    }
}

TEST_CASE("apply_mapping properties") {
    DistanceMatrix D = distance_matrix(grid_coords(5, 5));
    SpilloverMapping m = circle_mean_weights(D, 2.0, 0.5);
    Rng rng(4);
    Eigen::VectorXd x(25), y(25);
    for (int i = 0; i < 25; ++i) {
        x(i) = rng.normal();
        y(i) = rng.normal();
    }
    SUBCASE("row-stochasticity: constants map to constants") {
        auto out = apply_mapping(m, Eigen::VectorXd::Constant(25, 3.25));
        for (int i = 0; i < 25; ++i)
            if (out.mask[i]) CHECK(out.values(i) == doctest::Approx(3.25).epsilon(1e-13));
        for (int i = 0; i < m.n(); ++i)
            if (m.supported[i]) CHECK(std::abs(m.row_sum(i) - 1.0) <= 1e-12);
    }
    SUBCASE("linearity") {
        auto ax_y = apply_mapping(m, 2.5 * x + y);
        auto mx = apply_mapping(m, x);
        auto my = apply_mapping(m, y);
        for (int i = 0; i < 25; ++i)
            if (ax_y.mask[i])
                CHECK(std::abs(ax_y.values(i) - (2.5 * mx.values(i) + my.values(i))) <= 1e-12);
    }
    SUBCASE("identity mapping returns the input") {
        auto out = apply_mapping(identity_mapping(25), x);
        CHECK((out.values - x).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("circle membership equals a set difference of ranges on the lattice") {
    DistanceMatrix D = distance_matrix(grid_coords(6, 6));
    SpilloverMapping circle = circle_mean_weights(D, 2.0, 0.5);
    SpilloverMapping outer = range_mean_weights(D, 2.5);
    SpilloverMapping inner = range_mean_weights(D, 1.5);
    for (int i = 0; i < D.n(); ++i) {
        std::set<int> got(circle.indices[i].begin(), circle.indices[i].end());
        std::set<int> expect(outer.indices[i].begin(), outer.indices[i].end());
        for (int j : inner.indices[i]) expect.erase(j);
        CHECK(got == expect);
    }
}

TEST_CASE("range support is monotone in d") {
    DistanceMatrix D = distance_matrix(grid_coords(6, 6));
    SpilloverMapping a = range_mean_weights(D, 1.0);
    SpilloverMapping b = range_mean_weights(D, 2.0);
    for (int i = 0; i < D.n(); ++i)
        CHECK(a.indices[i].size() <= b.indices[i].size());
}

TEST_CASE("dependency bound") {
    SUBCASE("SUTVA diagonal case") {
        DistanceMatrix D = distance_matrix(grid_coords(4, 4));
        DependencyBound b = dependency_bound(D, 0.0, 0.0, 0.25);
        CHECK(b.max_count == 1);
        CHECK((b.counts.array() == 1).all());
    }
    SUBCASE("3-unit line with radius 1 at d=0") {
        DistanceMatrix D = distance_matrix(line_coords(3));
        DependencyBound b = dependency_bound(D, 1.0, 0.0, 0.5);
        CHECK(b.counts(0) == 2);
        CHECK(b.counts(1) == 3);
        CHECK(b.counts(2) == 2);
    }
    SUBCASE("grid bound matches an enumeration oracle") {
        DistanceMatrix D = distance_matrix(grid_coords(8, 8));
        double radius = 2.0, d = 1.0, bw = 0.5;
        SpilloverMapping m = circle_mean_weights(D, d, bw);
        DependencyBound b = dependency_bound(D, radius, m);
        // Oracle: direct double loop over composer pairs.
        for (int i = 0; i < D.n(); ++i) {
            int count = 0;
            for (int j = 0; j < D.n(); ++j) {
                bool dep = (i == j);
                for (int a : m.indices[i]) {
                    for (int c : m.indices[j]) {
                        if (a == c || D.dist(a, c) < 2 * radius) dep = true;
                        if (dep) break;
                    }
                    if (dep) break;
                }
                count += dep ? 1 : 0;
            }
            CHECK(b.counts(i) == count);
        }
        CHECK(b.ratio_sqrt_n == doctest::Approx(b.max_count / 8.0));
    }
}
