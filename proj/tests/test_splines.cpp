#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "podbsbem/sampling.hpp"
#include "podbsbem/splines.hpp"

using namespace podbsbem;

TEST_CASE("build_space produces open uniform knot vectors") {
    const BSplineSpace space = build_space({2}, {3});
    REQUIRE(space.knots.size() == 1);
    const std::vector<double> expected{0.0, 0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0, 1.0};
    REQUIRE(space.knots[0].size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(space.knots[0][i] == Catch::Approx(expected[i]).margin(1e-15));
    CHECK(space.element_count() == 3);
    CHECK(space.local_count() == 3);
    CHECK(space.global_count() == 5);

    const BSplineSpace cube = build_space({2, 2, 2}, {5, 5, 5});
    CHECK(cube.global_count() == 343);
    CHECK(cube.element_count() == 125);
    CHECK(cube.local_count() == 27);

    CHECK_THROWS_AS(build_space({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(build_space({2}, {2, 2}), std::invalid_argument);
    CHECK_THROWS_AS(build_space({0}, {2}), std::invalid_argument);
    CHECK_THROWS_AS(build_space({2}, {0}), std::invalid_argument);
}

TEST_CASE("element location uses half-open spans with a closed right end") {
    const BSplineSpace space = build_space({2}, {4});
    CHECK(locate_element_1d(space, 0, 0.0) == 0);
    CHECK(locate_element_1d(space, 0, 0.24999) == 0);
    CHECK(locate_element_1d(space, 0, 0.25) == 1);
    CHECK(locate_element_1d(space, 0, 0.5) == 2);
    CHECK(locate_element_1d(space, 0, 0.999) == 3);
    CHECK(locate_element_1d(space, 0, 1.0) == 3);
    CHECK_THROWS_AS(locate_element_1d(space, 0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(locate_element_1d(space, 0, 1.1), std::invalid_argument);

    const BSplineSpace plane = build_space({1, 2}, {3, 2});
    Eigen::VectorXd xi(2);
    xi << 0.4, 0.7;
    const auto element = locate_element(plane, xi);
    CHECK(element == std::vector<int>{1, 1});
}

TEST_CASE("element numbering round-trips with dimension 1 fastest") {
    const BSplineSpace space = build_space({1, 1, 1}, {2, 3, 4});
    for (std::int64_t linear = 0; linear < space.element_count(); ++linear) {
        const auto multi = element_multi_index(space, linear);
        CHECK(element_linear_index(space, multi) == linear);
    }
    CHECK(element_multi_index(space, 1) == std::vector<int>{1, 0, 0});
    CHECK(element_multi_index(space, 2) == std::vector<int>{0, 1, 0});
    CHECK_THROWS_AS(element_multi_index(space, 24), std::invalid_argument);
    CHECK_THROWS_AS(element_linear_index(space, {2, 0, 0}), std::invalid_argument);
}

TEST_CASE("local-to-global map matches the tensor layout") {
    const BSplineSpace space = build_space({1, 1}, {2, 2});
    const std::vector<int> element{1, 0};
    std::vector<std::int64_t> globals;
    for (int j = 0; j < space.local_count(); ++j) globals.push_back(ien(space, element, j));
    CHECK(globals == std::vector<std::int64_t>{1, 2, 4, 5});
    CHECK_THROWS_AS(ien(space, element, -1), std::invalid_argument);
    CHECK_THROWS_AS(ien(space, element, space.local_count()), std::invalid_argument);
}

TEST_CASE("single-element quadratic basis reduces to Bernstein polynomials") {
    const BSplineSpace space = build_space({2}, {1});
    Eigen::VectorXd xi(1);
    xi << 0.5;
    const Eigen::VectorXd values = eval_local_basis(space, {0}, xi);
    REQUIRE(values.size() == 3);
    CHECK(values(0) == Catch::Approx(0.25).margin(1e-15));
    CHECK(values(1) == Catch::Approx(0.50).margin(1e-15));
    CHECK(values(2) == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("local basis values match the recursive global definition") {
    Rng rng(17);
    const std::vector<BSplineSpace> spaces{build_space({1}, {5}), build_space({3}, {4}), build_space({2, 2}, {3, 2}),
                                           build_space({2, 1, 3}, {2, 4, 2})};
    for (const auto& space : spaces) {
        for (int trial = 0; trial < 40; ++trial) {
            Eigen::VectorXd xi(space.dim());
            for (int d = 0; d < space.dim(); ++d) xi(d) = rng.canonical();
            const auto element = locate_element(space, xi);
            const Eigen::VectorXd local = eval_local_basis(space, element, xi);
            Eigen::VectorXd scattered = Eigen::VectorXd::Zero(space.global_count());
            for (int j = 0; j < space.local_count(); ++j) scattered(ien(space, element, j)) += local(j);
            const Eigen::VectorXd reference = oracles::global_tensor_basis(space, xi);
            CHECK((scattered - reference).cwiseAbs().maxCoeff() < 1e-13);
        }
    }
}

TEST_CASE("basis functions are a non-negative partition of unity") {
    Rng rng(23);
    const std::vector<BSplineSpace> spaces{build_space({2}, {7}), build_space({3, 2}, {2, 5}),
                                           build_space({2, 2, 2}, {5, 5, 5})};
    for (const auto& space : spaces) {
        for (int trial = 0; trial < 50; ++trial) {
            Eigen::VectorXd xi(space.dim());
            for (int d = 0; d < space.dim(); ++d) xi(d) = rng.canonical();
            const Eigen::VectorXd local = eval_local_basis(space, locate_element(space, xi), xi);
            CHECK(local.minCoeff() >= 0.0);
            CHECK(std::abs(local.sum() - 1.0) < 1e-12);
        }
        // Domain corners, where the end-knot multiplicities act.
        Eigen::VectorXd corner = Eigen::VectorXd::Zero(space.dim());
        CHECK(std::abs(eval_local_basis(space, locate_element(space, corner), corner).sum() - 1.0) < 1e-12);
        corner.setOnes();
        CHECK(std::abs(eval_local_basis(space, locate_element(space, corner), corner).sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("adjacent elements agree across knots to finite-difference accuracy") {
    // The local evaluator extends each element's polynomials beyond the span,
    // so comparing neighbor extensions h past the shared knot exposes any
    // continuity defect: smooth pieces differ there by O(h^p) only.
    const double h = 1e-6;
    for (const auto& space : {build_space({2}, {3}), build_space({3}, {2})}) {
        const int nx = space.elements[0];
        for (int e = 0; e + 1 < nx; ++e) {
            const double knot = static_cast<double>(e + 1) / nx;
            for (double u : {knot - h, knot, knot + h}) {
                Eigen::VectorXd xi(1);
                xi << u;
                Eigen::VectorXd left = Eigen::VectorXd::Zero(space.global_count());
                Eigen::VectorXd right = Eigen::VectorXd::Zero(space.global_count());
                const Eigen::VectorXd from_left = eval_local_basis(space, {e}, xi);
                const Eigen::VectorXd from_right = eval_local_basis(space, {e + 1}, xi);
                for (int j = 0; j < space.local_count(); ++j) {
                    left(ien(space, {e}, j)) += from_left(j);
                    right(ien(space, {e + 1}, j)) += from_right(j);
                }
                CHECK((left - right).cwiseAbs().maxCoeff() < 1e-5);
            }
        }
    }
}

TEST_CASE("gauss_legendre reproduces the classical low-order rules") {
    std::vector<double> nodes, weights;
    gauss_legendre(1, nodes, weights);
    CHECK(nodes[0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(weights[0] == Catch::Approx(2.0).margin(1e-15));

    gauss_legendre(2, nodes, weights);
    const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
    CHECK(nodes[0] == Catch::Approx(-inv_sqrt3).margin(1e-15));
    CHECK(nodes[1] == Catch::Approx(inv_sqrt3).margin(1e-15));
    CHECK(weights[0] == Catch::Approx(1.0).margin(1e-15));
    CHECK(weights[1] == Catch::Approx(1.0).margin(1e-15));

    gauss_legendre(5, nodes, weights);
    double weight_sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        weight_sum += weights[static_cast<std::size_t>(i)];
        CHECK(nodes[static_cast<std::size_t>(i)] == Catch::Approx(-nodes[static_cast<std::size_t>(4 - i)]).margin(1e-15));
    }
    CHECK(weight_sum == Catch::Approx(2.0).margin(1e-14));
    CHECK_THROWS_AS(gauss_legendre(0, nodes, weights), std::invalid_argument);
}

TEST_CASE("element quadrature integrates degree 2p+1 monomials exactly") {
    Rng rng(31);
    for (const auto& space : {build_space({1}, {4}), build_space({2}, {3}), build_space({2, 3}, {2, 2})}) {
        for (std::int64_t e = 0; e < space.element_count(); ++e) {
            const auto element = element_multi_index(space, e);
            std::vector<int> per_dim(static_cast<std::size_t>(space.dim()));
            for (int d = 0; d < space.dim(); ++d) per_dim[static_cast<std::size_t>(d)] = space.degrees[d] + 1;
            const QuadratureRule rule = element_quadrature(space, element, per_dim);
            const auto [lo, hi] = element_box(space, element);

            // Weights sum to the box volume.
            double volume = 1.0;
            for (int d = 0; d < space.dim(); ++d) volume *= hi(d) - lo(d);
            CHECK(rule.weights.sum() == Catch::Approx(volume).epsilon(1e-14));

            // Separable monomial prod_d x_d^{2 p_d + 1}: the highest degree the
            // (p_d + 1)-point rule must integrate without error.
            double exact = 1.0;
            for (int d = 0; d < space.dim(); ++d) {
                const int k = 2 * space.degrees[d] + 1;
                exact *= (std::pow(hi(d), k + 1) - std::pow(lo(d), k + 1)) / (k + 1);
            }
            double by_quadrature = 0.0;
            for (Eigen::Index q = 0; q < rule.weights.size(); ++q) {
                double term = rule.weights(q);
                for (int d = 0; d < space.dim(); ++d)
                    term *= std::pow(rule.nodes(d, q), 2 * space.degrees[d] + 1);
                by_quadrature += term;
            }
            CHECK(by_quadrature == Catch::Approx(exact).margin(1e-13 * std::max(1.0, std::abs(exact))));
        }
    }
}

TEST_CASE("quadrature point enumeration has dimension 1 fastest") {
    const BSplineSpace space = build_space({1, 1}, {1, 1});
    const QuadratureRule rule = element_quadrature(space, {0, 0}, std::vector<int>{2, 3});
    REQUIRE(rule.nodes.cols() == 6);
    // Dimension 1 coordinate alternates every point; dimension 2 changes every two.
    CHECK(rule.nodes(0, 0) == Catch::Approx(rule.nodes(0, 2)).margin(1e-15));
    CHECK(rule.nodes(0, 0) == Catch::Approx(rule.nodes(0, 4)).margin(1e-15));
    CHECK(rule.nodes(0, 1) == Catch::Approx(rule.nodes(0, 3)).margin(1e-15));
    CHECK(rule.nodes(1, 0) == Catch::Approx(rule.nodes(1, 1)).margin(1e-15));
    CHECK(rule.nodes(1, 2) == Catch::Approx(rule.nodes(1, 3)).margin(1e-15));
    CHECK(rule.nodes(1, 0) < rule.nodes(1, 2));
    CHECK_THROWS_AS(element_quadrature(space, {0, 0}, std::vector<int>{2}), std::invalid_argument);
}
