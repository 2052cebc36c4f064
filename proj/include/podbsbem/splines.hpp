#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "podbsbem/common.hpp"

namespace podbsbem {

/// Tensor-product B-spline space on the unit cube with open uniform knot
/// vectors: (p+1)-fold end knots and nx-1 equispaced interior knots per
/// dimension. Elements are the knot spans; functions restricted to one
/// element are the Bezier-element polynomials of the space.
struct BSplineSpace {
    std::vector<int> degrees;
    std::vector<int> elements;
    std::vector<std::vector<double>> knots;

    int dim() const { return static_cast<int>(degrees.size()); }

    std::int64_t element_count() const {
        std::int64_t n = 1;
        for (int nx : elements) n *= nx;
        return n;
    }

    /// Number of basis functions supported on one element.
    int local_count() const {
        int n = 1;
        for (int p : degrees) n *= p + 1;
        return n;
    }

    /// Number of global coefficients, prod_i (nx_i + p_i).
    std::int64_t global_count() const {
        std::int64_t n = 1;
        for (int d = 0; d < dim(); ++d) n *= elements[d] + degrees[d];
        return n;
    }

    int global_count_1d(int d) const { return elements[d] + degrees[d]; }
};

inline BSplineSpace build_space(std::vector<int> degrees, std::vector<int> elements) {
    if (degrees.empty() || degrees.size() != elements.size())
        throw std::invalid_argument("build_space: degree and element lists must be non-empty and equally sized");
    BSplineSpace space;
    space.degrees = std::move(degrees);
    space.elements = std::move(elements);
    space.knots.resize(space.degrees.size());
    for (int d = 0; d < space.dim(); ++d) {
        const int p = space.degrees[d];
        const int nx = space.elements[d];
        if (p < 1) throw std::invalid_argument("build_space: degrees must be >= 1");
        if (nx < 1) throw std::invalid_argument("build_space: element counts must be >= 1");
        auto& knots = space.knots[d];
        knots.assign(static_cast<std::size_t>(nx + 2 * p + 1), 0.0);
        for (int i = 0; i <= p; ++i) knots[i] = 0.0;
        for (int i = 1; i < nx; ++i) knots[static_cast<std::size_t>(p + i)] = static_cast<double>(i) / nx;
        for (int i = 0; i <= p; ++i) knots[static_cast<std::size_t>(p + nx + i)] = 1.0;
    }
    return space;
}

/// Element index along one dimension for coordinate u in [0,1]. Elements are
/// half-open spans [k_{p+e}, k_{p+e+1}); u = 1 belongs to the last element.
inline int locate_element_1d(const BSplineSpace& space, int d, double u) {
    if (!(u >= 0.0 && u <= 1.0))
        throw std::invalid_argument("locate_element: coordinate outside [0, 1]");
    const int p = space.degrees[d];
    const int nx = space.elements[d];
    const auto& knots = space.knots[d];
    const auto first = knots.begin() + p;
    const auto last = first + nx + 1;
    const auto it = std::upper_bound(first, last, u);
    const int e = static_cast<int>(it - first) - 1;
    return std::clamp(e, 0, nx - 1);
}

inline std::vector<int> locate_element(const BSplineSpace& space, const Eigen::VectorXd& xi) {
    if (xi.size() != space.dim())
        throw std::invalid_argument("locate_element: point dimension mismatch");
    std::vector<int> element(static_cast<std::size_t>(space.dim()));
    for (int d = 0; d < space.dim(); ++d) element[static_cast<std::size_t>(d)] = locate_element_1d(space, d, xi(d));
    return element;
}

/// Lexicographic element numbering, dimension 1 fastest.
inline std::int64_t element_linear_index(const BSplineSpace& space, const std::vector<int>& element) {
    std::int64_t index = 0;
    for (int d = space.dim() - 1; d >= 0; --d) {
        const int e = element[static_cast<std::size_t>(d)];
        if (e < 0 || e >= space.elements[d])
            throw std::invalid_argument("element_linear_index: element index out of range");
        index = index * space.elements[d] + e;
    }
    return index;
}

inline std::vector<int> element_multi_index(const BSplineSpace& space, std::int64_t linear) {
    if (linear < 0 || linear >= space.element_count())
        throw std::invalid_argument("element_multi_index: element index out of range");
    std::vector<int> element(static_cast<std::size_t>(space.dim()));
    for (int d = 0; d < space.dim(); ++d) {
        element[static_cast<std::size_t>(d)] = static_cast<int>(linear % space.elements[d]);
        linear /= space.elements[d];
    }
    return element;
}

namespace detail {

/// Values of the p+1 B-spline functions that are nonzero on the span of
/// element e, left to right (global indices e .. e+p). Cox-de Boor triangular
/// scheme; for u outside the span this yields the polynomial extension.
inline void basis_span_values(const std::vector<double>& knots, int p, int e, double u, double* values) {
    const int span = p + e;
    double left[16];
    double right[16];
    values[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - knots[static_cast<std::size_t>(span + 1 - j)];
        right[j] = knots[static_cast<std::size_t>(span + j)] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
}

}  // namespace detail

/// Values of the local_count() basis functions supported on element e at xi,
/// in local lexicographic order (dimension 1 fastest).
inline Eigen::VectorXd eval_local_basis(const BSplineSpace& space, const std::vector<int>& element,
                                        const Eigen::VectorXd& xi) {
    const int m = space.dim();
    if (xi.size() != m) throw std::invalid_argument("eval_local_basis: point dimension mismatch");
    if (static_cast<int>(element.size()) != m)
        throw std::invalid_argument("eval_local_basis: element dimension mismatch");
    double univariate[8][16];
    for (int d = 0; d < m; ++d) {
        if (space.degrees[d] > 15 || m > 8)
            throw std::invalid_argument("eval_local_basis: degree or dimension beyond supported bounds");
        detail::basis_span_values(space.knots[d], space.degrees[d], element[static_cast<std::size_t>(d)], xi(d),
                                  univariate[d]);
    }
    Eigen::VectorXd values(space.local_count());
    for (int j = 0; j < space.local_count(); ++j) {
        int rest = j;
        double v = 1.0;
        for (int d = 0; d < m; ++d) {
            const int width = space.degrees[d] + 1;
            v *= univariate[d][rest % width];
            rest /= width;
        }
        values(j) = v;
    }
    return values;
}

/// Local-to-global map: element e contributes univariate globals e_d .. e_d+p_d
/// per dimension; the global index is their mixed-radix combination with
/// dimension 1 fastest.
inline std::int64_t ien(const BSplineSpace& space, const std::vector<int>& element, int local) {
    const int m = space.dim();
    if (local < 0 || local >= space.local_count())
        throw std::invalid_argument("ien: local index out of range");
    int locals[8];
    int rest = local;
    for (int d = 0; d < m; ++d) {
        const int width = space.degrees[d] + 1;
        locals[d] = rest % width;
        rest /= width;
    }
    std::int64_t global = 0;
    for (int d = m - 1; d >= 0; --d) {
        const int g = element[static_cast<std::size_t>(d)] + locals[d];
        global = global * space.global_count_1d(d) + g;
    }
    return global;
}

/// Nodes (ascending) and weights of the n-point Gauss-Legendre rule on [-1,1],
/// by Newton iteration on the Legendre recurrence.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one point");
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    const double pi = 3.14159265358979323846;
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        if (2 * i + 1 == n) x = 0.0;
        double derivative = 1.0;
        for (int iteration = 0; iteration < 64; ++iteration) {
            double prev = 1.0;
            double value = x;
            for (int j = 2; j <= n; ++j) {
                const double next = ((2.0 * j - 1.0) * x * value - (j - 1.0) * prev) / j;
                prev = value;
                value = next;
            }
            derivative = n * (x * value - prev) / (x * x - 1.0);
            if (n == 1) derivative = 1.0;
            const double step = value / derivative;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        if (2 * i + 1 == n) x = 0.0;
        nodes[static_cast<std::size_t>(i)] = -x;
        nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        const double w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
}

struct QuadratureRule {
    Eigen::MatrixXd nodes;    // dim x point_count, columns are points
    Eigen::VectorXd weights;  // sums to the element volume
};

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> element_box(const BSplineSpace& space,
                                                               const std::vector<int>& element) {
    const int m = space.dim();
    Eigen::VectorXd lo(m), hi(m);
    for (int d = 0; d < m; ++d) {
        const int p = space.degrees[d];
        const int e = element[static_cast<std::size_t>(d)];
        lo(d) = space.knots[d][static_cast<std::size_t>(p + e)];
        hi(d) = space.knots[d][static_cast<std::size_t>(p + e + 1)];
    }
    return {lo, hi};
}

/// Tensor Gauss-Legendre rule over one element's box, points enumerated with
/// dimension 1 fastest. points_per_dim(d) points along dimension d.
inline QuadratureRule element_quadrature(const BSplineSpace& space, const std::vector<int>& element,
                                         const std::vector<int>& points_per_dim) {
    const int m = space.dim();
    if (static_cast<int>(points_per_dim.size()) != m)
        throw std::invalid_argument("element_quadrature: points_per_dim size mismatch");
    const auto [lo, hi] = element_box(space, element);
    std::vector<std::vector<double>> axis_nodes(static_cast<std::size_t>(m));
    std::vector<std::vector<double>> axis_weights(static_cast<std::size_t>(m));
    std::int64_t total = 1;
    for (int d = 0; d < m; ++d) {
        std::vector<double> g, w;
        gauss_legendre(points_per_dim[static_cast<std::size_t>(d)], g, w);
        const double mid = 0.5 * (lo(d) + hi(d));
        const double scale = 0.5 * (hi(d) - lo(d));
        auto& xs = axis_nodes[static_cast<std::size_t>(d)];
        auto& ws = axis_weights[static_cast<std::size_t>(d)];
        xs.resize(g.size());
        ws.resize(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            xs[i] = mid + scale * g[i];
            ws[i] = scale * w[i];
        }
        total *= points_per_dim[static_cast<std::size_t>(d)];
    }
    QuadratureRule rule;
    rule.nodes.resize(m, total);
    rule.weights.resize(total);
    for (std::int64_t q = 0; q < total; ++q) {
        std::int64_t rest = q;
        double weight = 1.0;
        for (int d = 0; d < m; ++d) {
            const auto i = static_cast<std::size_t>(rest % points_per_dim[static_cast<std::size_t>(d)]);
            rest /= points_per_dim[static_cast<std::size_t>(d)];
            rule.nodes(d, q) = axis_nodes[static_cast<std::size_t>(d)][i];
            weight *= axis_weights[static_cast<std::size_t>(d)][i];
        }
        rule.weights(q) = weight;
    }
    return rule;
}

inline QuadratureRule element_quadrature(const BSplineSpace& space, const std::vector<int>& element,
                                         int points_per_dim) {
    return element_quadrature(space, element,
                              std::vector<int>(static_cast<std::size_t>(space.dim()), points_per_dim));
}

}  // namespace podbsbem
