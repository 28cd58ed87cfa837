#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "starguide/eigensolve.hpp"
#include "starguide/geometry.hpp"
#include "starguide/operators.hpp"

using namespace sg;

namespace {
const double kPi = detail::kPi;

SparseSymOp chain_1d(int n_cells, double h) {
    // Dirichlet Laplacian on [0,1], interior nodes only
    int n = n_cells - 1;
    CsrBuilder<Real> b(n);
    double ih2 = 1.0 / (h * h);
    for (int i = 0; i < n; ++i) {
        b.add(i, i, 2.0 * ih2);
        if (i + 1 < n) b.add_sym(i, i + 1, -ih2);
    }
    SparseSymOp op;
    op.mat = b.build();
    return op;
}

SparseSymOp square_dirichlet(int n_cells) {
    // 5-point Dirichlet Laplacian on the unit square
    double h = 1.0 / n_cells;
    int m = n_cells - 1;
    int n = m * m;
    double ih2 = 1.0 / (h * h);
    CsrBuilder<Real> b(n);
    auto idx = [&](int i, int j) { return j * m + i; };
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) {
            b.add(idx(i, j), idx(i, j), 4.0 * ih2);
            if (i + 1 < m) b.add_sym(idx(i, j), idx(i + 1, j), -ih2);
            if (j + 1 < m) b.add_sym(idx(i, j), idx(i, j + 1), -ih2);
        }
    SparseSymOp op;
    op.mat = b.build();
    return op;
}

WaveguideSpec strip_spec() {
    WaveguideSpec s;
    s.junction.kind = JunctionKind::StraightStrip;
    s.n_branches = 2;
    s.branch_angles = {0.0, kPi};
    return s;
}
}  // namespace

TEST_CASE("1D chain eigenvalues match the closed form", "[eigensolve]") {
    const int N = 200;
    auto op = chain_1d(N, 1.0 / N);
    SolverConfig cfg;
    auto pairs = lowest_eigenpairs(op, 3, cfg);
    for (int m = 1; m <= 3; ++m) {
        double exact = 4.0 * N * N * std::pow(std::sin(m * kPi / (2 * N)), 2);
        REQUIRE(std::abs(pairs.values[m - 1] - exact) < 1e-9 * exact);
        REQUIRE(pairs.residuals[m - 1] <= cfg.tol);
    }
    // orthonormality
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b <= a; ++b) {
            double d = dot(pairs.vectors[a], pairs.vectors[b]);
            REQUIRE(std::abs(d - (a == b ? 1.0 : 0.0)) < 1e-10);
        }
}

TEST_CASE("unit square: shift-invert agrees with the dense oracle", "[eigensolve]") {
    auto op = square_dirichlet(40);  // 1521 unknowns
    auto dense = dense_oracle(op, 4);
    SolverConfig cfg;
    auto fast = lowest_eigenpairs(op, 4, cfg);
    for (int i = 0; i < 4; ++i)
        REQUIRE(std::abs(dense.values[i] - fast.values[i]) < 1e-8);
    // sanity against the analytic square spectrum (without renormalization)
    double pi2 = kPi * kPi;
    REQUIRE(std::abs(dense.values[0] - 2 * pi2) / (2 * pi2) < 0.005);
    REQUIRE(std::abs(dense.values[1] - 5 * pi2) / (5 * pi2) < 0.005);
}

TEST_CASE("degenerate level is returned as a spanning subspace", "[eigensolve]") {
    auto op = square_dirichlet(32);
    auto dense = dense_oracle(op, 3);
    SolverConfig cfg;
    auto fast = lowest_eigenpairs(op, 3, cfg);
    // 5 pi^2 level is twofold degenerate: compare spans via principal angles
    Eigen::MatrixXd A(op.dim(), 2), B(op.dim(), 2);
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < op.dim(); ++i) {
            A(i, c) = fast.vectors[1 + c][i];
            B(i, c) = dense.vectors[1 + c][i];
        }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A.transpose() * B);
    for (int i = 0; i < 2; ++i) {
        double cosang = std::min(1.0, svd.singularValues()(i));
        REQUIRE(std::acos(cosang) < 1e-6);
    }
    auto blocks = degenerate_blocks(fast.values, 1e-8);
    REQUIRE(blocks.size() == 2);
    REQUIRE(blocks[1].second - blocks[1].first == 2);
}

TEST_CASE("dense oracle basics", "[eigensolve]") {
    CsrBuilder<Real> b(2);
    b.add(0, 0, 1.0);
    b.add(1, 1, 2.0);
    SparseSymOp op;
    op.mat = b.build();
    auto p = dense_oracle(op, 2);
    REQUIRE(p.values[0] == Catch::Approx(1.0));
    REQUIRE(p.values[1] == Catch::Approx(2.0));

    CsrBuilder<Real> ib(50);
    for (int i = 0; i < 50; ++i) ib.add(i, i, 1.0);
    SparseSymOp ident;
    ident.mat = ib.build();
    auto pid = dense_oracle(ident, 5);
    for (int i = 0; i < 5; ++i) REQUIRE(pid.values[i] == Catch::Approx(1.0));
    for (int a = 0; a < 5; ++a)
        for (int b2 = 0; b2 < a; ++b2)
            REQUIRE(std::abs(dot(pid.vectors[a], pid.vectors[b2])) < 1e-12);
}

TEST_CASE("solve_shifted: eigenvector identity, residual, symmetry", "[eigensolve]") {
    const double h = 1.0 / 16;
    auto r = build_mesoscopic(strip_spec(), 4.0, h);
    auto basis = transverse_modes(1.0, h, 2);
    auto H = assemble_hamiltonian(r, basis);

    SolverConfig cfg;
    auto pairs = lowest_eigenpairs(H, 1, cfg);
    std::vector<Complex> rhs(r.n());
    for (int i = 0; i < r.n(); ++i) rhs[i] = pairs.vectors[0][i];
    auto u = solve_shifted(H, Complex{-1.0, 0.0}, rhs, 1e-10);
    double scale = pairs.values[0] + 1.0;
    for (int i = 0; i < r.n(); ++i)
        REQUIRE(std::abs(u[i] - rhs[i] / scale) < 1e-8);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    std::vector<Complex> a(r.n()), b(r.n());
    for (int i = 0; i < r.n(); ++i) {
        a[i] = Complex{g(rng), g(rng)};
        b[i] = Complex{g(rng), g(rng)};
    }
    Complex z{1.0, 0.5};
    auto ub = solve_shifted(H, z, b, 1e-12);
    auto residual = H.apply(ub);
    for (int i = 0; i < r.n(); ++i) residual[i] -= z * ub[i] + b[i];
    REQUIRE(norm2(residual) <= 1e-9 * norm2(b));

    // <a, (H-z)^{-1} b> == <(H-conj(z))^{-1} a, b>
    auto ua = solve_shifted(H, std::conj(z), a, 1e-12);
    Complex lhs = dot(a, ub), rhs2 = dot(ua, b);
    REQUIRE(std::abs(lhs - rhs2) < 1e-9 * std::max(1.0, std::abs(lhs)));
}

TEST_CASE("eigenvalues shrink under mesoscopic extension (strip)", "[eigensolve]") {
    const double h = 1.0 / 16;
    auto basis = transverse_modes(1.0, h, 2);
    SolverConfig cfg;
    auto p4 = lowest_eigenpairs(assemble_hamiltonian(build_mesoscopic(strip_spec(), 4.0, h), basis),
                                2, cfg);
    auto p8 = lowest_eigenpairs(assemble_hamiltonian(build_mesoscopic(strip_spec(), 8.0, h), basis),
                                2, cfg);
    REQUIRE(p8.values[0] <= p4.values[0] + 1e-12);
    REQUIRE(p8.values[1] <= p4.values[1] + 1e-12);
}

TEST_CASE("determinism: identical seeds give bit-identical eigenvalues", "[eigensolve]") {
    auto op = square_dirichlet(24);
    SolverConfig cfg;
    cfg.seed = 2024;
    auto p1 = lowest_eigenpairs(op, 3, cfg);
    auto p2 = lowest_eigenpairs(op, 3, cfg);
    REQUIRE(std::memcmp(p1.values.data(), p2.values.data(), 3 * sizeof(double)) == 0);
}

TEST_CASE("solver error paths", "[eigensolve]") {
    auto op = square_dirichlet(24);
    SolverConfig cfg;
    cfg.max_iter = 1;
    cfg.tol = 1e-15;
    REQUIRE_THROWS_AS(lowest_eigenpairs(op, 5, cfg), NoConvergence);
    REQUIRE_THROWS_AS(dense_oracle(square_dirichlet(70), 1), TooLarge);
}
