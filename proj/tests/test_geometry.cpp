#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "starguide/geometry.hpp"

using namespace sg;

namespace {

WaveguideSpec strip_spec(double eps = 1.0, double trunc = 8.0) {
    WaveguideSpec s;
    s.junction.kind = JunctionKind::StraightStrip;
    s.n_branches = 2;
    s.branch_angles = {0.0, detail::kPi};
    s.eps = eps;
    s.truncation_length = trunc;
    return s;
}

WaveguideSpec lbend_spec(double eps = 1.0, double trunc = 8.0) {
    WaveguideSpec s;
    s.junction.kind = JunctionKind::LBend;
    s.n_branches = 2;
    s.branch_angles = {0.0, detail::kPi / 2};
    s.eps = eps;
    s.truncation_length = trunc;
    return s;
}

std::set<std::pair<int, int>> node_set(const RasterDomain& r) {
    std::set<std::pair<int, int>> s;
    for (const auto& p : r.nodes) s.insert({p[0], p[1]});
    return s;
}

}  // namespace

TEST_CASE("straight strip node count matches rectangle counting", "[geometry]") {
    auto r = build_waveguide(strip_spec(), 1.0 / 16);
    REQUIRE(r.frames.size() == 2);
    // (8*16*2 + 16) x-nodes times 15 rows, within one row of the convention
    int expected = (8 * 16 * 2 + 16) * (16 - 1);
    REQUIRE(std::abs(r.n() - expected) <= 15);
    // all boundary tags are walls or far ends
    int far = 0;
    for (int i = 0; i < r.n(); ++i)
        for (int d = 0; d < 4; ++d) {
            REQUIRE(r.nbr[i][d] >= RasterDomain::kFarEnd);
            if (r.nbr[i][d] == RasterDomain::kFarEnd) ++far;
        }
    REQUIRE(far == 2 * 15);  // one far plane per branch
}

TEST_CASE("L-bend equals the union of two axis-aligned rectangles", "[geometry]") {
    const int N = 16, len = 8 * N;
    auto r = build_waveguide(lbend_spec(), 1.0 / N);
    auto cell_in = [&](int cx, int cy) {
        bool junction = cx >= 0 && cx < N && cy >= 0 && cy < N;
        bool arm_x = cx >= N && cx < N + len && cy >= 0 && cy < N;
        bool arm_y = cx >= 0 && cx < N && cy >= N && cy < N + len;
        return junction || arm_x || arm_y;
    };
    std::set<std::pair<int, int>> expect;
    for (int y = -1; y <= N + len + 1; ++y)
        for (int x = -1; x <= N + len + 1; ++x) {
            if (cell_in(x - 1, y - 1) && cell_in(x, y - 1) && cell_in(x - 1, y) &&
                cell_in(x, y))
                expect.insert({x, y});
        }
    REQUIRE(node_set(r) == expect);
}

TEST_CASE("annulus with three branches: connected, hole kept, mouths open", "[geometry]") {
    WaveguideSpec s;
    s.junction.kind = JunctionKind::AnnulusWithHole;
    s.junction.r1 = 0.75;
    s.junction.r2 = 1.75;
    s.n_branches = 3;
    s.branch_angles = {0.0, 2 * detail::kPi / 3, 4 * detail::kPi / 3};
    s.eps = 1.0;
    s.truncation_length = 8.0;
    const int N = 16;
    auto r = build_waveguide(s, 1.0 / N);

    // independent pixel oracle: rasterize the analytic region from scratch
    double r1c = 0.75 * N, r2c = 1.75 * N;
    double xstar = std::sqrt(r2c * r2c - 0.25 * N * N);
    int mouth = static_cast<int>(std::ceil(xstar - 1e-12));
    int arm = 8 * N;
    auto member = [&](double px, double py) {
        double rad = std::hypot(px, py);
        if (rad >= r1c && rad <= r2c) return true;
        for (double a : s.branch_angles) {
            if (a == 0.0) {
                if (px > mouth - 4 && px < mouth + arm && std::abs(py) < N / 2.0) return true;
            } else {
                double ux = std::cos(a), uy = std::sin(a);
                double axc = px * ux + py * uy, tr = -px * uy + py * ux;
                if (axc >= xstar - 4 && axc <= xstar + arm && std::abs(tr) <= N / 2.0)
                    return true;
            }
        }
        return false;
    };
    // hole cells excluded
    for (const auto& p : r.nodes) {
        double rad = std::hypot(static_cast<double>(p[0]), static_cast<double>(p[1]));
        REQUIRE(rad >= r1c - 1.5);  // nothing deep inside the hole
    }
    // cross-check a sample of nodes against the oracle membership of all
    // four incident cells (skip the axis-aligned far plane)
    int checked = 0;
    for (const auto& p : r.nodes) {
        double rad = std::hypot(static_cast<double>(p[0]), static_cast<double>(p[1]));
        if (rad > r2c + 2) continue;  // stick to the junction neighbourhood
        bool all4 = member(p[0] - 0.5, p[1] - 0.5) && member(p[0] + 0.5, p[1] - 0.5) &&
                    member(p[0] - 0.5, p[1] + 0.5) && member(p[0] + 0.5, p[1] + 0.5);
        REQUIRE(all4);
        ++checked;
    }
    REQUIRE(checked > 100);

    // the axis-aligned mouth column is exactly N cells wide: nodes at
    // x = mouth span transverse rows -N/2+1 .. N/2-1
    for (int t = -N / 2 + 1; t <= N / 2 - 1; ++t) REQUIRE(r.at(mouth, t) >= 0);
    REQUIRE(r.at(mouth, -N / 2 - 1) < 0);
    REQUIRE(r.at(mouth, N / 2 + 1) < 0);
}

TEST_CASE("mesoscopic strip is a 9x1 rectangle with two cut faces", "[geometry]") {
    auto r = build_mesoscopic(strip_spec(), 4.0, 1.0 / 16);
    // 2L+1 = 9 units long: 145 node columns including both cut faces, 15 rows
    REQUIRE(r.n() == 145 * 15);
    auto faces = cut_faces(r);
    REQUIRE(faces.size() == 2);
    for (const auto& f : faces) {
        REQUIRE(f.nodes.size() == 15);
        double s = 0;
        for (double w : f.weights) s += w;
        REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
        for (std::size_t i = 1; i < f.y.size(); ++i) REQUIRE(f.y[i] > f.y[i - 1]);
    }
    // nesting: the L=4 raster is a subset of the L=8 raster
    auto r8 = build_mesoscopic(strip_spec(), 8.0, 1.0 / 16);
    auto s8 = node_set(r8);
    for (const auto& p : r.nodes) REQUIRE(s8.count({p[0], p[1]}) == 1);
}

TEST_CASE("T junction has exactly three cut faces", "[geometry]") {
    WaveguideSpec s;
    s.junction.kind = JunctionKind::TJunction;
    s.n_branches = 3;
    s.branch_angles = {0.0, detail::kPi / 2, detail::kPi};
    auto r = build_mesoscopic(s, 4.0, 1.0 / 16);
    REQUIRE(cut_faces(r).size() == 3);
}

TEST_CASE("raster round-trips through JSON with identical faces", "[geometry]") {
    auto r = build_mesoscopic(lbend_spec(), 4.0, 1.0 / 16);
    auto j = raster_to_json(r);
    auto r2 = raster_from_json(j);
    auto f1 = cut_faces(r), f2 = cut_faces(r2);
    REQUIRE(f1.size() == f2.size());
    for (std::size_t i = 0; i < f1.size(); ++i) {
        REQUIRE(f1[i].nodes == f2[i].nodes);
        REQUIRE(f1[i].y == f2[i].y);
        REQUIRE(f1[i].weights == f2[i].weights);
    }
}

TEST_CASE("refinement grows the node count and keeps face topology", "[geometry]") {
    auto a = build_mesoscopic(lbend_spec(), 4.0, 1.0 / 16);
    auto b = build_mesoscopic(lbend_spec(), 4.0, 1.0 / 32);
    REQUIRE(b.n() > a.n());
    REQUIRE(cut_faces(a).size() == cut_faces(b).size());
    int far_a = 0, far_b = 0;
    for (int i = 0; i < a.n(); ++i)
        for (int d = 0; d < 4; ++d)
            if (a.nbr[i][d] <= RasterDomain::kCutBase) ++far_a;
    for (int i = 0; i < b.n(); ++i)
        for (int d = 0; d < 4; ++d)
            if (b.nbr[i][d] <= RasterDomain::kCutBase) ++far_b;
    REQUIRE(far_a == 2 * 15);
    REQUIRE(far_b == 2 * 31);
}

TEST_CASE("error paths: coarse grids and split masks", "[geometry]") {
    REQUIRE_THROWS_AS(build_waveguide(strip_spec(), 1.0 / 4), ResolutionTooCoarse);
    WaveguideSpec s;
    s.junction.kind = JunctionKind::CustomMask;
    s.n_branches = 2;
    s.branch_angles = {0.0, detail::kPi};
    s.junction.mask.res = 2;
    s.junction.mask.nx = 3;
    s.junction.mask.ny = 2;
    // two filled columns separated by an empty one -> disconnected
    s.junction.mask.cells = {1, 0, 1, 1, 0, 1};
    s.junction.mask.faces = {{0, 0}, {2, 0}};
    REQUIRE_THROWS_AS(build_waveguide(s, 1.0 / 8), NonConnectedDomain);
}

TEST_CASE("self-similarity across eps at matched resolution", "[geometry]") {
    auto a = build_waveguide(strip_spec(1.0, 8.0), 1.0 / 16);
    auto b = build_waveguide(strip_spec(0.5, 10.0 * 0.5 * 0.8), 0.5 / 16);
    REQUIRE(node_set(a) == node_set(b));
    REQUIRE(b.h == Catch::Approx(a.h * 0.5));
}
