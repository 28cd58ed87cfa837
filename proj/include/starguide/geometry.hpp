// Parametric star-shaped waveguide families rasterized onto node-centered
// grids with boundary tags.
//
// Conventions (fixed across the project):
//  - the domain is the union of grid cells whose centers lie in the analytic
//    region; walls run along cell edges, i.e. boundaries sit ON grid lines;
//  - a grid node is an unknown iff all four incident cells are inside, or it
//    lies on a declared mesoscopic cut plane with its two inner cells inside;
//  - Dirichlet nodes are eliminated; cut-face nodes carry transverse weight
//    1/2 (mirror-ghost Neumann, symmetrized at assembly);
//  - branch frames are right-handed (axis, trans) pairs with the transverse
//    coordinate Y in [0, width]; frames exist for every branch, but on-grid
//    cross-sections (cut faces, mode projections) require axis-aligned
//    branches. Rotated branches rasterize fine and are usable for geometry
//    studies only.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sg {

struct NonConnectedDomain : std::runtime_error {
    explicit NonConnectedDomain(const std::string& w) : std::runtime_error(w) {}
};
struct ResolutionTooCoarse : std::runtime_error {
    explicit ResolutionTooCoarse(const std::string& w) : std::runtime_error(w) {}
};
struct MissingCutFace : std::runtime_error {
    explicit MissingCutFace(const std::string& w) : std::runtime_error(w) {}
};
struct InvalidSpec : std::runtime_error {
    explicit InvalidSpec(const std::string& w) : std::runtime_error(w) {}
};

enum class JunctionKind { StraightStrip, LBend, TJunction, Cross, AnnulusWithHole, CustomMask };

inline const char* to_string(JunctionKind k) {
    switch (k) {
        case JunctionKind::StraightStrip: return "StraightStrip";
        case JunctionKind::LBend: return "LBend";
        case JunctionKind::TJunction: return "TJunction";
        case JunctionKind::Cross: return "Cross";
        case JunctionKind::AnnulusWithHole: return "AnnulusWithHole";
        case JunctionKind::CustomMask: return "CustomMask";
    }
    return "?";
}

inline JunctionKind junction_kind_from_string(const std::string& s) {
    if (s == "StraightStrip") return JunctionKind::StraightStrip;
    if (s == "LBend") return JunctionKind::LBend;
    if (s == "TJunction") return JunctionKind::TJunction;
    if (s == "Cross") return JunctionKind::Cross;
    if (s == "AnnulusWithHole") return JunctionKind::AnnulusWithHole;
    if (s == "CustomMask") return JunctionKind::CustomMask;
    throw InvalidSpec("unknown junction kind: " + s);
}

// Attachment face of a CustomMask junction. side: 0:+x 1:+y 2:-x 3:-y;
// offset counts mask cells along the side to the start of the width-1 run.
struct MaskFace {
    int side = 0;
    int offset = 0;
};

struct CustomMaskSpec {
    int res = 4;  // mask cells per channel width
    int nx = 0, ny = 0;
    std::vector<std::uint8_t> cells;  // row-major, y*nx + x
    std::vector<MaskFace> faces;      // one per branch

    bool cell(int x, int y) const {
        if (x < 0 || y < 0 || x >= nx || y >= ny) return false;
        return cells[static_cast<std::size_t>(y) * nx + x] != 0;
    }
};

struct JunctionSpec {
    JunctionKind kind = JunctionKind::StraightStrip;
    double r1 = 0, r2 = 0;  // AnnulusWithHole radii, units of the channel width
    CustomMaskSpec mask;    // CustomMask only
};

struct WaveguideSpec {
    JunctionSpec junction;
    int n_branches = 2;
    std::vector<double> branch_angles;  // radians
    double eps = 1.0;
    double truncation_length = 10.0;

    void validate() const;
};

namespace detail {

constexpr double kPi = std::numbers::pi;

inline bool axis_aligned_angle(double a, int& dir) {
    double t = a / (kPi / 2);
    double r = std::round(t);
    if (std::abs(t - r) > 1e-9) return false;
    dir = static_cast<int>(std::llround(r)) % 4;
    if (dir < 0) dir += 4;
    return true;
}

inline std::array<int, 2> dir_step(int dir) {
    switch (dir & 3) {
        case 0: return {1, 0};
        case 1: return {0, 1};
        case 2: return {-1, 0};
        default: return {0, -1};
    }
}

}  // namespace detail

inline void WaveguideSpec::validate() const {
    if (n_branches < 1) throw InvalidSpec("n_branches must be >= 1");
    if (static_cast<int>(branch_angles.size()) != n_branches)
        throw InvalidSpec("branch_angles size must equal n_branches");
    for (std::size_t i = 0; i < branch_angles.size(); ++i)
        for (std::size_t j = i + 1; j < branch_angles.size(); ++j) {
            double d = std::remainder(branch_angles[i] - branch_angles[j], 2 * detail::kPi);
            if (std::abs(d) < 1e-9) throw InvalidSpec("branch angles must be pairwise distinct");
        }
    if (eps <= 0) throw InvalidSpec("eps must be positive");
    if (truncation_length < 8 * eps)
        throw InvalidSpec("truncation_length must be >= 8*eps");
    switch (junction.kind) {
        case JunctionKind::StraightStrip:
        case JunctionKind::LBend:
            if (n_branches != 2) throw InvalidSpec("this junction needs exactly 2 branches");
            break;
        case JunctionKind::TJunction:
            if (n_branches != 3) throw InvalidSpec("TJunction needs exactly 3 branches");
            break;
        case JunctionKind::Cross:
            if (n_branches != 4) throw InvalidSpec("Cross needs exactly 4 branches");
            break;
        case JunctionKind::AnnulusWithHole: {
            if (!(junction.r1 > 0 && junction.r1 < junction.r2))
                throw InvalidSpec("AnnulusWithHole requires 0 < r1 < r2");
            if (2 * junction.r2 < 1.0)
                throw InvalidSpec("outer radius too small for a width-1 mouth");
            double half = std::asin(0.5 / junction.r2);
            for (std::size_t i = 0; i < branch_angles.size(); ++i)
                for (std::size_t j = i + 1; j < branch_angles.size(); ++j) {
                    double d = std::abs(std::remainder(branch_angles[i] - branch_angles[j],
                                                       2 * detail::kPi));
                    if (d < 2 * half)
                        throw InvalidSpec("branch mouths overlap on the outer circle");
                }
            break;
        }
        case JunctionKind::CustomMask: {
            const auto& m = junction.mask;
            if (m.nx <= 0 || m.ny <= 0 || m.res < 1 ||
                m.cells.size() != static_cast<std::size_t>(m.nx) * m.ny)
                throw InvalidSpec("CustomMask bitmap is malformed");
            if (static_cast<int>(m.faces.size()) != n_branches)
                throw InvalidSpec("CustomMask needs one attachment face per branch");
            break;
        }
    }
}

// Local coordinate frame of one branch, in integer node/cell units.
// X = axis . (p - origin), Y = trans . (p - origin); Y ranges over [0, N].
struct BranchFrame {
    double angle = 0;
    bool axis_aligned = false;
    int dir = -1;  // 0:+x 1:+y 2:-x 3:-y (axis-aligned only)
    std::array<int, 2> origin{0, 0};
    std::array<int, 2> axis{1, 0};
    std::array<int, 2> trans{0, 1};
    int length_cells = 0;  // mouth plane (X=0) to the far/cut plane (X=length_cells)
};

struct RasterDomain {
    double h = 0;      // grid spacing, length units of this raster
    double width = 1;  // channel width in the same units
    int cells_across = 0;
    bool mesoscopic = false;
    double cut_L = 0;  // mesoscopic arm length in units of the width

    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // node bounding box, inclusive
    std::vector<int> grid;                 // node index or -1
    std::vector<std::array<int, 2>> nodes;
    std::vector<std::array<int, 4>> nbr;  // +x,+y,-x,-y: index or tag code
    std::vector<std::uint8_t> cut_of;     // 255 = none, else branch id
    std::vector<BranchFrame> frames;

    static constexpr int kDirichlet = -1;
    static constexpr int kFarEnd = -2;
    static constexpr int kCutBase = -16;  // cut of branch j encodes as kCutBase - j
    static constexpr std::uint8_t kNoCut = 255;

    int n() const { return static_cast<int>(nodes.size()); }

    int at(int x, int y) const {
        if (x < x0 || x > x1 || y < y0 || y > y1) return -1;
        return grid[static_cast<std::size_t>(y - y0) * (x1 - x0 + 1) + (x - x0)];
    }

    double node_weight(int i) const { return cut_of[i] == kNoCut ? 1.0 : 0.5; }

    std::array<int, 2> local(int branch, int node) const {
        const auto& f = frames[branch];
        int dx = nodes[node][0] - f.origin[0];
        int dy = nodes[node][1] - f.origin[1];
        return {f.axis[0] * dx + f.axis[1] * dy, f.trans[0] * dx + f.trans[1] * dy};
    }

    int node_at_local(int branch, int X, int Y) const {
        const auto& f = frames[branch];
        int x = f.origin[0] + f.axis[0] * X + f.trans[0] * Y;
        int y = f.origin[1] + f.axis[1] * X + f.trans[1] * Y;
        return at(x, y);
    }

    // which branch owns this node (X >= 0, 0 < Y < N); junction nodes -> -1
    int branch_of(int node) const {
        for (std::size_t b = 0; b < frames.size(); ++b) {
            if (!frames[b].axis_aligned) continue;
            auto l = local(static_cast<int>(b), node);
            if (l[0] >= 0 && l[1] > 0 && l[1] < cells_across) return static_cast<int>(b);
        }
        return -1;
    }
};

// Ordered cut-face trace of one branch.
struct CutFace {
    int branch = 0;
    std::vector<int> nodes;       // sorted by transverse coordinate
    std::vector<double> y;        // transverse coordinates in length units
    std::vector<double> weights;  // uniform, summing to the face width
};

namespace detail {

struct IBox {  // cell box, half-open
    int x0, y0, x1, y1;
    bool contains(int cx, int cy) const { return cx >= x0 && cx < x1 && cy >= y0 && cy < y1; }
};

struct RotChannel {  // rotated channel in cell units, membership by cell center
    double ux, uy;
    double s0, s1;
    double halfw;
    bool contains(double px, double py) const {
        double a = px * ux + py * uy;
        double t = -px * uy + py * ux;
        return a >= s0 && a <= s1 && std::abs(t) <= halfw;
    }
};

struct CellModel {
    std::vector<IBox> boxes;
    std::vector<RotChannel> rot;
    bool has_crown = false;
    double r1c = 0, r2c = 0;

    bool member(int cx, int cy) const {
        for (const auto& b : boxes)
            if (b.contains(cx, cy)) return true;
        double px = cx + 0.5, py = cy + 0.5;
        if (has_crown) {
            double r = std::hypot(px, py);
            if (r >= r1c && r <= r2c) return true;
        }
        for (const auto& c : rot)
            if (c.contains(px, py)) return true;
        return false;
    }
};

struct GeomPlan {
    CellModel model;
    std::vector<BranchFrame> frames;
    int cx0 = 0, cy0 = 0, cx1 = -1, cy1 = -1;  // cell bounding box, inclusive
};

inline void grow_box(GeomPlan& g, int x0, int y0, int x1, int y1) {
    if (g.cx1 < g.cx0) {
        g.cx0 = x0;
        g.cy0 = y0;
        g.cx1 = x1;
        g.cy1 = y1;
        return;
    }
    g.cx0 = std::min(g.cx0, x0);
    g.cy0 = std::min(g.cy0, y0);
    g.cx1 = std::max(g.cx1, x1);
    g.cy1 = std::max(g.cy1, y1);
}

// Cell box swept from a mouth corner `lo` along `axis` for `len` cells,
// `N` cells wide along `trans`.
inline IBox swept_box(std::array<int, 2> lo, std::array<int, 2> axis, std::array<int, 2> trans,
                      int len, int N) {
    std::array<std::array<int, 2>, 4> corners = {
        lo, std::array<int, 2>{lo[0] + axis[0] * len, lo[1] + axis[1] * len},
        std::array<int, 2>{lo[0] + trans[0] * N, lo[1] + trans[1] * N},
        std::array<int, 2>{lo[0] + axis[0] * len + trans[0] * N,
                           lo[1] + axis[1] * len + trans[1] * N}};
    IBox b{corners[0][0], corners[0][1], corners[0][0], corners[0][1]};
    for (const auto& c : corners) {
        b.x0 = std::min(b.x0, c[0]);
        b.y0 = std::min(b.y0, c[1]);
        b.x1 = std::max(b.x1, c[0]);
        b.y1 = std::max(b.y1, c[1]);
    }
    return b;
}

inline GeomPlan plan_geometry(const WaveguideSpec& spec, int N, int arm_cells) {
    GeomPlan g;

    auto add_axis_branch = [&](double angle, int dir, std::array<int, 2> mouth_lo,
                               int back_overlap) {
        BranchFrame f;
        f.angle = angle;
        f.axis_aligned = true;
        f.dir = dir;
        f.axis = dir_step(dir);
        f.trans = dir_step((dir + 1) & 3);
        f.origin = mouth_lo;
        f.length_cells = arm_cells;
        std::array<int, 2> lo = {f.origin[0] - f.axis[0] * back_overlap,
                                 f.origin[1] - f.axis[1] * back_overlap};
        IBox b = swept_box(lo, f.axis, f.trans, arm_cells + back_overlap, N);
        g.model.boxes.push_back(b);
        grow_box(g, b.x0, b.y0, b.x1, b.y1);
        g.frames.push_back(f);
    };

    const auto& J = spec.junction;
    switch (J.kind) {
        case JunctionKind::StraightStrip:
        case JunctionKind::LBend:
        case JunctionKind::TJunction:
        case JunctionKind::Cross: {
            g.model.boxes.push_back(IBox{0, 0, N, N});
            grow_box(g, 0, 0, N, N);
            for (int b = 0; b < spec.n_branches; ++b) {
                int dir;
                if (!axis_aligned_angle(spec.branch_angles[b], dir))
                    throw InvalidSpec("square junctions require axis-aligned branch angles");
                std::array<int, 2> lo;
                switch (dir) {
                    case 0: lo = {N, 0}; break;   // +x, trans +y
                    case 1: lo = {N, N}; break;   // +y, trans -x
                    case 2: lo = {0, N}; break;   // -x, trans -y
                    default: lo = {0, 0}; break;  // -y, trans +x
                }
                add_axis_branch(spec.branch_angles[b], dir, lo, 0);
            }
            break;
        }
        case JunctionKind::AnnulusWithHole: {
            if (N % 2 != 0)
                throw ResolutionTooCoarse("AnnulusWithHole needs an even cell count across");
            g.model.has_crown = true;
            g.model.r1c = J.r1 * N;
            g.model.r2c = J.r2 * N;
            int R = static_cast<int>(std::ceil(J.r2 * N)) + 1;
            grow_box(g, -R, -R, R, R);
            double xstar = std::sqrt(J.r2 * N * J.r2 * N - 0.25 * N * N);
            int mouth = static_cast<int>(std::ceil(xstar - 1e-12));
            int overlap = std::min(4, mouth - static_cast<int>(std::floor(J.r1 * N)));
            overlap = std::max(overlap, 1);
            for (int b = 0; b < spec.n_branches; ++b) {
                double a = spec.branch_angles[b];
                int dir;
                if (axis_aligned_angle(a, dir)) {
                    auto ax = dir_step(dir);
                    auto tr = dir_step((dir + 1) & 3);
                    std::array<int, 2> origin = {ax[0] * mouth - tr[0] * (N / 2),
                                                 ax[1] * mouth - tr[1] * (N / 2)};
                    add_axis_branch(a, dir, origin, overlap);
                } else {
                    RotChannel c;
                    c.ux = std::cos(a);
                    c.uy = std::sin(a);
                    c.s0 = xstar - overlap;
                    c.s1 = xstar + arm_cells;
                    c.halfw = N / 2.0;
                    g.model.rot.push_back(c);
                    BranchFrame f;
                    f.angle = a;
                    f.axis_aligned = false;
                    f.length_cells = arm_cells;
                    g.frames.push_back(f);
                    int R2 = static_cast<int>(std::ceil(xstar + arm_cells)) + N + 1;
                    grow_box(g, -R2, -R2, R2, R2);
                }
            }
            break;
        }
        case JunctionKind::CustomMask: {
            const auto& m = J.mask;
            if (N % m.res != 0)
                throw ResolutionTooCoarse("mask resolution must divide cells across");
            int s = N / m.res;
            for (int my = 0; my < m.ny; ++my)
                for (int mx = 0; mx < m.nx; ++mx)
                    if (m.cell(mx, my)) {
                        g.model.boxes.push_back(IBox{mx * s, my * s, (mx + 1) * s, (my + 1) * s});
                        grow_box(g, mx * s, my * s, (mx + 1) * s, (my + 1) * s);
                    }
            for (int b = 0; b < spec.n_branches; ++b) {
                const auto& fc = m.faces[b];
                int dir = fc.side;
                int dirw;
                if (!axis_aligned_angle(spec.branch_angles[b], dirw) || dirw != dir)
                    throw InvalidSpec("CustomMask branch angle must match its face side");
                for (int t = 0; t < m.res; ++t) {
                    int mx, my;
                    switch (dir) {
                        case 0: mx = m.nx - 1; my = fc.offset + t; break;
                        case 1: mx = fc.offset + t; my = m.ny - 1; break;
                        case 2: mx = 0; my = fc.offset + t; break;
                        default: mx = fc.offset + t; my = 0; break;
                    }
                    if (!m.cell(mx, my))
                        throw InvalidSpec("CustomMask attachment face is not on filled cells");
                }
                std::array<int, 2> lo;
                switch (dir) {
                    case 0: lo = {m.nx * s, fc.offset * s}; break;
                    case 1: lo = {(fc.offset + m.res) * s, m.ny * s}; break;
                    case 2: lo = {0, (fc.offset + m.res) * s}; break;
                    default: lo = {fc.offset * s, 0}; break;
                }
                add_axis_branch(spec.branch_angles[b], dir, lo, 0);
            }
            break;
        }
    }
    return g;
}

// Shared rasterization core. `mesoscopic` switches far ends to Neumann cut
// planes at X = arm_cells on every branch.
inline RasterDomain rasterize(const WaveguideSpec& spec, double h, double width, int arm_cells,
                              bool mesoscopic, double cut_L) {
    int N = static_cast<int>(std::llround(width / h));
    if (std::abs(N * h - width) > 1e-9 * width)
        throw ResolutionTooCoarse("h must divide the channel width evenly");
    if (N < 8) throw ResolutionTooCoarse("need at least 8 cells across the channel");

    GeomPlan plan = plan_geometry(spec, N, arm_cells);

    const int cw = plan.cx1 - plan.cx0 + 1;
    const int ch = plan.cy1 - plan.cy0 + 1;
    std::vector<std::uint8_t> cell(static_cast<std::size_t>(cw) * ch, 0);
    auto cell_at = [&](int cx, int cy) -> std::uint8_t& {
        return cell[static_cast<std::size_t>(cy - plan.cy0) * cw + (cx - plan.cx0)];
    };
    std::int64_t n_cells = 0;
    for (int cy = plan.cy0; cy <= plan.cy1; ++cy)
        for (int cx = plan.cx0; cx <= plan.cx1; ++cx)
            if (plan.model.member(cx, cy)) {
                cell_at(cx, cy) = 1;
                ++n_cells;
            }
    if (n_cells == 0) throw NonConnectedDomain("empty domain");

    // cell connectivity (4-neighbor BFS)
    {
        std::vector<std::uint8_t> seen(cell.size(), 0);
        std::deque<std::array<int, 2>> q;
        bool started = false;
        for (int cy = plan.cy0; cy <= plan.cy1 && !started; ++cy)
            for (int cx = plan.cx0; cx <= plan.cx1 && !started; ++cx)
                if (cell_at(cx, cy)) {
                    q.push_back({cx, cy});
                    seen[static_cast<std::size_t>(cy - plan.cy0) * cw + (cx - plan.cx0)] = 1;
                    started = true;
                }
        std::int64_t reached = 0;
        while (!q.empty()) {
            auto [cx, cy] = q.front();
            q.pop_front();
            ++reached;
            const std::array<std::array<int, 2>, 4> steps = {
                std::array<int, 2>{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
            for (const auto& s : steps) {
                int nx = cx + s[0], ny = cy + s[1];
                if (nx < plan.cx0 || nx > plan.cx1 || ny < plan.cy0 || ny > plan.cy1) continue;
                std::size_t id = static_cast<std::size_t>(ny - plan.cy0) * cw + (nx - plan.cx0);
                if (cell[id] && !seen[id]) {
                    seen[id] = 1;
                    q.push_back({nx, ny});
                }
            }
        }
        if (reached != n_cells)
            throw NonConnectedDomain("rasterized domain splits into multiple components");
    }

    RasterDomain r;
    r.h = h;
    r.width = width;
    r.cells_across = N;
    r.mesoscopic = mesoscopic;
    r.cut_L = cut_L;
    r.frames = plan.frames;
    r.x0 = plan.cx0;
    r.y0 = plan.cy0;
    r.x1 = plan.cx1 + 1;
    r.y1 = plan.cy1 + 1;

    auto cell_in = [&](int cx, int cy) -> bool {
        if (cx < plan.cx0 || cx > plan.cx1 || cy < plan.cy0 || cy > plan.cy1) return false;
        return cell_at(cx, cy) != 0;
    };

    // mesoscopic cut planes: node = origin + axis*arm + trans*t, t = 1..N-1
    const int W = r.x1 - r.x0 + 1;
    std::vector<std::int8_t> cut_mark(static_cast<std::size_t>(W) * (r.y1 - r.y0 + 1), -1);
    auto mark_at = [&](int x, int y) -> std::int8_t& {
        return cut_mark[static_cast<std::size_t>(y - r.y0) * W + (x - r.x0)];
    };
    if (mesoscopic) {
        for (std::size_t b = 0; b < r.frames.size(); ++b) {
            const auto& f = r.frames[b];
            if (!f.axis_aligned)
                throw InvalidSpec("mesoscopic rasters require axis-aligned branches");
            for (int t = 1; t < N; ++t) {
                int x = f.origin[0] + f.axis[0] * arm_cells + f.trans[0] * t;
                int y = f.origin[1] + f.axis[1] * arm_cells + f.trans[1] * t;
                mark_at(x, y) = static_cast<std::int8_t>(b);
            }
        }
    }

    r.grid.assign(static_cast<std::size_t>(W) * (r.y1 - r.y0 + 1), -1);
    for (int y = r.y0; y <= r.y1; ++y) {
        for (int x = r.x0; x <= r.x1; ++x) {
            bool c00 = cell_in(x - 1, y - 1), c10 = cell_in(x, y - 1);
            bool c01 = cell_in(x - 1, y), c11 = cell_in(x, y);
            bool unknown = c00 && c10 && c01 && c11;
            std::int8_t cb = mark_at(x, y);
            if (!unknown && cb >= 0) {
                // cut node: exactly the two inner cells present
                int in_count = (c00 ? 1 : 0) + (c10 ? 1 : 0) + (c01 ? 1 : 0) + (c11 ? 1 : 0);
                unknown = in_count == 2;
            } else if (unknown) {
                cb = -1;  // interior nodes on no cut
            }
            if (unknown) {
                int idx = static_cast<int>(r.nodes.size());
                r.grid[static_cast<std::size_t>(y - r.y0) * W + (x - r.x0)] = idx;
                r.nodes.push_back({x, y});
                r.cut_of.push_back(cb >= 0 ? static_cast<std::uint8_t>(cb)
                                           : RasterDomain::kNoCut);
            }
        }
    }
    if (r.nodes.empty()) throw ResolutionTooCoarse("no interior nodes");

    // far-end planes for full rasters (axis-aligned branches only)
    struct FarPlane {
        std::array<int, 2> origin, axis, trans;
        int len, N;
    };
    std::vector<FarPlane> far;
    if (!mesoscopic)
        for (const auto& f : r.frames)
            if (f.axis_aligned) far.push_back({f.origin, f.axis, f.trans, f.length_cells, N});
    auto on_far_plane = [&](int x, int y) -> bool {
        for (const auto& p : far) {
            int dx = x - p.origin[0], dy = y - p.origin[1];
            int X = p.axis[0] * dx + p.axis[1] * dy;
            int Y = p.trans[0] * dx + p.trans[1] * dy;
            if (X == p.len && Y >= 0 && Y <= p.N) return true;
        }
        return false;
    };

    r.nbr.assign(r.nodes.size(), {0, 0, 0, 0});
    const std::array<std::array<int, 2>, 4> steps = {
        std::array<int, 2>{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int i = 0; i < r.n(); ++i) {
        auto [x, y] = r.nodes[i];
        for (int d = 0; d < 4; ++d) {
            int qx = x + steps[d][0], qy = y + steps[d][1];
            int q = r.at(qx, qy);
            if (q >= 0) {
                r.nbr[i][d] = q;
                continue;
            }
            if (r.cut_of[i] != RasterDomain::kNoCut) {
                const auto& f = r.frames[r.cut_of[i]];
                if (steps[d] == f.axis) {  // outward across the cut plane
                    r.nbr[i][d] = RasterDomain::kCutBase - r.cut_of[i];
                    continue;
                }
            }
            r.nbr[i][d] =
                (!mesoscopic && on_far_plane(qx, qy)) ? RasterDomain::kFarEnd
                                                      : RasterDomain::kDirichlet;
        }
    }
    return r;
}

}  // namespace detail

// Full truncated waveguide in the spec's macroscopic units (channel width =
// eps). Far branch ends are eliminated Dirichlet nodes tagged FarEnd.
inline RasterDomain build_waveguide(const WaveguideSpec& spec, double h) {
    spec.validate();
    double arm = spec.truncation_length / h;
    int arm_cells = static_cast<int>(std::llround(arm));
    if (std::abs(arm - arm_cells) > 1e-9)
        throw InvalidSpec("truncation_length must be an integer multiple of h");
    return detail::rasterize(spec, h, spec.eps, arm_cells, false, 0.0);
}

// Mesoscopic region in rescaled units (channel width = 1): junction plus an
// arm of length L per branch, Neumann cut faces at the arm ends.
inline RasterDomain build_mesoscopic(const WaveguideSpec& spec, double L, double h) {
    spec.validate();
    if (L < 2) throw InvalidSpec("mesoscopic length L must be >= 2");
    double arm = L / h;
    int arm_cells = static_cast<int>(std::llround(arm));
    if (std::abs(arm - arm_cells) > 1e-9)
        throw InvalidSpec("L must be an integer multiple of h");
    return detail::rasterize(spec, h, 1.0, arm_cells, true, L);
}

// Cut-face traces ordered by transverse coordinate; uniform quadrature
// weights summing to the face width.
inline std::vector<CutFace> cut_faces(const RasterDomain& r) {
    if (!r.mesoscopic) throw MissingCutFace("raster has no cut faces");
    std::vector<CutFace> out(r.frames.size());
    for (std::size_t b = 0; b < r.frames.size(); ++b) {
        const auto& f = r.frames[b];
        CutFace face;
        face.branch = static_cast<int>(b);
        for (int t = 1; t < r.cells_across; ++t) {
            int idx = r.node_at_local(static_cast<int>(b), f.length_cells, t);
            if (idx < 0 || r.cut_of[idx] != b)
                throw MissingCutFace("cut face of branch " + std::to_string(b) +
                                     " is incomplete");
            face.nodes.push_back(idx);
            face.y.push_back(t * r.h);
        }
        face.weights.assign(face.nodes.size(), r.width / static_cast<double>(face.nodes.size()));
        out[b] = std::move(face);
    }
    return out;
}

// --- serialization ----------------------------------------------------------

inline nlohmann::json raster_to_json(const RasterDomain& r) {
    nlohmann::json j;
    j["h"] = r.h;
    j["width"] = r.width;
    j["cells_across"] = r.cells_across;
    j["mesoscopic"] = r.mesoscopic;
    j["cut_L"] = r.cut_L;
    j["box"] = {r.x0, r.y0, r.x1, r.y1};
    std::vector<int> flat;
    flat.reserve(r.nodes.size() * 2);
    for (const auto& p : r.nodes) {
        flat.push_back(p[0]);
        flat.push_back(p[1]);
    }
    j["nodes"] = flat;
    std::vector<int> nb;
    nb.reserve(r.nbr.size() * 4);
    for (const auto& q : r.nbr)
        for (int d = 0; d < 4; ++d) nb.push_back(q[d]);
    j["nbr"] = nb;
    j["cut_of"] = r.cut_of;
    nlohmann::json fr = nlohmann::json::array();
    for (const auto& f : r.frames) {
        fr.push_back({{"angle", f.angle},
                      {"axis_aligned", f.axis_aligned},
                      {"dir", f.dir},
                      {"origin", f.origin},
                      {"axis", f.axis},
                      {"trans", f.trans},
                      {"length_cells", f.length_cells}});
    }
    j["frames"] = fr;
    return j;
}

inline RasterDomain raster_from_json(const nlohmann::json& j) {
    RasterDomain r;
    r.h = j.at("h").get<double>();
    r.width = j.at("width").get<double>();
    r.cells_across = j.at("cells_across").get<int>();
    r.mesoscopic = j.at("mesoscopic").get<bool>();
    r.cut_L = j.at("cut_L").get<double>();
    auto box = j.at("box").get<std::vector<int>>();
    r.x0 = box[0];
    r.y0 = box[1];
    r.x1 = box[2];
    r.y1 = box[3];
    auto flat = j.at("nodes").get<std::vector<int>>();
    r.nodes.resize(flat.size() / 2);
    for (std::size_t i = 0; i < r.nodes.size(); ++i) r.nodes[i] = {flat[2 * i], flat[2 * i + 1]};
    auto nb = j.at("nbr").get<std::vector<int>>();
    r.nbr.resize(nb.size() / 4);
    for (std::size_t i = 0; i < r.nbr.size(); ++i)
        r.nbr[i] = {nb[4 * i], nb[4 * i + 1], nb[4 * i + 2], nb[4 * i + 3]};
    r.cut_of = j.at("cut_of").get<std::vector<std::uint8_t>>();
    for (const auto& fj : j.at("frames")) {
        BranchFrame f;
        f.angle = fj.at("angle").get<double>();
        f.axis_aligned = fj.at("axis_aligned").get<bool>();
        f.dir = fj.at("dir").get<int>();
        auto o = fj.at("origin").get<std::vector<int>>();
        auto a = fj.at("axis").get<std::vector<int>>();
        auto t = fj.at("trans").get<std::vector<int>>();
        f.origin = {o[0], o[1]};
        f.axis = {a[0], a[1]};
        f.trans = {t[0], t[1]};
        f.length_cells = fj.at("length_cells").get<int>();
        r.frames.push_back(f);
    }
    const int W = r.x1 - r.x0 + 1;
    r.grid.assign(static_cast<std::size_t>(W) * (r.y1 - r.y0 + 1), -1);
    for (int i = 0; i < r.n(); ++i)
        r.grid[static_cast<std::size_t>(r.nodes[i][1] - r.y0) * W + (r.nodes[i][0] - r.x0)] = i;
    return r;
}

// --- spec serialization (used by config files and caching) ------------------

inline nlohmann::json spec_to_json(const WaveguideSpec& s) {
    nlohmann::json j;
    j["junction"] = to_string(s.junction.kind);
    if (s.junction.kind == JunctionKind::AnnulusWithHole) {
        j["r1"] = s.junction.r1;
        j["r2"] = s.junction.r2;
    }
    if (s.junction.kind == JunctionKind::CustomMask) {
        const auto& m = s.junction.mask;
        j["mask"] = {{"res", m.res}, {"nx", m.nx}, {"ny", m.ny}, {"cells", m.cells}};
        nlohmann::json faces = nlohmann::json::array();
        for (const auto& f : m.faces) faces.push_back({{"side", f.side}, {"offset", f.offset}});
        j["mask"]["faces"] = faces;
    }
    j["n_branches"] = s.n_branches;
    j["branch_angles"] = s.branch_angles;
    j["eps"] = s.eps;
    j["truncation_length"] = s.truncation_length;
    return j;
}

inline WaveguideSpec spec_from_json(const nlohmann::json& j) {
    WaveguideSpec s;
    s.junction.kind = junction_kind_from_string(j.at("junction").get<std::string>());
    if (s.junction.kind == JunctionKind::AnnulusWithHole) {
        s.junction.r1 = j.at("r1").get<double>();
        s.junction.r2 = j.at("r2").get<double>();
    }
    if (s.junction.kind == JunctionKind::CustomMask) {
        const auto& m = j.at("mask");
        s.junction.mask.res = m.at("res").get<int>();
        s.junction.mask.nx = m.at("nx").get<int>();
        s.junction.mask.ny = m.at("ny").get<int>();
        s.junction.mask.cells = m.at("cells").get<std::vector<std::uint8_t>>();
        for (const auto& f : m.at("faces"))
            s.junction.mask.faces.push_back(
                {f.at("side").get<int>(), f.at("offset").get<int>()});
    }
    s.n_branches = j.at("n_branches").get<int>();
    s.branch_angles = j.at("branch_angles").get<std::vector<double>>();
    s.eps = j.at("eps").get<double>();
    s.truncation_length = j.at("truncation_length").get<double>();
    return s;
}

}  // namespace sg
