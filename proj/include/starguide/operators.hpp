// Finite-difference operator assembly: transverse mode data of the channel
// cross-section, the renormalized waveguide/mesoscopic Hamiltonian, and the
// complex absorbing layer for scattering runs.
//
// The assembled operator is the 5-point Laplacian minus the first DISCRETE
// transverse eigenvalue. Neumann cut faces use mirror ghosts, symmetrized by
// scaling cut nodes with sqrt(1/2): edge coefficients become -sqrt(2)/h^2
// between a cut node and its inward neighbor and -1/h^2 elsewhere, all
// diagonals 4/h^2. This keeps the matrix symmetric, the mirror-ghost spectrum
// exact, and makes chi_1 x const an exact discrete eigenvector at value zero
// on straight geometry. Physical node values are recovered by dividing by
// sqrt(w), i.e. multiplying cut-node entries by sqrt(2).
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "starguide/geometry.hpp"
#include "starguide/sparse.hpp"

namespace sg {

struct TooManyModes : std::runtime_error {
    explicit TooManyModes(const std::string& w) : std::runtime_error(w) {}
};
struct SpacingMismatch : std::runtime_error {
    explicit SpacingMismatch(const std::string& w) : std::runtime_error(w) {}
};
struct CapOutsideBranch : std::runtime_error {
    explicit CapOutsideBranch(const std::string& w) : std::runtime_error(w) {}
};

struct TransverseMode {
    double mu_analytic = 0;            // (m pi / width)^2
    double mu_disc = 0;                // (4/h^2) sin^2(m pi h / (2 width))
    std::vector<double> chi;           // samples at y = h..(width-h)
};

// Dirichlet eigendata of the channel cross-section, both analytic and on the
// grid. Modes are orthonormal under the trapezoid inner product h*sum.
struct TransverseBasis {
    double width = 1;
    double h = 0;
    std::vector<TransverseMode> modes;

    int n_interior() const { return static_cast<int>(std::llround(width / h)) - 1; }
    double mu1_disc() const { return modes.at(0).mu_disc; }

    double trapezoid_dot(const std::vector<double>& a, const std::vector<double>& b) const {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s * h;
    }
};

inline TransverseBasis transverse_modes(double width, double h, int m_max) {
    int N = static_cast<int>(std::llround(width / h));
    if (std::abs(N * h - width) > 1e-9 * width || N < 8)
        throw ResolutionTooCoarse("transverse_modes: width/h must be an integer >= 8");
    if (m_max >= N) throw TooManyModes("m_max must be < width/h");
    TransverseBasis basis;
    basis.width = width;
    basis.h = h;
    const double pi = detail::kPi;
    for (int m = 1; m <= m_max; ++m) {
        TransverseMode mode;
        mode.mu_analytic = (m * pi / width) * (m * pi / width);
        double s = std::sin(m * pi * h / (2 * width));
        mode.mu_disc = 4.0 / (h * h) * s * s;
        mode.chi.resize(N - 1);
        // sqrt(2/width) * sin(...) is exactly unit under the h-weighted sum
        double amp = std::sqrt(2.0 / width);
        for (int j = 1; j < N; ++j) mode.chi[j - 1] = amp * std::sin(m * pi * j * h / width);
        basis.modes.push_back(std::move(mode));
    }
    return basis;
}

// Renormalized Hamiltonian -Delta_h - mu_1^disc on a raster. Dirichlet by
// node elimination, Neumann cuts by symmetrized mirror ghosts.
inline SparseSymOp assemble_hamiltonian(const RasterDomain& r, const TransverseBasis& basis) {
    if (std::abs(basis.width - r.width) > 1e-12 || std::abs(basis.h - r.h) > 1e-15)
        throw SpacingMismatch("basis and raster disagree on width or spacing");
    const double ih2 = 1.0 / (r.h * r.h);
    const double mu1 = basis.mu1_disc();
    const double rt2 = std::sqrt(2.0);
    CsrBuilder<Real> b(r.n());
    for (int i = 0; i < r.n(); ++i) {
        b.add(i, i, 4.0 * ih2 - mu1);
        bool i_cut = r.cut_of[i] != RasterDomain::kNoCut;
        for (int d = 0; d < 4; ++d) {
            int q = r.nbr[i][d];
            if (q < 0) continue;  // eliminated Dirichlet/FarEnd or mirror ghost
            bool q_cut = r.cut_of[q] != RasterDomain::kNoCut;
            double c = (i_cut != q_cut) ? -rt2 * ih2 : -ih2;
            b.add(i, q, c);
        }
    }
    SparseSymOp op;
    op.mat = b.build();
    return op;
}

// Renormalized discrete Dirichlet energy matching <v, H v> identically:
// sum over edges of w_e |u_a - u_b|^2 / h^2 (+ closures to eliminated walls)
// minus mu_1 * sum of w_p |u_p|^2, evaluated on PHYSICAL node values.
inline double dirichlet_energy(const RasterDomain& r, const TransverseBasis& basis,
                               const std::vector<double>& physical) {
    const double ih2 = 1.0 / (r.h * r.h);
    double energy = 0;
    for (int i = 0; i < r.n(); ++i) {
        bool i_cut = r.cut_of[i] != RasterDomain::kNoCut;
        for (int d = 0; d < 4; ++d) {
            int q = r.nbr[i][d];
            if (q >= 0) {
                if (q < i) continue;  // count each edge once
                bool q_cut = r.cut_of[q] != RasterDomain::kNoCut;
                double w = (i_cut && q_cut) ? 0.5 : 1.0;
                double du = physical[i] - physical[q];
                energy += w * du * du * ih2;
            } else if (q == RasterDomain::kDirichlet || q == RasterDomain::kFarEnd) {
                double w = i_cut ? 0.5 : 1.0;
                energy += w * physical[i] * physical[i] * ih2;
            }
            // mirror ghosts contribute nothing
        }
    }
    double mass = 0;
    for (int i = 0; i < r.n(); ++i) mass += r.node_weight(i) * physical[i] * physical[i];
    return energy - basis.mu1_disc() * mass;
}

// Symmetrized <-> physical transforms for fields on a raster.
inline std::vector<double> to_physical(const RasterDomain& r, const std::vector<double>& sym) {
    std::vector<double> u(sym);
    const double rt2 = std::sqrt(2.0);
    for (int i = 0; i < r.n(); ++i)
        if (r.cut_of[i] != RasterDomain::kNoCut) u[i] *= rt2;
    return u;
}

inline std::vector<double> to_symmetrized(const RasterDomain& r, const std::vector<double>& phys) {
    std::vector<double> u(phys);
    const double irt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < r.n(); ++i)
        if (r.cut_of[i] != RasterDomain::kNoCut) u[i] *= irt2;
    return u;
}

// All-Dirichlet variant of the mesoscopic operator: cut-face nodes leave the
// unknown set and act as inhomogeneous boundary data instead (the psi^J
// problem). On rasters without cut faces this is the plain assembly.
struct DirichletProblem {
    SparseSymOp op;
    std::vector<int> to_raster;    // interior unknown -> raster node
    std::vector<int> from_raster;  // raster node -> interior unknown or -1
};

inline DirichletProblem assemble_dirichlet(const RasterDomain& r, const TransverseBasis& basis) {
    if (std::abs(basis.width - r.width) > 1e-12 || std::abs(basis.h - r.h) > 1e-15)
        throw SpacingMismatch("basis and raster disagree on width or spacing");
    DirichletProblem p;
    p.from_raster.assign(r.n(), -1);
    for (int i = 0; i < r.n(); ++i) {
        if (r.cut_of[i] != RasterDomain::kNoCut) continue;
        p.from_raster[i] = static_cast<int>(p.to_raster.size());
        p.to_raster.push_back(i);
    }
    const double ih2 = 1.0 / (r.h * r.h);
    const double mu1 = basis.mu1_disc();
    CsrBuilder<Real> b(static_cast<int>(p.to_raster.size()));
    for (std::size_t row = 0; row < p.to_raster.size(); ++row) {
        int i = p.to_raster[row];
        b.add(static_cast<int>(row), static_cast<int>(row), 4.0 * ih2 - mu1);
        for (int d = 0; d < 4; ++d) {
            int q = r.nbr[i][d];
            if (q < 0) continue;
            int col = p.from_raster[q];
            if (col >= 0) b.add(static_cast<int>(row), col, -ih2);
            // couplings into cut nodes move to the right-hand side at solve time
        }
    }
    p.op.mat = b.build();
    return p;
}

// Complex absorbing layer: diagonal -i * strength * ((X-start)/len)^power on
// branch nodes with X > start, where len runs from start to the branch end.
// Returns the diagonal; attach it to an operator via SparseSymOp::absorber.
inline std::vector<Complex> assemble_cap(const RasterDomain& r, double start, double strength,
                                         int power) {
    if (power < 2) throw CapOutsideBranch("cap power must be >= 2");
    std::vector<Complex> diag(r.n(), Complex{0, 0});
    if (strength == 0) return diag;
    bool any = false;
    for (const auto& f : r.frames) {
        if (!f.axis_aligned) continue;
        double end = f.length_cells * r.h;
        if (start >= 0 && start < end) any = true;
    }
    if (!any) throw CapOutsideBranch("cap start lies outside every branch cylinder");
    for (int i = 0; i < r.n(); ++i) {
        int bidx = r.branch_of(i);
        if (bidx < 0) continue;
        auto l = r.local(bidx, i);
        double X = l[0] * r.h;
        double end = r.frames[bidx].length_cells * r.h;
        if (X <= start || end <= start) continue;
        double t = (X - start) / (end - start);
        diag[i] = Complex{0, -strength * std::pow(t, power)};
    }
    return diag;
}

}  // namespace sg
