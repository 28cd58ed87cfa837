// Compressed-row sparse matrices and the symmetric operator type used by the
// assembly, eigensolver and linear-solve layers.
//
// Matrices are stored with both triangles present so that mat-vec needs no
// symmetry logic. Assembly always emits (i,j) and (j,i) with the same value,
// which keeps the symmetry defect at exactly zero in floating point.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sg {

using Real = double;
using Complex = std::complex<double>;

template <class T>
struct CsrMatrix {
    int n = 0;
    std::vector<std::int64_t> row_ptr;  // size n+1
    std::vector<int> cols;
    std::vector<T> vals;

    std::int64_t nnz() const { return static_cast<std::int64_t>(cols.size()); }

    void multiply(const T* x, T* y) const {
        for (int i = 0; i < n; ++i) {
            T acc{};
            for (std::int64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
                acc += vals[p] * x[cols[p]];
            y[i] = acc;
        }
    }

    std::vector<T> multiply(const std::vector<T>& x) const {
        if (static_cast<int>(x.size()) != n)
            throw std::invalid_argument("CsrMatrix::multiply: size mismatch");
        std::vector<T> y(n);
        multiply(x.data(), y.data());
        return y;
    }

    T coeff(int r, int c) const {
        for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
            if (cols[p] == c) return vals[p];
        return T{};
    }
};

// Row-wise builder; duplicate entries are summed, columns sorted per row.
template <class T>
class CsrBuilder {
  public:
    explicit CsrBuilder(int n) : n_(n), rows_(n) {}

    void add(int r, int c, T v) { rows_[r].emplace_back(c, v); }

    // Adds a_rc to (r,c) and (c,r); diagonal targets are added once.
    void add_sym(int r, int c, T v) {
        rows_[r].emplace_back(c, v);
        if (r != c) rows_[c].emplace_back(r, v);
    }

    CsrMatrix<T> build() {
        CsrMatrix<T> m;
        m.n = n_;
        m.row_ptr.assign(n_ + 1, 0);
        std::int64_t total = 0;
        for (int i = 0; i < n_; ++i) {
            auto& row = rows_[i];
            std::sort(row.begin(), row.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            // merge duplicates in place
            std::size_t w = 0;
            for (std::size_t r = 0; r < row.size(); ++r) {
                if (w > 0 && row[w - 1].first == row[r].first)
                    row[w - 1].second += row[r].second;
                else
                    row[w++] = row[r];
            }
            row.resize(w);
            total += static_cast<std::int64_t>(w);
            m.row_ptr[i + 1] = total;
        }
        m.cols.reserve(total);
        m.vals.reserve(total);
        for (int i = 0; i < n_; ++i) {
            for (auto& [c, v] : rows_[i]) {
                m.cols.push_back(c);
                m.vals.push_back(v);
            }
        }
        return m;
    }

  private:
    int n_;
    std::vector<std::vector<std::pair<int, T>>> rows_;
};

// Sparse symmetric operator. Optionally carries a complex diagonal absorber
// (the CAP slot); the real part stays symmetric, the absorber only enters
// complex solves and complex mat-vecs.
struct SparseSymOp {
    CsrMatrix<Real> mat;
    std::vector<Complex> absorber;  // empty, or size dim()

    int dim() const { return mat.n; }
    bool has_absorber() const { return !absorber.empty(); }

    std::vector<Real> apply(const std::vector<Real>& x) const { return mat.multiply(x); }

    std::vector<Complex> apply(const std::vector<Complex>& x) const {
        if (static_cast<int>(x.size()) != mat.n)
            throw std::invalid_argument("SparseSymOp::apply: size mismatch");
        std::vector<Complex> y(mat.n);
        for (int i = 0; i < mat.n; ++i) {
            Complex acc{};
            for (std::int64_t p = mat.row_ptr[i]; p < mat.row_ptr[i + 1]; ++p)
                acc += mat.vals[p] * x[mat.cols[p]];
            if (!absorber.empty()) acc += absorber[i] * x[i];
            y[i] = acc;
        }
        return y;
    }

    // max |A_ij - A_ji| over the stored pattern
    Real symmetry_defect() const {
        Real d = 0;
        for (int i = 0; i < mat.n; ++i)
            for (std::int64_t p = mat.row_ptr[i]; p < mat.row_ptr[i + 1]; ++p)
                d = std::max(d, std::abs(mat.vals[p] - mat.coeff(mat.cols[p], i)));
        return d;
    }

    // Lower bound on the spectrum of the real part (Gershgorin).
    Real spectral_lower_bound() const {
        Real lo = 0;
        bool first = true;
        for (int i = 0; i < mat.n; ++i) {
            Real diag = 0, off = 0;
            for (std::int64_t p = mat.row_ptr[i]; p < mat.row_ptr[i + 1]; ++p) {
                if (mat.cols[p] == i)
                    diag += mat.vals[p];
                else
                    off += std::abs(mat.vals[p]);
            }
            Real b = diag - off;
            lo = first ? b : std::min(lo, b);
            first = false;
        }
        return lo;
    }

    // A + diag(absorber) - shift*I as a complex CSR matrix.
    CsrMatrix<Complex> complexified(Complex shift = Complex{0, 0}) const {
        CsrMatrix<Complex> c;
        c.n = mat.n;
        c.row_ptr = mat.row_ptr;
        c.cols = mat.cols;
        c.vals.assign(mat.vals.begin(), mat.vals.end());
        if (!absorber.empty() || shift != Complex{0, 0}) {
            for (int i = 0; i < c.n; ++i) {
                bool found = false;
                for (std::int64_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p) {
                    if (c.cols[p] == i) {
                        if (!absorber.empty()) c.vals[p] += absorber[i];
                        c.vals[p] -= shift;
                        found = true;
                        break;
                    }
                }
                if (!found)
                    throw std::runtime_error("complexified: missing structural diagonal");
            }
        }
        return c;
    }
};

inline Real norm2(const std::vector<Real>& v) {
    Real s = 0;
    for (Real x : v) s += x * x;
    return std::sqrt(s);
}

inline Real norm2(const std::vector<Complex>& v) {
    Real s = 0;
    for (const Complex& x : v) s += std::norm(x);
    return std::sqrt(s);
}

inline Real dot(const std::vector<Real>& a, const std::vector<Real>& b) {
    Real s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline Complex dot(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    Complex s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

}  // namespace sg
