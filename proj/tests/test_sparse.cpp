#include <catch2/catch_amalgamated.hpp>

#include "starguide/sparse.hpp"

using namespace sg;

TEST_CASE("CsrBuilder merges duplicates and sorts columns", "[sparse]") {
    CsrBuilder<Real> b(3);
    b.add(0, 2, 1.0);
    b.add(0, 0, 2.0);
    b.add(0, 2, 0.5);
    b.add_sym(1, 2, -3.0);
    auto m = b.build();
    REQUIRE(m.n == 3);
    REQUIRE(m.coeff(0, 0) == 2.0);
    REQUIRE(m.coeff(0, 2) == 1.5);
    REQUIRE(m.coeff(1, 2) == -3.0);
    REQUIRE(m.coeff(2, 1) == -3.0);
    REQUIRE(m.coeff(2, 2) == 0.0);
}

TEST_CASE("matvec and symmetry defect", "[sparse]") {
    CsrBuilder<Real> b(2);
    b.add(0, 0, 1.0);
    b.add(1, 1, 2.0);
    b.add_sym(0, 1, 0.25);
    SparseSymOp op;
    op.mat = b.build();
    REQUIRE(op.symmetry_defect() == 0.0);
    auto y = op.apply(std::vector<Real>{1.0, 2.0});
    REQUIRE(y[0] == Catch::Approx(1.5));
    REQUIRE(y[1] == Catch::Approx(4.25));
    REQUIRE(op.spectral_lower_bound() <= 1.0 - 0.25);
}

TEST_CASE("complexified applies absorber and shift on the diagonal", "[sparse]") {
    CsrBuilder<Real> b(2);
    b.add(0, 0, 3.0);
    b.add(1, 1, 4.0);
    SparseSymOp op;
    op.mat = b.build();
    op.absorber = {Complex{0, -0.5}, Complex{0, 0}};
    auto c = op.complexified(Complex{1, 2});
    REQUIRE(c.coeff(0, 0) == Complex(2.0, -2.5));
    REQUIRE(c.coeff(1, 1) == Complex(3.0, -2.0));
}
