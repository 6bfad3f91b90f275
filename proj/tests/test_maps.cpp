#include "cubicderiv/maps.hpp"

#include <gtest/gtest.h>

using namespace cubicderiv;

namespace {

struct Scalar {
    AlgebraPtr alg = builtin_algebra("scalar-complex");
    BimodulePtr mod = regular_bimodule(alg);

    Element at(Complex z) const { return Element(alg->space, {z}); }
    MapExpr cube() const { return MapExpr(alg, mod, CubicTensor::symmetrized(1, 1, {{0, 0, 0, 0, 1.0}})); }
    MapExpr cube_plus(std::function<Element(const Element&)> h) const {
        PerturbationSpec p;
        p.kind = PerturbationKind::Custom;
        p.custom = std::move(h);
        p.custom_label = "test";
        return cube().with_perturbation(p);
    }
};

}  // namespace

TEST(Maps, ScalarCubeEvaluates) {
    Scalar s;
    EXPECT_EQ(s.cube()(s.at(2.0))[0], Complex(8.0, 0.0));
    EXPECT_TRUE(s.cube()(s.at(0.0)).is_zero());
    EXPECT_TRUE(s.cube().is_exact());
}

TEST(Maps, PerturbedMapVanishesAtZero) {
    Scalar s;
    const MapExpr f = s.cube_plus([&](const Element& a) { return a[0] * a[0] * a; });
    EXPECT_TRUE(f(s.at(0.0)).is_zero());
    PerturbationSpec b;
    b.kind = PerturbationKind::Bounded;
    b.epsilon = 0.3;
    b.seed = 5;
    EXPECT_TRUE(s.cube().with_perturbation(b)(s.at(0.0)).is_zero());
}

TEST(Maps, CubicResidualOfCubeIsZero) {
    Scalar s;
    const Residual r = cubic_residual(s.cube(), s.at(1.0), s.at(1.0), ScalarSample::real(1.0));
    EXPECT_EQ(r.value, 0.0);
    EXPECT_GT(r.scale, 0.0);
}

TEST(Maps, CubicResidualOfSquareIsEight) {
    Scalar s;
    const MapExpr zero(s.alg, s.mod, CubicTensor(1, 1));
    PerturbationSpec p;
    p.kind = PerturbationKind::Custom;
    p.custom = [](const Element& a) { return a[0] * a; };
    const MapExpr sq = zero.with_perturbation(p);
    // 4 + 4 - 2 - 2 - 12
    EXPECT_DOUBLE_EQ(cubic_residual(sq, s.at(1.0), s.at(0.0), ScalarSample::real(1.0)).value, 8.0);
}

TEST(Maps, DerivationResidualOfScalarCube) {
    Scalar s;
    EXPECT_DOUBLE_EQ(derivation_residual(s.cube(), s.at(1.0), s.at(1.0)).value, 1.0);
}

TEST(Maps, HomogeneityResiduals) {
    Scalar s;
    EXPECT_EQ(homogeneity_residual(s.cube(), ScalarSample::general({0.0, 1.0}), s.at(1.0)).value, 0.0);
    const MapExpr f = s.cube_plus([](const Element& a) { return a; });
    EXPECT_DOUBLE_EQ(homogeneity_residual(f, ScalarSample::real(2.0), s.at(1.0)).value, 6.0);
}

TEST(Maps, EvaluatorOverloadsAgree) {
    Scalar s;
    const MapExpr f = s.cube_plus([](const Element& a) { return a; });
    const Evaluator ev = [&](const Element& a) { return f(a); };
    const Element a = s.at({0.3, -0.7});
    const Element b = s.at({1.1, 0.2});
    const Complex l{0.6, 0.8};
    EXPECT_EQ(cubic_residual(ev, a, b, l).value, cubic_residual(f, a, b, ScalarSample::general(l)).value);
    EXPECT_EQ(derivation_residual(ev, *s.mod, a, b).value, derivation_residual(f, a, b).value);
    EXPECT_EQ(homogeneity_residual(ev, l, a).value, homogeneity_residual(f, ScalarSample::general(l), a).value);
}

TEST(Maps, CommutatorCubeMatchesDirectEvaluation) {
    const auto ex = build_triangular(builtin_algebra("mat2-complex"), 7);
    const MapExpr d = triangular_derivation(ex);
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
        const Element a = random_element(ex.algebra->space, rng);
        const Element a3 = cube(*ex.algebra, a);
        const Element expect = right_action(*ex.dual, ex.g0, a3) - left_action(*ex.dual, a3, ex.g0);
        EXPECT_LE((d(a) - expect).norm(), 1e-12 * std::max(1.0, expect.norm()));
    }
    EXPECT_LE(d.cubic_part().symmetry_defect(), 1e-15);
}

TEST(Maps, TriangularDerivationHasSmallResiduals) {
    const auto ex = build_triangular(builtin_algebra("nil5"), 7);
    const MapExpr d = triangular_derivation(ex);
    ProbeConfig cfg;
    cfg.count = 40;
    const ResidualSummary s = residual_sweep(d, make_probes(ex.algebra->space, cfg));
    EXPECT_LE(s.max_cubic_rel, 1e-12);
    EXPECT_LE(s.max_derivation_rel, 1e-12);
    EXPECT_LE(s.max_homogeneity_rel, 1e-12);
    EXPECT_FALSE(s.rows.empty());
}

TEST(Maps, BoundedPerturbationCubicEnvelope) {
    const auto ex = build_triangular(builtin_algebra("nil5"), 7);
    PerturbationSpec p;
    p.kind = PerturbationKind::Bounded;
    p.epsilon = 0.1;
    p.seed = 3;
    const MapExpr f = triangular_derivation(ex).with_perturbation(p);
    ProbeConfig cfg;
    cfg.count = 60;
    const ResidualSummary s = residual_sweep(f, make_probes(ex.algebra->space, cfg));
    EXPECT_LE(s.max_cubic, 18 * 0.1);
    EXPECT_GT(s.max_cubic, 0.0);
    for (double t : {0.01, 1.0, 100.0}) {
        const Element a = t * Element::basis(ex.algebra->space, 0);
        EXPECT_LE(f.perturbation_value(a).norm(), 0.1 * f.envelope(a).value() * (1 + 1e-15));
    }
}

TEST(Maps, ZeroMapHasZeroResiduals) {
    const auto ex = build_triangular(builtin_algebra("nil5"), 7);
    const MapExpr z(ex.algebra, ex.dual, CubicTensor(ex.dual->dim(), ex.algebra->dim()));
    ProbeConfig cfg;
    cfg.count = 20;
    const ResidualSummary s = residual_sweep(z, make_probes(ex.algebra->space, cfg));
    EXPECT_EQ(s.max_cubic, 0.0);
    EXPECT_EQ(s.max_derivation, 0.0);
    EXPECT_EQ(s.max_homogeneity, 0.0);
}

TEST(Maps, SweepIsDeterministic) {
    const auto ex = build_triangular(builtin_algebra("nil5"), 7);
    PerturbationSpec p;
    p.kind = PerturbationKind::PowerDecay;
    p.epsilon = 0.1;
    p.r = 1.0;
    p.seed = 11;
    const MapExpr f = triangular_derivation(ex).with_perturbation(p);
    ProbeConfig cfg;
    cfg.count = 30;
    const ProbeSet probes = make_probes(ex.algebra->space, cfg);
    const ResidualSummary s1 = residual_sweep(f, probes, Exec::Serial);
    const ResidualSummary s2 = residual_sweep(f, probes, Exec::Parallel);
    const ResidualSummary s3 = residual_sweep(f, probes, Exec::Parallel);
    ASSERT_EQ(s1.rows.size(), s2.rows.size());
    for (std::size_t i = 0; i < s1.rows.size(); ++i) {
        EXPECT_EQ(s1.rows[i].value, s2.rows[i].value);
        EXPECT_EQ(s2.rows[i].value, s3.rows[i].value);
    }
    EXPECT_EQ(s1.max_cubic, s2.max_cubic);
}

TEST(Maps, DimensionMismatchRejected) {
    Scalar s;
    const auto m2 = builtin_algebra("mat2-complex");
    EXPECT_THROW((void)s.cube()(Element::basis(m2->space, 0)), DimensionError);
    EXPECT_THROW(MapExpr(s.alg, s.mod, CubicTensor(2, 1)), DimensionError);
}
