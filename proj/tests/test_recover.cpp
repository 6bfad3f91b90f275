#include "cubicderiv/recover.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cubicderiv;

namespace {

const TriangularExample& nil5() {
    static const auto ex = build_triangular(builtin_algebra("nil5"), 7);
    return ex;
}

ProbeSet nil5_probes(std::size_t count) {
    ProbeConfig cfg;
    cfg.count = count;
    return make_probes(nil5().algebra->space, cfg);
}

MapExpr perturbed(PerturbationKind kind, double eps, double r, std::uint64_t seed) {
    PerturbationSpec p;
    p.kind = kind;
    p.epsilon = eps;
    p.r = r;
    p.seed = seed;
    return make_perturbed_map(triangular_derivation(nil5()), p);
}

// f(t) = t^3 + 0.1 t / (1 + t^2) on the complex scalars
struct ScalarExample {
    AlgebraPtr alg = builtin_algebra("scalar-complex");
    MapExpr f = make();

    MapExpr make() const {
        const MapExpr cube(alg, regular_bimodule(alg), CubicTensor::symmetrized(1, 1, {{0, 0, 0, 0, 1.0}}));
        PerturbationSpec p;
        p.kind = PerturbationKind::Bounded;
        p.epsilon = 0.1;
        p.seed = 1;
        p.direction = std::vector<Complex>{1.0};
        p.functional = std::vector<Complex>{1.0};
        return make_perturbed_map(cube, p);
    }
    Element at(Complex z) const { return Element(alg->space, {z}); }
    ProbeSet probes() const {
        ProbeConfig cfg;
        cfg.count = 20;
        cfg.norm_min = 0.1;
        cfg.norm_max = 10.0;
        cfg.include_basis = true;
        return make_probes(alg->space, cfg);
    }
};

}  // namespace

TEST(Recover, ScalarFirstIterate) {
    ScalarExample s;
    EXPECT_NEAR(s.f(s.at(2.0))[0].real(), 8.04, 1e-15);
    const auto it = forward_iterates(s.f, s.at(1.0), 13);
    EXPECT_NEAR(it[1][0].real(), 1.005, 1e-15);
    EXPECT_LE(std::abs(it[12][0] - Complex(1.0, 0.0)), 1e-10);
    for (std::size_t n = 0; n < it.size(); ++n)
        EXPECT_LE(std::abs(it[n][0] - Complex(1.0, 0.0)), 0.1 * std::pow(8.0, -static_cast<double>(n)) + 1e-15);
}

TEST(Recover, ScalarDirectForwardStopsByTwelve) {
    ScalarExample s;
    const ProbeSet probes = s.probes();
    const RecoveryReport rep = direct_forward(s.f, ControlFunction::power(1.8, 0.0), probes, 1e-10);
    EXPECT_LE(rep.iterations, 12u);
    EXPECT_LE(rep.max_tail, 1e-10);
    const Element one = s.at(1.0);
    EXPECT_LE(std::abs(rep.evaluate(one)[0] - Complex(1.0, 0.0)), 1e-10);
}

TEST(Recover, ExactMapIsItsOwnLimit) {
    const MapExpr d = triangular_derivation(nil5());
    const ProbeSet probes = nil5_probes(30);
    const RecoveryReport fw = direct_forward(d, ControlFunction::power(1.0, 1.0), probes, 1e-10);
    const RecoveryReport bw = direct_backward(d, ControlFunction::power(1.0, 4.0), probes, 1e-10);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const Element fa = d(probes.elements[i]);
        EXPECT_LE((fw.probes[i].value - fa).norm(), 1e-13 * std::max(1.0, fa.norm()));
        EXPECT_LE((bw.probes[i].value - fa).norm(), 1e-13 * std::max(1.0, fa.norm()));
    }
}

TEST(Recover, BackwardRejectsSubcriticalControl) {
    const MapExpr d = triangular_derivation(nil5());
    EXPECT_THROW(direct_backward(d, ControlFunction::power(1.0, 2.0), nil5_probes(5), 1e-10), DivergenceError);
    EXPECT_THROW(direct_forward(d, ControlFunction::power(1.0, 4.0), nil5_probes(5), 1e-10), DivergenceError);
}

TEST(Recover, BackwardEnvelopeScaling) {
    // h with envelope eps |a|^4 near 0: 8^N h(a / 2^N) shrinks like 2^-N
    const MapExpr f = perturbed(PerturbationKind::PowerDecay, 0.1, 4.0, 5);
    const Element a = 0.5 * Element::basis(nil5().algebra->space, 0);
    const auto it = backward_iterates(f, a, 20);
    const MapExpr d = triangular_derivation(nil5());
    const double a4 = std::pow(a.norm(), 4);
    for (std::size_t n = 0; n < it.size(); ++n)
        EXPECT_LE((it[n] - d(a)).norm(), 0.1 * 0.5 * a4 * std::exp2(-static_cast<double>(n)) + 1e-15);
}

TEST(Recover, TailsAreSound) {
    const MapExpr exact = triangular_derivation(nil5());
    const ProbeSet probes = nil5_probes(40);
    RecoveryOptions opt;
    opt.exact = &exact;
    for (double r : {0.0, 1.0, 2.0}) {
        const MapExpr f = perturbed(PerturbationKind::PowerDecay, 0.1, r, 11);
        const auto phi = ControlFunction::power(1.0, r);
        const RecoveryReport rep = direct_forward(f, phi.with_delta(2.0), probes, 1e-10, opt);
        for (const auto& p : rep.probes) EXPECT_LE(*p.deviation_from_exact, p.tail + 1e-12) << r;
    }
    const MapExpr f4 = perturbed(PerturbationKind::PowerDecay, 0.1, 4.0, 11);
    const RecoveryReport rep = direct_backward(f4, ControlFunction::power(2.0, 4.0), probes, 1e-10, opt);
    for (const auto& p : rep.probes) EXPECT_LE(*p.deviation_from_exact, p.tail + 1e-12);
}

TEST(Recover, ScaleGuard) {
    const MapExpr d = triangular_derivation(nil5());
    EXPECT_THROW(direct_forward(d, ControlFunction::power(1.0, 2.0), nil5_probes(5), 1e-300), ScaleLimitError);
}

TEST(Recover, MetricBasics) {
    ScalarExample s;
    const ProbeSet probes = s.probes();
    const auto phi = ControlFunction::power(1.0, 0.0);
    const std::vector<Element> fa = evaluate_batch([&](const Element& a) { return s.f(a); }, probes.elements);
    EXPECT_EQ(generalized_metric(fa, fa, phi, probes).value, 0.0);

    std::vector<Element> jf;
    double oracle = 0.0;
    for (const auto& a : probes.elements) {
        const Element j = s.f(2.0 * a) * Complex{0.125, 0.0};
        oracle = std::max(oracle, (s.f(a) - j).norm() / 1.0);
        jf.push_back(j);
    }
    EXPECT_EQ(generalized_metric(fa, jf, phi, probes).value, oracle);
    EXPECT_EQ(generalized_metric(jf, fa, phi, probes).value, oracle);
    EXPECT_GT(oracle, 0.0);

    const auto zero_phi = ControlFunction::product(1.0, 1.0, 1.0);  // phi(a, 0) = 0
    EXPECT_TRUE(generalized_metric(fa, jf, zero_phi, probes).is_infinite());
    EXPECT_EQ(generalized_metric(fa, fa, zero_phi, probes).value, 0.0);
}

TEST(Recover, FixedPointOnExactMapStopsImmediately) {
    const MapExpr d = triangular_derivation(nil5());
    const RecoveryReport rep = fixed_point_recover(d, ControlFunction::power(1.0, 1.0), nil5_probes(20), 1e-10);
    EXPECT_EQ(rep.iterations, 0u);
    EXPECT_EQ(rep.first_step_distance, 0.0);
    EXPECT_EQ(rep.k_hat, 0.25);
}

TEST(Recover, FixedPointIteratesEqualForwardIterates) {
    const MapExpr f = perturbed(PerturbationKind::PowerDecay, 0.1, 1.0, 11);
    const ProbeSet probes = nil5_probes(25);
    const RecoveryReport rep = fixed_point_recover(f, ControlFunction::power(0.05, 1.0), probes, 1e-10);
    ASSERT_GT(rep.iterations, 0u);
    ASSERT_EQ(rep.iterates.size(), rep.iterations + 1);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto fw = forward_iterates(f, probes.elements[i], rep.iterations + 1);
        for (std::size_t n = 0; n <= rep.iterations; ++n) EXPECT_EQ(rep.iterates[n][i], fw[n]) << i << " " << n;
    }
    EXPECT_EQ(rep.k_hat, 0.25);
    EXPECT_TRUE(rep.ratios_certified);
    EXPECT_TRUE(rep.all_steps_finite);
    for (double ratio : rep.contraction_ratios) EXPECT_LE(ratio, 0.25 + 1e-12);
    EXPECT_DOUBLE_EQ(rep.contraction_distance_bound, 1.0 / 12.0);
    EXPECT_LE(rep.certified_distance, rep.contraction_distance_bound);
    EXPECT_LE(rep.distance_f_to_result, rep.certified_distance + 1e-12);
}

TEST(Recover, FixedPointAgreesWithDirectForward) {
    const MapExpr f = perturbed(PerturbationKind::PowerDecay, 0.1, 1.0, 11);
    const ProbeSet probes = nil5_probes(25);
    const auto phi = ControlFunction::power(0.05, 1.0);
    const RecoveryReport fp = fixed_point_recover(f, phi, probes, 1e-10);
    const RecoveryReport fw = direct_forward(f, phi, probes, 1e-10);
    EXPECT_TRUE(uniqueness_check(fp, fw, probes).pass);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        // same iterate index gives the same table
        EXPECT_EQ(fp.probes[i].value, forward_iterates(f, probes.elements[i], fp.iterations + 1).back());
    }
}

TEST(Recover, UniquenessAcrossPerturbations) {
    const ProbeSet probes = nil5_probes(40);
    const auto phi = ControlFunction::power(1.0, 1.0);
    const MapExpr f1 = perturbed(PerturbationKind::PowerDecay, 0.1, 1.0, 21);
    const MapExpr f2 = perturbed(PerturbationKind::PowerDecay, 0.01, 1.0, 22);
    const RecoveryReport d1 = direct_forward(f1, phi, probes, 1e-10);
    const RecoveryReport d2 = direct_forward(f2, phi, probes, 1e-10);
    const UniquenessResult u = uniqueness_check(d1, d2, probes);
    EXPECT_TRUE(u.pass);
    EXPECT_GE(u.worst_margin, 0.0);
    const UniquenessResult same = uniqueness_check(d1, d1, probes);
    EXPECT_EQ(same.max_deviation, 0.0);
}

TEST(Recover, EngineNames) {
    EXPECT_EQ(parse_engine("forward"), Engine::DirectForward);
    EXPECT_EQ(parse_engine("direct-backward"), Engine::DirectBackward);
    EXPECT_EQ(parse_engine("fixed-point"), Engine::FixedPoint);
    EXPECT_EQ(to_string(Engine::FixedPoint), "fixed-point");
    EXPECT_ANY_THROW(parse_engine("sideways"));
}
