#pragma once

#include "cubicderiv/algebra.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace cubicderiv {

/// Seeded generator shared by every sampler in the library. Same seed, same
/// stream, on the same standard library build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    Complex complex_normal(bool real_only) {
        const double re = normal();
        return real_only ? Complex{re, 0.0} : Complex{re, normal()};
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Gaussian coordinates (real when the space asks for real probes).
Element random_element(const SpacePtr& space, Rng& rng);
/// random_element rescaled to norm one.
Element random_unit_element(const SpacePtr& space, Rng& rng);

enum class ScalarKind { UnitArc, Real, General };

/// A scalar lambda. Unit-arc samples satisfy |lambda| = 1 and
/// arg(lambda) in [0, 2*pi/n0].
struct ScalarSample {
    Complex value{1.0, 0.0};
    ScalarKind kind = ScalarKind::UnitArc;
    unsigned n0 = 1;

    static ScalarSample unit_arc(double theta, unsigned n0);
    static ScalarSample real(double value);
    static ScalarSample general(Complex value);
};

inline constexpr std::size_t kArcSamples = 16;

/// 16 points spread uniformly over [0, 2*pi/n0], both ends included.
std::vector<ScalarSample> arc_samples(unsigned n0);
/// Representatives of each homogeneity extension stage: 1, -1, i, 2, 1/2.
std::vector<ScalarSample> extension_samples();

struct ProbeConfig {
    std::size_t count = 100;
    double norm_min = 1e-2;
    double norm_max = 1e2;
    std::uint64_t seed = 1;
    unsigned n0 = 1;
    bool include_basis = false;
};

/// Finite stand-in for "all a in A". Elements are nonzero; pairs index into
/// `elements`, with kZero standing for the zero element.
struct ProbeSet {
    static constexpr std::size_t kZero = std::numeric_limits<std::size_t>::max();

    ProbeConfig config;
    SpacePtr space;
    std::vector<Element> elements;
    std::vector<std::array<std::size_t, 2>> pairs;
    std::vector<ScalarSample> arc;
    std::vector<ScalarSample> extension;

    [[nodiscard]] std::size_t size() const noexcept { return elements.size(); }
    [[nodiscard]] Element at(std::size_t index) const {
        return index == kZero ? Element::zero(space) : elements[index];
    }
};

/// Log-spaced norms in [norm_min, norm_max] times seeded unit directions,
/// optionally preceded by the basis elements. Pairs are (i, i+1 mod n) and
/// (i, 0) for every i.
ProbeSet make_probes(const SpacePtr& space, const ProbeConfig& config);

}  // namespace cubicderiv
