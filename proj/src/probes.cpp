#include "cubicderiv/probes.hpp"

#include <algorithm>
#include <cmath>

namespace cubicderiv {

Element random_element(const SpacePtr& space, Rng& rng) {
    std::vector<Complex> coords(space->dim);
    for (auto& c : coords) {
        c = rng.complex_normal(space->real_probes);
    }
    return Element(space, std::move(coords));
}

Element random_unit_element(const SpacePtr& space, Rng& rng) {
    for (;;) {
        Element e = random_element(space, rng);
        const double n = e.norm();
        if (n > 1e-8) {
            return (1.0 / n) * std::move(e);
        }
    }
}

ScalarSample ScalarSample::unit_arc(double theta, unsigned n0) {
    if (n0 == 0) {
        throw ConfigurationError("arc divisor n0 must be positive");
    }
    const double upper = 2.0 * std::numbers::pi / n0;
    if (theta < 0.0 || theta > upper) {
        throw ConfigurationError("unit-arc angle outside [0, 2pi/n0]");
    }
    return {std::polar(1.0, theta), ScalarKind::UnitArc, n0};
}

ScalarSample ScalarSample::real(double value) { return {Complex{value, 0.0}, ScalarKind::Real, 1}; }

ScalarSample ScalarSample::general(Complex value) { return {value, ScalarKind::General, 1}; }

std::vector<ScalarSample> arc_samples(unsigned n0) {
    std::vector<ScalarSample> out;
    out.reserve(kArcSamples);
    const double upper = 2.0 * std::numbers::pi / n0;
    for (std::size_t k = 0; k < kArcSamples; ++k) {
        const double theta = upper * static_cast<double>(k) / static_cast<double>(kArcSamples - 1);
        out.push_back(ScalarSample::unit_arc(std::min(theta, upper), n0));
    }
    return out;
}

std::vector<ScalarSample> extension_samples() {
    return {ScalarSample::real(1.0), ScalarSample::real(-1.0), ScalarSample::general({0.0, 1.0}),
            ScalarSample::real(2.0), ScalarSample::real(0.5)};
}

ProbeSet make_probes(const SpacePtr& space, const ProbeConfig& config) {
    if (config.count == 0 && !config.include_basis) {
        throw ConfigurationError("probes.count must be positive");
    }
    if (!(config.norm_min > 0.0) || !(config.norm_max >= config.norm_min)) {
        throw ConfigurationError("probes norm range must satisfy 0 < norm_min <= norm_max");
    }
    ProbeSet set;
    set.config = config;
    set.space = space;
    if (config.include_basis) {
        for (std::size_t i = 0; i < space->dim; ++i) {
            set.elements.push_back(Element::basis(space, i));
        }
    }
    Rng rng(config.seed);
    const double log_lo = std::log(config.norm_min);
    const double log_hi = std::log(config.norm_max);
    for (std::size_t i = 0; i < config.count; ++i) {
        const double t = config.count > 1 ? static_cast<double>(i) / static_cast<double>(config.count - 1) : 0.5;
        const double target = std::exp(log_lo + t * (log_hi - log_lo));
        set.elements.push_back(target * random_unit_element(space, rng));
    }
    const std::size_t n = set.elements.size();
    for (std::size_t i = 0; i < n; ++i) {
        set.pairs.push_back({i, (i + 1) % n});
        set.pairs.push_back({i, ProbeSet::kZero});
    }
    set.arc = arc_samples(config.n0);
    set.extension = extension_samples();
    return set;
}

}  // namespace cubicderiv
