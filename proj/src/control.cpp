#include "cubicderiv/control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cubicderiv {

namespace {

constexpr std::size_t kMaxSeriesTerms = 4096;
constexpr double kScaleLimit = 1e100;

}  // namespace

std::string to_string(ControlKind kind) {
    switch (kind) {
    case ControlKind::Power: return "power";
    case ControlKind::Product: return "product";
    case ControlKind::Custom: return "custom";
    }
    return "?";
}

ControlKind parse_control_kind(const std::string& name) {
    if (name == "power") return ControlKind::Power;
    if (name == "product") return ControlKind::Product;
    if (name == "custom" || name == "custom-table") return ControlKind::Custom;
    throw ConfigurationError("unknown control kind '" + name + "'");
}

std::string to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

double pow_norm(double x, double e) { return x == 0.0 ? 0.0 : std::pow(x, e); }

ControlFunction ControlFunction::power(double delta, double r) {
    if (!(delta >= 0.0) || !(r >= 0.0)) throw ConfigurationError("power control needs delta >= 0 and r >= 0");
    ControlFunction c;
    c.kind = ControlKind::Power;
    c.delta = delta;
    c.r = r;
    return c;
}

ControlFunction ControlFunction::product(double delta, double p, double q) {
    if (!(delta >= 0.0) || !(p >= 0.0) || !(q >= 0.0)) {
        throw ConfigurationError("product control needs nonnegative delta, p, q");
    }
    ControlFunction c;
    c.kind = ControlKind::Product;
    c.delta = delta;
    c.p = p;
    c.q = q;
    return c;
}

ControlFunction ControlFunction::make_custom(double delta, Hook hook, double forward_ratio, double backward_ratio) {
    if (!hook) throw ConfigurationError("custom control needs an evaluation hook");
    ControlFunction c;
    c.kind = ControlKind::Custom;
    c.delta = delta;
    c.custom = std::move(hook);
    c.custom_forward_ratio = forward_ratio;
    c.custom_backward_ratio = backward_ratio;
    return c;
}

ControlFunction ControlFunction::with_delta(double d) const {
    ControlFunction c = *this;
    c.delta = d;
    return c;
}

double ControlFunction::operator()(double na, double nb, double nc, double nd) const {
    switch (kind) {
    case ControlKind::Power:
        return delta * (pow_norm(na, r) + pow_norm(nb, r) + pow_norm(nc, r) + pow_norm(nd, r));
    case ControlKind::Product:
        return delta * (pow_norm(na, p) * pow_norm(nb, q) + pow_norm(nc, p) * pow_norm(nd, q));
    case ControlKind::Custom: {
        const double v = delta * custom(na, nb, nc, nd);
        if (!(v >= 0.0)) throw ValidationError("custom control returned a negative or NaN value");
        return v;
    }
    }
    return 0.0;
}

double ControlFunction::forward_ratio() const {
    switch (kind) {
    case ControlKind::Power: return std::pow(2.0, r) / 8.0;
    case ControlKind::Product: return std::pow(2.0, p + q) / 8.0;
    case ControlKind::Custom: return custom_forward_ratio;
    }
    return 0.0;
}

double ControlFunction::backward_ratio() const {
    switch (kind) {
    case ControlKind::Power: return 8.0 / std::pow(2.0, r);
    case ControlKind::Product: return 8.0 / std::pow(2.0, p + q);
    case ControlKind::Custom: return custom_backward_ratio;
    }
    return 0.0;
}

std::string ControlFunction::describe() const {
    std::ostringstream os;
    os << to_string(kind) << "(delta=" << delta;
    if (kind == ControlKind::Power) os << ", r=" << r;
    if (kind == ControlKind::Product) os << ", p=" << p << ", q=" << q;
    os << ")";
    return os.str();
}

double eval_phi(const ControlFunction& phi, const Element& a, const Element& b, const Element& c, const Element& d) {
    require_same_space(b, a.space(), "eval_phi");
    require_same_space(c, a.space(), "eval_phi");
    require_same_space(d, a.space(), "eval_phi");
    return phi(a.norm(), b.norm(), c.norm(), d.norm());
}

// ---------------------------------------------------------------------------
// Series
// ---------------------------------------------------------------------------

namespace {

double checked_ratio(double q, const ControlFunction& phi, Direction dir) {
    if (!(q < 1.0)) {
        std::ostringstream os;
        os << to_string(dir) << " series for " << phi.describe() << " diverges: ratio certificate " << q
           << " is not below 1";
        if (phi.kind == ControlKind::Power) {
            os << (dir == Direction::Forward ? " (needs r < 3)" : " (needs r > 3)");
        }
        throw DivergenceError(os.str());
    }
    return q;
}

double largest(double na, double nb, double nc, double nd) { return std::max({na, nb, nc, nd}); }

double forward_term(const ControlFunction& phi, double na, double nb, double nc, double nd, std::size_t k) {
    const int e = static_cast<int>(k);
    if (std::ldexp(largest(na, nb, nc, nd), e) > kScaleLimit) {
        throw ScaleLimitError("forward series argument exceeds 1e100 at term " + std::to_string(k));
    }
    return std::ldexp(phi(std::ldexp(na, e), std::ldexp(nb, e), std::ldexp(nc, e), std::ldexp(nd, e)), -3 * e);
}

double backward_term(const ControlFunction& phi, double na, double nb, double nc, double nd, std::size_t k) {
    const int e = static_cast<int>(k);
    const double big = largest(na, nb, nc, nd);
    if (big > 0.0 && std::ldexp(big, -e) < 1.0 / kScaleLimit) {
        throw ScaleLimitError("backward series argument drops below 1e-100 at term " + std::to_string(k));
    }
    return std::ldexp(phi(std::ldexp(na, -e), std::ldexp(nb, -e), std::ldexp(nc, -e), std::ldexp(nd, -e)), 3 * e);
}

template <class Term>
SeriesResult sum_until(Term term, std::size_t first, double q, double tol) {
    if (!(tol > 0.0)) throw ConfigurationError("series tolerance must be positive");
    // extended-precision accumulator: the rounded sum stays within an ulp
    SeriesResult out;
    long double acc = 0.0L;
    for (std::size_t k = first;; ++k) {
        const double t = term(k);
        const double tail = t / (1.0 - q);
        if (tail <= tol) {
            out.value = static_cast<double>(acc);
            out.tail_bound = tail;
            return out;
        }
        if (out.terms >= kMaxSeriesTerms) {
            throw DivergenceError("series did not reach the requested tolerance within the term budget");
        }
        acc += t;
        ++out.terms;
    }
}

template <class Term>
SeriesResult sum_fixed(Term term, std::size_t first, double q, std::size_t terms) {
    SeriesResult out;
    long double acc = 0.0L;
    for (std::size_t k = first; k < first + terms; ++k) acc += term(k);
    out.value = static_cast<double>(acc);
    out.terms = terms;
    out.tail_bound = term(first + terms) / (1.0 - q);
    return out;
}

}  // namespace

SeriesResult tilde_series_forward(const ControlFunction& phi, double na, double nb, double nc, double nd, double tol) {
    const double q = checked_ratio(phi.forward_ratio(), phi, Direction::Forward);
    return sum_until([&](std::size_t k) { return forward_term(phi, na, nb, nc, nd, k); }, 0, q, tol);
}

SeriesResult tilde_series_forward_terms(const ControlFunction& phi, double na, double nb, double nc, double nd,
                                        std::size_t terms) {
    const double q = checked_ratio(phi.forward_ratio(), phi, Direction::Forward);
    return sum_fixed([&](std::size_t k) { return forward_term(phi, na, nb, nc, nd, k); }, 0, q, terms);
}

SeriesResult tilde_series_backward(const ControlFunction& phi, double na, double nb, double nc, double nd,
                                   double tol) {
    const double q = checked_ratio(phi.backward_ratio(), phi, Direction::Backward);
    return sum_until([&](std::size_t k) { return backward_term(phi, na, nb, nc, nd, k); }, 1, q, tol);
}

SeriesResult tilde_series_backward_terms(const ControlFunction& phi, double na, double nb, double nc, double nd,
                                         std::size_t terms) {
    const double q = checked_ratio(phi.backward_ratio(), phi, Direction::Backward);
    return sum_fixed([&](std::size_t k) { return backward_term(phi, na, nb, nc, nd, k); }, 1, q, terms);
}

double closed_form_power_bound(double delta, double r, double norm_a, Direction direction) {
    if (r == 3.0) throw DivergenceError("closed-form bound is undefined at r = 3");
    const double scale = delta * pow_norm(norm_a, r);
    if (direction == Direction::Forward) {
        if (r > 3.0) throw DivergenceError("forward closed-form bound needs r < 3");
        return scale / (2.0 * (8.0 - std::pow(2.0, r)));
    }
    if (r < 3.0) throw DivergenceError("backward closed-form bound needs r > 3");
    return scale / (2.0 * (std::pow(2.0, r) - 8.0));
}

double contraction_constant(const ControlFunction& phi, const ProbeSet& probes) {
    double k = 0.0;
    if (phi.kind == ControlKind::Power) {
        k = std::pow(2.0, phi.r - 3.0);
    } else if (phi.kind == ControlKind::Product) {
        k = std::pow(2.0, phi.p + phi.q - 3.0);
    } else {
        double measured = 0.0;
        for (const auto& [ia, ib] : probes.pairs) {
            const double na = probes.at(ia).norm();
            const double nb = probes.at(ib).norm();
            const double base = phi.two_slot(na, nb);
            if (base == 0.0) continue;
            measured = std::max(measured, phi.two_slot(2.0 * na, 2.0 * nb) / (8.0 * base));
        }
        if (measured > phi.custom_forward_ratio + 1e-12) {
            std::ostringstream os;
            os << "custom control violates its declared contraction certificate: measured " << measured
               << " > declared " << phi.custom_forward_ratio;
            throw ValidationError(os.str());
        }
        k = phi.custom_forward_ratio;
    }
    if (!(k < 1.0)) {
        std::ostringstream os;
        os << "control " << phi.describe() << " gives no contraction: k = " << k << " >= 1";
        throw NoContractionError(os.str());
    }
    return k;
}

MapExpr make_perturbed_map(const MapExpr& exact, const PerturbationSpec& spec) {
    if (!exact.is_exact()) throw ConfigurationError("make_perturbed_map expects an exact map");
    return exact.with_perturbation(spec);
}

// ---------------------------------------------------------------------------
// Measured control level
// ---------------------------------------------------------------------------

namespace {

struct LocalMax {
    double ratio = 0.0;
    bool infinite = false;
    std::string witness;
    std::size_t samples = 0;

    // Residuals are first reduced by floor * (sum of term norms): far out on a
    // doubling chain the terms are huge and roundoff alone would dominate phi.
    void offer(const Residual& res, double phi_unit, double floor, const std::string& where) {
        ++samples;
        const double excess = std::max(0.0, res.value - floor * res.scale);
        double ratio_here = 0.0;
        if (phi_unit > 0.0) {
            ratio_here = excess / phi_unit;
        } else if (excess > 0.0) {
            if (!infinite) {
                infinite = true;
                witness = where + " (phi = 0, residual " + std::to_string(res.value) + ")";
            }
            return;
        }
        if (!infinite && ratio_here > ratio) {
            ratio = ratio_here;
            witness = where;
        }
    }
};

}  // namespace

DeltaMeasurement measure_delta(const MapExpr& f, const ControlFunction& phi, const ProbeSet& probes,
                               const DeltaSampling& sampling, Exec exec) {
    const ControlFunction unit = phi.with_delta(1.0);
    const std::size_t np = probes.pairs.size();
    const std::size_t ne = probes.size();
    std::vector<LocalMax> local(np + ne);
    const ScalarSample one = ScalarSample::real(1.0);

    for_each_index(np + ne, exec, [&](std::size_t t) {
        LocalMax& lm = local[t];
        if (t < np) {
            const Element a = probes.at(probes.pairs[t][0]);
            const Element b = probes.at(probes.pairs[t][1]);
            const double na = a.norm();
            const double nb = b.norm();
            const double phi_ab = unit(na, nb, 0.0, 0.0);
            for (std::size_t s = 0; s < probes.arc.size(); ++s) {
                lm.offer(cubic_residual(f, a, b, probes.arc[s]), phi_ab, sampling.zero_floor,
                         "cubic pair " + std::to_string(t) + " lambda " + std::to_string(s));
            }
            lm.offer(derivation_residual(f, a, b), unit(0.0, 0.0, na, nb), sampling.zero_floor,
                     "derivation pair " + std::to_string(t));
            return;
        }
        const std::size_t e = t - np;
        const Element zero = Element::zero(probes.space);
        const Element& a = probes.elements[e];
        for (std::size_t j = 1; j <= sampling.forward_chain; ++j) {
            const Element aj = std::ldexp(1.0, static_cast<int>(j)) * a;
            lm.offer(cubic_residual(f, aj, zero, one), unit(aj.norm(), 0.0, 0.0, 0.0), sampling.zero_floor,
                     "chain element " + std::to_string(e) + " scale 2^" + std::to_string(j));
        }
        for (std::size_t j = 1; j <= sampling.backward_chain; ++j) {
            const Element aj = std::ldexp(1.0, -static_cast<int>(j)) * a;
            lm.offer(cubic_residual(f, aj, zero, one), unit(aj.norm(), 0.0, 0.0, 0.0), sampling.zero_floor,
                     "chain element " + std::to_string(e) + " scale 2^-" + std::to_string(j));
        }
    });

    DeltaMeasurement out;
    for (const auto& lm : local) {
        out.samples += lm.samples;
        if (lm.infinite) {
            if (out.finite) {
                out.finite = false;
                out.witness = lm.witness;
            }
            continue;
        }
        if (out.finite && lm.ratio > out.delta_hat) {
            out.delta_hat = lm.ratio;
            out.witness = lm.witness;
        }
    }
    if (!out.finite) out.delta_hat = std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace cubicderiv
