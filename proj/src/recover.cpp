#include "cubicderiv/recover.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace cubicderiv {

namespace {

constexpr double kScaleCeiling = 1e100;

Element scaled(const Element& a, int exponent) { return a * Complex{std::ldexp(1.0, exponent), 0.0}; }

double max_norm(const ProbeSet& probes) {
    double m = 0.0;
    for (const auto& a : probes.elements) m = std::max(m, a.norm());
    return m;
}

double min_positive_norm(const ProbeSet& probes) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& a : probes.elements) {
        const double n = a.norm();
        if (n > 0.0) m = std::min(m, n);
    }
    return m;
}

std::vector<double> differences(const std::vector<Element>& iterates) {
    std::vector<double> out;
    for (std::size_t n = 1; n < iterates.size(); ++n) out.push_back((iterates[n] - iterates[n - 1]).norm());
    return out;
}

RecoveryReport start_report(Engine engine, const MapExpr& f, const ControlFunction& phi, double tol) {
    if (!(tol > 0.0)) throw ConfigurationError("recovery tolerance must be positive");
    RecoveryReport r;
    r.engine = engine;
    r.tol = tol;
    r.control = phi;
    r.source = std::make_shared<MapExpr>(f);
    return r;
}

void fill_probes(RecoveryReport& report, const ProbeSet& probes, const RecoveryOptions& options,
                 const std::function<std::vector<Element>(const Element&)>& iterate) {
    const std::size_t n = probes.elements.size();
    std::vector<std::optional<ProbeRecovery>> rows(n);
    for_each_index(n, options.exec, [&](std::size_t i) {
        const Element& a = probes.elements[i];
        std::vector<double> trace;
        std::optional<Element> value;
        if (options.keep_trace) {
            auto its = iterate(a);
            trace = differences(its);
            value = std::move(its.back());
        } else {
            value = report.evaluate(a);
        }
        ProbeRecovery row{i, a.norm(), std::move(*value), report.tail_at(a), std::nullopt, std::move(trace)};
        if (options.exact) row.deviation_from_exact = (row.value - (*options.exact)(a)).norm();
        rows[i] = std::move(row);
    });
    for (auto& row : rows) {
        report.max_tail = std::max(report.max_tail, row->tail);
        report.probes.push_back(std::move(*row));
    }
}

}  // namespace

GeneralizedMetricValue generalized_metric(std::span<const Element> g, std::span<const Element> h,
                                          const ControlFunction& phi, std::span<const double> norms) {
    if (g.size() != h.size() || g.size() != norms.size()) {
        throw DimensionError("generalized metric needs equally many values and points");
    }
    double d = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double diff = (g[i] - h[i]).norm();
        if (diff == 0.0) continue;
        const double w = phi.two_slot(norms[i], 0.0);
        if (w == 0.0) return GeneralizedMetricValue::infinity();
        d = std::max(d, diff / w);
    }
    return {d};
}

GeneralizedMetricValue generalized_metric(std::span<const Element> g, std::span<const Element> h,
                                          const ControlFunction& phi, const ProbeSet& probes) {
    std::vector<double> norms;
    norms.reserve(probes.elements.size());
    for (const auto& a : probes.elements) norms.push_back(a.norm());
    return generalized_metric(g, h, phi, norms);
}

std::string to_string(Engine engine) {
    switch (engine) {
        case Engine::DirectForward: return "direct-forward";
        case Engine::DirectBackward: return "direct-backward";
        case Engine::FixedPoint: return "fixed-point";
    }
    return "?";
}

Engine parse_engine(const std::string& name) {
    if (name == "direct-forward" || name == "forward") return Engine::DirectForward;
    if (name == "direct-backward" || name == "backward") return Engine::DirectBackward;
    if (name == "fixed-point") return Engine::FixedPoint;
    throw ConfigurationError("unknown engine '" + name + "' (direct-forward, direct-backward, fixed-point)");
}

Element RecoveryReport::evaluate(const Element& a) const {
    const int n = static_cast<int>(iterations);
    if (engine == Engine::DirectBackward) return (*source)(scaled(a, -n)) * Complex{std::ldexp(1.0, 3 * n), 0.0};
    return (*source)(scaled(a, n)) * Complex{std::ldexp(1.0, -3 * n), 0.0};
}

double RecoveryReport::tail_at(const Element& a) const {
    const double na = a.norm();
    switch (engine) {
        case Engine::DirectForward:
            return tilde_series_forward_terms(control, na, 0, 0, 0, iterations).tail_bound / 16.0;
        case Engine::DirectBackward:
            return tilde_series_backward_terms(control, na, 0, 0, 0, iterations).tail_bound / 16.0;
        case Engine::FixedPoint: {
            const double d = step_distances.empty() ? 0.0 : step_distances.back().value;
            return d / (1.0 - k_hat) * control.two_slot(na, 0.0);
        }
    }
    return 0.0;
}

std::vector<Element> forward_iterates(const MapExpr& f, const Element& a, std::size_t count) {
    std::vector<Element> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        const int e = static_cast<int>(n);
        out.push_back(f(scaled(a, e)) * Complex{std::ldexp(1.0, -3 * e), 0.0});
    }
    return out;
}

std::vector<Element> backward_iterates(const MapExpr& f, const Element& a, std::size_t count) {
    std::vector<Element> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        const int e = static_cast<int>(n);
        out.push_back(f(scaled(a, -e)) * Complex{std::ldexp(1.0, 3 * e), 0.0});
    }
    return out;
}

std::vector<Element> evaluate_batch(const Evaluator& f, std::span<const Element> points, Exec exec) {
    std::vector<std::optional<Element>> tmp(points.size());
    for_each_index(points.size(), exec, [&](std::size_t i) { tmp[i] = f(points[i]); });
    std::vector<Element> out;
    out.reserve(points.size());
    for (auto& v : tmp) out.push_back(std::move(*v));
    return out;
}

RecoveryReport direct_forward(const MapExpr& f, const ControlFunction& phi, const ProbeSet& probes, double tol,
                              const RecoveryOptions& options) {
    RecoveryReport report = start_report(Engine::DirectForward, f, phi, tol);
    const std::size_t n = probes.elements.size();
    std::vector<std::size_t> need(n, 0);
    for_each_index(n, options.exec, [&](std::size_t i) {
        need[i] = tilde_series_forward(phi, probes.elements[i].norm(), 0, 0, 0, 16.0 * tol).terms;
    });
    for (auto v : need) report.iterations = std::max(report.iterations, v);
    if (std::ldexp(max_norm(probes), static_cast<int>(report.iterations)) > kScaleCeiling) {
        throw ScaleLimitError("direct-forward needs N = " + std::to_string(report.iterations) +
                              ", pushing 2^N |a| beyond 1e100");
    }
    const std::size_t count = report.iterations + 1;
    fill_probes(report, probes, options, [&](const Element& a) { return forward_iterates(f, a, count); });
    return report;
}

RecoveryReport direct_backward(const MapExpr& f, const ControlFunction& phi, const ProbeSet& probes, double tol,
                               const RecoveryOptions& options) {
    RecoveryReport report = start_report(Engine::DirectBackward, f, phi, tol);
    const std::size_t n = probes.elements.size();
    std::vector<std::size_t> need(n, 0);
    for_each_index(n, options.exec, [&](std::size_t i) {
        need[i] = tilde_series_backward(phi, probes.elements[i].norm(), 0, 0, 0, 16.0 * tol).terms;
    });
    for (auto v : need) report.iterations = std::max(report.iterations, v);
    const double smallest = min_positive_norm(probes);
    if (std::isfinite(smallest) && std::ldexp(smallest, -static_cast<int>(report.iterations)) < 1.0 / kScaleCeiling) {
        throw ScaleLimitError("direct-backward needs N = " + std::to_string(report.iterations) +
                              ", pushing |a| / 2^N below 1e-100");
    }
    const std::size_t count = report.iterations + 1;
    fill_probes(report, probes, options, [&](const Element& a) { return backward_iterates(f, a, count); });
    return report;
}

RecoveryReport fixed_point_recover(const MapExpr& f, const ControlFunction& phi, const ProbeSet& probes, double tol,
                                   const RecoveryOptions& options) {
    RecoveryReport report = start_report(Engine::FixedPoint, f, phi, tol);
    const double k = contraction_constant(phi, probes);
    report.k_hat = k;
    const double stop = tol * (1.0 - k);
    const std::size_t np = probes.elements.size();

    std::vector<double> norms(np);
    for (std::size_t i = 0; i < np; ++i) norms[i] = probes.elements[i].norm();

    // Orbit depth: under the hypotheses d(f, Jf) <= 1/16, so d_n <= k^n / 16.
    // A rough first look at the probes themselves guards against a larger d_0.
    double d0_guess = 1.0 / 16.0;
    {
        std::vector<Element> f0, f1;
        for (const auto& a : probes.elements) {
            f0.push_back(f(a));
            f1.push_back(f(scaled(a, 1)) * Complex{0.125, 0.0});
        }
        const auto d = generalized_metric(f0, f1, phi, norms);
        if (d.is_infinite()) {
            report.all_steps_finite = false;
            throw HypothesisError("d(f, Jf) is infinite on the probe set: phi(a, 0) = 0 where f(2a) != 8 f(a); "
                                  "the fixed-point iteration has no finite starting distance");
        }
        d0_guess = std::max(d0_guess, d.value);
    }
    std::size_t predicted = 0;
    if (k > 0.0 && d0_guess > stop) predicted = static_cast<std::size_t>(std::ceil(std::log(stop / d0_guess) / std::log(k)));
    const std::size_t window = predicted + 4;
    const std::size_t depth = window + 2;  // orbit entries m = 0..depth-1
    if (std::ldexp(max_norm(probes), static_cast<int>(depth)) > kScaleCeiling) {
        throw ScaleLimitError("fixed-point orbit depth " + std::to_string(depth) + " pushes 2^m |a| beyond 1e100");
    }

    // orbit[i][m] = f(2^m a_i)
    std::vector<std::vector<Element>> orbit(np);
    for_each_index(np, options.exec, [&](std::size_t i) {
        auto& row = orbit[i];
        row.reserve(depth);
        for (std::size_t m = 0; m < depth; ++m) row.push_back(f(scaled(probes.elements[i], static_cast<int>(m))));
    });
    auto g = [&](std::size_t n, std::size_t i, std::size_t j) {
        return orbit[i][n + j] * Complex{std::ldexp(1.0, -3 * static_cast<int>(n)), 0.0};
    };

    std::size_t final_n = 0;
    bool converged = false;
    for (std::size_t n = 0; n <= window; ++n) {
        const std::size_t span = window - n + 1;  // j = 0..window-n
        std::vector<double> per_probe(np, 0.0);
        std::vector<char> infinite(np, 0);
        for_each_index(np, options.exec, [&](std::size_t i) {
            double d = 0.0;
            for (std::size_t j = 0; j < span; ++j) {
                const double diff = (g(n + 1, i, j) - g(n, i, j)).norm();
                if (diff == 0.0) continue;
                const double w = phi.two_slot(std::ldexp(norms[i], static_cast<int>(j)), 0.0);
                if (w == 0.0) {
                    infinite[i] = 1;
                    return;
                }
                d = std::max(d, diff / w);
            }
            per_probe[i] = d;
        });
        GeneralizedMetricValue dn;
        for (std::size_t i = 0; i < np; ++i) {
            if (infinite[i]) {
                report.all_steps_finite = false;
                throw HypothesisError("d(J^n f, J^(n+1) f) is infinite at n = " + std::to_string(n) + ", probe " +
                                      std::to_string(i) + ": phi vanishes where consecutive iterates differ");
            }
            dn.value = std::max(dn.value, per_probe[i]);
        }
        report.step_distances.push_back(dn);
        if (n > 0) {
            const double prev = report.step_distances[n - 1].value;
            const double ratio = prev > 0.0 ? dn.value / prev : (dn.value > 0.0 ? INFINITY : 0.0);
            report.contraction_ratios.push_back(ratio);
            if (ratio > k + 1e-12) report.ratios_certified = false;
            if (ratio > k + 1e-9) {
                std::ostringstream os;
                os << "measured contraction ratio " << ratio << " at step " << n << " exceeds k = " << k;
                throw CertificateViolation(os.str());
            }
        }
        if (dn.value <= stop) {
            final_n = n;
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw HypothesisError("fixed-point iteration exhausted its orbit window of " + std::to_string(window) +
                              " steps before d_n <= tol (1 - k)");
    }

    report.iterations = final_n;
    report.first_step_distance = report.step_distances.front().value;
    report.certified_distance = report.first_step_distance / (1.0 - k);
    report.contraction_distance_bound = 1.0 / (16.0 * (1.0 - k));
    for (std::size_t m = 0; m <= final_n; ++m) {
        std::vector<Element> layer;
        layer.reserve(np);
        for (std::size_t i = 0; i < np; ++i) layer.push_back(g(m, i, 0));
        report.iterates.push_back(std::move(layer));
    }

    std::vector<Element> f_values, d_values;
    for (std::size_t i = 0; i < np; ++i) {
        const Element& a = probes.elements[i];
        std::vector<double> trace;
        if (options.keep_trace) {
            for (std::size_t m = 1; m <= final_n; ++m) trace.push_back((g(m, i, 0) - g(m - 1, i, 0)).norm());
        }
        ProbeRecovery row{i, norms[i], g(final_n, i, 0), report.tail_at(a), std::nullopt, std::move(trace)};
        if (options.exact) row.deviation_from_exact = (row.value - (*options.exact)(a)).norm();
        f_values.push_back(orbit[i][0]);
        d_values.push_back(row.value);
        report.max_tail = std::max(report.max_tail, row.tail);
        report.probes.push_back(std::move(row));
    }
    report.distance_f_to_result = generalized_metric(f_values, d_values, phi, norms).value;
    return report;
}

UniquenessResult uniqueness_check(const RecoveryReport& d1, const RecoveryReport& d2, const ProbeSet& probes,
                                  double roundoff_rel) {
    UniquenessResult out;
    out.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < probes.elements.size(); ++i) {
        const Element& a = probes.elements[i];
        const Element v1 = d1.evaluate(a);
        const double dev = (v1 - d2.evaluate(a)).norm();
        const double allowed = d1.tail_at(a) + d2.tail_at(a) + roundoff_rel * std::max(1.0, v1.norm());
        out.max_deviation = std::max(out.max_deviation, dev);
        if (allowed - dev < out.worst_margin) {
            out.worst_margin = allowed - dev;
            out.worst_probe = i;
        }
        if (dev > allowed) out.pass = false;
    }
    return out;
}

}  // namespace cubicderiv
