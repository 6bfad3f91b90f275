#include "cubicderiv/certify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cubicderiv {

std::string to_string(BoundFamily family) {
    switch (family) {
        case BoundFamily::StabilitySeries: return "stability-series";
        case BoundFamily::PowerForward: return "power-forward";
        case BoundFamily::PowerBackward: return "power-backward";
        case BoundFamily::FixedPoint: return "fixed-point";
        case BoundFamily::Superstability: return "superstability";
    }
    return "?";
}

RecoveredMap RecoveredMap::from(const RecoveryReport& report) {
    auto shared = std::make_shared<RecoveryReport>(report);
    RecoveredMap m;
    m.eval = [shared](const Element& a) { return shared->evaluate(a); };
    m.tail = [shared](const Element& a) { return shared->tail_at(a); };
    m.engine = report.engine;
    m.iterations = report.iterations;
    m.k_hat = report.k_hat;
    return m;
}

namespace {

// Series sums are taken to this relative accuracy; the remainder joins the slack.
constexpr double kSeriesRelTol = 1e-15;

using BoundFn = std::function<std::pair<double, double>(const Element&)>;  // (bound, extra tail)

void judge(CertificateReport& rep) {
    rep.pass = true;
    rep.witness_probe.reset();
    rep.witness.clear();
    rep.witness_value = 0.0;
    for (const auto& row : rep.rows) {
        if (row.margin < -(row.tail + rep.slack)) {
            rep.pass = false;
            rep.witness_probe = row.probe_id;
            rep.witness_value = row.deviation;
            std::ostringstream os;
            os << "probe " << row.probe_id << " (|a| = " << row.norm << "): deviation " << row.deviation
               << " exceeds bound " << row.bound << " by more than tail " << row.tail;
            rep.witness = os.str();
            break;
        }
    }
    rep.verdict = rep.pass ? "pass: " + to_string(rep.family) + " bound holds on every probe"
                           : "fail: " + to_string(rep.family) + " bound violated";
}

CertificateReport bound_check(BoundFamily family, const MapExpr& f, const RecoveredMap& d, const ProbeSet& probes,
                              const BoundFn& bound_of) {
    CertificateReport rep;
    rep.family = family;
    rep.iterations = d.iterations;
    rep.k_hat = d.k_hat;
    rep.probes = probes.config;
    const std::size_t n = probes.elements.size();
    std::vector<std::optional<CertificateRow>> rows(n);
    for_each_index(n, Exec::Parallel, [&](std::size_t i) {
        const Element& a = probes.elements[i];
        const double dev = (f(a) - d.eval(a)).norm();
        const auto [bound, extra] = bound_of(a);
        const double tail = d.tail(a) + extra;
        rows[i] = CertificateRow{i, a.norm(), dev, bound, bound - dev, tail};
    });
    for (auto& row : rows) {
        rep.max_tail = std::max(rep.max_tail, row->tail);
        rep.min_margin = std::min(rep.min_margin, row->margin);
        rep.rows.push_back(*row);
    }
    if (rep.rows.empty()) rep.min_margin = 0.0;
    judge(rep);
    return rep;
}

}  // namespace

CertificateReport check_stability_bound(const MapExpr& f, const RecoveredMap& d, const ControlFunction& phi,
                                        const ProbeSet& probes) {
    const bool backward = d.engine == Engine::DirectBackward;
    auto rep = bound_check(BoundFamily::StabilitySeries, f, d, probes, [&](const Element& a) {
        const double na = a.norm();
        const double first = backward ? phi(na / 2.0, 0, 0, 0) * 8.0 : phi(na, 0, 0, 0);
        const double tol = kSeriesRelTol * std::max(first, 1e-300);
        const SeriesResult s = backward ? tilde_series_backward(phi, na, 0, 0, 0, tol)
                                        : tilde_series_forward(phi, na, 0, 0, 0, tol);
        return std::pair{s.value / 16.0, s.tail_bound / 16.0};
    });
    rep.delta_hat = phi.delta;
    rep.control = phi.describe();
    rep.notes.push_back(std::string(backward ? "backward" : "forward") + " series bound (1/16) phi~(a, 0, 0, 0)");
    return rep;
}

CertificateReport check_power_corollary(const MapExpr& f, const RecoveredMap& d, double delta_hat, double r,
                                        const ProbeSet& probes, Direction direction) {
    // Validates r before touching any probe.
    (void)closed_form_power_bound(delta_hat, r, 1.0, direction);
    const auto family = direction == Direction::Forward ? BoundFamily::PowerForward : BoundFamily::PowerBackward;
    auto rep = bound_check(family, f, d, probes, [&](const Element& a) {
        return std::pair{closed_form_power_bound(delta_hat, r, a.norm(), direction), 0.0};
    });
    rep.delta_hat = delta_hat;
    rep.control = ControlFunction::power(delta_hat, r).describe();
    return rep;
}

CertificateReport check_fixed_point_bound(const MapExpr& f, const RecoveredMap& d, const ControlFunction& phi,
                                          double k_hat, const ProbeSet& probes) {
    if (!(k_hat < 1.0) || !(k_hat >= 0.0)) {
        std::ostringstream os;
        os << "fixed-point bound needs a contraction constant in [0, 1), got " << k_hat;
        throw NoContractionError(os.str());
    }
    const double coeff = 1.0 / (16.0 * (1.0 - k_hat));
    auto rep = bound_check(BoundFamily::FixedPoint, f, d, probes,
                           [&](const Element& a) { return std::pair{coeff * phi.two_slot(a.norm(), 0.0), 0.0}; });
    rep.delta_hat = phi.delta;
    rep.k_hat = k_hat;
    rep.control = phi.describe();
    return rep;
}

void apply_slack(CertificateReport& rep, double slack) {
    if (rep.family == BoundFamily::Superstability) return;
    rep.slack = slack;
    judge(rep);
}

CertificateReport superstability_check(const MapExpr& f, double delta_hat, double p, double q,
                                       const ProbeSet& probes, Exec exec) {
    const double s = p + q;
    if (s == 3.0) throw ConfigurationError("superstability needs p + q != 3");
    if (!(s > 0.0)) throw ConfigurationError("superstability needs p + q > 0");
    if (s > 3.0 && !(p > 0.0)) throw ConfigurationError("superstability with p + q > 3 needs p > 0");

    CertificateReport rep;
    rep.family = BoundFamily::Superstability;
    rep.delta_hat = delta_hat;
    rep.control = ControlFunction::product(delta_hat, p, q).describe();
    rep.probes = probes.config;
    rep.min_margin = std::numeric_limits<double>::infinity();

    const std::size_t n = probes.elements.size();
    std::vector<std::optional<CertificateRow>> rows(n);
    for_each_index(n, exec, [&](std::size_t i) {
        const Element& a = probes.elements[i];
        const Element fa = f(a);
        const double dev = (f(a * Complex{2.0, 0.0}) - fa * Complex{8.0, 0.0}).norm();
        const double bound = kSuperstabilityTolerance * std::max(1.0, fa.norm());
        rows[i] = CertificateRow{i, a.norm(), dev, bound, bound - dev, 0.0};
    });
    for (auto& row : rows) {
        rep.min_margin = std::min(rep.min_margin, row->margin);
        if (row->margin < 0.0 && rep.pass) {
            rep.pass = false;
            rep.witness_probe = row->probe_id;
            rep.witness_value = row->deviation;
            std::ostringstream os;
            os << "probe " << row->probe_id << " (|a| = " << row->norm << "): |f(2a) - 8 f(a)| = " << row->deviation;
            rep.witness = os.str();
        }
        rep.rows.push_back(*row);
    }
    if (rep.rows.empty()) rep.min_margin = 0.0;

    const ResidualSummary sweep = residual_sweep(f, probes, exec);
    std::ostringstream res;
    res << "relative residual maxima: cubic " << sweep.max_cubic_rel << ", derivation " << sweep.max_derivation_rel
        << ", homogeneity " << sweep.max_homogeneity_rel;
    rep.notes.push_back(res.str());
    const bool residuals_vanish = sweep.max_cubic_rel <= kSuperstabilityTolerance &&
                                  sweep.max_derivation_rel <= kSuperstabilityTolerance &&
                                  sweep.max_homogeneity_rel <= kSuperstabilityTolerance;
    if (!residuals_vanish && rep.pass) {
        rep.pass = false;
        for (const auto& row : sweep.rows) {
            if (row.relative > kSuperstabilityTolerance) {
                rep.witness = to_string(row.family) + " residual " + std::to_string(row.relative) +
                              " (relative) at probe " + std::to_string(row.probe_id) + ", scalar " +
                              std::to_string(row.scalar_id);
                break;
            }
        }
    }
    rep.notes.push_back("the homogeneity hypotheses are sampled at " + std::to_string(probes.arc.size()) +
                        " points of the unit arc, not verified for every scalar");
    rep.verdict = rep.pass ? "superstable: f itself is a cubic derivation"
                           : "not superstable: f is not a cubic derivation";
    return rep;
}

}  // namespace cubicderiv
