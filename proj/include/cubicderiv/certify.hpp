#pragma once

#include "cubicderiv/control.hpp"
#include "cubicderiv/recover.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cubicderiv {

enum class BoundFamily {
    StabilitySeries,  ///< |f - D| <= (1/16) phi~(a, 0, 0, 0), forward or backward series
    PowerForward,     ///< delta |a|^r / (2 (8 - 2^r))
    PowerBackward,    ///< delta |a|^r / (2 (2^r - 8))
    FixedPoint,       ///< phi(a, 0) / (16 (1 - k))
    Superstability,
};
std::string to_string(BoundFamily family);

/// Absolute slack added to each probe's truncation tail.
inline constexpr double kCertifySlack = 1e-10;
/// Relative tolerance of the superstability checks.
inline constexpr double kSuperstabilityTolerance = 1e-10;

struct CertificateRow {
    std::size_t probe_id;
    double norm;
    double deviation;
    double bound;
    double margin;  // bound - deviation
    double tail;
};

struct CertificateReport {
    std::string scenario_id;
    BoundFamily family = BoundFamily::StabilitySeries;
    std::vector<CertificateRow> rows;
    bool pass = true;
    std::string verdict;
    double min_margin = std::numeric_limits<double>::infinity();
    double slack = kCertifySlack;

    double delta_hat = std::numeric_limits<double>::quiet_NaN();
    double k_hat = std::numeric_limits<double>::quiet_NaN();
    std::size_t iterations = 0;
    double max_tail = 0.0;
    std::string control;
    ProbeConfig probes;

    std::optional<std::size_t> witness_probe;
    double witness_value = 0.0;
    std::string witness;
    std::vector<std::string> notes;
};

/// A recovered map as the checks see it: values and per-point tail bounds.
struct RecoveredMap {
    Evaluator eval;
    std::function<double(const Element&)> tail;
    Engine engine = Engine::DirectForward;
    std::size_t iterations = 0;
    double k_hat = std::numeric_limits<double>::quiet_NaN();

    static RecoveredMap from(const RecoveryReport& report);
};

/// |f(a) - D(a)| <= (1/16) phi~(a, 0, 0, 0) with the series in the engine's
/// direction (forward for the fixed-point engine).
CertificateReport check_stability_bound(const MapExpr& f, const RecoveredMap& d, const ControlFunction& phi,
                                        const ProbeSet& probes);

/// Closed-form bound for the power control; r = 3 and the wrong side of 3
/// are rejected.
CertificateReport check_power_corollary(const MapExpr& f, const RecoveredMap& d, double delta_hat, double r,
                                        const ProbeSet& probes, Direction direction);

/// |f(a) - D(a)| <= phi(a, 0) / (16 (1 - k)).
CertificateReport check_fixed_point_bound(const MapExpr& f, const RecoveredMap& d, const ControlFunction& phi,
                                          double k_hat, const ProbeSet& probes);

/// Re-judges a bound certificate with another absolute slack.
void apply_slack(CertificateReport& rep, double slack);

/// Product control with 0 < p + q < 3 (or p + q > 3, p > 0): checks
/// |f(2a) - 8 f(a)| <= 1e-10 max(1, |f(a)|) on every probe and that all three
/// residual families vanish to the same relative tolerance.
CertificateReport superstability_check(const MapExpr& f, double delta_hat, double p, double q, const ProbeSet& probes,
                                       Exec exec = Exec::Parallel);

}  // namespace cubicderiv
