#pragma once

#include "cubicderiv/control.hpp"
#include "cubicderiv/kernels.hpp"
#include "cubicderiv/maps.hpp"
#include "cubicderiv/probes.hpp"

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cubicderiv {

/// The iteration's hypotheses do not hold on the probe set (infinite step
/// distance, measured contraction above the certificate, ...).
class HypothesisError : public Error {
public:
    using Error::Error;
};

class CertificateViolation : public HypothesisError {
public:
    using HypothesisError::HypothesisError;
};

/// Value of the generalized metric; may be +infinity.
struct GeneralizedMetricValue {
    double value = 0.0;

    [[nodiscard]] bool is_infinite() const noexcept { return value == std::numeric_limits<double>::infinity(); }
    static GeneralizedMetricValue infinity() { return {std::numeric_limits<double>::infinity()}; }
};

/// d(g, h) = max_a |g(a) - h(a)| / phi(a, 0) over the given points; +inf when
/// phi(a, 0) = 0 at a point where g and h differ.
GeneralizedMetricValue generalized_metric(std::span<const Element> g, std::span<const Element> h,
                                          const ControlFunction& phi, std::span<const double> norms);
GeneralizedMetricValue generalized_metric(std::span<const Element> g, std::span<const Element> h,
                                          const ControlFunction& phi, const ProbeSet& probes);

enum class Engine { DirectForward, DirectBackward, FixedPoint };
std::string to_string(Engine engine);
Engine parse_engine(const std::string& name);

struct ProbeRecovery {
    std::size_t probe_id;
    double norm;
    Element value;      // recovered D(a)
    double tail = 0.0;  // bound on |value - D(a)| for the true limit D
    std::optional<double> deviation_from_exact;
    std::vector<double> trace;  // |D_n(a) - D_{n-1}(a)|, n = 1..N
};

struct RecoveryOptions {
    Exec exec = Exec::Parallel;
    const MapExpr* exact = nullptr;  // when known, deviations from it are reported
    bool keep_trace = true;
};

struct RecoveryReport {
    Engine engine = Engine::DirectForward;
    std::size_t iterations = 0;  // N for direct engines, final n for the fixed-point engine
    double tol = 0.0;
    double k_hat = std::numeric_limits<double>::quiet_NaN();
    double max_tail = 0.0;
    std::vector<ProbeRecovery> probes;

    // fixed-point engine only
    std::vector<GeneralizedMetricValue> step_distances;  // d(J^n f, J^{n+1} f), n = 0..final
    std::vector<double> contraction_ratios;
    bool ratios_certified = true;                // every ratio <= k + 1e-12
    std::vector<std::vector<Element>> iterates;  // iterates[n][probe] = J^n f(a)
    bool all_steps_finite = true;                // the n0 = 0 claim
    double first_step_distance = 0.0;            // d(f, J f)
    double distance_f_to_result = 0.0;           // measured d(f, D)
    double certified_distance = 0.0;             // d(f, J f) / (1 - k)
    double contraction_distance_bound = 0.0;         // 1 / (16 (1 - k))

    std::shared_ptr<const MapExpr> source;
    ControlFunction control;

    /// D(a) = f(2^N a) / 8^N (forward, fixed point) or 8^N f(a / 2^N)
    /// (backward) at an arbitrary point, with the report's N.
    [[nodiscard]] Element evaluate(const Element& a) const;
    /// Tail bound at an arbitrary point, same rule the engine used.
    [[nodiscard]] double tail_at(const Element& a) const;
};

/// J^n f(a) = f(2^n a) / 8^n for n = 0..count-1.
std::vector<Element> forward_iterates(const MapExpr& f, const Element& a, std::size_t count);
/// 8^n f(a / 2^n) for n = 0..count-1.
std::vector<Element> backward_iterates(const MapExpr& f, const Element& a, std::size_t count);

/// f at each point, by index.
std::vector<Element> evaluate_batch(const Evaluator& f, std::span<const Element> points, Exec exec = Exec::Parallel);

/// D = lim f(2^n a) / 8^n, N the smallest index with
/// (1/16) sum_{k>=N} phi(2^k a, 0, 0, 0) / 8^k <= tol on every probe.
RecoveryReport direct_forward(const MapExpr& f, const ControlFunction& phi, const ProbeSet& probes, double tol,
                              const RecoveryOptions& options = {});

/// D = lim 8^n f(a / 2^n), N the smallest index with
/// (1/16) sum_{k>N} 8^k phi(a / 2^k, 0, 0, 0) <= tol on every probe.
RecoveryReport direct_backward(const MapExpr& f, const ControlFunction& phi, const ProbeSet& probes, double tol,
                               const RecoveryOptions& options = {});

/// Iterates J h(a) = h(2a) / 8 in the generalized metric until
/// d(J^n f, J^{n+1} f) <= tol (1 - k). Distances at step n are taken over the
/// doubling orbits 2^j a, j = 0..W-n, of every probe, so that each step's
/// window is the image of the previous one.
RecoveryReport fixed_point_recover(const MapExpr& f, const ControlFunction& phi, const ProbeSet& probes, double tol,
                                   const RecoveryOptions& options = {});

struct UniquenessResult {
    double max_deviation = 0.0;
    double worst_margin = 0.0;  // min over probes of (allowed - deviation)
    std::size_t worst_probe = 0;
    bool pass = true;
};

/// max |D1(a) - D2(a)| over the probes, each compared against
/// tail1(a) + tail2(a) + roundoff_rel * max(1, |D1(a)|).
UniquenessResult uniqueness_check(const RecoveryReport& d1, const RecoveryReport& d2, const ProbeSet& probes,
                                  double roundoff_rel = 1e-12);

}  // namespace cubicderiv
