#pragma once

#include "cubicderiv/kernels.hpp"
#include "cubicderiv/maps.hpp"
#include "cubicderiv/probes.hpp"

#include <functional>
#include <limits>
#include <string>

namespace cubicderiv {

class DivergenceError : public Error {
public:
    using Error::Error;
};

class NoContractionError : public Error {
public:
    using Error::Error;
};

class ScaleLimitError : public Error {
public:
    using Error::Error;
};

enum class ControlKind { Power, Product, Custom };

std::string to_string(ControlKind kind);
ControlKind parse_control_kind(const std::string& name);

/// Control function phi, evaluated on the norms of its arguments.
///
///   power:   delta (|a|^r + |b|^r + |c|^r + |d|^r)
///   product: delta (|a|^p |b|^q + |c|^p |d|^q)
///   custom:  user hook on the four norms
///
/// Zero arguments contribute nothing, including at exponent 0 (|0|^0 := 0).
/// The two-argument form phi(a, b) is phi(a, b, 0, 0); the derivation
/// hypothesis reads phi(0, 0, c, d).
struct ControlFunction {
    using Hook = std::function<double(double, double, double, double)>;

    ControlKind kind = ControlKind::Power;
    double delta = 1.0;
    double r = 0.0;
    double p = 0.0;
    double q = 0.0;
    Hook custom;
    /// Declared sup phi(2x)/(8 phi(x)) for custom controls (forward series
    /// and contraction), and sup 8 phi(x/2)/phi(x) (backward series).
    double custom_forward_ratio = std::numeric_limits<double>::infinity();
    double custom_backward_ratio = std::numeric_limits<double>::infinity();

    static ControlFunction power(double delta, double r);
    static ControlFunction product(double delta, double p, double q);
    static ControlFunction make_custom(double delta, Hook hook, double forward_ratio, double backward_ratio);

    [[nodiscard]] ControlFunction with_delta(double d) const;

    [[nodiscard]] double operator()(double na, double nb, double nc, double nd) const;
    [[nodiscard]] double two_slot(double na, double nb) const { return (*this)(na, nb, 0.0, 0.0); }

    /// q with phi(2x) <= 8 q phi(x) for all arguments.
    [[nodiscard]] double forward_ratio() const;
    /// q with 8 phi(x/2) <= q phi(x) for all arguments.
    [[nodiscard]] double backward_ratio() const;

    [[nodiscard]] std::string describe() const;
};

/// |0|^e := 0, otherwise x^e.
double pow_norm(double x, double e);

double eval_phi(const ControlFunction& phi, const Element& a, const Element& b, const Element& c, const Element& d);

struct SeriesResult {
    double value = 0.0;       // partial sum over the first `terms` terms
    double tail_bound = 0.0;  // bound on the omitted remainder
    std::size_t terms = 0;
};

/// sum_{k>=0} phi(2^k a, 2^k b, 2^k c, 2^k d) / 8^k, truncated once the
/// geometric tail (first omitted term)/(1 - q) drops to `tol`.
SeriesResult tilde_series_forward(const ControlFunction& phi, double na, double nb, double nc, double nd, double tol);
/// Same with a fixed number of terms.
SeriesResult tilde_series_forward_terms(const ControlFunction& phi, double na, double nb, double nc, double nd,
                                        std::size_t terms);
/// sum_{k>=1} 8^k phi(a/2^k, b/2^k, c/2^k, d/2^k), truncated likewise.
SeriesResult tilde_series_backward(const ControlFunction& phi, double na, double nb, double nc, double nd, double tol);
SeriesResult tilde_series_backward_terms(const ControlFunction& phi, double na, double nb, double nc, double nd,
                                         std::size_t terms);

enum class Direction { Forward, Backward };
std::string to_string(Direction d);

/// delta/(2(8 - 2^r)) |a|^r forward (r < 3), delta/(2(2^r - 8)) |a|^r backward (r > 3).
double closed_form_power_bound(double delta, double r, double norm_a, Direction direction);

/// k = max phi(2a, 2b) / (8 phi(a, b)) over the probe pairs, skipping pairs
/// with phi(a, b) = 0. Power and product kinds return the analytic value
/// 2^(r-3) resp. 2^(p+q-3); custom kinds are checked against their declared
/// ratio. Throws NoContractionError when k >= 1.
double contraction_constant(const ControlFunction& phi, const ProbeSet& probes);

/// f = D + h for an exact D.
MapExpr make_perturbed_map(const MapExpr& exact, const PerturbationSpec& spec);

/// Which points enter the measured control level.
struct DeltaSampling {
    std::size_t forward_chain = 0;   // also sample (2^j a, 0), j = 1..forward_chain, lambda = 1
    std::size_t backward_chain = 0;  // also sample (a / 2^j, 0), j = 1..backward_chain, lambda = 1
    double zero_floor = 1e-13;       // roundoff allowance, relative to the summed term norms
};

struct DeltaMeasurement {
    double delta_hat = 0.0;  // +inf when the hypotheses fail at some probe
    bool finite = true;
    std::string witness;     // where the maximum (or the failure) occurred
    std::size_t samples = 0;
};

/// Smallest control level making both residual hypotheses hold on the
/// probe set: max of residual / phi_unit over cubic samples (pairs x arc
/// scalars, plus the doubling chains) and derivation samples (pairs), with
/// phi_unit = phi at delta = 1.
DeltaMeasurement measure_delta(const MapExpr& f, const ControlFunction& phi, const ProbeSet& probes,
                               const DeltaSampling& sampling = {}, Exec exec = Exec::Parallel);

}  // namespace cubicderiv
