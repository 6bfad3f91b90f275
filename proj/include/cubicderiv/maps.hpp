#pragma once

#include "cubicderiv/algebra.hpp"
#include "cubicderiv/kernels.hpp"
#include "cubicderiv/probes.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cubicderiv {

/// Sparse rank-4 tensor T[l][i][j][k], symmetric in (i, j, k), defining the
/// homogeneous cubic map a -> sum T[l][i][j][k] a_i a_j a_k.
class CubicTensor {
public:
    struct Entry {
        std::uint32_t l, i, j, k;
        Complex value;
    };

    CubicTensor() = default;
    CubicTensor(std::size_t out_dim, std::size_t in_dim) : out_dim_(out_dim), in_dim_(in_dim) {}

    /// Symmetrizes raw trilinear coefficients: each (l, i, j, k, v) is spread
    /// evenly over the distinct orderings of (i, j, k).
    static CubicTensor symmetrized(std::size_t out_dim, std::size_t in_dim, const std::vector<Entry>& raw);

    [[nodiscard]] std::size_t out_dim() const noexcept { return out_dim_; }
    [[nodiscard]] std::size_t in_dim() const noexcept { return in_dim_; }
    [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }
    [[nodiscard]] Complex at(std::size_t l, std::size_t i, std::size_t j, std::size_t k) const;

    /// Largest |T[l][i][j][k] - T[l][sigma(i,j,k)]| over stored entries.
    [[nodiscard]] double symmetry_defect() const;

    void apply(std::span<const Complex> a, std::span<Complex> out) const;

private:
    std::size_t out_dim_ = 0;
    std::size_t in_dim_ = 0;
    std::vector<Entry> entries_;  // sorted by (l, i, j, k)
};

enum class PerturbationKind {
    None,
    Bounded,     ///< eps * psi(t) * u
    PowerDecay,  ///< eps * min(1, |a|)^r * psi(t) * u
    Product,     ///< eps * min(1, |a|)^(p+q) * psi(t) * u
    Linear,      ///< eps * <w, a> * u
    Custom,      ///< user callable, must vanish at 0
};

std::string to_string(PerturbationKind kind);
PerturbationKind parse_perturbation_kind(const std::string& name);

/// Parameters of the additive perturbation h in f = D + h. For the bump kinds
/// psi(t) = t / (1 + t^2) with t = Re <w, a>, so |psi| <= 1/2 and h(0) = 0.
/// The seed draws the unit direction u and the functional w unless given.
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::None;
    double epsilon = 0.0;
    double r = 0.0;
    double p = 0.0;
    double q = 0.0;
    std::uint64_t seed = 0;
    std::optional<std::vector<Complex>> direction;   // codomain coords, rescaled to unit norm
    std::optional<std::vector<Complex>> functional;  // domain coords, used as given
    std::function<Element(const Element&)> custom;
    std::string custom_label;
};

class MapExpr {
public:
    MapExpr(AlgebraPtr domain, BimodulePtr codomain, CubicTensor cubic);

    [[nodiscard]] const AlgebraPtr& domain() const noexcept { return domain_; }
    [[nodiscard]] const BimodulePtr& codomain() const noexcept { return codomain_; }
    [[nodiscard]] const CubicTensor& cubic_part() const noexcept { return cubic_; }
    [[nodiscard]] const PerturbationSpec& perturbation() const noexcept { return perturb_; }
    [[nodiscard]] bool is_exact() const noexcept { return perturb_.kind == PerturbationKind::None; }

    /// f(a); exactly zero at a = 0.
    [[nodiscard]] Element operator()(const Element& a) const;
    [[nodiscard]] Element eval(const Element& a) const { return (*this)(a); }
    /// h(a) alone.
    [[nodiscard]] Element perturbation_value(const Element& a) const;
    /// Envelope factor s(a) with |h(a)| <= eps * s(a); empty for kinds
    /// without a certified envelope.
    [[nodiscard]] std::optional<double> envelope(const Element& a) const;

    [[nodiscard]] MapExpr with_perturbation(PerturbationSpec spec) const;
    [[nodiscard]] MapExpr exact_part() const;

private:
    AlgebraPtr domain_;
    BimodulePtr codomain_;
    CubicTensor cubic_;
    PerturbationSpec perturb_;
    std::optional<Element> direction_;
    std::vector<Complex> functional_;
};

/// D(a) = g0 . a^3 - a^3 . g0 as an exact cubic tensor map A -> X.
MapExpr commutator_cube_map(const BimodulePtr& module, const Element& g0);

/// The triangular example's exact map.
MapExpr triangular_derivation(const TriangularExample& ex);

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

/// A residual norm together with the summed norms of the terms that produced
/// it, so roundoff can be judged relative to the magnitudes involved.
struct Residual {
    double value = 0.0;
    double scale = 0.0;
    [[nodiscard]] double relative() const noexcept { return value / std::max(1.0, scale); }
};

/// |f(2la+lb) + f(2la-lb) - 2l^3 f(a+b) - 2l^3 f(a-b) - 12 l^3 f(a)|
Residual cubic_residual(const MapExpr& f, const Element& a, const Element& b, const ScalarSample& lambda);
/// |f(cd) - f(c).d^3 - c^3.f(d)|
Residual derivation_residual(const MapExpr& f, const Element& c, const Element& d);
/// |f(la) - l^3 f(a)|
Residual homogeneity_residual(const MapExpr& f, const ScalarSample& lambda, const Element& a);

/// Same residuals for an arbitrary evaluator (used for recovered maps).
using Evaluator = std::function<Element(const Element&)>;
Residual cubic_residual(const Evaluator& f, const Element& a, const Element& b, Complex lambda);
Residual derivation_residual(const Evaluator& f, const BimoduleSpec& mod, const Element& c, const Element& d);
Residual homogeneity_residual(const Evaluator& f, Complex lambda, const Element& a);

enum class ResidualFamily { Cubic, Derivation, Homogeneity };
std::string to_string(ResidualFamily family);

struct ResidualRow {
    std::size_t probe_id;  // pair index (cubic, derivation) or element index (homogeneity)
    ResidualFamily family;
    std::size_t scalar_id;  // index into arc (then extension) samples; 0 for derivation
    double value;
    double relative;
};

struct ResidualSummary {
    std::vector<ResidualRow> rows;
    double max_cubic = 0.0, max_derivation = 0.0, max_homogeneity = 0.0;
    double max_cubic_rel = 0.0, max_derivation_rel = 0.0, max_homogeneity_rel = 0.0;
};

/// All three families over the probe set: cubic on pairs x arc scalars,
/// derivation on pairs, homogeneity on elements x (arc + extension) scalars.
ResidualSummary residual_sweep(const MapExpr& f, const ProbeSet& probes, Exec exec = Exec::Parallel);

}  // namespace cubicderiv
