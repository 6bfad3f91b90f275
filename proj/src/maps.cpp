#include "cubicderiv/maps.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace cubicderiv {

// ---------------------------------------------------------------------------
// CubicTensor
// ---------------------------------------------------------------------------

CubicTensor CubicTensor::symmetrized(std::size_t out_dim, std::size_t in_dim, const std::vector<Entry>& raw) {
    using Key = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>;
    std::map<Key, Complex> acc;
    for (const auto& e : raw) {
        if (e.l >= out_dim || e.i >= in_dim || e.j >= in_dim || e.k >= in_dim) {
            throw DimensionError("cubic tensor entry out of range");
        }
        // spread over the distinct orderings only, so diagonal entries stay exact
        std::set<Key> orderings{{e.l, e.i, e.j, e.k}, {e.l, e.i, e.k, e.j}, {e.l, e.j, e.i, e.k},
                                {e.l, e.j, e.k, e.i}, {e.l, e.k, e.i, e.j}, {e.l, e.k, e.j, e.i}};
        const Complex v = e.value / static_cast<double>(orderings.size());
        for (const auto& key : orderings) acc[key] += v;
    }
    CubicTensor t(out_dim, in_dim);
    t.entries_.reserve(acc.size());
    for (const auto& [key, v] : acc) {
        if (v == Complex{}) continue;
        const auto [l, i, j, k] = key;
        t.entries_.push_back({l, i, j, k, v});
    }
    return t;
}

Complex CubicTensor::at(std::size_t l, std::size_t i, std::size_t j, std::size_t k) const {
    const auto key = std::make_tuple(l, i, j, k);
    const auto it = std::lower_bound(entries_.begin(), entries_.end(), key, [](const Entry& e, const auto& k2) {
        return std::make_tuple<std::size_t, std::size_t, std::size_t, std::size_t>(e.l, e.i, e.j, e.k) < k2;
    });
    if (it != entries_.end() && it->l == l && it->i == i && it->j == j && it->k == k) return it->value;
    return {};
}

double CubicTensor::symmetry_defect() const {
    double defect = 0.0;
    for (const auto& e : entries_) {
        const Complex ref = e.value;
        for (const Complex other : {at(e.l, e.i, e.k, e.j), at(e.l, e.j, e.i, e.k), at(e.l, e.j, e.k, e.i),
                                    at(e.l, e.k, e.i, e.j), at(e.l, e.k, e.j, e.i)}) {
            defect = std::max(defect, std::abs(ref - other));
        }
    }
    return defect;
}

void CubicTensor::apply(std::span<const Complex> a, std::span<Complex> out) const {
    std::fill(out.begin(), out.end(), Complex{});
    for (const auto& e : entries_) {
        out[e.l] += e.value * a[e.i] * a[e.j] * a[e.k];
    }
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

std::string to_string(PerturbationKind kind) {
    switch (kind) {
    case PerturbationKind::None: return "none";
    case PerturbationKind::Bounded: return "bounded";
    case PerturbationKind::PowerDecay: return "power-decay";
    case PerturbationKind::Product: return "product";
    case PerturbationKind::Linear: return "linear";
    case PerturbationKind::Custom: return "custom";
    }
    return "?";
}

PerturbationKind parse_perturbation_kind(const std::string& name) {
    if (name == "none") return PerturbationKind::None;
    if (name == "bounded") return PerturbationKind::Bounded;
    if (name == "power-decay" || name == "power-decay-r") return PerturbationKind::PowerDecay;
    if (name == "product" || name == "product-pq") return PerturbationKind::Product;
    if (name == "linear") return PerturbationKind::Linear;
    if (name == "custom") return PerturbationKind::Custom;
    throw ConfigurationError("unknown perturbation kind '" + name + "'");
}

namespace {

Complex pairing(std::span<const Complex> w, std::span<const Complex> a) {
    Complex acc{};
    for (std::size_t i = 0; i < a.size(); ++i) acc += w[i] * a[i];
    return acc;
}

}  // namespace

MapExpr::MapExpr(AlgebraPtr domain, BimodulePtr codomain, CubicTensor cubic)
    : domain_(std::move(domain)), codomain_(std::move(codomain)), cubic_(std::move(cubic)) {
    if (!domain_ || !codomain_) throw ConfigurationError("map needs a domain and a codomain");
    if (cubic_.in_dim() != domain_->dim() || cubic_.out_dim() != codomain_->dim()) {
        throw DimensionError("cubic tensor shape does not match map domain/codomain");
    }
    if (cubic_.symmetry_defect() > 1e-14) {
        throw ValidationError("cubic part is not symmetric in its three input slots");
    }
}

Element MapExpr::perturbation_value(const Element& a) const {
    require_same_space(a, domain_->space, "map evaluation");
    if (perturb_.kind == PerturbationKind::None || a.is_zero()) return Element::zero(codomain_->space);
    if (perturb_.kind == PerturbationKind::Custom) {
        Element h = perturb_.custom(a);
        require_same_space(h, codomain_->space, "custom perturbation");
        return h;
    }
    const double eps = perturb_.epsilon;
    if (perturb_.kind == PerturbationKind::Linear) {
        return (eps * pairing(functional_, a.coords())) * *direction_;
    }
    const double t = pairing(functional_, a.coords()).real();
    double amplitude = eps * t / (1.0 + t * t);
    const double na = a.norm();
    if (perturb_.kind == PerturbationKind::PowerDecay) {
        amplitude *= std::pow(std::min(1.0, na), perturb_.r);
    } else if (perturb_.kind == PerturbationKind::Product) {
        amplitude *= std::pow(std::min(1.0, na), perturb_.p + perturb_.q);
    }
    return Complex{amplitude, 0.0} * *direction_;
}

std::optional<double> MapExpr::envelope(const Element& a) const {
    switch (perturb_.kind) {
    case PerturbationKind::None:
    case PerturbationKind::Bounded: return 1.0;
    case PerturbationKind::PowerDecay: return a.is_zero() ? 0.0 : std::pow(std::min(1.0, a.norm()), perturb_.r);
    case PerturbationKind::Product:
        return a.is_zero() ? 0.0 : std::pow(std::min(1.0, a.norm()), perturb_.p + perturb_.q);
    default: return std::nullopt;
    }
}

Element MapExpr::operator()(const Element& a) const {
    require_same_space(a, domain_->space, "map evaluation");
    std::vector<Complex> out(codomain_->dim());
    if (a.is_zero()) return Element(codomain_->space, std::move(out));
    cubic_.apply(a.coords(), out);
    Element value(codomain_->space, std::move(out));
    if (perturb_.kind != PerturbationKind::None) value += perturbation_value(a);
    return value;
}

MapExpr MapExpr::with_perturbation(PerturbationSpec spec) const {
    MapExpr f = exact_part();
    if (spec.kind == PerturbationKind::None) return f;
    if (!(spec.epsilon >= 0.0)) throw ConfigurationError("perturbation.epsilon must be nonnegative");
    if (spec.r < 0.0 || spec.p < 0.0 || spec.q < 0.0) {
        throw ConfigurationError("perturbation shape exponents must be nonnegative");
    }
    if (spec.kind == PerturbationKind::Custom) {
        if (!spec.custom) throw ConfigurationError("custom perturbation needs a callable");
        if (!spec.custom(Element::zero(domain_->space)).is_zero()) {
            throw ValidationError("custom perturbation must vanish at 0");
        }
        f.perturb_ = std::move(spec);
        return f;
    }
    Rng rng(spec.seed);
    if (spec.direction) {
        Element u(codomain_->space, *spec.direction);
        const double n = u.norm();
        if (!(n > 0.0)) throw ConfigurationError("perturbation direction must be nonzero");
        f.direction_ = (1.0 / n) * u;
    } else {
        f.direction_ = random_unit_element(codomain_->space, rng);
    }
    if (spec.functional) {
        if (spec.functional->size() != domain_->dim()) throw DimensionError("perturbation functional has wrong length");
        f.functional_ = *spec.functional;
    } else {
        f.functional_.resize(domain_->dim());
        double l1 = 0.0;
        for (auto& w : f.functional_) {
            w = rng.complex_normal(domain_->space->real_probes);
            l1 += std::abs(w);
        }
        for (auto& w : f.functional_) w /= l1;
    }
    f.perturb_ = std::move(spec);
    return f;
}

MapExpr MapExpr::exact_part() const {
    MapExpr f(*this);
    f.perturb_ = PerturbationSpec{};
    f.direction_.reset();
    f.functional_.clear();
    return f;
}

// ---------------------------------------------------------------------------
// Exact maps
// ---------------------------------------------------------------------------

MapExpr commutator_cube_map(const BimodulePtr& module, const Element& g0) {
    if (!module || !module->algebra) throw ConfigurationError("commutator map needs an attached bimodule");
    require_same_space(g0, module->space, "commutator_cube_map");
    const AlgebraSpec& alg = *module->algebra;
    const std::size_t n = alg.dim();

    // V[m] = g0 . e_m - e_m . g0
    std::vector<Element> v;
    v.reserve(n);
    for (std::size_t m = 0; m < n; ++m) {
        const Element em = Element::basis(alg.space, m);
        v.push_back(right_action(*module, g0, em) - left_action(*module, em, g0));
    }

    std::vector<std::vector<std::pair<std::uint32_t, Complex>>> rows(n * n);
    for (const auto& e : alg.mul.nonzeros()) rows[e.i * n + e.j].emplace_back(e.k, e.value);

    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t, std::uint32_t>, Complex> raw;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (const auto& [m, c1] : rows[i * n + j]) {
                for (std::size_t k = 0; k < n; ++k) {
                    for (const auto& [o, c2] : rows[m * n + k]) {
                        const auto coords = v[o].coords();
                        for (std::size_t l = 0; l < coords.size(); ++l) {
                            if (coords[l] == Complex{}) continue;
                            raw[{static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(i),
                                 static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k)}] += c1 * c2 * coords[l];
                        }
                    }
                }
            }
        }
    }
    std::vector<CubicTensor::Entry> entries;
    entries.reserve(raw.size());
    for (const auto& [key, val] : raw) {
        const auto [l, i, j, k] = key;
        entries.push_back({l, i, j, k, val});
    }
    return MapExpr(module->algebra, module, CubicTensor::symmetrized(module->dim(), n, entries));
}

MapExpr triangular_derivation(const TriangularExample& ex) { return commutator_cube_map(ex.dual, ex.g0); }

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

std::string to_string(ResidualFamily family) {
    switch (family) {
    case ResidualFamily::Cubic: return "cubic";
    case ResidualFamily::Derivation: return "derivation";
    case ResidualFamily::Homogeneity: return "homogeneity";
    }
    return "?";
}

Residual cubic_residual(const Evaluator& f, const Element& a, const Element& b, Complex lambda) {
    const Complex l3 = lambda * lambda * lambda;
    const Element t1 = f((2.0 * lambda) * a + lambda * b);
    const Element t2 = f((2.0 * lambda) * a - lambda * b);
    const Element t3 = f(a + b);
    const Element t4 = f(a - b);
    const Element t5 = f(a);
    Element combo = t1 + t2;
    combo -= (2.0 * l3) * t3;
    combo -= (2.0 * l3) * t4;
    combo -= (12.0 * l3) * t5;
    const double al3 = std::abs(l3);
    return {combo.norm(), t1.norm() + t2.norm() + al3 * (2.0 * t3.norm() + 2.0 * t4.norm() + 12.0 * t5.norm())};
}

Residual derivation_residual(const Evaluator& f, const BimoduleSpec& mod, const Element& c, const Element& d) {
    const AlgebraSpec& alg = *mod.algebra;
    const Element t1 = f(mul(alg, c, d));
    const Element t2 = right_action(mod, f(c), cube(alg, d));
    const Element t3 = left_action(mod, cube(alg, c), f(d));
    return {(t1 - t2 - t3).norm(), t1.norm() + t2.norm() + t3.norm()};
}

Residual homogeneity_residual(const Evaluator& f, Complex lambda, const Element& a) {
    const Complex l3 = lambda * lambda * lambda;
    const Element t1 = f(lambda * a);
    const Element t2 = l3 * f(a);
    return {(t1 - t2).norm(), t1.norm() + t2.norm()};
}

namespace {

Evaluator as_evaluator(const MapExpr& f) {
    return [&f](const Element& a) { return f(a); };
}

void require_module_over_domain(const MapExpr& f) {
    if (f.codomain()->algebra != f.domain() && f.codomain()->algebra->space != f.domain()->space) {
        throw ConfigurationError("derivation residual needs a codomain bimodule over the map's domain");
    }
}

}  // namespace

Residual cubic_residual(const MapExpr& f, const Element& a, const Element& b, const ScalarSample& lambda) {
    require_same_space(a, f.domain()->space, "cubic_residual");
    require_same_space(b, f.domain()->space, "cubic_residual");
    return cubic_residual(as_evaluator(f), a, b, lambda.value);
}

Residual derivation_residual(const MapExpr& f, const Element& c, const Element& d) {
    require_module_over_domain(f);
    return derivation_residual(as_evaluator(f), *f.codomain(), c, d);
}

Residual homogeneity_residual(const MapExpr& f, const ScalarSample& lambda, const Element& a) {
    require_same_space(a, f.domain()->space, "homogeneity_residual");
    return homogeneity_residual(as_evaluator(f), lambda.value, a);
}

ResidualSummary residual_sweep(const MapExpr& f, const ProbeSet& probes, Exec exec) {
    require_module_over_domain(f);
    const std::size_t np = probes.pairs.size();
    const std::size_t ne = probes.size();
    const std::size_t n_arc = probes.arc.size();
    std::vector<ScalarSample> hom_scalars = probes.arc;
    hom_scalars.insert(hom_scalars.end(), probes.extension.begin(), probes.extension.end());
    const std::size_t n_hom = hom_scalars.size();

    // Row layout: [cubic pairs x arc][derivation pairs][homogeneity elements x scalars]
    const std::size_t cubic_rows = np * n_arc;
    std::vector<ResidualRow> rows(cubic_rows + np + ne * n_hom);

    for_each_index(np, exec, [&](std::size_t p) {
        const Element a = probes.at(probes.pairs[p][0]);
        const Element b = probes.at(probes.pairs[p][1]);
        for (std::size_t s = 0; s < n_arc; ++s) {
            const Residual r = cubic_residual(f, a, b, probes.arc[s]);
            rows[p * n_arc + s] = {p, ResidualFamily::Cubic, s, r.value, r.relative()};
        }
        const Residual d = derivation_residual(f, a, b);
        rows[cubic_rows + p] = {p, ResidualFamily::Derivation, 0, d.value, d.relative()};
    });
    for_each_index(ne, exec, [&](std::size_t e) {
        for (std::size_t s = 0; s < n_hom; ++s) {
            const Residual r = homogeneity_residual(f, hom_scalars[s], probes.elements[e]);
            rows[cubic_rows + np + e * n_hom + s] = {e, ResidualFamily::Homogeneity, s, r.value, r.relative()};
        }
    });

    ResidualSummary out;
    for (const auto& row : rows) {
        switch (row.family) {
        case ResidualFamily::Cubic:
            out.max_cubic = std::max(out.max_cubic, row.value);
            out.max_cubic_rel = std::max(out.max_cubic_rel, row.relative);
            break;
        case ResidualFamily::Derivation:
            out.max_derivation = std::max(out.max_derivation, row.value);
            out.max_derivation_rel = std::max(out.max_derivation_rel, row.relative);
            break;
        case ResidualFamily::Homogeneity:
            out.max_homogeneity = std::max(out.max_homogeneity, row.value);
            out.max_homogeneity_rel = std::max(out.max_homogeneity_rel, row.relative);
            break;
        }
    }
    out.rows = std::move(rows);
    return out;
}

}  // namespace cubicderiv
