#include "cubicderiv/algebra.hpp"

#include "cubicderiv/probes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>

namespace cubicderiv {

namespace {

double weight(const std::vector<double>& w, std::size_t i) { return w.empty() ? 1.0 : w[i]; }

double flat_norm(NormKind kind, std::span<const Complex> c, const std::vector<double>& w,
                 std::size_t offset) {
    double acc = 0.0;
    switch (kind) {
    case NormKind::WeightedSum:
        for (std::size_t i = 0; i < c.size(); ++i) acc += weight(w, offset + i) * std::abs(c[i]);
        return acc;
    case NormKind::Max:
        for (std::size_t i = 0; i < c.size(); ++i) acc = std::max(acc, weight(w, offset + i) * std::abs(c[i]));
        return acc;
    case NormKind::Frobenius:
        for (std::size_t i = 0; i < c.size(); ++i) acc += weight(w, offset + i) * std::norm(c[i]);
        return std::sqrt(acc);
    default:
        throw ConfigurationError("nested block norms are not supported");
    }
}

bool is_block(NormKind k) { return k == NormKind::BlockSum || k == NormKind::BlockMax; }

}  // namespace

double NormDescriptor::operator()(std::span<const Complex> coords) const {
    if (!is_block(kind)) {
        return flat_norm(kind, coords, weights, 0);
    }
    if (block_size == 0 || coords.size() % block_size != 0) {
        throw DimensionError("block norm does not tile the coordinate vector");
    }
    double acc = 0.0;
    for (std::size_t off = 0; off < coords.size(); off += block_size) {
        const double b = flat_norm(inner, coords.subspan(off, block_size), weights, off);
        acc = kind == NormKind::BlockSum ? acc + b : std::max(acc, b);
    }
    return acc;
}

std::string NormDescriptor::name() const {
    if (!is_block(kind)) return to_string(kind);
    return to_string(kind) + "(" + std::to_string(block_size) + "," + to_string(inner) + ")";
}

NormDescriptor NormDescriptor::sum(std::vector<double> w) { return {NormKind::WeightedSum, std::move(w), 0, NormKind::Frobenius}; }
NormDescriptor NormDescriptor::max(std::vector<double> w) { return {NormKind::Max, std::move(w), 0, NormKind::Frobenius}; }
NormDescriptor NormDescriptor::frobenius(std::vector<double> w) { return {NormKind::Frobenius, std::move(w), 0, NormKind::Frobenius}; }

NormDescriptor NormDescriptor::block_sum(std::size_t block, const NormDescriptor& in) {
    if (is_block(in.kind)) throw ConfigurationError("nested block norms are not supported");
    return {NormKind::BlockSum, {}, block, in.kind};
}

NormDescriptor NormDescriptor::block_max(std::size_t block, const NormDescriptor& in) {
    if (is_block(in.kind)) throw ConfigurationError("nested block norms are not supported");
    return {NormKind::BlockMax, {}, block, in.kind};
}

NormKind parse_norm_kind(const std::string& name) {
    if (name == "sum" || name == "weighted-sum") return NormKind::WeightedSum;
    if (name == "max") return NormKind::Max;
    if (name == "frobenius") return NormKind::Frobenius;
    if (name == "block-sum") return NormKind::BlockSum;
    if (name == "block-max") return NormKind::BlockMax;
    throw ConfigurationError("unknown norm kind '" + name + "'");
}

std::string to_string(NormKind kind) {
    switch (kind) {
    case NormKind::WeightedSum: return "sum";
    case NormKind::Max: return "max";
    case NormKind::Frobenius: return "frobenius";
    case NormKind::BlockSum: return "block-sum";
    case NormKind::BlockMax: return "block-max";
    }
    return "?";
}

NormDescriptor dual_norm(const NormDescriptor& norm) {
    std::vector<double> w;
    switch (norm.kind) {
    case NormKind::WeightedSum:
        for (double x : norm.weights) w.push_back(1.0 / x);
        return NormDescriptor::max(std::move(w));
    case NormKind::Max:
        for (double x : norm.weights) w.push_back(1.0 / x);
        return NormDescriptor::sum(std::move(w));
    case NormKind::Frobenius:
        for (double x : norm.weights) w.push_back(1.0 / x);
        return NormDescriptor::frobenius(std::move(w));
    default:
        throw ConfigurationError("dual of a block norm is not supported");
    }
}

// ---------------------------------------------------------------------------

Element::Element(SpacePtr space, std::vector<Complex> coords)
    : space_(std::move(space)), coords_(std::move(coords)) {
    if (!space_) throw ConfigurationError("element without parent space");
    if (coords_.size() != space_->dim) {
        throw DimensionError("element has " + std::to_string(coords_.size()) + " coordinates, space '" +
                             space_->name + "' has dimension " + std::to_string(space_->dim));
    }
    for (const auto& c : coords_) {
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
            throw ValidationError("non-finite coordinate in element of '" + space_->name + "'");
        }
    }
}

Element Element::zero(SpacePtr space) {
    const std::size_t n = space->dim;
    return Element(std::move(space), std::vector<Complex>(n));
}

Element Element::basis(SpacePtr space, std::size_t index) {
    if (index >= space->dim) throw DimensionError("basis index out of range");
    std::vector<Complex> c(space->dim);
    c[index] = 1.0;
    return Element(std::move(space), std::move(c));
}

bool Element::is_zero() const noexcept {
    return std::all_of(coords_.begin(), coords_.end(), [](Complex c) { return c == Complex{}; });
}

void require_same_space(const Element& a, const SpacePtr& space, const char* what) {
    if (a.space() != space) {
        throw DimensionError(std::string(what) + ": element of '" + a.space()->name +
                             "' used where '" + space->name + "' was expected");
    }
}

Element& Element::operator+=(const Element& other) {
    require_same_space(other, space_, "addition");
    for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] += other.coords_[i];
    return *this;
}

Element& Element::operator-=(const Element& other) {
    require_same_space(other, space_, "subtraction");
    for (std::size_t i = 0; i < coords_.size(); ++i) coords_[i] -= other.coords_[i];
    return *this;
}

Element& Element::operator*=(Complex s) noexcept {
    for (auto& c : coords_) c *= s;
    return *this;
}

// ---------------------------------------------------------------------------

StructureTensor::StructureTensor(std::size_t n1, std::size_t n2, std::size_t n3)
    : n1_(n1), n2_(n2), n3_(n3), data_(n1 * n2 * n3) {}

void StructureTensor::set(std::size_t i, std::size_t j, std::size_t k, Complex v) {
    data_[(i * n2_ + j) * n3_ + k] = v;
    nnz_valid_ = false;
}

void StructureTensor::add(std::size_t i, std::size_t j, std::size_t k, Complex v) {
    data_[(i * n2_ + j) * n3_ + k] += v;
    nnz_valid_ = false;
}

const std::vector<StructureTensor::Entry>& StructureTensor::nonzeros() const {
    // Built lazily; parallel kernels may reach here together on a shared tensor.
    std::atomic_ref<bool> valid(nnz_valid_);
    if (!valid.load(std::memory_order_acquire)) {
        static std::mutex build;
        std::lock_guard lock(build);
        if (!valid.load(std::memory_order_relaxed)) {
            std::vector<Entry> list;
            for (std::size_t i = 0; i < n1_; ++i)
                for (std::size_t j = 0; j < n2_; ++j)
                    for (std::size_t k = 0; k < n3_; ++k)
                        if (const Complex v = at(i, j, k); v != Complex{})
                            list.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                                            static_cast<std::uint32_t>(k), v});
            nnz_ = std::move(list);
            valid.store(true, std::memory_order_release);
        }
    }
    return nnz_;
}

void StructureTensor::contract(std::span<const Complex> x, std::span<const Complex> y,
                               std::span<Complex> out) const {
    std::fill(out.begin(), out.end(), Complex{});
    for (const auto& e : nonzeros()) {
        out[e.k] += e.value * x[e.i] * y[e.j];
    }
}

// ---------------------------------------------------------------------------

AlgebraPtr make_algebra(std::string name, std::size_t dim, StructureTensor mul, NormDescriptor norm,
                        double submult_const, bool real_probes) {
    if (dim == 0) throw ConfigurationError("algebra dimension must be positive");
    if (mul.shape() != std::array<std::size_t, 3>{dim, dim, dim}) {
        throw DimensionError("structure tensor shape does not match algebra dimension");
    }
    if (!(submult_const > 0.0)) throw ConfigurationError("submult_const must be positive");
    auto space = std::make_shared<VectorSpace>(VectorSpace{std::move(name), dim, std::move(norm), real_probes});
    auto alg = std::make_shared<AlgebraSpec>(AlgebraSpec{space, std::move(mul), submult_const});
    (void)alg->mul.nonzeros();  // warm the cache before sharing across threads
    return alg;
}

BimodulePtr regular_bimodule(const AlgebraPtr& algebra) {
    auto mod = std::make_shared<BimoduleSpec>(
        BimoduleSpec{algebra->space, algebra, algebra->mul, algebra->mul, algebra->submult_const});
    (void)mod->left.nonzeros();
    (void)mod->right.nonzeros();
    return mod;
}

Element mul(const AlgebraSpec& alg, const Element& a, const Element& b) {
    require_same_space(a, alg.space, "mul");
    require_same_space(b, alg.space, "mul");
    std::vector<Complex> out(alg.dim());
    alg.mul.contract(a.coords(), b.coords(), out);
    return Element(alg.space, std::move(out));
}

Element cube(const AlgebraSpec& alg, const Element& a) { return mul(alg, mul(alg, a, a), a); }

Element left_action(const BimoduleSpec& mod, const Element& a, const Element& x) {
    if (!mod.algebra) throw ConfigurationError("module '" + mod.name() + "' is not attached to an algebra");
    require_same_space(a, mod.algebra->space, "left_action");
    require_same_space(x, mod.space, "left_action");
    std::vector<Complex> out(mod.dim());
    mod.left.contract(a.coords(), x.coords(), out);
    return Element(mod.space, std::move(out));
}

Element right_action(const BimoduleSpec& mod, const Element& x, const Element& a) {
    if (!mod.algebra) throw ConfigurationError("module '" + mod.name() + "' is not attached to an algebra");
    require_same_space(x, mod.space, "right_action");
    require_same_space(a, mod.algebra->space, "right_action");
    std::vector<Complex> out(mod.dim());
    mod.right.contract(x.coords(), a.coords(), out);
    return Element(mod.space, std::move(out));
}

// ---------------------------------------------------------------------------

AlgebraPtr scalar_complex() {
    StructureTensor t(1, 1, 1);
    t.set(0, 0, 0, 1.0);
    return make_algebra("scalar-complex", 1, std::move(t), NormDescriptor::sum(), 1.0);
}

AlgebraPtr mat2(bool real_probes) {
    constexpr std::size_t n = 2;
    StructureTensor t(n * n, n * n, n * n);
    // E_pq E_qs = E_ps
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q)
            for (std::size_t s = 0; s < n; ++s) t.set(p * n + q, q * n + s, p * n + s, 1.0);
    return make_algebra(real_probes ? "mat2-real" : "mat2-complex", n * n, std::move(t),
                        NormDescriptor::frobenius(), 1.0, real_probes);
}

AlgebraPtr strictly_upper(std::size_t n) {
    if (n < 2) throw ConfigurationError("strictly upper-triangular algebra needs n >= 2");
    std::vector<std::vector<long>> index(n, std::vector<long>(n, -1));
    std::size_t dim = 0;
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q) index[p][q] = static_cast<long>(dim++);
    StructureTensor t(dim, dim, dim);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = p + 1; q < n; ++q)
            for (std::size_t s = q + 1; s < n; ++s)
                t.set(static_cast<std::size_t>(index[p][q]), static_cast<std::size_t>(index[q][s]),
                      static_cast<std::size_t>(index[p][s]), 1.0);
    return make_algebra("nil" + std::to_string(n), dim, std::move(t), NormDescriptor::frobenius(), 1.0, true);
}

AlgebraPtr builtin_algebra(const std::string& name) {
    if (name == "scalar-complex") return scalar_complex();
    if (name == "mat2-real") return mat2(true);
    if (name == "mat2-complex") return mat2(false);
    if (name == "nil5") return strictly_upper(5);
    throw ConfigurationError("unknown builtin algebra '" + name + "'");
}

// ---------------------------------------------------------------------------

TriangularExample build_triangular(const AlgebraPtr& base, const Element& g0_in) {
    if (!base) throw ValidationError("triangular example needs a base algebra");
    if (base->space->norm.kind == NormKind::BlockSum || base->space->norm.kind == NormKind::BlockMax) {
        throw ValidationError("triangular example base must use a per-coordinate norm");
    }
    if (const auto rep = validate_algebra(*base); !rep.pass) {
        throw ValidationError("base algebra '" + base->name() + "' failed validation");
    }
    const std::size_t m = base->dim();
    const std::size_t dim = 6 * m;
    auto slot_of = [](int row, int col) -> int {
        for (std::size_t s = 0; s < kTriangularSlots.size(); ++s)
            if (kTriangularSlots[s][0] == row && kTriangularSlots[s][1] == col) return static_cast<int>(s);
        return -1;
    };

    StructureTensor tmul(dim, dim, dim);
    for (std::size_t s1 = 0; s1 < 6; ++s1) {
        for (std::size_t s2 = 0; s2 < 6; ++s2) {
            if (kTriangularSlots[s1][1] != kTriangularSlots[s2][0]) continue;
            const int s3 = slot_of(kTriangularSlots[s1][0], kTriangularSlots[s2][1]);
            for (const auto& e : base->mul.nonzeros())
                tmul.set(s1 * m + e.i, s2 * m + e.j, static_cast<std::size_t>(s3) * m + e.k, e.value);
        }
    }
    const std::string label = "triangular(" + base->name() + ")";
    auto algebra = make_algebra(label, dim, std::move(tmul), NormDescriptor::block_sum(m, base->space->norm),
                                base->submult_const, base->space->real_probes);

    // Slotwise pairing actions on the dual:
    //   <F.A, X> = sum_j f_j(a_j x_j),   <A.F, X> = sum_j f_j(x_j a_j)
    StructureTensor left(dim, dim, dim);
    StructureTensor right(dim, dim, dim);
    for (std::size_t j = 0; j < 6; ++j) {
        const std::size_t off = j * m;
        for (const auto& e : base->mul.nonzeros()) {
            // base product e_p e_q -> e_r with (p, q, r) = (e.i, e.j, e.k)
            right.add(off + e.k, off + e.i, off + e.j, e.value);
            left.add(off + e.j, off + e.k, off + e.i, e.value);
        }
    }
    auto dual_space = std::make_shared<VectorSpace>(
        VectorSpace{label + "*", dim, NormDescriptor::block_max(m, dual_norm(base->space->norm)),
                    base->space->real_probes});
    auto dual = std::make_shared<BimoduleSpec>(
        BimoduleSpec{dual_space, algebra, std::move(left), std::move(right), base->submult_const});
    (void)dual->left.nonzeros();
    (void)dual->right.nonzeros();

    if (g0_in.dim() != dim) throw DimensionError("g0 must have dimension 6 * dim(base)");
    Element g0(dual_space, std::vector<Complex>(g0_in.coords().begin(), g0_in.coords().end()));
    return {base, algebra, dual, std::move(g0)};
}

TriangularExample build_triangular(const AlgebraPtr& base, std::uint64_t g0_seed) {
    auto scratch = std::make_shared<VectorSpace>(
        VectorSpace{"g0-scratch", 6 * base->dim(), NormDescriptor::frobenius(), base->space->real_probes});
    Rng rng(g0_seed);
    return build_triangular(base, random_element(scratch, rng));
}

// ---------------------------------------------------------------------------

namespace {

using SparseRow = std::vector<std::pair<std::uint32_t, Complex>>;

/// rows[i * n2 + j] lists the nonzero output coordinates of t[i][j][:].
std::vector<SparseRow> sparse_rows(const StructureTensor& t) {
    const auto [n1, n2, n3] = t.shape();
    (void)n3;
    std::vector<SparseRow> rows(n1 * n2);
    for (const auto& e : t.nonzeros()) rows[e.i * n2 + e.j].emplace_back(e.k, e.value);
    return rows;
}

double norm_axiom_defect(const SpacePtr& space, Rng& rng, std::size_t probes,
                         std::vector<std::string>& failures) {
    double defect = 0.0;
    const Element zero = Element::zero(space);
    if (zero.norm() != 0.0) {
        failures.push_back("norm of zero is nonzero");
        defect = std::max(defect, zero.norm());
    }
    const std::array<Complex, 3> lambdas{Complex{-2.5, 0.0}, Complex{0.3, 0.7}, Complex{0.0, 1.0}};
    for (std::size_t p = 0; p < probes; ++p) {
        const Element a = random_element(space, rng);
        const Element b = random_element(space, rng);
        const double na = a.norm();
        if (!(na > 0.0)) {
            failures.push_back("nonzero probe has zero norm");
            defect = std::max(defect, 1.0);
        }
        for (const Complex l : lambdas) {
            const double d = std::abs((l * a).norm() - std::abs(l) * na) / std::max(1.0, std::abs(l) * na);
            defect = std::max(defect, d);
        }
        const double tri = (a + b).norm() - (na + b.norm());
        defect = std::max(defect, tri / std::max(1.0, na + b.norm()));
    }
    if (defect > kValidationTolerance) failures.push_back("norm axioms violated");
    return defect;
}

}  // namespace

ValidationReport validate_algebra(const AlgebraSpec& alg, std::size_t probe_count, std::uint64_t seed) {
    ValidationReport rep;
    rep.subject = alg.name();
    rep.declared_const = alg.submult_const;
    rep.probes = probe_count;
    const std::size_t n = alg.dim();
    const auto rows = sparse_rows(alg.mul);

    double assoc = 0.0;
#pragma omp parallel for reduction(max : assoc) schedule(dynamic)
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Complex> lhs(n), rhs(n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                std::fill(lhs.begin(), lhs.end(), Complex{});
                std::fill(rhs.begin(), rhs.end(), Complex{});
                for (const auto& [m, v] : rows[i * n + j])  // (e_i e_j) e_k
                    for (const auto& [o, w] : rows[m * n + k]) lhs[o] += v * w;
                for (const auto& [m, v] : rows[j * n + k])  // e_i (e_j e_k)
                    for (const auto& [o, w] : rows[i * n + m]) rhs[o] += v * w;
                for (std::size_t o = 0; o < n; ++o) lhs[o] -= rhs[o];
                assoc = std::max(assoc, alg.space->norm(lhs));
            }
        }
    }
    rep.associativity_defect = assoc;
    if (assoc > kValidationTolerance) {
        std::ostringstream os;
        os << "associativity defect " << assoc << " exceeds " << kValidationTolerance;
        rep.failures.push_back(os.str());
    }

    Rng rng(seed);
    double measured = 0.0;
    for (std::size_t p = 0; p < probe_count; ++p) {
        const Element a = random_element(alg.space, rng);
        const Element b = random_element(alg.space, rng);
        const double denom = a.norm() * b.norm();
        if (denom > 0.0) measured = std::max(measured, mul(alg, a, b).norm() / denom);
    }
    rep.measured_const = measured;
    if (measured > alg.submult_const * (1.0 + kValidationTolerance)) {
        std::ostringstream os;
        os << "measured submultiplicativity constant " << measured << " exceeds declared " << alg.submult_const;
        rep.failures.push_back(os.str());
    }
    rep.norm_axiom_defect = norm_axiom_defect(alg.space, rng, probe_count, rep.failures);
    rep.pass = rep.failures.empty();
    return rep;
}

ValidationReport validate_bimodule(const BimoduleSpec& mod, std::size_t probe_count, std::uint64_t seed) {
    if (!mod.algebra) throw ConfigurationError("module '" + mod.name() + "' is not attached to an algebra");
    ValidationReport rep;
    rep.subject = mod.name();
    rep.declared_const = mod.action_const;
    rep.probes = probe_count;
    const AlgebraSpec& alg = *mod.algebra;
    const std::size_t na = alg.dim();
    const std::size_t nm = mod.dim();
    const auto arows = sparse_rows(alg.mul);
    const auto lrows = sparse_rows(mod.left);   // [a * nm + x]
    const auto rrows = sparse_rows(mod.right);  // [x * na + a]

    double assoc = 0.0;
#pragma omp parallel for reduction(max : assoc) schedule(dynamic)
    for (std::size_t i = 0; i < na; ++i) {
        std::vector<Complex> lhs(nm), rhs(nm);
        auto flush = [&] {
            for (std::size_t o = 0; o < nm; ++o) lhs[o] -= rhs[o];
            assoc = std::max(assoc, mod.space->norm(lhs));
            std::fill(lhs.begin(), lhs.end(), Complex{});
            std::fill(rhs.begin(), rhs.end(), Complex{});
        };
        for (std::size_t j = 0; j < na; ++j) {
            for (std::size_t x = 0; x < nm; ++x) {
                // (e_i e_j) . x  vs  e_i . (e_j . x)
                for (const auto& [m, v] : arows[i * na + j])
                    for (const auto& [o, w] : lrows[m * nm + x]) lhs[o] += v * w;
                for (const auto& [m, v] : lrows[j * nm + x])
                    for (const auto& [o, w] : lrows[i * nm + m]) rhs[o] += v * w;
                flush();
                // x . (e_i e_j)  vs  (x . e_i) . e_j
                for (const auto& [m, v] : arows[i * na + j])
                    for (const auto& [o, w] : rrows[x * na + m]) lhs[o] += v * w;
                for (const auto& [m, v] : rrows[x * na + i])
                    for (const auto& [o, w] : rrows[m * na + j]) rhs[o] += v * w;
                flush();
                // (e_i . x) . e_j  vs  e_i . (x . e_j)
                for (const auto& [m, v] : lrows[i * nm + x])
                    for (const auto& [o, w] : rrows[m * na + j]) lhs[o] += v * w;
                for (const auto& [m, v] : rrows[x * na + j])
                    for (const auto& [o, w] : lrows[i * nm + m]) rhs[o] += v * w;
                flush();
            }
        }
    }
    rep.associativity_defect = assoc;
    if (assoc > kValidationTolerance) {
        std::ostringstream os;
        os << "module associativity defect " << assoc << " exceeds " << kValidationTolerance;
        rep.failures.push_back(os.str());
    }

    Rng rng(seed);
    double measured = 0.0;
    for (std::size_t p = 0; p < probe_count; ++p) {
        const Element a = random_element(alg.space, rng);
        const Element x = random_element(mod.space, rng);
        const double denom = a.norm() * x.norm();
        if (denom > 0.0) {
            measured = std::max(measured, left_action(mod, a, x).norm() / denom);
            measured = std::max(measured, right_action(mod, x, a).norm() / denom);
        }
    }
    rep.measured_const = measured;
    if (measured > mod.action_const * (1.0 + kValidationTolerance)) {
        std::ostringstream os;
        os << "measured action constant " << measured << " exceeds declared k = " << mod.action_const;
        rep.failures.push_back(os.str());
    }
    rep.norm_axiom_defect = norm_axiom_defect(mod.space, rng, probe_count, rep.failures);
    rep.pass = rep.failures.empty();
    return rep;
}

}  // namespace cubicderiv
