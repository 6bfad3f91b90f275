#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cubicderiv {

using Complex = std::complex<double>;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConfigurationError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Norms
// ---------------------------------------------------------------------------

enum class NormKind {
    WeightedSum,  ///< sum_i w_i |c_i|
    Max,          ///< max_i w_i |c_i|
    Frobenius,    ///< sqrt(sum_i w_i |c_i|^2)
    BlockSum,     ///< sum over blocks of an inner per-coordinate norm
    BlockMax,     ///< max over blocks of an inner per-coordinate norm
};

/// Describes how to measure a coordinate vector. Block kinds split the vector
/// into consecutive blocks of `block_size` coordinates and apply `inner` to
/// each block (with the matching slice of `weights`).
struct NormDescriptor {
    NormKind kind = NormKind::Frobenius;
    std::vector<double> weights;  // empty means all ones
    std::size_t block_size = 0;
    NormKind inner = NormKind::Frobenius;

    [[nodiscard]] double operator()(std::span<const Complex> coords) const;
    [[nodiscard]] std::string name() const;

    static NormDescriptor sum(std::vector<double> w = {});
    static NormDescriptor max(std::vector<double> w = {});
    static NormDescriptor frobenius(std::vector<double> w = {});
    static NormDescriptor block_sum(std::size_t block, const NormDescriptor& inner);
    static NormDescriptor block_max(std::size_t block, const NormDescriptor& inner);
};

NormKind parse_norm_kind(const std::string& name);
std::string to_string(NormKind kind);

/// Norm of the dual space under the coordinate pairing <f, a> = sum_i f_i a_i.
/// Only per-coordinate kinds are dualizable.
NormDescriptor dual_norm(const NormDescriptor& norm);

// ---------------------------------------------------------------------------
// Spaces and elements
// ---------------------------------------------------------------------------

struct VectorSpace {
    std::string name;
    std::size_t dim = 0;
    NormDescriptor norm;
    bool real_probes = false;  // probe generators draw real coordinates
};

using SpacePtr = std::shared_ptr<const VectorSpace>;

class Element {
public:
    Element(SpacePtr space, std::vector<Complex> coords);

    static Element zero(SpacePtr space);
    static Element basis(SpacePtr space, std::size_t index);

    [[nodiscard]] const SpacePtr& space() const noexcept { return space_; }
    [[nodiscard]] std::size_t dim() const noexcept { return coords_.size(); }
    [[nodiscard]] std::span<const Complex> coords() const noexcept { return coords_; }
    [[nodiscard]] Complex operator[](std::size_t i) const { return coords_[i]; }
    [[nodiscard]] double norm() const { return space_->norm(coords_); }
    [[nodiscard]] bool is_zero() const noexcept;

    Element& operator+=(const Element& other);
    Element& operator-=(const Element& other);
    Element& operator*=(Complex s) noexcept;

    friend Element operator+(Element a, const Element& b) { return a += b; }
    friend Element operator-(Element a, const Element& b) { return a -= b; }
    friend Element operator*(Complex s, Element a) { return a *= s; }
    friend Element operator*(Element a, Complex s) { return a *= s; }
    friend Element operator-(Element a) { return a *= Complex{-1.0, 0.0}; }

    /// Bitwise coordinate equality.
    friend bool operator==(const Element& a, const Element& b) noexcept {
        return a.space_ == b.space_ && a.coords_ == b.coords_;
    }

private:
    SpacePtr space_;
    std::vector<Complex> coords_;
};

void require_same_space(const Element& a, const SpacePtr& space, const char* what);

// ---------------------------------------------------------------------------
// Structure tensors
// ---------------------------------------------------------------------------

/// Dense rank-3 tensor t[i][j][k] with a cached list of its nonzero entries,
/// used for bilinear maps (U x V -> W) given in coordinates.
class StructureTensor {
public:
    struct Entry {
        std::uint32_t i, j, k;
        Complex value;
    };

    StructureTensor() = default;
    StructureTensor(std::size_t n1, std::size_t n2, std::size_t n3);

    [[nodiscard]] std::array<std::size_t, 3> shape() const noexcept { return {n1_, n2_, n3_}; }
    [[nodiscard]] Complex at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * n2_ + j) * n3_ + k];
    }
    void set(std::size_t i, std::size_t j, std::size_t k, Complex v);
    void add(std::size_t i, std::size_t j, std::size_t k, Complex v);

    [[nodiscard]] const std::vector<Entry>& nonzeros() const;
    [[nodiscard]] std::span<const Complex> dense() const noexcept { return data_; }

    /// out[k] = sum_{i,j} t[i][j][k] x[i] y[j]
    void contract(std::span<const Complex> x, std::span<const Complex> y,
                  std::span<Complex> out) const;

private:
    std::size_t n1_ = 0, n2_ = 0, n3_ = 0;
    std::vector<Complex> data_;
    mutable std::vector<Entry> nnz_;
    mutable bool nnz_valid_ = false;
};

// ---------------------------------------------------------------------------
// Algebras and bimodules
// ---------------------------------------------------------------------------

struct AlgebraSpec {
    SpacePtr space;
    StructureTensor mul;  // mul[i][j][k]: coefficient of e_k in e_i e_j
    double submult_const = 1.0;

    [[nodiscard]] std::size_t dim() const noexcept { return space->dim; }
    [[nodiscard]] const std::string& name() const noexcept { return space->name; }
};

using AlgebraPtr = std::shared_ptr<const AlgebraSpec>;

struct BimoduleSpec {
    SpacePtr space;
    AlgebraPtr algebra;
    StructureTensor left;   // left[i][j][k]:  algebra i, module j -> module k
    StructureTensor right;  // right[i][j][k]: module i, algebra j -> module k
    double action_const = 1.0;

    [[nodiscard]] std::size_t dim() const noexcept { return space->dim; }
    [[nodiscard]] const std::string& name() const noexcept { return space->name; }
};

using BimodulePtr = std::shared_ptr<const BimoduleSpec>;

AlgebraPtr make_algebra(std::string name, std::size_t dim, StructureTensor mul,
                        NormDescriptor norm, double submult_const, bool real_probes = false);

/// A acting on itself by multiplication on both sides.
BimodulePtr regular_bimodule(const AlgebraPtr& algebra);

[[nodiscard]] Element mul(const AlgebraSpec& alg, const Element& a, const Element& b);
[[nodiscard]] Element cube(const AlgebraSpec& alg, const Element& a);
[[nodiscard]] Element left_action(const BimoduleSpec& mod, const Element& a, const Element& x);
[[nodiscard]] Element right_action(const BimoduleSpec& mod, const Element& x, const Element& a);

// Built-in algebras. Matrix units E_pq of M_n sit at index p*n + q; the
// strictly upper-triangular algebra N_n lists E_pq (p < q) row by row.
AlgebraPtr scalar_complex();
AlgebraPtr mat2(bool real_probes);
AlgebraPtr strictly_upper(std::size_t n);

/// Names accepted by builtin_algebra: "scalar-complex", "mat2-real",
/// "mat2-complex", "nil5".
AlgebraPtr builtin_algebra(const std::string& name);

/// Slot layout of the strictly upper 4x4 block pattern: slot s holds block
/// (row, col) with rows/cols in 0..3, listed (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
inline constexpr std::array<std::array<int, 2>, 6> kTriangularSlots{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

struct TriangularExample {
    AlgebraPtr base;
    AlgebraPtr algebra;  // T: six base slots, sum norm
    BimodulePtr dual;    // T*: six dual-base slots, max norm, slotwise pairing actions
    Element g0;          // element of T*
};

/// Builds T over `base` and its dual module. Throws ValidationError when the
/// base fails validate_algebra or uses a block norm.
TriangularExample build_triangular(const AlgebraPtr& base, const Element& g0);

/// Same, with g0 drawn from `seed`.
TriangularExample build_triangular(const AlgebraPtr& base, std::uint64_t g0_seed);

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct ValidationReport {
    std::string subject;
    double associativity_defect = 0.0;  // max over basis triples
    double measured_const = 0.0;        // submult (algebra) or action (module) constant
    double declared_const = 0.0;
    double norm_axiom_defect = 0.0;
    std::size_t probes = 0;
    bool pass = false;
    std::vector<std::string> failures;
};

inline constexpr double kValidationTolerance = 1e-10;

ValidationReport validate_algebra(const AlgebraSpec& alg, std::size_t probe_count = 64,
                                  std::uint64_t seed = 1);
ValidationReport validate_bimodule(const BimoduleSpec& mod, std::size_t probe_count = 64,
                                   std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Loading algebra definitions from file (JSON)
// ---------------------------------------------------------------------------

struct LoadedAlgebra {
    AlgebraPtr algebra;
    BimodulePtr module;  // regular bimodule when the file does not define one
};

LoadedAlgebra load_algebra_file(const std::string& path);
LoadedAlgebra parse_algebra_json(const std::string& text);
std::string algebra_to_json(const AlgebraSpec& alg);

}  // namespace cubicderiv
