#include "cubicderiv/scenario.hpp"

#include "cubicderiv/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace cubicderiv {

using nlohmann::json;

namespace {

constexpr double kReproductionTolerance = 1e-12;

// Everything up to and including recovery.
struct Pipeline {
    ScenarioObjects obj;
    ProbeSet probes;
    ControlFunction shape;
    ControlFunction phi;
    DeltaMeasurement delta;
    std::size_t chain = 0;
    std::optional<RecoveryReport> recovery;
    json validation = json::array();
    std::vector<std::string> notes;
};

void check_engine_compatible(const ScenarioConfig& cfg, const ControlFunction& shape, const ProbeSet& probes) {
    std::ostringstream os;
    switch (cfg.engine) {
        case Engine::DirectForward:
            if (!(shape.forward_ratio() < 1.0)) {
                os << "control: direct-forward diverges for " << shape.describe() << " (ratio "
                   << shape.forward_ratio() << " >= 1; needs r < 3, resp. p + q < 3)";
                throw DivergenceError(os.str());
            }
            break;
        case Engine::DirectBackward:
            if (!(shape.backward_ratio() < 1.0)) {
                os << "control: direct-backward diverges for " << shape.describe() << " (ratio "
                   << shape.backward_ratio() << " >= 1; needs r > 3, resp. p + q > 3)";
                throw DivergenceError(os.str());
            }
            break;
        case Engine::FixedPoint:
            try {
                (void)contraction_constant(shape, probes);
            } catch (const NoContractionError& e) {
                throw NoContractionError(std::string("control: ") + e.what());
            }
            break;
    }
}

RecoveryReport recover_with(const ScenarioConfig& cfg, const Pipeline& p) {
    RecoveryOptions opts;
    opts.exact = p.obj.exact.get();
    opts.keep_trace = false;
    switch (cfg.engine) {
        case Engine::DirectForward: return direct_forward(*p.obj.f, p.phi, p.probes, cfg.tolerances.recover, opts);
        case Engine::DirectBackward: return direct_backward(*p.obj.f, p.phi, p.probes, cfg.tolerances.recover, opts);
        case Engine::FixedPoint: return fixed_point_recover(*p.obj.f, p.phi, p.probes, cfg.tolerances.recover, opts);
    }
    throw ConfigurationError("unknown engine");
}

DeltaSampling sampling_for(const ScenarioConfig& cfg, std::size_t chain) {
    DeltaSampling s;
    if (cfg.engine == Engine::DirectBackward) {
        s.backward_chain = chain;
    } else {
        s.forward_chain = chain;
    }
    return s;
}

void measure(const ScenarioConfig& cfg, Pipeline& p) {
    p.delta = measure_delta(*p.obj.f, p.shape, p.probes, sampling_for(cfg, p.chain));
    if (!p.delta.finite) {
        throw HypothesisError("control: measured control level is infinite, " + p.delta.witness);
    }
    double level = p.delta.delta_hat;
    if (cfg.control.delta) {
        if (p.delta.delta_hat > *cfg.control.delta * (1.0 + 1e-12)) {
            std::ostringstream os;
            os << "control.delta: residuals need delta >= " << p.delta.delta_hat << " but " << *cfg.control.delta
               << " was given (" << p.delta.witness << ")";
            throw HypothesisError(os.str());
        }
        level = *cfg.control.delta;
    }
    p.phi = p.shape.with_delta(level);
}

Pipeline prepare(const ScenarioConfig& cfg) {
    Pipeline p;
    p.obj = build_objects(cfg);
    const ValidationReport va = validate_algebra(*p.obj.algebra, 64, cfg.probes.seed);
    p.validation.push_back(to_json(va));
    if (!va.pass) throw HypothesisError("algebra: " + p.obj.algebra->name() + " fails validation");
    const ValidationReport vm = validate_bimodule(*p.obj.module, 64, cfg.probes.seed);
    p.validation.push_back(to_json(vm));
    if (!vm.pass) {
        p.notes.push_back("module " + p.obj.module->name() +
                          " fails the bimodule identities; certificates only use the map values");
    }
    p.probes = make_probes(p.obj.algebra->space, cfg.probes);
    p.shape = control_shape(cfg);
    return p;
}

Pipeline prepare_and_recover(const ScenarioConfig& cfg) {
    Pipeline p = prepare(cfg);
    check_engine_compatible(cfg, p.shape, p.probes);
    p.chain = cfg.tolerances.chain;
    // The measured level must cover every point the recovery visits; lengthen
    // the doubling chain when the iteration goes deeper than it.
    for (int attempt = 0;; ++attempt) {
        measure(cfg, p);
        p.recovery = recover_with(cfg, p);
        const std::size_t needed = p.recovery->iterations + 8;
        if (needed <= p.chain) break;
        if (attempt == 2) {
            p.notes.push_back("doubling chain of length " + std::to_string(p.chain) + " is shorter than the " +
                              std::to_string(needed) + " steps the recovery visited");
            break;
        }
        p.chain = needed;
    }
    return p;
}

json header(const ScenarioConfig& cfg, const std::string& subcommand) {
    return {{"tool", "cubic_lab"},
            {"subcommand", subcommand},
            {"scenario", cfg.name},
            {"timestamp", timestamp_utc()},
            {"config", cfg.resolved}};
}

json pipeline_json(const Pipeline& p) {
    json delta = to_json(p.delta);
    delta["chain"] = p.chain;
    delta["control"] = p.phi.describe();
    json j{{"validation", p.validation}, {"delta", delta}, {"notes", p.notes}};
    if (p.recovery) j["recovery"] = to_json(*p.recovery);
    return j;
}

std::vector<CertificateReport> certify_pipeline(const ScenarioConfig& cfg, const Pipeline& p) {
    const RecoveredMap dm = RecoveredMap::from(*p.recovery);
    std::vector<CertificateReport> certs;
    certs.push_back(check_stability_bound(*p.obj.f, dm, p.phi, p.probes));
    if (cfg.control.kind == ControlKind::Power) {
        const Direction dir = cfg.engine == Engine::DirectBackward ? Direction::Backward : Direction::Forward;
        certs.push_back(check_power_corollary(*p.obj.f, dm, p.phi.delta, cfg.control.r, p.probes, dir));
    }
    if (cfg.engine == Engine::FixedPoint) {
        certs.push_back(check_fixed_point_bound(*p.obj.f, dm, p.phi, p.recovery->k_hat, p.probes));
        auto& c = certs.back();
        std::ostringstream os;
        os << "measured d(f, D) = " << p.recovery->distance_f_to_result << ", certified "
           << p.recovery->certified_distance << ", contraction bound " << p.recovery->contraction_distance_bound;
        c.notes.push_back(os.str());
        if (p.recovery->distance_f_to_result > p.recovery->contraction_distance_bound * (1.0 + 1e-12)) {
            c.pass = false;
            c.verdict = "fail: d(f, D) exceeds 1 / (16 (1 - k))";
        }
    }
    for (auto& c : certs) {
        c.scenario_id = cfg.name;
        if (c.family != BoundFamily::FixedPoint || c.pass) apply_slack(c, cfg.tolerances.certify_slack);
    }
    return certs;
}

std::string summary_line(const CertificateReport& c) {
    std::ostringstream os;
    os << "  " << to_string(c.family) << ": " << (c.pass ? "PASS" : "FAIL") << "  min margin " << c.min_margin
       << "  max tail " << c.max_tail;
    if (!c.pass) os << "  [" << c.witness << "]";
    return os.str();
}

// Base-algebra element stored in slot s of a triangular element.
Element slot(const TriangularExample& ex, const Element& a, std::size_t s) {
    const std::size_t m = ex.base->dim();
    std::vector<Complex> c(a.coords().begin() + static_cast<std::ptrdiff_t>(s * m),
                           a.coords().begin() + static_cast<std::ptrdiff_t>((s + 1) * m));
    return Element(ex.base->space, std::move(c));
}

Complex pairing(std::span<const Complex> f, std::span<const Complex> x) {
    Complex acc{};
    for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * x[i];
    return acc;
}

}  // namespace

ScenarioOutcome run_recover(const ScenarioConfig& cfg) {
    const Pipeline p = prepare_and_recover(cfg);
    ScenarioOutcome out;
    out.report = pipeline_json(p);
    out.recovery = p.recovery;
    std::ostringstream os;
    os << "recovered with " << to_string(p.recovery->engine) << ", N = " << p.recovery->iterations
       << ", delta_hat = " << p.delta.delta_hat << ", max tail " << p.recovery->max_tail;
    out.message = os.str();
    return out;
}

ScenarioOutcome run_scenario(const ScenarioConfig& cfg) {
    const Pipeline p = prepare_and_recover(cfg);
    ScenarioOutcome out;
    out.report = pipeline_json(p);
    out.recovery = p.recovery;
    out.certificates = certify_pipeline(cfg, p);
    json certs = json::array();
    std::ostringstream os;
    os << "delta_hat = " << p.delta.delta_hat << ", " << to_string(cfg.engine) << " N = " << p.recovery->iterations
       << "\n";
    bool all = true;
    for (const auto& c : out.certificates) {
        certs.push_back(to_json(c));
        out.tables.emplace_back(to_string(c.family), certificate_csv(c));
        all = all && c.pass;
        os << summary_line(c) << "\n";
    }
    out.report["certificates"] = certs;
    out.exit_code = all ? kExitPass : kExitFail;
    out.message = os.str();
    return out;
}

ScenarioOutcome run_validate(const ScenarioConfig& cfg) {
    const ScenarioObjects obj = build_objects(cfg);
    const ValidationReport va = validate_algebra(*obj.algebra, 64, cfg.probes.seed);
    const ValidationReport vm = validate_bimodule(*obj.module, 64, cfg.probes.seed);
    ScenarioOutcome out;
    out.report["validation"] = json::array({to_json(va), to_json(vm)});
    std::ostringstream os;
    for (const auto& [label, v] : {std::pair{"algebra", &va}, std::pair{"module", &vm}}) {
        os << "  " << label << " " << v->subject << ": " << (v->pass ? "PASS" : "FAIL") << "  associativity defect "
           << v->associativity_defect << "  measured constant " << v->measured_const << " (declared "
           << v->declared_const << ")\n";
        for (const auto& f : v->failures) os << "    - " << f << "\n";
    }
    out.message = os.str();
    out.exit_code = va.pass && vm.pass ? kExitPass : kExitFail;
    return out;
}

ScenarioOutcome run_example_triangular(const ScenarioConfig& cfg) {
    const ScenarioObjects obj = build_objects(cfg);
    if (!obj.triangular) throw ConfigPathError("algebra.builtin", "example-triangular needs the triangular algebra");
    const TriangularExample& ex = *obj.triangular;
    const MapExpr& D = *obj.exact;
    const ProbeSet probes = make_probes(ex.algebra->space, cfg.probes);

    const ResidualSummary sweep = residual_sweep(D, probes);

    // D(AB) vanishes exactly: (AB)^3 = 0 structurally.
    std::size_t nonzero_products = 0;
    double derivation_rhs = 0.0;
    for (const auto& pr : probes.pairs) {
        if (pr[1] == ProbeSet::kZero) continue;
        const Element& a = probes.elements[pr[0]];
        const Element& b = probes.elements[pr[1]];
        if (!D(mul(*ex.algebra, a, b)).is_zero()) ++nonzero_products;
        const Element rhs = right_action(*ex.dual, D(a), cube(*ex.algebra, b)) +
                            left_action(*ex.dual, cube(*ex.algebra, a), D(b));
        derivation_rhs = std::max(derivation_rhs, rhs.norm());
    }

    // Expansion table: library pairing <D(.), X> against the slot formula
    // g3(p x3) - g3(x3 p), p the product of slots 1, 4, 6.
    Rng rng(cfg.probes.seed + 1000);
    const Element A = random_element(ex.algebra->space, rng);
    const Element B = random_element(ex.algebra->space, rng);
    const Element X = random_element(ex.algebra->space, rng);
    const Element x3 = slot(ex, X, 2);
    const Element g3 = slot(ex, ex.g0, 2);
    auto oracle = [&](const Element& t) {
        const Element p = mul(*ex.base, mul(*ex.base, slot(ex, t, 0), slot(ex, t, 3)), slot(ex, t, 5));
        return pairing(g3.coords(), mul(*ex.base, p, x3).coords()) -
               pairing(g3.coords(), mul(*ex.base, x3, p).coords());
    };
    auto library = [&](const Element& t) { return pairing(D(t).coords(), X.coords()); };
    struct Line {
        std::string label;
        double coeff;
        Element arg;
    };
    const Complex two{2.0, 0.0};
    const std::vector<Line> lines{{"<D(2A+B), X>", 1.0, two * A + B},
                                  {"<D(2A-B), X>", 1.0, two * A - B},
                                  {"<2D(A+B), X>", 2.0, A + B},
                                  {"<2D(A-B), X>", 2.0, A - B},
                                  {"<12D(A), X>", 12.0, A}};
    json table = json::array();
    std::ostringstream csv, os;
    csv << "identity,library_re,library_im,oracle_re,oracle_im,abs_diff,rel_diff\n";
    os << "  identity          library                              oracle                               rel diff\n";
    double worst_rel = 0.0;
    std::vector<Complex> lib_values;
    for (const auto& l : lines) {
        const Complex lib = l.coeff * library(l.arg);
        const Complex orc = l.coeff * oracle(l.arg);
        const double diff = std::abs(lib - orc);
        const double rel = diff / std::max(1.0, std::abs(orc));
        worst_rel = std::max(worst_rel, rel);
        lib_values.push_back(lib);
        table.push_back({{"identity", l.label},
                         {"library", {lib.real(), lib.imag()}},
                         {"oracle", {orc.real(), orc.imag()}},
                         {"abs_diff", diff},
                         {"rel_diff", rel}});
        csv << '"' << l.label << '"' << ',' << format_double(lib.real()) << ',' << format_double(lib.imag()) << ','
            << format_double(orc.real()) << ',' << format_double(orc.imag()) << ',' << format_double(diff) << ','
            << format_double(rel) << '\n';
        char buf[256];
        std::snprintf(buf, sizeof buf, "  %-16s  %+.10e%+.10ei  %+.10e%+.10ei  %.2e\n", l.label.c_str(), lib.real(),
                      lib.imag(), orc.real(), orc.imag(), rel);
        os << buf;
    }
    const Complex combo = lib_values[0] + lib_values[1] - lib_values[2] - lib_values[3] - lib_values[4];
    double scale = 0.0;
    for (auto v : lib_values) scale += std::abs(v);
    const double combo_rel = std::abs(combo) / std::max(1.0, scale);

    const bool residuals_ok = sweep.max_cubic_rel <= kReproductionTolerance &&
                              sweep.max_derivation_rel <= kReproductionTolerance &&
                              sweep.max_homogeneity_rel <= kReproductionTolerance;
    const bool pass = residuals_ok && worst_rel <= kReproductionTolerance && combo_rel <= kReproductionTolerance &&
                      nonzero_products == 0;

    os << "  cubic identity (r1 + r2 - r3 - r4 - r5), relative: " << combo_rel << "\n";
    os << "  residual maxima (relative): cubic " << sweep.max_cubic_rel << ", derivation "
       << sweep.max_derivation_rel << ", homogeneity " << sweep.max_homogeneity_rel << "\n";
    os << "  D(AB) nonzero on " << nonzero_products << " probe pairs; max |D(A).B^3 + A^3.D(B)| = " << derivation_rhs
       << "\n";
    os << "  base " << ex.base->name() << ": " << (pass ? "PASS" : "FAIL") << "\n";

    ScenarioOutcome out;
    out.report["reproduction"] = table;
    out.report["cubic_identity_rel"] = combo_rel;
    out.report["residuals"] = to_json(sweep);
    out.report["nonzero_products"] = nonzero_products;
    out.report["max_derivation_rhs"] = derivation_rhs;
    out.report["base"] = ex.base->name();
    out.report["pass"] = pass;
    out.tables.emplace_back("reproduction", csv.str());
    out.message = os.str();
    out.exit_code = pass ? kExitPass : kExitFail;
    return out;
}

ScenarioOutcome run_superstability(const ScenarioConfig& cfg) {
    if (cfg.control.kind != ControlKind::Product) {
        throw ConfigPathError("control.kind", "superstability needs the product control");
    }
    const ScenarioObjects obj = build_objects(cfg);
    const ProbeSet probes = make_probes(obj.algebra->space, cfg.probes);
    const ControlFunction shape = control_shape(cfg);
    const DeltaMeasurement delta = measure_delta(*obj.f, shape, probes, sampling_for(cfg, cfg.tolerances.chain));
    CertificateReport c = superstability_check(*obj.f, delta.delta_hat, cfg.control.p, cfg.control.q, probes);
    c.scenario_id = cfg.name;
    ScenarioOutcome out;
    json d = to_json(delta);
    d["chain"] = cfg.tolerances.chain;
    out.report["delta"] = d;
    out.report["certificates"] = json::array({to_json(c)});
    out.tables.emplace_back(to_string(c.family), certificate_csv(c));
    out.message = "  " + c.verdict + (c.pass ? "" : "  [" + c.witness + "]") + "\n";
    out.exit_code = c.pass ? kExitPass : kExitFail;
    out.certificates.push_back(std::move(c));
    return out;
}

ScenarioOutcome run_sweep(const ScenarioConfig& cfg) {
    static const double rs[] = {0.0, 1.0, 2.0, 4.0, 5.0};
    static const double eps[] = {0.3, 0.03, 0.003};
    ScenarioOutcome out;
    json rows = json::array();
    std::ostringstream csv, os;
    csv << "r,epsilon,engine,delta_hat,iterations,max_tail,min_margin_series,min_margin_closed_form,pass\n";
    bool all = true;
    std::uint64_t index = 0;
    for (double r : rs) {
        for (double e : eps) {
            ScenarioConfig c = cfg;
            c.name = cfg.name + "-r" + std::to_string(static_cast<int>(r)) + "-eps" + format_double(e);
            c.control.kind = ControlKind::Power;
            c.control.r = r;
            c.control.delta.reset();
            c.engine = r < 3.0 ? Engine::DirectForward : Engine::DirectBackward;
            c.perturbation.kind = PerturbationKind::PowerDecay;
            c.perturbation.epsilon = e;
            c.perturbation.r = r;
            c.perturbation.seed = cfg.perturbation.seed + index++;
            const Pipeline p = prepare_and_recover(c);
            const auto certs = certify_pipeline(c, p);
            const bool pass = std::all_of(certs.begin(), certs.end(), [](const auto& x) { return x.pass; });
            all = all && pass;
            rows.push_back({{"r", r},
                            {"epsilon", e},
                            {"engine", to_string(c.engine)},
                            {"delta_hat", json_number(p.delta.delta_hat)},
                            {"iterations", p.recovery->iterations},
                            {"max_tail", json_number(p.recovery->max_tail)},
                            {"min_margin_series", json_number(certs[0].min_margin)},
                            {"min_margin_closed_form", json_number(certs[1].min_margin)},
                            {"pass", pass}});
            csv << format_double(r) << ',' << format_double(e) << ',' << to_string(c.engine) << ','
                << format_double(p.delta.delta_hat) << ',' << p.recovery->iterations << ','
                << format_double(p.recovery->max_tail) << ',' << format_double(certs[0].min_margin) << ','
                << format_double(certs[1].min_margin) << ',' << (pass ? "true" : "false") << '\n';
            char buf[200];
            std::snprintf(buf, sizeof buf, "  r=%g eps=%-6g %-15s delta_hat=%.4e N=%-3zu min margin %.4e  %s\n", r,
                          e, to_string(c.engine).c_str(), p.delta.delta_hat, p.recovery->iterations,
                          certs[1].min_margin, pass ? "PASS" : "FAIL");
            os << buf;
        }
    }
    out.report["rows"] = rows;
    out.tables.emplace_back("sweep", csv.str());
    out.message = os.str();
    out.exit_code = all ? kExitPass : kExitFail;
    return out;
}

ScenarioOutcome dispatch(const std::string& subcommand, const ScenarioConfig& cfg) {
    ScenarioOutcome out;
    try {
        if (subcommand == "certify" || subcommand == "run") {
            out = run_scenario(cfg);
        } else if (subcommand == "validate") {
            out = run_validate(cfg);
        } else if (subcommand == "example-triangular") {
            out = run_example_triangular(cfg);
        } else if (subcommand == "recover") {
            out = run_recover(cfg);
        } else if (subcommand == "superstability") {
            out = run_superstability(cfg);
        } else if (subcommand == "sweep") {
            out = run_sweep(cfg);
        } else {
            throw ConfigurationError("unknown subcommand '" + subcommand + "'");
        }
    } catch (const Error& e) {
        out = ScenarioOutcome{};
        out.exit_code = kExitError;
        out.message = std::string("error: ") + e.what() + "\n";
        out.report["error"] = e.what();
    }
    json full = header(cfg, subcommand);
    full["exit_code"] = out.exit_code;
    full["status"] = out.exit_code == kExitPass ? "pass" : out.exit_code == kExitFail ? "fail" : "error";
    for (auto& [k, v] : out.report.items()) full[k] = v;
    out.report = std::move(full);
    return out;
}

std::vector<std::string> write_outputs(const ScenarioConfig& cfg, const std::string& subcommand,
                                       const ScenarioOutcome& outcome) {
    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    const fs::path dir(cfg.out_dir);
    const std::string stem = cfg.name + "." + subcommand;
    const bool want_json = std::find(cfg.formats.begin(), cfg.formats.end(), "json") != cfg.formats.end();
    const bool want_csv = std::find(cfg.formats.begin(), cfg.formats.end(), "csv") != cfg.formats.end();
    if (want_json) {
        const std::string path = (dir / (stem + ".json")).string();
        write_file_atomic(path, outcome.report.dump(2) + "\n");
        paths.push_back(path);
    }
    if (want_csv) {
        for (const auto& [suffix, text] : outcome.tables) {
            const std::string path = (dir / (stem + "." + suffix + ".csv")).string();
            write_file_atomic(path, text);
            paths.push_back(path);
        }
    }
    return paths;
}

}  // namespace cubicderiv
