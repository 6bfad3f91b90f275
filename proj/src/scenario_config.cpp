#include "cubicderiv/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace cubicderiv {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) throw ConfigPathError(path.empty() ? "<root>" : path, "expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items()) {
        if (!allowed.count(k)) throw ConfigPathError(join(path, k), "unknown key");
    }
}

template <class T>
T read(const json& obj, const std::string& path, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigPathError(join(path, key), std::string("wrong type: ") + e.what());
    }
}

template <class T>
T require(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) throw ConfigPathError(join(path, key), "required key is missing");
    return read<T>(obj, path, key, T{});
}

double read_number(const json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigPathError(join(path, key), "expected a number");
    return v.get<double>();
}

Complex read_complex(const json& v, const std::string& path) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
        return {v[0].get<double>(), v[1].get<double>()};
    }
    throw ConfigPathError(path, "expected a number or a [re, im] pair");
}

std::vector<Complex> read_complex_list(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigPathError(path, "expected an array");
    std::vector<Complex> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(read_complex(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

json resolve(const ScenarioConfig& c) {
    json algebra;
    if (!c.algebra.file.empty()) {
        algebra["file"] = c.algebra.file;
    } else {
        algebra["builtin"] = c.algebra.builtin;
        if (c.algebra.builtin == "triangular") {
            algebra["base"] = c.algebra.base;
            algebra["g0_seed"] = c.algebra.g0_seed;
        }
    }
    if (c.algebra.perturb_entry) {
        const auto& e = *c.algebra.perturb_entry;
        algebra["perturb_entry"] = {{"i", e.i}, {"j", e.j}, {"k", e.k}, {"delta", e.delta}};
    }
    json control{{"kind", to_string(c.control.kind)}};
    control["delta"] = c.control.delta ? json(*c.control.delta) : json("measured");
    if (c.control.kind == ControlKind::Power) control["r"] = c.control.r;
    if (c.control.kind == ControlKind::Product) {
        control["p"] = c.control.p;
        control["q"] = c.control.q;
    }
    json pert{{"kind", to_string(c.perturbation.kind)},
              {"epsilon", c.perturbation.epsilon},
              {"r", c.perturbation.r},
              {"p", c.perturbation.p},
              {"q", c.perturbation.q},
              {"seed", c.perturbation.seed}};
    if (c.perturbation.direction) {
        json d = json::array();
        for (auto z : *c.perturbation.direction) d.push_back(complex_json(z));
        pert["direction"] = d;
    }
    if (c.perturbation.functional) {
        json d = json::array();
        for (auto z : *c.perturbation.functional) d.push_back(complex_json(z));
        pert["functional"] = d;
    }
    return {{"name", c.name},
            {"algebra", algebra},
            {"map", {{"kind", c.map.kind}, {"g0_seed", c.map.g0_seed}, {"coefficient", complex_json(c.map.coefficient)}}},
            {"control", control},
            {"perturbation", pert},
            {"engine", to_string(c.engine)},
            {"probes",
             {{"count", c.probes.count},
              {"norm_min", c.probes.norm_min},
              {"norm_max", c.probes.norm_max},
              {"seed", c.probes.seed},
              {"n0", c.probes.n0},
              {"include_basis", c.probes.include_basis}}},
            {"tolerances",
             {{"recover", c.tolerances.recover},
              {"certify_slack", c.tolerances.certify_slack},
              {"chain", c.tolerances.chain}}},
            {"output", {{"directory", c.out_dir}, {"formats", c.formats}}}};
}

}  // namespace

ScenarioConfig parse_scenario(const json& j) {
    allow_keys(j, "", {"name", "algebra", "map", "control", "perturbation", "engine", "probes", "tolerances", "output"});
    ScenarioConfig c;
    c.name = require<std::string>(j, "", "name");
    if (c.name.empty() || c.name.find('/') != std::string::npos) throw ConfigPathError("name", "must be a plain file stem");

    // algebra
    {
        const std::string p = "algebra";
        if (!j.contains("algebra")) throw ConfigPathError(p, "required key is missing");
        const json& a = j.at("algebra");
        allow_keys(a, p, {"builtin", "file", "base", "g0_seed", "perturb_entry"});
        c.algebra.builtin = read<std::string>(a, p, "builtin", "");
        c.algebra.file = read<std::string>(a, p, "file", "");
        if (c.algebra.builtin.empty() == c.algebra.file.empty()) {
            throw ConfigPathError(p, "give exactly one of 'builtin' and 'file'");
        }
        c.algebra.base = read<std::string>(a, p, "base", c.algebra.base);
        c.algebra.g0_seed = read<std::uint64_t>(a, p, "g0_seed", c.algebra.g0_seed);
        if (a.contains("perturb_entry")) {
            const std::string pp = p + ".perturb_entry";
            const json& e = a.at("perturb_entry");
            allow_keys(e, pp, {"i", "j", "k", "delta"});
            c.algebra.perturb_entry = AlgebraChoice::EntryPerturbation{
                require<std::size_t>(e, pp, "i"), require<std::size_t>(e, pp, "j"), require<std::size_t>(e, pp, "k"),
                read_number(e, pp, "delta", 0.1)};
        }
    }

    // map
    c.map.g0_seed = c.algebra.g0_seed;
    if (j.contains("map")) {
        const std::string p = "map";
        const json& m = j.at("map");
        allow_keys(m, p, {"kind", "g0_seed", "coefficient"});
        c.map.kind = read<std::string>(m, p, "kind", c.map.kind);
        static const std::set<std::string> kinds{"auto", "triangular", "commutator-cube", "cube", "zero"};
        if (!kinds.count(c.map.kind)) throw ConfigPathError(p + ".kind", "unknown map kind '" + c.map.kind + "'");
        c.map.g0_seed = read<std::uint64_t>(m, p, "g0_seed", c.map.g0_seed);
        if (m.contains("coefficient")) c.map.coefficient = read_complex(m.at("coefficient"), p + ".coefficient");
    }

    // control
    {
        const std::string p = "control";
        if (!j.contains("control")) throw ConfigPathError(p, "required key is missing");
        const json& k = j.at("control");
        allow_keys(k, p, {"kind", "delta", "r", "p", "q"});
        try {
            c.control.kind = parse_control_kind(read<std::string>(k, p, "kind", "power"));
        } catch (const ConfigurationError& e) {
            throw ConfigPathError(p + ".kind", e.what());
        }
        if (c.control.kind == ControlKind::Custom) throw ConfigPathError(p + ".kind", "custom controls are library-only");
        if (k.contains("delta")) {
            const json& d = k.at("delta");
            if (d.is_string() && d.get<std::string>() == "measured") {
                c.control.delta.reset();
            } else if (d.is_number() && d.get<double>() >= 0.0) {
                c.control.delta = d.get<double>();
            } else {
                throw ConfigPathError(p + ".delta", "expected \"measured\" or a nonnegative number");
            }
        }
        c.control.r = read_number(k, p, "r", c.control.r);
        c.control.p = read_number(k, p, "p", c.control.p);
        c.control.q = read_number(k, p, "q", c.control.q);
    }

    // perturbation (shape defaults to the control's exponents)
    c.perturbation.r = c.control.r;
    c.perturbation.p = c.control.p;
    c.perturbation.q = c.control.q;
    if (j.contains("perturbation")) {
        const std::string p = "perturbation";
        const json& h = j.at("perturbation");
        allow_keys(h, p, {"kind", "epsilon", "r", "p", "q", "seed", "direction", "functional"});
        try {
            c.perturbation.kind = parse_perturbation_kind(read<std::string>(h, p, "kind", "none"));
        } catch (const ConfigurationError& e) {
            throw ConfigPathError(p + ".kind", e.what());
        }
        if (c.perturbation.kind == PerturbationKind::Custom) {
            throw ConfigPathError(p + ".kind", "custom perturbations are library-only");
        }
        c.perturbation.epsilon = read_number(h, p, "epsilon", 0.0);
        c.perturbation.r = read_number(h, p, "r", c.perturbation.r);
        c.perturbation.p = read_number(h, p, "p", c.perturbation.p);
        c.perturbation.q = read_number(h, p, "q", c.perturbation.q);
        if (c.perturbation.kind != PerturbationKind::None) {
            c.perturbation.seed = require<std::uint64_t>(h, p, "seed");
        }
        if (h.contains("direction")) c.perturbation.direction = read_complex_list(h.at("direction"), p + ".direction");
        if (h.contains("functional")) c.perturbation.functional = read_complex_list(h.at("functional"), p + ".functional");
    }

    try {
        c.engine = parse_engine(read<std::string>(j, "", "engine", "direct-forward"));
    } catch (const ConfigurationError& e) {
        throw ConfigPathError("engine", e.what());
    }

    {
        const std::string p = "probes";
        if (!j.contains("probes")) throw ConfigPathError(p, "required key is missing");
        const json& q = j.at("probes");
        allow_keys(q, p, {"count", "norm_min", "norm_max", "seed", "n0", "include_basis"});
        c.probes.count = read<std::size_t>(q, p, "count", c.probes.count);
        c.probes.norm_min = read_number(q, p, "norm_min", c.probes.norm_min);
        c.probes.norm_max = read_number(q, p, "norm_max", c.probes.norm_max);
        c.probes.seed = require<std::uint64_t>(q, p, "seed");
        c.probes.n0 = read<unsigned>(q, p, "n0", c.probes.n0);
        c.probes.include_basis = read<bool>(q, p, "include_basis", c.probes.include_basis);
        if (c.probes.count == 0) throw ConfigPathError(p + ".count", "must be positive");
        if (!(c.probes.norm_min > 0.0) || !(c.probes.norm_max >= c.probes.norm_min)) {
            throw ConfigPathError(p, "need 0 < norm_min <= norm_max");
        }
        if (c.probes.n0 == 0) throw ConfigPathError(p + ".n0", "must be positive");
    }

    if (j.contains("tolerances")) {
        const std::string p = "tolerances";
        const json& t = j.at("tolerances");
        allow_keys(t, p, {"recover", "certify_slack", "chain"});
        c.tolerances.recover = read_number(t, p, "recover", c.tolerances.recover);
        c.tolerances.certify_slack = read_number(t, p, "certify_slack", c.tolerances.certify_slack);
        c.tolerances.chain = read<std::size_t>(t, p, "chain", c.tolerances.chain);
        if (!(c.tolerances.recover > 0.0)) throw ConfigPathError(p + ".recover", "must be positive");
        if (!(c.tolerances.certify_slack >= 0.0)) throw ConfigPathError(p + ".certify_slack", "must be nonnegative");
    }

    if (j.contains("output")) {
        const std::string p = "output";
        const json& o = j.at("output");
        allow_keys(o, p, {"directory", "formats"});
        c.out_dir = read<std::string>(o, p, "directory", c.out_dir);
        c.formats = read<std::vector<std::string>>(o, p, "formats", c.formats);
        for (const auto& f : c.formats) {
            if (f != "json" && f != "csv") throw ConfigPathError(p + ".formats", "unknown format '" + f + "'");
        }
    }

    c.resolved = resolve(c);
    return c;
}

std::vector<std::string> builtin_scenario_names() {
    return {"triangular-exact", "power-r1-eps0.1", "power-r0-eps0.3", "power-r2-eps0.03", "backward-r4-eps0.1",
            "fixed-point-r1",   "power-r3",        "superstable-triangular", "scalar-cubic-plus-linear",
            "validate-mat2-perturbed", "sweep"};
}

json builtin_scenario(const std::string& name) {
    const json triangular{{"builtin", "triangular"}, {"base", "nil5"}, {"g0_seed", 7}};
    const json probes{{"count", 100}, {"norm_min", 1e-2}, {"norm_max", 1e2}, {"seed", 1}};
    auto power = [&](const std::string& n, double r, double eps, const std::string& engine) {
        return json{{"name", n},
                    {"algebra", triangular},
                    {"control", {{"kind", "power"}, {"delta", "measured"}, {"r", r}}},
                    {"perturbation", {{"kind", "power-decay"}, {"epsilon", eps}, {"r", r}, {"seed", 11}}},
                    {"engine", engine},
                    {"probes", probes}};
    };
    if (name == "triangular-exact") {
        return {{"name", name},
                {"algebra", triangular},
                {"control", {{"kind", "power"}, {"delta", "measured"}, {"r", 1}}},
                {"engine", "direct-forward"},
                {"probes", probes}};
    }
    if (name == "power-r1-eps0.1") return power(name, 1, 0.1, "direct-forward");
    if (name == "power-r0-eps0.3") return power(name, 0, 0.3, "direct-forward");
    if (name == "power-r2-eps0.03") return power(name, 2, 0.03, "direct-forward");
    if (name == "backward-r4-eps0.1") return power(name, 4, 0.1, "direct-backward");
    if (name == "fixed-point-r1") return power(name, 1, 0.1, "fixed-point");
    if (name == "power-r3") return power(name, 3, 0.1, "direct-forward");
    if (name == "sweep") return power(name, 1, 0.1, "direct-forward");
    if (name == "superstable-triangular") {
        return {{"name", name},
                {"algebra", triangular},
                {"control", {{"kind", "product"}, {"delta", "measured"}, {"p", 1}, {"q", 1}}},
                {"probes", probes}};
    }
    if (name == "scalar-cubic-plus-linear") {
        // f(t) = t^3 + 0.1 t on the complex scalars
        return {{"name", name},
                {"algebra", {{"builtin", "scalar-complex"}}},
                {"map", {{"kind", "cube"}, {"coefficient", 1.0}}},
                {"control", {{"kind", "product"}, {"delta", "measured"}, {"p", 1}, {"q", 1}}},
                {"perturbation",
                 {{"kind", "linear"}, {"epsilon", 0.1}, {"seed", 1}, {"direction", {1.0}}, {"functional", {1.0}}}},
                {"probes", {{"count", 20}, {"norm_min", 1e-1}, {"norm_max", 1e1}, {"seed", 1}, {"include_basis", true}}}};
    }
    if (name == "validate-mat2-perturbed") {
        return {{"name", name},
                {"algebra", {{"builtin", "mat2-complex"}, {"perturb_entry", {{"i", 0}, {"j", 1}, {"k", 1}, {"delta", 0.1}}}}},
                {"control", {{"kind", "power"}, {"r", 1}}},
                {"probes", probes}};
    }
    std::ostringstream os;
    os << "unknown builtin scenario '" << name << "' (";
    bool first = true;
    for (const auto& n : builtin_scenario_names()) {
        os << (first ? "" : ", ") << n;
        first = false;
    }
    os << ")";
    throw ConfigurationError(os.str());
}

ScenarioConfig load_scenario(const std::string& ref) {
    static const std::string prefix = "builtin:";
    if (ref.rfind(prefix, 0) == 0) return parse_scenario(builtin_scenario(ref.substr(prefix.size())));
    std::ifstream in(ref);
    if (!in) throw ConfigurationError("cannot open config file '" + ref + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigurationError(ref + ": " + e.what());
    }
    return parse_scenario(j);
}

namespace {

// c a^3 as a cubic tensor on an algebra acting on itself.
CubicTensor cube_tensor(const AlgebraSpec& alg, Complex coefficient) {
    std::vector<CubicTensor::Entry> raw;
    for (const auto& e1 : alg.mul.nonzeros()) {
        for (std::size_t k = 0; k < alg.dim(); ++k) {
            for (std::size_t l = 0; l < alg.dim(); ++l) {
                const Complex v = alg.mul.at(e1.k, k, l);
                if (v == Complex{}) continue;
                raw.push_back({static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(e1.i),
                               static_cast<std::uint32_t>(e1.j), static_cast<std::uint32_t>(k),
                               coefficient * e1.value * v});
            }
        }
    }
    return CubicTensor::symmetrized(alg.dim(), alg.dim(), raw);
}

AlgebraPtr with_entry_perturbed(const AlgebraPtr& alg, const AlgebraChoice::EntryPerturbation& e) {
    const std::size_t n = alg->dim();
    if (e.i >= n || e.j >= n || e.k >= n) {
        throw ConfigPathError("algebra.perturb_entry", "index out of range for dimension " + std::to_string(n));
    }
    auto copy = std::make_shared<AlgebraSpec>(*alg);
    copy->mul.add(e.i, e.j, e.k, Complex{e.delta, 0.0});
    return copy;
}

}  // namespace

ScenarioObjects build_objects(const ScenarioConfig& cfg) {
    ScenarioObjects o;
    if (!cfg.algebra.file.empty()) {
        auto loaded = load_algebra_file(cfg.algebra.file);
        o.algebra = loaded.algebra;
        o.module = loaded.module;
    } else if (cfg.algebra.builtin == "triangular") {
        AlgebraPtr base;
        try {
            base = builtin_algebra(cfg.algebra.base);
        } catch (const ConfigurationError& e) {
            throw ConfigPathError("algebra.base", e.what());
        }
        o.triangular = build_triangular(base, cfg.algebra.g0_seed);
        o.algebra = o.triangular->algebra;
        o.module = o.triangular->dual;
    } else {
        try {
            o.algebra = builtin_algebra(cfg.algebra.builtin);
        } catch (const ConfigurationError& e) {
            throw ConfigPathError("algebra.builtin", e.what());
        }
        o.module = regular_bimodule(o.algebra);
    }
    if (cfg.algebra.perturb_entry) {
        o.algebra = with_entry_perturbed(o.algebra, *cfg.algebra.perturb_entry);
        if (!o.triangular && o.module->space == o.algebra->space) o.module = regular_bimodule(o.algebra);
    }

    std::string kind = cfg.map.kind;
    if (kind == "auto") kind = o.triangular ? "triangular" : "commutator-cube";
    if (kind == "triangular") {
        if (!o.triangular) throw ConfigPathError("map.kind", "'triangular' needs algebra.builtin = triangular");
        o.exact = std::make_shared<MapExpr>(triangular_derivation(*o.triangular));
    } else if (kind == "commutator-cube") {
        Rng rng(cfg.map.g0_seed);
        o.exact = std::make_shared<MapExpr>(commutator_cube_map(o.module, random_element(o.module->space, rng)));
    } else if (kind == "cube") {
        if (o.module->space != o.algebra->space) {
            throw ConfigPathError("map.kind", "'cube' needs the algebra acting on itself");
        }
        o.exact = std::make_shared<MapExpr>(o.algebra, o.module, cube_tensor(*o.algebra, cfg.map.coefficient));
    } else {
        o.exact = std::make_shared<MapExpr>(o.algebra, o.module, CubicTensor(o.module->dim(), o.algebra->dim()));
    }
    o.f = std::make_shared<MapExpr>(make_perturbed_map(*o.exact, cfg.perturbation));
    return o;
}

ControlFunction control_shape(const ScenarioConfig& cfg) {
    switch (cfg.control.kind) {
        case ControlKind::Power: return ControlFunction::power(1.0, cfg.control.r);
        case ControlKind::Product: return ControlFunction::product(1.0, cfg.control.p, cfg.control.q);
        case ControlKind::Custom: break;
    }
    throw ConfigPathError("control.kind", "custom controls are library-only");
}

}  // namespace cubicderiv
