#include "cubicderiv/algebra.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace cubicderiv {

using nlohmann::json;

namespace {

NormDescriptor parse_norm(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("kind")) {
        throw ConfigurationError(where + ": norm descriptor needs a 'kind'");
    }
    NormDescriptor d;
    d.kind = parse_norm_kind(j.at("kind").get<std::string>());
    if (j.contains("weights")) d.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("block_size")) d.block_size = j.at("block_size").get<std::size_t>();
    if (j.contains("inner")) d.inner = parse_norm_kind(j.at("inner").get<std::string>());
    for (double w : d.weights) {
        if (!(w > 0.0)) throw ConfigurationError(where + ": norm weights must be positive");
    }
    return d;
}

json norm_to_json(const NormDescriptor& d) {
    json j{{"kind", to_string(d.kind)}};
    if (!d.weights.empty()) j["weights"] = d.weights;
    if (d.kind == NormKind::BlockSum || d.kind == NormKind::BlockMax) {
        j["block_size"] = d.block_size;
        j["inner"] = to_string(d.inner);
    }
    return j;
}

StructureTensor parse_tensor(const json& j, std::size_t n1, std::size_t n2, std::size_t n3,
                             const std::string& where) {
    if (!j.is_array() || j.size() != n1 * n2 * n3) {
        throw DimensionError(where + ": expected " + std::to_string(n1 * n2 * n3) + " [re, im] entries");
    }
    StructureTensor t(n1, n2, n3);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t k2 = 0; k2 < n2; ++k2)
            for (std::size_t k3 = 0; k3 < n3; ++k3, ++idx) {
                const json& e = j[idx];
                if (!e.is_array() || e.size() != 2) {
                    throw ConfigurationError(where + "[" + std::to_string(idx) + "]: expected [re, im]");
                }
                t.set(i, k2, k3, Complex{e[0].get<double>(), e[1].get<double>()});
            }
    return t;
}

json tensor_to_json(const StructureTensor& t) {
    json out = json::array();
    for (const Complex c : t.dense()) out.push_back({c.real(), c.imag()});
    return out;
}

}  // namespace

LoadedAlgebra parse_algebra_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigurationError(std::string("algebra file: ") + e.what());
    }
    try {
        if (j.contains("builtin")) {
            auto alg = builtin_algebra(j.at("builtin").get<std::string>());
            return {alg, regular_bimodule(alg)};
        }
        const auto dim = j.at("dim").get<std::size_t>();
        auto alg = make_algebra(j.value("name", std::string("file-algebra")), dim,
                                parse_tensor(j.at("mul"), dim, dim, dim, "mul"),
                                parse_norm(j.at("norm"), "norm"), j.value("submult_const", 1.0),
                                j.value("real_probes", false));
        if (!j.contains("module")) return {alg, regular_bimodule(alg)};

        const json& m = j.at("module");
        const auto mdim = m.at("dim").get<std::size_t>();
        auto space = std::make_shared<VectorSpace>(VectorSpace{m.value("name", std::string("file-module")), mdim,
                                                               parse_norm(m.at("norm"), "module.norm"),
                                                               alg->space->real_probes});
        auto mod = std::make_shared<BimoduleSpec>(
            BimoduleSpec{space, alg, parse_tensor(m.at("left"), dim, mdim, mdim, "module.left"),
                         parse_tensor(m.at("right"), mdim, dim, mdim, "module.right"),
                         m.value("action_const", 1.0)});
        (void)mod->left.nonzeros();
        (void)mod->right.nonzeros();
        return {alg, mod};
    } catch (const json::exception& e) {
        throw ConfigurationError(std::string("algebra file: ") + e.what());
    }
}

LoadedAlgebra load_algebra_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open algebra file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_algebra_json(ss.str());
}

std::string algebra_to_json(const AlgebraSpec& alg) {
    json j{{"name", alg.name()},
           {"dim", alg.dim()},
           {"mul", tensor_to_json(alg.mul)},
           {"norm", norm_to_json(alg.space->norm)},
           {"submult_const", alg.submult_const},
           {"real_probes", alg.space->real_probes}};
    return j.dump(2);
}

}  // namespace cubicderiv
