#include "cubicderiv/report.hpp"

#include <cmath>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace cubicderiv {

using nlohmann::json;

json json_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

json to_json(const Element& e) {
    json coords = json::array();
    for (const Complex& z : e.coords()) coords.push_back({z.real(), z.imag()});
    return coords;
}

json to_json(const ProbeConfig& p) {
    return {{"count", p.count},   {"norm_min", p.norm_min}, {"norm_max", p.norm_max},
            {"seed", p.seed},     {"n0", p.n0},             {"include_basis", p.include_basis}};
}

json to_json(const ValidationReport& v) {
    return {{"subject", v.subject},
            {"associativity_defect", json_number(v.associativity_defect)},
            {"measured_const", json_number(v.measured_const)},
            {"declared_const", json_number(v.declared_const)},
            {"norm_axiom_defect", json_number(v.norm_axiom_defect)},
            {"probes", v.probes},
            {"pass", v.pass},
            {"failures", v.failures}};
}

json to_json(const ResidualSummary& s, bool include_rows) {
    json j{{"max_cubic", json_number(s.max_cubic)},
           {"max_derivation", json_number(s.max_derivation)},
           {"max_homogeneity", json_number(s.max_homogeneity)},
           {"max_cubic_rel", json_number(s.max_cubic_rel)},
           {"max_derivation_rel", json_number(s.max_derivation_rel)},
           {"max_homogeneity_rel", json_number(s.max_homogeneity_rel)},
           {"rows", s.rows.size()}};
    if (include_rows) {
        json rows = json::array();
        for (const auto& r : s.rows) {
            rows.push_back({{"probe_id", r.probe_id},
                            {"family", to_string(r.family)},
                            {"scalar_id", r.scalar_id},
                            {"value", json_number(r.value)},
                            {"relative", json_number(r.relative)}});
        }
        j["rows"] = rows;
    }
    return j;
}

json to_json(const DeltaMeasurement& d) {
    return {{"delta_hat", json_number(d.delta_hat)}, {"finite", d.finite}, {"witness", d.witness},
            {"samples", d.samples}};
}

json to_json(const RecoveryReport& r, bool include_values) {
    json probes = json::array();
    for (const auto& p : r.probes) {
        json row{{"probe_id", p.probe_id}, {"norm", json_number(p.norm)}, {"tail", json_number(p.tail)}};
        if (p.deviation_from_exact) row["deviation_from_exact"] = json_number(*p.deviation_from_exact);
        if (include_values) row["value"] = to_json(p.value);
        probes.push_back(std::move(row));
    }
    json j{{"engine", to_string(r.engine)},
           {"iterations", r.iterations},
           {"tol", json_number(r.tol)},
           {"k_hat", json_number(r.k_hat)},
           {"max_tail", json_number(r.max_tail)},
           {"control", r.control.describe()},
           {"probes", probes}};
    if (r.engine == Engine::FixedPoint) {
        json steps = json::array();
        for (const auto& d : r.step_distances) steps.push_back(json_number(d.value));
        json ratios = json::array();
        for (double x : r.contraction_ratios) ratios.push_back(json_number(x));
        j["step_distances"] = steps;
        j["contraction_ratios"] = ratios;
        j["ratios_certified"] = r.ratios_certified;
        j["all_steps_finite"] = r.all_steps_finite;
        j["first_step_distance"] = json_number(r.first_step_distance);
        j["distance_f_to_result"] = json_number(r.distance_f_to_result);
        j["certified_distance"] = json_number(r.certified_distance);
        j["contraction_distance_bound"] = json_number(r.contraction_distance_bound);
    }
    return j;
}

json to_json(const CertificateReport& c) {
    json rows = json::array();
    for (const auto& r : c.rows) {
        rows.push_back({{"probe_id", r.probe_id},
                        {"norm_a", json_number(r.norm)},
                        {"deviation", json_number(r.deviation)},
                        {"bound", json_number(r.bound)},
                        {"margin", json_number(r.margin)},
                        {"tail", json_number(r.tail)}});
    }
    json j{{"scenario", c.scenario_id},
           {"family", to_string(c.family)},
           {"pass", c.pass},
           {"verdict", c.verdict},
           {"min_margin", json_number(c.min_margin)},
           {"slack", json_number(c.slack)},
           {"delta_hat", json_number(c.delta_hat)},
           {"k_hat", json_number(c.k_hat)},
           {"iterations", c.iterations},
           {"max_tail", json_number(c.max_tail)},
           {"control", c.control},
           {"probes", to_json(c.probes)},
           {"notes", c.notes},
           {"rows", rows}};
    if (c.witness_probe) j["witness_probe"] = *c.witness_probe;
    if (!c.witness.empty()) {
        j["witness"] = c.witness;
        j["witness_value"] = json_number(c.witness_value);
    }
    return j;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string certificate_csv(const CertificateReport& c) {
    std::ostringstream os;
    os << "probe_id,norm_a,deviation,bound,margin\n";
    for (const auto& r : c.rows) {
        os << r.probe_id << ',' << format_double(r.norm) << ',' << format_double(r.deviation) << ','
           << format_double(r.bound) << ',' << format_double(r.margin) << '\n';
    }
    return os.str();
}

std::string timestamp_utc() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace cubicderiv
