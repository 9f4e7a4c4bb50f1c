#include "rgc/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rgc {

using nlohmann::json;

namespace {

const std::set<std::string> kModes = {"direct", "theorem3", "theorem4", "verify", "convergence"};
const std::set<std::string> kKnownKeys = {
    "mode",     "base_dim",  "fiber_dim", "base_res", "fiber_res", "curvature", "lambda",
    "r1",       "r2",        "tol",       "max_iters", "mean_pin",  "seed",      "out_prefix",
    "resolutions", "bracket", "base_node"};
const std::set<std::string> kCurvatureKinds = {"constant", "fiber",      "radial",
                                               "homothety", "expression", "table"};

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json monitors_json(const MonitorRecord& m) {
    return json{{"valid", m.valid},
                {"admissible", m.admissible},
                {"admissibility_margin", m.adm_margin},
                {"osc", m.osc},
                {"grad_h_max", m.grad_h_max},
                {"grad_v_max", m.grad_v_max},
                {"grad_bound", m.grad_bound},
                {"grad_bound_holds", m.grad_bound_holds},
                {"band_min", m.band_min},
                {"band_c1", m.band_c1},
                {"band_holds", m.band_holds},
                {"band_checked", m.band_checked},
                {"c0_checked", m.c0_checked},
                {"c0_bound_satisfied", m.c0_holds},
                {"c0_margin", m.c0_margin},
                {"omega_max", m.omega_max}};
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CurvatureDesc parse_curvature_flag(const std::string& text) {
    CurvatureDesc d;
    if (text.empty()) return d;
    if (text[0] == '@') {
        d.kind = "table";
        d.payload = text.substr(1);
        return d;
    }
    auto pos = text.find(':');
    if (pos == std::string::npos)
        throw config_error("curvature flag must be kind:args or @path, got '" + text + "'");
    d.kind = text.substr(0, pos);
    d.payload = text.substr(pos + 1);
    if (!kCurvatureKinds.count(d.kind))
        throw config_error("unknown curvature kind '" + d.kind + "'");
    return d;
}

RunConfig parse_config(const std::string& json_text, const std::string& overrides_json) {
    json doc, over;
    try {
        doc = json::parse(json_text);
    } catch (const std::exception& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    try {
        over = json::parse(overrides_json);
    } catch (const std::exception& e) {
        throw config_error(std::string("override parse error: ") + e.what());
    }
    if (!doc.is_object()) throw config_error("config root must be an object");
    for (auto& [k, v] : over.items()) doc[k] = v;  // flags override file values

    std::vector<std::string> errs;
    for (auto& [k, v] : doc.items())
        if (!kKnownKeys.count(k)) errs.push_back("unknown key '" + k + "'");

    RunConfig cfg;
    auto get = [&](const char* key, auto& dst) {
        if (doc.contains(key)) {
            try {
                dst = doc[key].get<std::decay_t<decltype(dst)>>();
            } catch (const std::exception&) {
                errs.push_back(std::string("key '") + key + "' has the wrong type");
            }
        }
    };
    get("mode", cfg.mode);
    get("base_dim", cfg.n);
    get("fiber_dim", cfg.d);
    get("lambda", cfg.lambda);
    get("r1", cfg.r1);
    get("r2", cfg.r2);
    get("tol", cfg.tol);
    get("max_iters", cfg.max_iters);
    get("seed", cfg.seed);
    get("out_prefix", cfg.out_prefix);
    get("base_node", cfg.base_node);
    get("resolutions", cfg.resolutions);
    if (doc.contains("mean_pin") && !doc["mean_pin"].is_null())
        cfg.mean_pin = doc["mean_pin"].get<double>();
    if (doc.contains("base_res")) {
        if (doc["base_res"].is_number())
            cfg.base_res = {doc["base_res"].get<int>(), doc["base_res"].get<int>()};
        else if (doc["base_res"].is_array()) {
            auto v = doc["base_res"].get<std::vector<int>>();
            for (size_t i = 0; i < std::min<size_t>(2, v.size()); ++i) cfg.base_res[i] = v[i];
        }
    }
    if (doc.contains("fiber_res")) {
        if (doc["fiber_res"].is_number()) {
            cfg.fiber_res = {doc["fiber_res"].get<int>(), 0};
        } else if (doc["fiber_res"].is_array()) {
            auto v = doc["fiber_res"].get<std::vector<int>>();
            cfg.fiber_res = {0, 0};
            for (size_t i = 0; i < std::min<size_t>(2, v.size()); ++i) cfg.fiber_res[i] = v[i];
        }
    }
    if (doc.contains("bracket")) {
        auto v = doc["bracket"].get<std::vector<double>>();
        if (v.size() == 2)
            cfg.bracket = {v[0], v[1]};
        else
            errs.push_back("bracket must be [a, b]");
    }
    if (doc.contains("curvature")) {
        const json& c = doc["curvature"];
        if (c.is_string()) {
            try {
                cfg.curvature = parse_curvature_flag(c.get<std::string>());
            } catch (const std::exception& e) {
                errs.push_back(e.what());
            }
        } else if (c.is_object()) {
            std::vector<std::string> present;
            for (auto& [k, v] : c.items()) {
                if (!kCurvatureKinds.count(k)) {
                    errs.push_back("unknown curvature kind '" + k + "'");
                    continue;
                }
                present.push_back(k);
            }
            if (present.size() > 1) {
                std::string list;
                for (auto& p : present) list += (list.empty() ? "" : " + ") + p;
                errs.push_back("curvature kinds are mutually exclusive (got " + list + ")");
            } else if (present.size() == 1) {
                cfg.curvature.kind = present[0];
                const json& payload = c[present[0]];
                cfg.curvature.payload =
                    payload.is_string() ? payload.get<std::string>() : fmt17(payload.get<double>());
            }
        } else {
            errs.push_back("curvature must be a string or an object");
        }
    }

    // Mode-specific validation; every violated constraint is listed.
    if (cfg.mode.empty()) errs.push_back("mode is required");
    else if (!kModes.count(cfg.mode)) errs.push_back("unknown mode '" + cfg.mode + "'");
    if (cfg.n < 0 || cfg.n > 2) errs.push_back("base_dim must be 0, 1 or 2");
    if (cfg.d < 1 || cfg.d > 2) errs.push_back("fiber_dim must be 1 or 2");
    if (!(cfg.tol > 0)) errs.push_back("tol must be positive");
    if (cfg.max_iters < 1) errs.push_back("max_iters must be >= 1");
    bool needs_curvature = cfg.mode == "direct" || cfg.mode == "theorem3" ||
                           cfg.mode == "theorem4" || cfg.mode == "verify";
    if (needs_curvature && cfg.curvature.empty())
        errs.push_back("curvature is required for mode " + cfg.mode);
    if (cfg.mode == "theorem3" && !(cfg.lambda > 0))
        errs.push_back("lambda must be strictly positive in theorem3 mode");
    if (cfg.mode == "theorem4") {
        if (!doc.contains("r1")) errs.push_back("r1 is required in theorem4 mode");
        if (!doc.contains("r2")) errs.push_back("r2 is required in theorem4 mode");
        if (doc.contains("r1") && doc.contains("r2") && !(cfg.r1 > 0 && cfg.r1 <= 1 && cfg.r2 >= 1))
            errs.push_back("theorem4 requires 0 < r1 <= 1 <= r2");
    }
    if (cfg.mode == "convergence" && cfg.resolutions.size() < 3)
        errs.push_back("convergence mode needs >= 3 resolutions");

    if (!errs.empty()) {
        std::string msg = "configuration invalid:";
        for (auto& e : errs) msg += "\n  - " + e;
        throw config_error(msg);
    }
    if (cfg.fiber_res[1] == 0 && cfg.d == 2) cfg.fiber_res[1] = 2 * cfg.fiber_res[0];
    return cfg;
}

SolverConfig RunConfig::solver_config() const {
    SolverConfig s;
    s.tol_residual = tol;
    s.max_newton_iters = max_iters;
    s.lambda = lambda;
    s.r1 = r1;
    s.r2 = r2;
    s.seed = seed;
    return s;
}

CurvatureSpec build_curvature(const CurvatureDesc& desc, int d) {
    if (desc.kind == "constant") {
        try {
            return CurvatureSpec::constant(std::stod(desc.payload));
        } catch (const std::invalid_argument& e) {
            throw config_error(std::string("bad constant curvature: ") + e.what());
        }
    }
    if (desc.kind == "fiber") return CurvatureSpec::fiber_constant(Expression::parse(desc.payload));
    if (desc.kind == "radial") return CurvatureSpec::radial(Expression::parse(desc.payload));
    if (desc.kind == "homothety")
        return CurvatureSpec::homothety(Expression::parse(desc.payload), d + 1);
    if (desc.kind == "expression")
        return CurvatureSpec::expression(Expression::parse(desc.payload));
    if (desc.kind == "table") return load_curvature_table(desc.payload);
    throw config_error("unknown curvature kind '" + desc.kind + "'");
}

CurvatureSpec load_curvature_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open curvature table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty curvature table: " + path);
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
            cols.push_back(tok);
        }
    }
    const std::set<std::string> allowed = {"x", "y", "theta", "phi", "rho", "K"};
    int rho_col = -1, k_col = -1;
    std::vector<int> spatial_cols;
    for (size_t i = 0; i < cols.size(); ++i) {
        if (!allowed.count(cols[i]))
            throw io_error("unknown table column '" + cols[i] + "' in " + path);
        if (cols[i] == "rho")
            rho_col = (int)i;
        else if (cols[i] == "K")
            k_col = (int)i;
        else
            spatial_cols.push_back((int)i);
    }
    if (rho_col < 0 || k_col < 0) throw io_error("table needs 'rho' and 'K' columns: " + path);

    struct Row {
        std::vector<double> key;
        double rho, K;
    };
    std::vector<Row> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ss, tok, ',')) vals.push_back(std::stod(tok));
        if (vals.size() != cols.size())
            throw io_error("row " + std::to_string(lineno) + " has " +
                           std::to_string(vals.size()) + " fields, expected " +
                           std::to_string(cols.size()));
        Row r;
        r.rho = vals[rho_col];
        r.K = vals[k_col];
        if (!(r.K > 0))
            throw io_error("nonpositive K at row " + std::to_string(lineno) + " of " + path);
        for (int c : spatial_cols) r.key.push_back(vals[c]);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw io_error("curvature table has no data rows: " + path);

    // Group rows by spatial key; each group must sample the same radii.
    std::map<std::vector<double>, std::map<double, double>> groups;
    for (const auto& r : rows) groups[r.key][r.rho] = r.K;
    std::vector<double> radii;
    for (const auto& [rho, K] : groups.begin()->second) radii.push_back(rho);
    std::vector<std::vector<double>> keys;
    std::vector<std::vector<double>> values;
    for (const auto& [key, samples] : groups) {
        if (samples.size() != radii.size())
            throw io_error("inconsistent grid: spatial groups sample different radii in " + path);
        std::vector<double> v;
        size_t i = 0;
        for (const auto& [rho, K] : samples) {
            if (std::abs(rho - radii[i]) > 1e-12)
                throw io_error("inconsistent grid: radii differ between spatial groups in " +
                               path);
            v.push_back(K);
            ++i;
        }
        if (!key.empty()) keys.push_back(key);
        values.push_back(std::move(v));
    }
    if (groups.size() == 1 && groups.begin()->first.empty()) keys.clear();
    return CurvatureSpec::table(std::move(keys), std::move(radii), std::move(values));
}

namespace {

void write_csv(const ScalarField& u, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    const BundleGrid& g = *u.grid;
    out << "node_index";
    for (int a = 0; a < g.n(); ++a) out << "," << (a == 0 ? "x" : "y");
    if (g.d() == 1)
        out << ",theta";
    else
        out << ",phi,theta";
    out << ",u\n";
    double x[2], ang[2];
    for (long p = 0; p < u.size(); ++p) {
        g.base_coords(p, x);
        g.fiber_angles(p, ang);
        out << p;
        for (int a = 0; a < g.n(); ++a) out << "," << fmt17(x[a]);
        for (int a = 0; a < g.d(); ++a) out << "," << fmt17(ang[a]);
        out << "," << fmt17(u[p]) << "\n";
    }
}

void write_obj(const ScalarField& u, const std::string& path) {
    EmbedResult emb = embed_and_measure(u, 0);
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    for (const auto& v : emb.mesh.vertices)
        out << "v " << fmt17(v[0]) << " " << fmt17(v[1]) << " " << fmt17(v[2]) << "\n";
    if (emb.mesh.polyline) {
        out << "l";
        for (size_t i = 1; i <= emb.mesh.vertices.size(); ++i) out << " " << i;
        out << " 1\n";
    } else {
        for (const auto& f : emb.mesh.faces)
            out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    }
}

}  // namespace

void emit_solution(const ScalarField& u, const SolveReport& report,
                   const std::string& config_echo, const std::string& prefix,
                   const IdentityReport* identities) {
    write_csv(u, prefix + ".csv");
    write_obj(u, prefix + ".obj");

    json trace = json::array();
    for (const auto& s : report.trace)
        trace.push_back(json{{"t", s.t},
                             {"newton_iters", s.newton_iters},
                             {"residual", s.final_residual},
                             {"admissibility_margin", s.adm_margin},
                             {"c0_bound_satisfied", s.c0_holds}});
    json idj;
    if (identities) {
        idj = json{{"commutator_max", identities->commutator_max},
                   {"commutator_max_all", identities->commutator_max_all},
                   {"mixed_commutator_max", identities->mixed_max},
                   {"homogeneity_max", identities->homogeneity_max},
                   {"fields_tested", identities->fields_tested}};
        if (identities->has_convexity) idj["convexity_min_eigenvalue"] = identities->convexity_min;
    }
    json rep{{"mode", report.mode},
             {"status", report.converged ? "converged" : report.failure},
             {"config_echo", json::parse(config_echo)},
             {"homotopy_trace", trace},
             {"residuals",
              json{{"final_max_log", report.final_residual},
                   {"final_n1", report.final_residual_n1},
                   {"final_n2", report.final_residual_n2},
                   {"history", report.residual_history},
                   {"final_t", report.final_t}}},
             {"monitors", monitors_json(report.monitors)},
             {"identity_checks", idj},
             {"timings", json{{"wall_seconds", report.wall_seconds}}},
             {"warnings", report.warnings}};
    std::ofstream out(prefix + ".json");
    if (!out) throw io_error("cannot write " + prefix + ".json");
    out << rep.dump(2) << "\n";
}

void emit_failure_report(const std::string& mode, const std::string& message,
                         const std::string& config_echo, const std::string& prefix) {
    json rep{{"mode", mode},
             {"status", message},
             {"config_echo", json::parse(config_echo)},
             {"homotopy_trace", json::array()},
             {"residuals", json::object()},
             {"monitors", json::object()},
             {"identity_checks", json::object()},
             {"timings", json::object()},
             {"warnings", json::array()}};
    std::ofstream out(prefix + ".json");
    if (out) out << rep.dump(2) << "\n";
}

std::vector<double> load_solution_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> u;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto pos = line.rfind(',');
        u.push_back(std::stod(line.substr(pos + 1)));
    }
    return u;
}

std::string config_echo_json(const RunConfig& cfg) {
    json j{{"mode", cfg.mode},
           {"base_dim", cfg.n},
           {"fiber_dim", cfg.d},
           {"base_res", {cfg.base_res[0], cfg.base_res[1]}},
           {"fiber_res", {cfg.fiber_res[0], cfg.fiber_res[1]}},
           {"lambda", cfg.lambda},
           {"r1", cfg.r1},
           {"r2", cfg.r2},
           {"tol", cfg.tol},
           {"max_iters", cfg.max_iters},
           {"seed", cfg.seed},
           {"out_prefix", cfg.out_prefix},
           {"base_node", cfg.base_node}};
    if (cfg.mean_pin) j["mean_pin"] = *cfg.mean_pin;
    if (!cfg.curvature.empty())
        j["curvature"] = json{{cfg.curvature.kind, cfg.curvature.payload}};
    if (!cfg.resolutions.empty()) j["resolutions"] = cfg.resolutions;
    return j.dump();
}

}  // namespace rgc
