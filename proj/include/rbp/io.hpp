#pragma once

// Problem-spec JSON schema and machine-readable reports.
//
// Input schema:
//   {
//     "interval": [a, b],
//     "weight":    {"expr": "...", "sign_changes": [...], "antiderivative": ["..."]?},
//     "potential": {"expr": "..."}?,
//     "bc":        {"named": "dirichlet"} | {"family": ..., ...} | {"matrices": {...}},
//     "options":   {...}?
//   }
// Unknown keys are rejected; errors carry a JSON-pointer-style path.

#include <json.hpp>

#include <complex>
#include <fstream>
#include <string>
#include <vector>

#include "rbp/bc.hpp"
#include "rbp/criteria.hpp"
#include "rbp/help.hpp"
#include "rbp/spectral.hpp"
#include "rbp/verdict.hpp"
#include "rbp/weight.hpp"

namespace rbp {

using Json = nlohmann::ordered_json;

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void reject_unknown(const Json& j, const std::vector<std::string>& allowed,
                           const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const auto& k : allowed)
            if (it.key() == k) known = true;
        if (!known) throw SchemaError(path + "/" + it.key() + ": unknown key");
    }
}

inline const Json& require(const Json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(path + "/" + key + ": missing");
    return *it;
}

inline double number_at(const Json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError(path + ": expected a number");
    return j.get<double>();
}

inline Cplx complex_at(const Json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw SchemaError(path + ": expected a number or [re, im]");
}

inline Mat2 matrix_at(const Json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2) throw SchemaError(path + ": expected 2 rows");
    Mat2 m;
    for (int r = 0; r < 2; ++r) {
        if (!j[r].is_array() || j[r].size() != 2)
            throw SchemaError(path + "/" + std::to_string(r) + ": expected 2 entries");
        for (int c = 0; c < 2; ++c)
            m(r, c) = complex_at(j[r][c], path + "/" + std::to_string(r) + "/" +
                                              std::to_string(c));
    }
    return m;
}

}  // namespace detail

inline BCMatrices parse_bc(const Json& j, const std::string& path = "/bc") {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    if (j.contains("named")) {
        detail::reject_unknown(j, {"named", "d"}, path);
        std::string name = detail::require(j, "named", path).get<std::string>();
        double d = j.contains("d") ? detail::number_at(j["d"], path + "/d") : 0.0;
        if (name == "dirichlet") return dirichlet_bc();
        if (name == "neumann") return neumann_bc();
        if (name == "periodic") return periodic_bc(d);
        if (name == "antiperiodic") return antiperiodic_bc(d);
        throw SchemaError(path + "/named: unknown condition '" + name + "'");
    }
    if (j.contains("family")) {
        std::string fam = j["family"].get<std::string>();
        if (fam == "coupled") {
            detail::reject_unknown(j, {"family", "c", "d"}, path);
            Cplx c = detail::complex_at(detail::require(j, "c", path), path + "/c");
            double d = j.contains("d") ? detail::number_at(j["d"], path + "/d") : 0.0;
            if (c == 0.0) throw SchemaError(path + "/c: must be nonzero");
            return coupled_bc(c, d);
        }
        if (fam == "robin") {
            detail::reject_unknown(j, {"family", "da", "db"}, path);
            return robin_bc(detail::number_at(detail::require(j, "da", path), path + "/da"),
                            detail::number_at(detail::require(j, "db", path), path + "/db"));
        }
        throw SchemaError(path + "/family: unknown family '" + fam + "'");
    }
    if (j.contains("matrices")) {
        detail::reject_unknown(j, {"matrices"}, path);
        const Json& m = j["matrices"];
        detail::reject_unknown(m, {"C", "D"}, path + "/matrices");
        BCMatrices bc;
        bc.C = detail::matrix_at(detail::require(m, "C", path + "/matrices"),
                                 path + "/matrices/C");
        bc.D = detail::matrix_at(detail::require(m, "D", path + "/matrices"),
                                 path + "/matrices/D");
        return bc;
    }
    throw SchemaError(path + ": need one of 'named', 'family', 'matrices'");
}

struct ProblemInput {
    ProblemSpec spec;
    Json options = Json::object();
};

inline ProblemInput parse_problem(const Json& j) {
    if (!j.is_object()) throw SchemaError(": expected a JSON object");
    detail::reject_unknown(j, {"interval", "weight", "potential", "bc", "options"}, "");

    const Json& iv = detail::require(j, "interval", "");
    if (!iv.is_array() || iv.size() != 2) throw SchemaError("/interval: expected [a, b]");
    double a = detail::number_at(iv[0], "/interval/0");
    double b = detail::number_at(iv[1], "/interval/1");
    if (!(a < b)) throw SchemaError("/interval: need a < b");

    const Json& jw = detail::require(j, "weight", "");
    detail::reject_unknown(jw, {"expr", "sign_changes", "antiderivative"}, "/weight");
    std::string expr = detail::require(jw, "expr", "/weight").get<std::string>();
    std::vector<double> changes;
    const Json& sc = detail::require(jw, "sign_changes", "/weight");
    if (!sc.is_array()) throw SchemaError("/weight/sign_changes: expected an array");
    for (std::size_t i = 0; i < sc.size(); ++i)
        changes.push_back(detail::number_at(sc[i], "/weight/sign_changes/" + std::to_string(i)));
    std::vector<std::string> anti;
    if (jw.contains("antiderivative")) {
        const Json& ja = jw["antiderivative"];
        if (!ja.is_array()) throw SchemaError("/weight/antiderivative: expected an array");
        for (const auto& t : ja) anti.push_back(t.get<std::string>());
    }

    ProblemInput in;
    try {
        in.spec.w = parse_weight(expr, a, b, std::move(changes), anti);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("/weight: ") + e.what());
    }
    if (j.contains("potential")) {
        const Json& jq = j["potential"];
        detail::reject_unknown(jq, {"expr"}, "/potential");
        try {
            in.spec.q = parse_expr(detail::require(jq, "expr", "/potential").get<std::string>());
        } catch (const std::exception& e) {
            throw SchemaError(std::string("/potential/expr: ") + e.what());
        }
    }
    in.spec.bc = parse_bc(detail::require(j, "bc", ""));
    if (j.contains("options")) {
        if (!j["options"].is_object()) throw SchemaError("/options: expected an object");
        in.options = j["options"];
    }
    return in;
}

inline ProblemInput load_problem(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open input file: " + path);
    Json j;
    try {
        j = Json::parse(f);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("JSON parse failure: ") + e.what());
    }
    return parse_problem(j);
}

// -- report serialization -----------------------------------------------------

inline Json to_json(Cplx z) { return Json::array({z.real(), z.imag()}); }

inline Json to_json(const PIReport& rep) {
    Json j;
    j["verdict"] = to_cstr(rep.verdict);
    j["t_grid"] = rep.t_grid;
    j["x_grid"] = rep.x_grid;
    j["ratios"] = rep.ratios;
    j["tail_sup"] = rep.tail_sup;
    j["tail_limit"] = rep.tail_limit;
    j["witness_t"] = rep.witness_t;
    j["witness_C"] = rep.witness_C;
    if (!rep.note.empty()) j["note"] = rep.note;
    return j;
}

inline Json to_json(const LocalVerdict& lv) {
    Json j;
    j["x_k"] = lv.x_k;
    j["window"] = lv.window;
    j["outcome"] = to_cstr(lv.outcome);
    j["rule"] = lv.rule;
    j["domination"] = lv.domination == Domination::StronglyOdd ? "StronglyOdd"
                      : lv.domination == Domination::Odd       ? "Odd"
                      : lv.domination == Domination::Weakly    ? "Weakly"
                                                               : "NotWeakly";
    j["pi"] = to_cstr(lv.pi);
    j["contraction_condition"] = to_cstr(lv.api_plus);
    j["product_condition"] = to_cstr(lv.ap_nec);
    j["quotient_condition_certified"] = lv.volkmer_certified;
    if (lv.volkmer_certified) j["quotient_condition_t"] = lv.volkmer_t;
    return j;
}

// The verdict report deliberately omits the parameters the decision rules
// ignore (the Robin/coupling offset d and the full-rank matrix B), so that
// equivalent problems produce identical reports.
inline Json to_json(const RbpVerdict& v) {
    Json j;
    j["outcome"] = to_cstr(v.outcome);
    Json bc;
    bc["family"] = to_cstr(v.bc.family);
    bc["separated"] = v.bc.separated;
    if (v.bc.family == BcFamily::Coupled) {
        bc["c"] = to_json(v.bc.c);
        bc["unit_modulus_c"] = v.bc.unit_modulus_c;
    }
    j["bc"] = bc;
    Json locals = Json::array();
    for (const auto& lv : v.locals) locals.push_back(to_json(lv));
    j["turning_points"] = locals;
    Json trail = Json::array();
    for (const auto& s : v.trail) {
        Json e;
        e["rule"] = s.rule;
        e["detail"] = s.detail;
        e["outcome"] = s.outcome;
        trail.push_back(e);
    }
    j["trail"] = trail;
    return j;
}

inline Json to_json(const CanonicalBC& cb) {
    Json j;
    j["family"] = to_cstr(cb.family);
    j["separated"] = cb.separated;
    j["d"] = cb.d;
    if (cb.family == BcFamily::Coupled) {
        j["c"] = to_json(cb.c);
        j["unit_modulus_c"] = cb.unit_modulus_c;
    }
    if (cb.family == BcFamily::FullRank) {
        j["B"] = Json::array({Json::array({to_json(cb.B(0, 0)), to_json(cb.B(0, 1))}),
                              Json::array({to_json(cb.B(1, 0)), to_json(cb.B(1, 1))})});
    }
    return j;
}

inline Json to_json(const Spectrum& sp) {
    Json j;
    Json eigs = Json::array();
    for (const auto& e : sp.eigenvalues) {
        Json je;
        je["lambda"] = to_json(e.lambda);
        je["multiplicity"] = e.multiplicity;
        je["residual"] = e.residual;
        eigs.push_back(je);
    }
    j["eigenvalues"] = eigs;
    j["box"] = {{"re", Json::array({sp.box.re_lo, sp.box.re_hi})},
                {"im", Json::array({sp.box.im_lo, sp.box.im_hi})}};
    return j;
}

inline Json to_json(const GramTable& g) {
    Json j;
    j["n"] = g.n;
    j["kappa"] = g.kappa;
    Json ls = Json::array();
    for (auto z : g.lambdas) ls.push_back(to_json(z));
    j["lambdas"] = ls;
    j["rank_deficient"] = g.rank_deficient;
    j["grid_points"] = g.grid_points;
    return j;
}

inline Json to_json(const HelpReport& rep) {
    Json j;
    j["validity"] = to_cstr(rep.validity);
    j["pi_left"] = to_json(rep.pi_left);
    j["pi_right"] = to_json(rep.pi_right);
    Json form;
    form["holds"] = rep.form.holds;
    form["norm"] = rep.form.M.norm();
    form["scale"] = rep.form.scale;
    form["M"] = Json::array(
        {Json::array({rep.form.M(0, 0), rep.form.M(0, 1)}),
         Json::array({rep.form.M(1, 0), rep.form.M(1, 1)})});
    j["boundary_form"] = form;
    if (!rep.note.empty()) j["note"] = rep.note;
    return j;
}

inline Json to_json(const BestConstant& bc) {
    Json j;
    j["n"] = bc.n;
    j["K"] = bc.K;
    j["diverged"] = bc.diverged;
    j["plateau"] = bc.plateau;
    return j;
}

// -- CSV writers --------------------------------------------------------------

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw SchemaError("cannot write output file: " + path);
    f << text;
}

inline std::string csv_eigenvalues(const Spectrum& sp) {
    std::string out = "re,im,multiplicity,residual\n";
    char line[160];
    for (const auto& e : sp.eigenvalues) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%d,%.6g\n", e.lambda.real(),
                      e.lambda.imag(), e.multiplicity, e.residual);
        out += line;
    }
    return out;
}

inline std::string csv_gram(const GramTable& g) {
    std::string out = "n,kappa\n";
    char line[96];
    for (std::size_t i = 0; i < g.n.size(); ++i) {
        std::snprintf(line, sizeof line, "%d,%.17g\n", g.n[i], g.kappa[i]);
        out += line;
    }
    return out;
}

inline std::string csv_ratios(const PIReport& rep) {
    std::string out = "t,x,ratio\n";
    char line[120];
    for (std::size_t i = 0; i < rep.t_grid.size(); ++i)
        for (std::size_t jx = 0; jx < rep.x_grid.size(); ++jx) {
            if (jx >= rep.ratios[i].size()) break;
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", rep.t_grid[i],
                          rep.x_grid[jx], rep.ratios[i][jx]);
            out += line;
        }
    return out;
}

inline std::string csv_best_constant(const BestConstant& bc) {
    std::string out = "n,K\n";
    char line[96];
    for (std::size_t i = 0; i < bc.n.size(); ++i) {
        std::snprintf(line, sizeof line, "%d,%.17g\n", bc.n[i], bc.K[i]);
        out += line;
    }
    return out;
}

}  // namespace rbp
