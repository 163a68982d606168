// Batch front end: reads a problem spec in JSON, runs one analysis, writes
// report.json (and CSV side files) into the output directory.
//
// Exit codes: 0 decided, 3 inconclusive, 1 input error, 2 numeric failure.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>

#include "rbp/io.hpp"

namespace {

using namespace rbp;

struct Options {
    std::string input;
    std::string out = ".";
    std::string format = "json";
    double tol = kOdeTol;
    int max_eigs = 10;
};

std::string out_path(const Options& opt, const std::string& name) {
    return (std::filesystem::path(opt.out) / name).string();
}

void emit(const Options& opt, const Json& report) {
    std::filesystem::create_directories(opt.out);
    write_file(out_path(opt, "report.json"), report.dump(2) + "\n");
    if (opt.format == "json") std::cout << report.dump(2) << "\n";
}

void emit_csv(const Options& opt, const std::string& name, const std::string& text) {
    std::filesystem::create_directories(opt.out);
    write_file(out_path(opt, name), text);
    if (opt.format == "csv") std::cout << text;
}

double dyadic_below(double x) { return std::pow(2.0, std::floor(std::log2(x))); }

int run_check_rbp(const Options& opt) {
    auto in = load_problem(opt.input);
    auto v = decide_rbp(in.spec);
    emit(opt, to_json(v));
    return v.outcome == Rbp::Inconclusive ? 3 : 0;
}

int run_pi_test(const Options& opt) {
    auto in = load_problem(opt.input);
    const auto& w = in.spec.w;
    double point = w.sign_changes.empty() ? w.a : w.sign_changes.front();
    int dir = +1;
    if (in.options.contains("point")) {
        const auto& p = in.options["point"];
        if (p.is_string()) {
            point = p.get<std::string>() == "b" ? w.b : w.a;
        } else {
            point = p.get<double>();
        }
    }
    if (in.options.contains("direction")) dir = in.options["direction"].get<int>();
    if (point == w.b && !in.options.contains("direction")) dir = -1;
    double x_max = dir > 0 ? w.b - point : point - w.a;
    for (double s : w.sign_changes) {
        double d = dir > 0 ? s - point : point - s;
        if (d > 0) x_max = std::min(x_max, d);
    }
    if (in.options.contains("window")) x_max = in.options["window"].get<double>();
    if (!(x_max > 0)) throw SchemaError("/options: empty scan window at the chosen point");
    auto rep = pi_test(integral_fn(w, point, dir), dyadic_below(x_max));
    Json j = to_json(rep);
    j["point"] = point;
    j["direction"] = dir;
    emit(opt, j);
    emit_csv(opt, "ratios.csv", csv_ratios(rep));
    return rep.verdict == PiVerdict::Inconclusive ? 3 : 0;
}

int run_criteria(const Options& opt) {
    auto in = load_problem(opt.input);
    const auto& w = in.spec.w;
    if (w.sign_changes.empty())
        throw SchemaError("/weight/sign_changes: criteria need at least one turning point");
    Json j;
    Json locals = Json::array();
    bool inconclusive = false;
    for (double x_k : w.sign_changes) {
        auto lv = decide_local(w, x_k);
        locals.push_back(to_json(lv));
        if (lv.outcome == Rbp::Inconclusive) inconclusive = true;
    }
    j["turning_points"] = locals;
    emit(opt, j);
    return inconclusive ? 3 : 0;
}

int run_canonicalize(const Options& opt) {
    auto in = load_problem(opt.input);
    auto cb = canonicalize(in.spec.bc);
    emit(opt, to_json(cb));
    return 0;
}

int run_spectrum(const Options& opt) {
    auto in = load_problem(opt.input);
    auto p = make_problem(in.spec.w, in.spec.q);
    auto box = default_search_box(p, in.spec.bc, opt.max_eigs, opt.tol);
    auto sp = eigenvalues(p, in.spec.bc, box, 1000, opt.tol);
    if ((int)sp.eigenvalues.size() > opt.max_eigs) sp.eigenvalues.resize(opt.max_eigs);
    emit(opt, to_json(sp));
    emit_csv(opt, "eigenvalues.csv", csv_eigenvalues(sp));
    return 0;
}

int run_gram(const Options& opt) {
    auto in = load_problem(opt.input);
    auto p = make_problem(in.spec.w, in.spec.q);
    auto g = gram_condition(p, in.spec.bc, opt.max_eigs, 1001, opt.tol);
    emit(opt, to_json(g));
    emit_csv(opt, "gram.csv", csv_gram(g));
    return 0;
}

int run_help_inequality(const Options& opt) {
    auto in = load_problem(opt.input);
    auto rep = help_verdict(in.spec.w, in.spec.q);
    Json j = to_json(rep);
    if (in.options.contains("galerkin_n")) {
        auto kn = best_constant_estimate(in.spec.w, in.spec.q,
                                         in.options["galerkin_n"].get<int>());
        j["best_constant"] = to_json(kn);
        emit_csv(opt, "best_constant.csv", csv_best_constant(kn));
    }
    emit(opt, j);
    return rep.validity == HelpValidity::Inconclusive ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Riesz basis property toolkit for indefinite Sturm-Liouville problems"};
    app.require_subcommand(1);

    Options opt;
    int (*action)(const Options&) = nullptr;
    auto add = [&](const std::string& name, const std::string& desc,
                   int (*fn)(const Options&)) {
        auto* sub = app.add_subcommand(name, desc);
        sub->add_option("--input", opt.input, "problem spec JSON")->required();
        sub->add_option("--out", opt.out, "output directory (default .)");
        sub->add_option("--tol", opt.tol, "ODE tolerance override")
            ->check(CLI::Range(1e-13, 1e-6));
        sub->add_option("--max-eigs", opt.max_eigs, "eigenvalue / Gram size cap")
            ->check(CLI::Range(1, 200));
        sub->add_option("--format", opt.format, "stdout format")
            ->check(CLI::IsMember({"json", "csv"}));
        sub->callback([&, fn] { action = fn; });
        return sub;
    };

    add("check-rbp", "decide the Riesz basis property", run_check_rbp);
    add("pi-test", "positively-increasing test of a one-sided integral", run_pi_test);
    add("criteria", "local turning-point criteria", run_criteria);
    add("canonicalize-bc", "canonical boundary-condition family", run_canonicalize);
    add("spectrum", "eigenvalues by complex shooting", run_spectrum);
    add("gram", "Gram condition numbers of root-function bases", run_gram);
    add("help-inequality", "validity of the HELP-type inequality", run_help_inequality);

    CLI11_PARSE(app, argc, argv);

    try {
        return action(opt);
    } catch (const rbp::SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const rbp::BcError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const rbp::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const rbp::WeightError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    }
}
