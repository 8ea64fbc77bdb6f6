// Command-line front end: fit, simulate, evaluate, validate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "shrinkage/shrinkage.hpp"

namespace fs = std::filesystem;
using namespace shrinkage;
using harness::ConfigError;
using harness::RunConfig;

namespace {

Json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// "1,2,3;7" -> [[1,2,3],[7]]; "random:3", "global" pass through.
Json groups_from_flag(const std::string& s)
{
    if (s == "global" || s.rfind("random:", 0) == 0) return s;
    Json groups = Json::array();
    for (const auto& g : split(s, ';')) {
        Json idx = Json::array();
        for (const auto& k : split(g, ',')) {
            try {
                idx.push_back(std::stoi(k));
            } catch (const std::exception&) {
                throw ConfigError("--groups", "bad covariate index '" + k + "'");
            }
        }
        groups.push_back(idx);
    }
    return groups;
}

/// Covariate count for data-based configs, needed for index validation.
std::optional<Index> data_p(const Json& cfg)
{
    if (!cfg.contains("data") || !cfg["data"].is_object()) return std::nullopt;
    const auto& d = cfg["data"];
    if (!d.contains("path") || !d.contains("schema") || !d.contains("response")) return std::nullopt;
    harness::DataConfig dc;
    dc.path = d["path"].get<std::string>();
    dc.schema = d["schema"].get<std::string>();
    dc.response = d["response"].get<std::string>();
    dc.noise_covariates = d.value("noise_covariates", 0);
    return harness::load_source(dc, 0).p();
}

struct FitOptions {
    std::string data, schema, response, family = "linear", method, groups, modes, prior = "glo", out;
    double hc_scale = 0.0;
    std::uint64_t seed = 0;
    int noise = 0;
    int chains = 4, iterations = 5000, burn_in = 2500, thin = 1;
    double level = 0.95;
};

int cmd_fit(const FitOptions& o, bool seed_given)
{
    if (!seed_given) throw ConfigError("--seed", "required (no nondeterministic default)");
    harness::DataConfig dc{o.data, o.schema, o.response, o.noise};
    const Dataset d = harness::load_source(dc, o.seed);
    const auto family = o.family == "logistic" ? harness::Family::logistic : harness::Family::linear;
    if (o.family != "linear" && o.family != "logistic") throw ConfigError("--family", "expected linear or logistic");

    Json mj;
    mj["method"] = o.method;
    if (!o.groups.empty()) mj["groups"] = groups_from_flag(o.groups);
    if (!o.modes.empty()) {
        Json modes = Json::array();
        for (const auto& s : split(o.modes, ',')) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            modes.push_back(end && *end == '\0' ? Json(v) : Json(s));
        }
        mj["modes"] = modes;
    }
    if (family == harness::Family::linear && o.method == "bayes") mj["prior"] = o.prior;
    if (o.hc_scale > 0.0) mj["hc_scale"] = o.hc_scale;
    const bool bayes = o.method == "bayes" || o.method == "bayes-glo" || o.method == "bayes-loc";
    if (bayes) mj["mcmc"] = {{"chains", o.chains}, {"iterations", o.iterations}, {"burn_in", o.burn_in}, {"thin", o.thin}};
    std::vector<std::string> notes;
    auto m = harness::parse_method(mj, family, "method", notes);
    harness::check_groups(m.groups, d.p(), "--groups");

    RunConfig rc;
    rc.family = family;
    rc.seed = o.seed;
    rc.level = o.level;
    rc.default_groups = {{1, 2, 3}};

    Json out;
    std::optional<PosteriorDraws> draws;
    if (family == harness::Family::linear) {
        if (o.method == "ols") out = to_json(fit_ols(d));
        else if (o.method == "step") out = to_json(fit_stepwise(d));
        else if (o.method == "lasso") out = to_json(fit_lasso_cv(d, LassoSpec{}, child_seed(o.seed, stream::method)));
        else if (o.method == "ridge") {
            RidgeSpec spec;
            spec.structure = harness::resolve_structure(m, rc, d, o.seed);
            FitResult fit;
            try {
                fit = fit_ridge_ml(d, spec);
            } catch (const ConvergenceError& e) {
                std::cerr << "warning: " << e.what() << "; reporting best-so-far\n";
                fit = e.best_so_far();
            }
            out = to_json(correct_for_penalty_uncertainty(fit, d, spec));
        } else {
            m.mcmc.seed = child_seed(o.seed, stream::method);
            draws = gibbs_linear(d, harness::build_prior(m, rc, d, o.seed), m.mcmc);
            out = to_json(posterior_summary_fit(*draws, m.tag));
        }
    } else {
        if (bayes) {
            m.mcmc.seed = child_seed(o.seed, stream::method);
            const auto prior = o.method == "bayes-glo" ? PriorSpec::global_hc(d.p(), m.hc_scale)
                                                       : PriorSpec::local_hc(d.p(), m.hc_scale);
            draws = fit_logistic_bayes(d, prior, m.mcmc);
            out = to_json(posterior_summary_fit(*draws, m.tag));
        } else if (o.method == "ml") out = to_json(fit_logistic_ml(d));
        else if (o.method == "firth") out = to_json(fit_logistic_firth(d));
        else if (o.method == "ridge05") out = to_json(fit_logistic_ridge(d, m.lambda));
        else out = to_json(fit_logistic_ridge_cv(d, m.folds, child_seed(o.seed, stream::method)));
    }
    for (const auto& n : notes) std::cerr << "note: " << n << "\n";

    if (o.out.empty()) {
        std::cout << out.dump(2) << "\n";
        if (draws) std::cout << draws_summary(*draws).dump(2) << "\n";
        return 0;
    }
    fs::create_directories(o.out);
    std::ofstream(fs::path(o.out) / "fit.json", std::ios::binary) << out.dump(2) << "\n";
    if (draws) {
        std::ofstream dcsv(fs::path(o.out) / "draws.csv", std::ios::binary);
        write_draws_csv(dcsv, *draws);
        std::ofstream(fs::path(o.out) / "summary.json", std::ios::binary) << draws_summary(*draws).dump(2) << "\n";
    }
    std::cerr << "wrote " << o.out << "\n";
    return 0;
}

struct SimulateOptions {
    std::string config, scenario, methods, out;
    int replicates = 0, parallelism = 0;
    std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateOptions& o, bool seed_given)
{
    Json cfg = o.config.empty() ? Json::object() : read_json_file(o.config);
    if (!o.scenario.empty()) cfg["scenario"] = o.scenario;
    if (!o.methods.empty()) {
        Json ms = Json::array();
        for (const auto& s : split(o.methods, ',')) ms.push_back(s);
        cfg["methods"] = ms;
    }
    if (o.replicates > 0) cfg["replicates"] = o.replicates;
    if (seed_given) cfg["seed"] = o.seed;
    if (o.parallelism > 0) cfg["parallelism"] = o.parallelism;
    if (!o.out.empty()) cfg["out"] = o.out;
    const RunConfig rc = harness::parse_config(cfg, data_p(cfg));
    if (rc.out.empty()) throw ConfigError("out", "output directory required (--out or config.out)");
    for (const auto& n : rc.notes) std::cerr << "note: " << n << "\n";
    const auto res = harness::run(rc);
    harness::write_outputs(rc.out, rc, res);
    std::cerr << "wrote " << rc.out << "/{records.csv,aggregates.json,manifest.json}\n";
    if (res.fatal_errors > 0) {
        std::cerr << res.fatal_errors << " job(s) failed; see manifest.json\n";
        return 2;
    }
    return 0;
}

int cmd_evaluate(const std::string& records, const std::string& out, const std::string& winsorize)
{
    std::ifstream in(records);
    if (!in) throw Error("cannot open " + records);
    auto recs = harness::read_records_csv(in);
    if (!winsorize.empty()) {
        const auto b = split(winsorize, ',');
        if (b.size() != 2) throw ConfigError("--winsorize", "expected lo,hi");
        const double lo = std::stod(b[0]), hi = std::stod(b[1]);
        for (auto& r : recs) {
            if (std::isfinite(r.cslope)) r.cslope = winsorize_cslope(r.cslope, lo, hi);
        }
    }
    const auto j = harness::aggregates_json(aggregate(recs)).dump(2);
    if (out.empty()) std::cout << j << "\n";
    else std::ofstream(out, std::ios::binary) << j << "\n";
    return 0;
}

int cmd_validate(const std::string& path)
{
    const Json cfg = read_json_file(path);
    const RunConfig rc = harness::parse_config(cfg, data_p(cfg));
    for (const auto& n : rc.notes) std::cout << "info: " << n << "\n";
    std::cout << "ok\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"shrinkage: regression shrinkage estimators and simulation harness"};
    app.require_subcommand(1);
    app.set_version_flag("--version", harness::version);

    FitOptions fo;
    auto* fit = app.add_subcommand("fit", "fit one estimator to a CSV dataset");
    fit->add_option("--data", fo.data, "CSV file")->required();
    fit->add_option("--schema", fo.schema, "sidecar JSON schema {column: {kind, baseline?}}")->required();
    fit->add_option("--response", fo.response, "response column")->required();
    fit->add_option("--family", fo.family, "linear | logistic");
    fit->add_option("--method", fo.method, "ols|step|lasso|ridge|bayes or ml|firth|ridgecv|ridge05|bayes-glo|bayes-loc")->required();
    fit->add_option("--groups", fo.groups, "e.g. \"1,2,3;7\" or random:3");
    fit->add_option("--modes", fo.modes, "per group: estimated|unpenalized|<lambda>, comma separated");
    fit->add_option("--prior", fo.prior, "eb|ig|glo|grouped|loc");
    fit->add_option("--hc-scale", fo.hc_scale, "half-Cauchy scale");
    auto* fit_seed = fit->add_option("--seed", fo.seed, "64-bit seed");
    fit->add_option("--noise", fo.noise, "append this many N(0,1) noise covariates");
    fit->add_option("--chains", fo.chains);
    fit->add_option("--iterations", fo.iterations);
    fit->add_option("--burn-in", fo.burn_in);
    fit->add_option("--thin", fo.thin);
    fit->add_option("--out", fo.out, "output directory (default: JSON to stdout)");

    SimulateOptions so;
    auto* sim = app.add_subcommand("simulate", "run a replicate x method simulation");
    sim->add_option("--config", so.config, "JSON run config");
    sim->add_option("--scenario", so.scenario);
    sim->add_option("--methods", so.methods, "comma-separated method shorthands");
    sim->add_option("--replicates", so.replicates);
    auto* sim_seed = sim->add_option("--seed", so.seed, "64-bit seed");
    sim->add_option("--parallelism", so.parallelism);
    sim->add_option("--out", so.out, "output directory");

    std::string records, eval_out, winsor;
    auto* ev = app.add_subcommand("evaluate", "aggregate a records.csv");
    ev->add_option("--records", records)->required();
    ev->add_option("--out", eval_out, "aggregates JSON file (default: stdout)");
    ev->add_option("--winsorize", winsor, "lo,hi bounds applied to cslope first");

    std::string vpath;
    auto* val = app.add_subcommand("validate", "check a run config without running it");
    val->add_option("--config", vpath)->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*fit) return cmd_fit(fo, fit_seed->count() > 0);
        if (*sim) return cmd_simulate(so, sim_seed->count() > 0);
        if (*ev) return cmd_evaluate(records, eval_out, winsor);
        if (*val) return cmd_validate(vpath);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
