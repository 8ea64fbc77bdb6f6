#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "bayes.hpp"
#include "coding.hpp"
#include "core.hpp"
#include "eval.hpp"
#include "lasso.hpp"
#include "logistic.hpp"
#include "ols.hpp"
#include "ridge.hpp"
#include "serialize.hpp"
#include "simgen.hpp"

namespace shrinkage::harness {

inline constexpr const char* version = "0.3.1";

enum class Family { linear, logistic };

/// Config error carrying the JSON path of the offending field.
class ConfigError : public Error {
public:
    ConfigError(const std::string& path, const std::string& msg) : Error(path + ": " + msg), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// Covariate grouping as written in a config.
struct GroupSpec {
    enum class Kind { global, explicit_groups, random, scenario_default, scenario_three } kind = Kind::global;
    std::vector<std::vector<int>> listed;  // 1-based covariate indices; unlisted covariates form a trailing group
    int random_size = 0;
};

struct MethodConfig {
    std::string tag;
    std::string method;
    GroupSpec groups;
    std::vector<GroupMode> modes;  // per group; empty means all estimated
    bool corrected = true;
    MarginalLikelihood criterion = MarginalLikelihood::reml;
    std::string prior = "glo";  // eb | ig | glo | grouped | loc
    double hc_scale = 1.0;
    Sigma2Prior sigma2 = Sigma2Prior::jeffreys();
    McmcConfig mcmc;
    int folds = 10;
    double lambda = 2.0;  // ridge05
    bool is_bayes() const { return method == "bayes" || method == "bayes-glo" || method == "bayes-loc"; }
};

struct DataConfig {
    std::string path;
    std::string schema;
    std::string response;
    int noise_covariates = 0;
    Index subset_size = 50;
    bool disjoint = false;
    std::string diy_method = "ols";
};

struct RunConfig {
    std::string scenario;
    Family family = Family::linear;
    int replicates = 1;
    std::uint64_t seed = 0;
    int parallelism = 1;
    std::string out;
    double level = 0.95;
    bool calibration_slope = false;
    std::optional<Index> n_train, n_test;
    double correlation = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<int>> default_groups;  // ridge_2 / bay_2 groups when not given per method
    DataConfig data;
    std::vector<MethodConfig> methods;
    Json echo;
    std::vector<std::string> notes;
};

// ------------------------------------------------------------ parsing

namespace detail {

inline const std::set<std::string>& linear_scenarios()
{
    static const std::set<std::string> s{"intro", "intro-equal", "subsets", "diy"};
    return s;
}

inline const std::set<std::string>& logistic_scenarios()
{
    static const std::set<std::string> s{"logistic-weak", "logistic-moderate", "logistic-strong", "logistic-n100",
                                         "logistic-zeros"};
    return s;
}

template <class T>
T get_field(const Json& j, const std::string& path)
{
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(path, "wrong type (" + std::string(j.type_name()) + ")");
    }
}

inline GroupMode parse_mode(const Json& j, const std::string& path)
{
    if (j.is_number()) {
        const double v = j.get<double>();
        if (!(v >= 0.0)) throw ConfigError(path, "fixed penalty must be >= 0");
        return GroupMode::fixed(v);
    }
    const auto s = get_field<std::string>(j, path);
    if (s == "estimated") return GroupMode::estimated();
    if (s == "unpenalized") return GroupMode::unpenalized();
    throw ConfigError(path, "expected \"estimated\", \"unpenalized\" or a number, got \"" + s + "\"");
}

inline GroupSpec parse_groups(const Json& j, const std::string& path)
{
    GroupSpec g;
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "global") return g;
        if (s == "default") {
            g.kind = GroupSpec::Kind::scenario_default;
            return g;
        }
        if (s.rfind("random:", 0) == 0) {
            g.kind = GroupSpec::Kind::random;
            try {
                g.random_size = std::stoi(s.substr(7));
            } catch (const std::exception&) {
                throw ConfigError(path, "bad random group size in \"" + s + "\"");
            }
            if (g.random_size < 1) throw ConfigError(path, "random group size must be >= 1");
            return g;
        }
        throw ConfigError(path, "expected \"global\", \"default\", \"random:K\" or an array of index arrays");
    }
    if (!j.is_array()) throw ConfigError(path, "expected an array of index arrays");
    g.kind = GroupSpec::Kind::explicit_groups;
    for (std::size_t a = 0; a < j.size(); ++a) {
        const auto ap = path + "[" + std::to_string(a) + "]";
        if (!j[a].is_array() || j[a].empty()) throw ConfigError(ap, "each group must be a non-empty array of covariate indices");
        std::vector<int> grp;
        for (std::size_t b = 0; b < j[a].size(); ++b) {
            const auto bp = ap + "[" + std::to_string(b) + "]";
            const int idx = get_field<int>(j[a][b], bp);
            if (idx < 1) throw ConfigError(bp, "covariate index " + std::to_string(idx) + " < 1");
            grp.push_back(idx);
        }
        g.listed.push_back(std::move(grp));
    }
    if (g.listed.empty()) throw ConfigError(path, "empty group list");
    return g;
}

inline McmcConfig parse_mcmc(const Json& j, const std::string& path)
{
    McmcConfig c;
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    for (const auto& [k, v] : j.items()) {
        const auto p = path + "." + k;
        if (k == "chains") c.chains = get_field<int>(v, p);
        else if (k == "iterations") c.iterations = get_field<int>(v, p);
        else if (k == "burn_in") c.burn_in = get_field<int>(v, p);
        else if (k == "thin") c.thin = get_field<int>(v, p);
        else throw ConfigError(p, "unknown field");
    }
    try {
        c.validate();
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
    return c;
}

inline const std::set<std::string>& known_methods(Family f)
{
    static const std::set<std::string> lin{"ols", "step", "lasso", "ridge", "bayes"};
    static const std::set<std::string> logi{"ml", "firth", "ridgecv", "ridge05", "bayes-glo", "bayes-loc"};
    return f == Family::linear ? lin : logi;
}

}  // namespace detail

/**
 * Method shorthands usable in place of a method object: ols, step, lasso,
 * ridge, ridge_2, ridge_2un, ridge_2r, ridge_2unr, ridge_3, bayes-eb,
 * bayes-ig, bayes-glo, bayes-2, bayes-3, bayes-loc (linear) and ml, firth,
 * ridgecv, ridge05, bayes-glo, bayes-loc (logistic; aliases bay_glo05,
 * bay_loc05).
 */
inline Json expand_method_shorthand(const std::string& name, Family family, const std::string& path)
{
    Json m;
    m["tag"] = name;
    if (family == Family::logistic) {
        std::string meth = name;
        if (name == "bay_glo05" || name == "bayes-glo05") meth = "bayes-glo";
        if (name == "bay_loc05" || name == "bayes-loc05") meth = "bayes-loc";
        if (!detail::known_methods(family).count(meth)) throw ConfigError(path, "unknown logistic method \"" + name + "\"");
        m["method"] = meth;
        return m;
    }
    static const std::map<std::string, std::function<void(Json&)>> table{
        {"ols", [](Json& j) { j["method"] = "ols"; }},
        {"step", [](Json& j) { j["method"] = "step"; }},
        {"lasso", [](Json& j) { j["method"] = "lasso"; }},
        {"ridge", [](Json& j) { j["method"] = "ridge"; }},
        {"ridge_2", [](Json& j) { j["method"] = "ridge"; j["groups"] = "default"; }},
        {"ridge_2un",
         [](Json& j) {
             j["method"] = "ridge";
             j["groups"] = "default";
             j["modes"] = Json::array({"unpenalized", "estimated"});
         }},
        {"ridge_2r", [](Json& j) { j["method"] = "ridge"; j["groups"] = "random:3"; }},
        {"ridge_2unr",
         [](Json& j) {
             j["method"] = "ridge";
             j["groups"] = "random:3";
             j["modes"] = Json::array({"unpenalized", "estimated"});
         }},
        {"ridge_3", [](Json& j) { j["method"] = "ridge"; j["groups"] = "three"; }},
        {"bayes-eb", [](Json& j) { j["method"] = "bayes"; j["prior"] = "eb"; }},
        {"bayes-ig", [](Json& j) { j["method"] = "bayes"; j["prior"] = "ig"; }},
        {"bayes-glo", [](Json& j) { j["method"] = "bayes"; j["prior"] = "glo"; }},
        {"bayes-2", [](Json& j) { j["method"] = "bayes"; j["prior"] = "grouped"; j["groups"] = "default"; }},
        {"bayes-3", [](Json& j) { j["method"] = "bayes"; j["prior"] = "grouped"; j["groups"] = "three"; }},
        {"bayes-loc", [](Json& j) { j["method"] = "bayes"; j["prior"] = "loc"; }},
    };
    auto it = table.find(name);
    if (it == table.end()) throw ConfigError(path, "unknown linear method \"" + name + "\"");
    it->second(m);
    return m;
}

inline MethodConfig parse_method(const Json& j, Family family, const std::string& path, std::vector<std::string>& notes)
{
    if (j.is_string()) return parse_method(expand_method_shorthand(j.get<std::string>(), family, path), family, path, notes);
    if (!j.is_object()) throw ConfigError(path, "expected a method name or object");
    if (!j.contains("method")) throw ConfigError(path + ".method", "required");
    MethodConfig m;
    m.method = detail::get_field<std::string>(j["method"], path + ".method");
    if (!detail::known_methods(family).count(m.method)) {
        throw ConfigError(path + ".method", "unknown method \"" + m.method + "\" for this family");
    }
    if (family == Family::logistic && m.is_bayes()) m.hc_scale = std::sqrt(0.5);
    bool have_mcmc = false;
    for (const auto& [k, v] : j.items()) {
        const auto p = path + "." + k;
        if (k == "method") continue;
        if (k == "tag") m.tag = detail::get_field<std::string>(v, p);
        else if (k == "groups") {
            if (v.is_string() && v.get<std::string>() == "three") m.groups.kind = GroupSpec::Kind::scenario_three;
            else m.groups = detail::parse_groups(v, p);
        } else if (k == "modes") {
            if (!v.is_array()) throw ConfigError(p, "expected an array");
            for (std::size_t i = 0; i < v.size(); ++i) m.modes.push_back(detail::parse_mode(v[i], p + "[" + std::to_string(i) + "]"));
        } else if (k == "intervals") {
            const auto s = detail::get_field<std::string>(v, p);
            if (s == "corrected") m.corrected = true;
            else if (s == "conditional") m.corrected = false;
            else throw ConfigError(p, "expected \"corrected\" or \"conditional\"");
        } else if (k == "criterion") {
            const auto s = detail::get_field<std::string>(v, p);
            if (s == "reml") m.criterion = MarginalLikelihood::reml;
            else if (s == "ml") m.criterion = MarginalLikelihood::ml;
            else throw ConfigError(p, "expected \"reml\" or \"ml\"");
        } else if (k == "prior") {
            m.prior = detail::get_field<std::string>(v, p);
            static const std::set<std::string> ok{"eb", "ig", "glo", "grouped", "loc"};
            if (!ok.count(m.prior)) throw ConfigError(p, "expected one of eb, ig, glo, grouped, loc");
        } else if (k == "hc_scale") {
            m.hc_scale = detail::get_field<double>(v, p);
            if (!(m.hc_scale > 0.0)) throw ConfigError(p, "half-Cauchy scale must be > 0");
        } else if (k == "sigma2_prior") {
            const auto s = detail::get_field<std::string>(v, p);
            if (s == "jeffreys") m.sigma2 = Sigma2Prior::jeffreys();
            else if (s == "ig") m.sigma2 = Sigma2Prior::inverse_gamma(0.001, 0.001);
            else throw ConfigError(p, "expected \"jeffreys\" or \"ig\"");
        } else if (k == "mcmc") {
            m.mcmc = detail::parse_mcmc(v, p);
            have_mcmc = true;
        } else if (k == "folds") {
            m.folds = detail::get_field<int>(v, p);
            if (m.folds < 2) throw ConfigError(p, "folds must be >= 2");
        } else if (k == "lambda") {
            m.lambda = detail::get_field<double>(v, p);
            if (!(m.lambda >= 0.0)) throw ConfigError(p, "lambda must be >= 0");
        } else {
            throw ConfigError(p, "unknown field");
        }
    }
    if (m.tag.empty()) m.tag = m.method == "bayes" ? "bayes-" + m.prior : m.method;
    const bool uses_mcmc = m.is_bayes();
    if (uses_mcmc && !have_mcmc) {
        notes.push_back(path + ": no mcmc block, using defaults (chains 4, iterations 5000, burn_in 2500, thin 1)");
    }
    if (m.method == "bayes" && m.prior == "grouped" && m.groups.kind == GroupSpec::Kind::global) {
        throw ConfigError(path + ".groups", "grouped prior requires a group specification");
    }
    if (m.method == "bayes" && m.prior != "grouped" && m.groups.kind != GroupSpec::Kind::global) {
        throw ConfigError(path + ".groups", "groups are only used with prior \"grouped\"");
    }
    if (m.method != "ridge" && m.method != "bayes" && (m.groups.kind != GroupSpec::Kind::global || !m.modes.empty())) {
        throw ConfigError(path, "groups/modes only apply to ridge and bayes");
    }
    return m;
}

/// Covariate count implied by a scenario (data-based scenarios need the data).
inline std::optional<Index> scenario_p(const std::string& scenario)
{
    if (scenario == "intro" || scenario == "intro-equal") return 7;
    if (scenario == "logistic-zeros") return 10;
    if (detail::logistic_scenarios().count(scenario)) return 5;
    return std::nullopt;
}

/// Coded dataset of a data-based scenario (complete cases, schema coding, optional noise columns).
inline Dataset load_source(const DataConfig& dc, std::uint64_t seed)
{
    std::ifstream sf(dc.schema);
    if (!sf) throw Error("cannot open schema " + dc.schema);
    Json schema;
    try {
        schema = Json::parse(sf);
    } catch (const nlohmann::json::exception& e) {
        throw Error("schema " + dc.schema + ": " + e.what());
    }
    const auto policy = policy_from_schema(schema, dc.response);
    std::vector<std::string> used{dc.response};
    for (const auto& c : policy.covariates) used.push_back(c.first);
    const auto raw = complete_cases(read_csv(dc.path), used);
    if (raw.rows() == 0) throw DataError("no complete rows in " + dc.path);
    auto d = code_dataset(raw, policy);
    return add_noise_covariates(d, dc.noise_covariates, seed);
}

inline void check_groups(const GroupSpec& g, Index p, const std::string& path)
{
    if (g.kind == GroupSpec::Kind::random && g.random_size >= p) {
        throw ConfigError(path, "random group size " + std::to_string(g.random_size) + " must be < p = " + std::to_string(p));
    }
    if (g.kind != GroupSpec::Kind::explicit_groups) return;
    std::set<int> seen;
    for (std::size_t a = 0; a < g.listed.size(); ++a) {
        for (std::size_t b = 0; b < g.listed[a].size(); ++b) {
            const int idx = g.listed[a][b];
            const auto bp = path + "[" + std::to_string(a) + "][" + std::to_string(b) + "]";
            if (idx > p) throw ConfigError(bp, "covariate index " + std::to_string(idx) + " > p = " + std::to_string(p));
            if (!seen.insert(idx).second) throw ConfigError(bp, "covariate index " + std::to_string(idx) + " listed twice");
        }
    }
}

/**
 * Parses and validates a run config. `p_hint` gives the covariate count for
 * data-based scenarios (nullopt skips the index checks that need it).
 */
inline RunConfig parse_config(const Json& j, std::optional<Index> p_hint = std::nullopt)
{
    if (!j.is_object()) throw ConfigError("$", "config must be a JSON object");
    RunConfig c;
    c.echo = j;
    if (!j.contains("scenario")) throw ConfigError("scenario", "required");
    c.scenario = detail::get_field<std::string>(j["scenario"], "scenario");
    if (detail::linear_scenarios().count(c.scenario)) c.family = Family::linear;
    else if (detail::logistic_scenarios().count(c.scenario)) c.family = Family::logistic;
    else throw ConfigError("scenario", "unknown scenario \"" + c.scenario + "\"");
    if (!j.contains("seed")) throw ConfigError("seed", "required (no nondeterministic default)");
    c.seed = detail::get_field<std::uint64_t>(j["seed"], "seed");

    std::optional<Json> methods;
    for (const auto& [k, v] : j.items()) {
        if (k == "scenario" || k == "seed") continue;
        if (k == "replicates") {
            c.replicates = detail::get_field<int>(v, k);
            if (c.replicates < 1) throw ConfigError(k, "must be >= 1");
        } else if (k == "parallelism") {
            c.parallelism = detail::get_field<int>(v, k);
            if (c.parallelism < 1) throw ConfigError(k, "must be >= 1");
        } else if (k == "out") {
            c.out = detail::get_field<std::string>(v, k);
        } else if (k == "level") {
            c.level = detail::get_field<double>(v, k);
            if (!(c.level > 0.0 && c.level < 1.0)) throw ConfigError(k, "must lie in (0,1)");
        } else if (k == "calibration_slope") {
            c.calibration_slope = detail::get_field<bool>(v, k);
        } else if (k == "n_train") {
            c.n_train = detail::get_field<Index>(v, k);
            if (*c.n_train < 2) throw ConfigError(k, "must be >= 2");
        } else if (k == "n_test") {
            c.n_test = detail::get_field<Index>(v, k);
            if (*c.n_test < 3) throw ConfigError(k, "must be >= 3");
        } else if (k == "correlation") {
            c.correlation = detail::get_field<double>(v, k);
            if (!(c.correlation >= 0.0 && c.correlation < 1.0)) throw ConfigError(k, "must lie in [0,1)");
        } else if (k == "groups") {
            auto g = detail::parse_groups(v, k);
            if (g.kind != GroupSpec::Kind::explicit_groups) throw ConfigError(k, "scenario default groups must be explicit");
            c.default_groups = g.listed;
        } else if (k == "data") {
            if (!v.is_object()) throw ConfigError(k, "expected an object");
            for (const auto& [dk, dv] : v.items()) {
                const auto p = "data." + dk;
                if (dk == "path") c.data.path = detail::get_field<std::string>(dv, p);
                else if (dk == "schema") c.data.schema = detail::get_field<std::string>(dv, p);
                else if (dk == "response") c.data.response = detail::get_field<std::string>(dv, p);
                else if (dk == "noise_covariates") {
                    c.data.noise_covariates = detail::get_field<int>(dv, p);
                    if (c.data.noise_covariates < 0) throw ConfigError(p, "must be >= 0");
                } else if (dk == "subset_size") {
                    c.data.subset_size = detail::get_field<Index>(dv, p);
                    if (c.data.subset_size < 2) throw ConfigError(p, "must be >= 2");
                } else if (dk == "disjoint") c.data.disjoint = detail::get_field<bool>(dv, p);
                else if (dk == "diy_method") {
                    c.data.diy_method = detail::get_field<std::string>(dv, p);
                    if (c.data.diy_method != "ols" && c.data.diy_method != "bayes-loc") {
                        throw ConfigError(p, "expected \"ols\" or \"bayes-loc\"");
                    }
                } else throw ConfigError(p, "unknown field");
            }
        } else if (k == "methods") {
            methods = v;
        } else {
            throw ConfigError(k, "unknown field");
        }
    }
    if (!methods || !methods->is_array() || methods->empty()) throw ConfigError("methods", "non-empty array required");
    std::set<std::string> tags;
    for (std::size_t i = 0; i < methods->size(); ++i) {
        const auto path = "methods[" + std::to_string(i) + "]";
        auto m = parse_method((*methods)[i], c.family, path, c.notes);
        if (!tags.insert(m.tag).second) throw ConfigError(path + ".tag", "duplicate method tag \"" + m.tag + "\"");
        c.methods.push_back(std::move(m));
    }

    const bool data_based = c.scenario == "subsets" || c.scenario == "diy";
    if (data_based) {
        if (c.data.path.empty()) throw ConfigError("data.path", "required for scenario " + c.scenario);
        if (c.data.schema.empty()) throw ConfigError("data.schema", "required for scenario " + c.scenario);
        if (c.data.response.empty()) throw ConfigError("data.response", "required for scenario " + c.scenario);
    }
    if (c.scenario == "intro" || c.scenario == "intro-equal") {
        if (c.default_groups.empty()) c.default_groups = {{1, 2, 3, 4, 5, 6}, {7}};
    } else if (data_based && c.default_groups.empty()) {
        c.default_groups = {{1, 2, 3}};
    }

    const std::optional<Index> p = data_based ? p_hint : scenario_p(c.scenario);
    if (p) {
        GroupSpec def;
        def.kind = GroupSpec::Kind::explicit_groups;
        def.listed = c.default_groups;
        if (!c.default_groups.empty()) check_groups(def, *p, "groups");
        for (std::size_t i = 0; i < c.methods.size(); ++i) {
            check_groups(c.methods[i].groups, *p, "methods[" + std::to_string(i) + "].groups");
        }
    }
    for (std::size_t i = 0; i < c.methods.size(); ++i) {
        const auto& m = c.methods[i];
        if (m.groups.kind == GroupSpec::Kind::scenario_three && !data_based) {
            throw ConfigError("methods[" + std::to_string(i) + "].groups", "three-group structure needs a data-based scenario");
        }
    }
    return c;
}

// -------------------------------------------------------- structures

/// Penalty structure of a method for one replicate (random groups are re-drawn per replicate).
inline PenaltyStructure resolve_structure(const MethodConfig& m, const RunConfig& cfg, const Dataset& train,
                                          std::uint64_t seed)
{
    const Index p = train.p();
    std::vector<int> labels(static_cast<std::size_t>(p), 0);
    int G = 1;
    auto from_listed = [&](const std::vector<std::vector<int>>& listed) {
        std::fill(labels.begin(), labels.end(), 0);
        for (std::size_t g = 0; g < listed.size(); ++g) {
            for (int idx : listed[g]) {
                if (idx > p) throw ConfigError("groups", "covariate index " + std::to_string(idx) + " > p = " + std::to_string(p));
                labels[static_cast<std::size_t>(idx - 1)] = static_cast<int>(g) + 1;
            }
        }
        G = static_cast<int>(listed.size());
        bool rest = false;
        for (auto& l : labels) {
            if (l == 0) {
                l = G + 1;
                rest = true;
            }
        }
        if (rest) ++G;
    };
    switch (m.groups.kind) {
        case GroupSpec::Kind::global: std::fill(labels.begin(), labels.end(), 1); break;
        case GroupSpec::Kind::explicit_groups: from_listed(m.groups.listed); break;
        case GroupSpec::Kind::scenario_default: from_listed(cfg.default_groups); break;
        case GroupSpec::Kind::scenario_three: {
            // default first group, dummy columns of the nominal covariate, the rest
            auto listed = cfg.default_groups;
            std::vector<int> dummies;
            for (Index k = 0; k < p; ++k) {
                if (train.columns()[static_cast<std::size_t>(k)].kind == ColumnKind::dummy) dummies.push_back(static_cast<int>(k + 1));
            }
            if (dummies.empty()) throw Error("three-group structure needs nominal (dummy) columns");
            listed.push_back(dummies);
            from_listed(listed);
            break;
        }
        case GroupSpec::Kind::random: {
            Rng rng(child_seed(seed, stream::groups));
            const auto perm = rng.permutation(static_cast<std::size_t>(p));
            std::fill(labels.begin(), labels.end(), 2);
            for (int i = 0; i < m.groups.random_size; ++i) labels[perm[static_cast<std::size_t>(i)]] = 1;
            G = 2;
            break;
        }
    }
    std::vector<GroupMode> modes = m.modes;
    if (modes.empty()) modes.assign(static_cast<std::size_t>(G), GroupMode::estimated());
    if (static_cast<int>(modes.size()) != G) {
        throw ConfigError("modes", std::to_string(modes.size()) + " modes given for " + std::to_string(G) + " groups");
    }
    return PenaltyStructure::from_labels(labels, modes);
}

inline PriorSpec build_prior(const MethodConfig& m, const RunConfig& cfg, const Dataset& train, std::uint64_t seed)
{
    const Index p = train.p();
    PriorSpec prior;
    if (m.prior == "eb") prior = PriorSpec::empirical_bayes(p, estimate_lambda_eb(train, m.criterion));
    else if (m.prior == "ig") prior = PriorSpec::global_ig(p);
    else if (m.prior == "glo") prior = PriorSpec::global_hc(p, m.hc_scale);
    else if (m.prior == "loc") prior = PriorSpec::local_hc(p, m.hc_scale);
    else {
        const auto s = resolve_structure(m, cfg, train, seed);
        prior = PriorSpec::grouped_hc(s, m.hc_scale);
        for (int g = 0; g < s.groups(); ++g) {
            const auto& mode = s.mode(g);
            if (mode.kind == GroupMode::Kind::unpenalized) prior.group_priors[static_cast<std::size_t>(g)] = VariancePrior::fixed(0.0);
            if (mode.kind == GroupMode::Kind::fixed) prior.group_priors[static_cast<std::size_t>(g)] = VariancePrior::fixed(mode.value);
        }
    }
    prior.sigma2 = m.sigma2;
    return prior;
}

// --------------------------------------------------------- execution

/// One replicate's data plus its truth.
struct ReplicateData {
    Dataset train;
    MatrixXd X_test;
    VectorXd y_test;
    VectorXd eta_true;
    VectorXd p_true;  // logistic only
};

/// Shared, immutable state of a run (scenario objects, data source, splits).
class Scenario {
public:
    explicit Scenario(const RunConfig& cfg) : cfg_(cfg)
    {
        if (cfg.scenario == "intro" || cfg.scenario == "intro-equal") {
            linear_ = cfg.scenario == "intro" ? LinearScenario::intro() : LinearScenario::intro_equal();
            if (cfg.n_train) linear_.n_train = *cfg.n_train;
            if (cfg.n_test) linear_.n_test = *cfg.n_test;
            if (!std::isnan(cfg.correlation)) linear_.correlation = cfg.correlation;
        } else if (cfg.family == Family::logistic) {
            const auto& s = cfg.scenario;
            const Signal sig = s == "logistic-weak" ? Signal::weak : s == "logistic-strong" ? Signal::strong : Signal::moderate;
            logistic_ = LogisticScenario::make(sig, s == "logistic-n100" ? 100 : 50, s == "logistic-zeros" ? 5 : 0);
            if (cfg.n_train) logistic_.n = *cfg.n_train;
            if (cfg.n_test) logistic_.n_test = *cfg.n_test;
            if (!std::isnan(cfg.correlation)) logistic_.correlation = cfg.correlation;
            logistic_.intercept = solve_intercept(logistic_.beta, logistic_.correlation, logistic_.target_rate);
        } else {
            source_ = std::make_shared<const Dataset>(load_source(cfg.data, cfg.seed));
            SubsetPlan plan{source_, cfg.data.subset_size, cfg.replicates, child_seed(cfg.seed, stream::subsets),
                            cfg.data.disjoint};
            splits_ = split_subsets(plan);
            if (cfg.scenario == "subsets") {
                const auto bench = fit_ols(*source_);
                eta_full_ = linear_predictor(bench, source_->X());
            } else {
                const auto method = cfg.data.diy_method == "ols" ? DiyMethod::ols : DiyMethod::bayes_loc;
                diy_ = std::make_shared<const DiyScenario>(
                    diy_scenario(*source_, method, cfg.replicates, child_seed(cfg.seed, stream::data)));
                eta_full_ = diy_->eta_true();
            }
        }
    }

    Index p() const
    {
        if (source_) return source_->p();
        return cfg_.family == Family::logistic ? logistic_.p() : linear_.p();
    }

    ReplicateData replicate(int r, std::uint64_t seed) const
    {
        if (cfg_.scenario == "intro" || cfg_.scenario == "intro-equal") {
            auto rep = simulate_linear(linear_, seed);
            return {rep.train, rep.test.X(), rep.test.y(), rep.eta_true_test, {}};
        }
        if (cfg_.family == Family::logistic) {
            auto rep = simulate_logistic(logistic_, seed);
            return {rep.train, rep.test.X(), rep.test.y(), rep.eta_true_test, rep.p_true_test};
        }
        const auto& split = splits_[static_cast<std::size_t>(r)];
        const Dataset full = diy_ ? diy_->replicate(r) : *source_;
        const auto test = split.test(static_cast<std::size_t>(full.n()));
        const Dataset te = full.rows(test);
        VectorXd eta(static_cast<Index>(test.size()));
        for (std::size_t i = 0; i < test.size(); ++i) eta(static_cast<Index>(i)) = eta_full_(static_cast<Index>(test[i]));
        return {full.rows(split.train), te.X(), te.y(), eta, {}};
    }

private:
    const RunConfig& cfg_;
    LinearScenario linear_;
    LogisticScenario logistic_;
    std::shared_ptr<const Dataset> source_;
    std::shared_ptr<const DiyScenario> diy_;
    std::vector<SubsetSplit> splits_;
    VectorXd eta_full_;
};

struct JobResult {
    Record record;
    double calslope = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> messages;
    bool fatal = false;
};

namespace detail {

/// Classical logistic calibration slope: logistic regression of y on eta_hat.
inline double logistic_calibration_slope(const VectorXd& y, const VectorXd& eta_hat)
{
    MatrixXd X(eta_hat.size(), 1);
    X.col(0) = eta_hat;
    const auto fit = fit_logistic_ml(Dataset(y, X));
    return fit.converged ? fit.beta(0) : std::numeric_limits<double>::quiet_NaN();
}

inline void set_linear_metrics(JobResult& out, const ReplicateData& rd, const PredictionSet& ps, bool with_intervals,
                               bool calslope)
{
    out.record.msep = msep(rd.eta_true, ps.eta_hat);
    out.record.cslope = cslope(rd.eta_true, ps.eta_hat);
    if (with_intervals) {
        const auto cv = coverage(ps, rd.eta_true);
        out.record.coverage = cv.coverage;
        out.record.mean_width = cv.mean_width;
    }
    if (calslope) out.calslope = calibration_slope(rd.y_test, ps.eta_hat);
}

inline void run_linear(JobResult& out, const MethodConfig& m, const RunConfig& cfg, const ReplicateData& rd,
                       std::uint64_t seed)
{
    const auto& tr = rd.train;
    if (m.method == "ols") {
        const auto fit = fit_ols(tr);
        set_linear_metrics(out, rd, predict_with_intervals(fit, rd.X_test, cfg.level, false), true, cfg.calibration_slope);
    } else if (m.method == "step") {
        const auto fit = fit_stepwise(tr);
        set_linear_metrics(out, rd, predict_with_intervals(fit, rd.X_test, cfg.level, false), true, cfg.calibration_slope);
    } else if (m.method == "lasso") {
        LassoSpec spec;
        spec.folds = m.folds;
        const auto fit = fit_lasso_cv(tr, spec, seed);
        PredictionSet ps;
        ps.eta_hat = linear_predictor(fit, rd.X_test);
        set_linear_metrics(out, rd, ps, false, cfg.calibration_slope);
    } else if (m.method == "ridge") {
        RidgeSpec spec;
        spec.structure = resolve_structure(m, cfg, tr, seed);
        spec.criterion = m.criterion;
        FitResult fit;
        try {
            fit = fit_ridge_ml(tr, spec);
        } catch (const ConvergenceError& e) {
            fit = e.best_so_far();
            out.record.status = "nonconverged";
            out.messages.push_back(e.what());
        }
        if (m.corrected) fit = correct_for_penalty_uncertainty(fit, tr, spec);
        for (const auto& w : fit.warnings) out.messages.push_back(w);
        set_linear_metrics(out, rd, predict_with_intervals(fit, rd.X_test, cfg.level, m.corrected), true,
                           cfg.calibration_slope);
    } else {
        McmcConfig mc = m.mcmc;
        mc.seed = seed;
        const auto draws = gibbs_linear(tr, build_prior(m, cfg, tr, seed), mc);
        for (const auto& w : draws.warnings) out.messages.push_back(w);
        set_linear_metrics(out, rd, posterior_predict(draws, rd.X_test, cfg.level), true, cfg.calibration_slope);
    }
}

inline void run_logistic(JobResult& out, const MethodConfig& m, const RunConfig& cfg, const ReplicateData& rd,
                         std::uint64_t seed)
{
    const auto& tr = rd.train;
    VectorXd eta_hat, prob;
    std::optional<PredictionSet> ps;
    if (m.is_bayes()) {
        const auto prior = m.method == "bayes-glo" ? PriorSpec::global_hc(tr.p(), m.hc_scale)
                                                   : PriorSpec::local_hc(tr.p(), m.hc_scale);
        McmcConfig mc = m.mcmc;
        mc.seed = seed;
        const auto draws = fit_logistic_bayes(tr, prior, mc);
        for (const auto& w : draws.warnings) out.messages.push_back(w);
        ps = posterior_predict(draws, rd.X_test, cfg.level);
        eta_hat = ps->eta_hat;
        prob = predict_prob(draws, rd.X_test);
    } else {
        LogisticFit fit;
        if (m.method == "ml") fit = fit_logistic_ml(tr);
        else if (m.method == "firth") fit = fit_logistic_firth(tr);
        else if (m.method == "ridge05") fit = fit_logistic_ridge(tr, m.lambda);
        else fit = fit_logistic_ridge_cv(tr, m.folds, seed);
        if (!fit.converged) out.record.status = "nonconverged";
        for (const auto& w : fit.warnings) out.messages.push_back(w);
        eta_hat = linear_predictor(fit.intercept, fit.beta, rd.X_test);
        prob = predict_prob(fit, rd.X_test);
    }
    out.record.msep = msep(rd.p_true, prob);
    out.record.cslope = cslope(rd.eta_true, eta_hat);
    if (ps) {
        const auto cv = coverage(*ps, rd.eta_true);
        out.record.coverage = cv.coverage;
        out.record.mean_width = cv.mean_width;
    }
    if (cfg.calibration_slope) out.calslope = logistic_calibration_slope(rd.y_test, eta_hat);
}

}  // namespace detail

inline std::uint64_t replicate_seed(std::uint64_t run_seed, int r) { return child_seed(run_seed, static_cast<std::uint64_t>(r)); }

inline std::uint64_t method_seed(std::uint64_t rep_seed, std::size_t method_index)
{
    return child_seed(child_seed(rep_seed, stream::method), method_index);
}

struct RunResult {
    std::vector<JobResult> jobs;  // replicate-major, method order within
    std::vector<MethodAggregate> aggregates;
    int fatal_errors = 0;
};

/// Runs every (replicate x method) job on a bounded worker pool; results keep a fixed order.
inline RunResult run(const RunConfig& cfg, std::ostream* progress = &std::cerr)
{
    const Scenario scen(cfg);
    const std::size_t M = cfg.methods.size();
    const std::size_t total = static_cast<std::size_t>(cfg.replicates) * M;
    RunResult res;
    res.jobs.resize(total);
    std::atomic<std::size_t> next{0}, done{0};
    std::mutex io;

    auto worker = [&] {
        for (std::size_t job = next++; job < total; job = next++) {
            const int r = static_cast<int>(job / M);
            const std::size_t mi = job % M;
            const auto& m = cfg.methods[mi];
            JobResult jr;
            jr.record.replicate = r + 1;
            jr.record.method = m.tag;
            try {
                const auto rs = replicate_seed(cfg.seed, r);
                const auto rd = scen.replicate(r, rs);
                if (cfg.family == Family::linear) detail::run_linear(jr, m, cfg, rd, method_seed(rs, mi));
                else detail::run_logistic(jr, m, cfg, rd, method_seed(rs, mi));
            } catch (const std::exception& e) {
                jr.record = Record{r + 1, m.tag, "error"};
                jr.messages.push_back(e.what());
                jr.fatal = true;
            }
            res.jobs[job] = std::move(jr);
            const auto k = ++done;
            if (progress && (k == total || k % std::max<std::size_t>(1, total / 20) == 0)) {
                std::lock_guard<std::mutex> lock(io);
                *progress << "[" << k << "/" << total << "] jobs done\n";
            }
        }
    };
    const int threads = std::min<int>(cfg.parallelism, static_cast<int>(total));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    std::vector<Record> recs;
    for (const auto& j : res.jobs) {
        recs.push_back(j.record);
        res.fatal_errors += j.fatal;
    }
    res.aggregates = aggregate(recs);
    return res;
}

// ------------------------------------------------------------ output

inline const char* records_header = "replicate,method,status,msep,cslope,coverage,mean_width";

inline void write_records_csv(std::ostream& out, const std::vector<JobResult>& jobs, bool calslope)
{
    out << records_header << (calslope ? ",calslope" : "") << "\n";
    for (const auto& j : jobs) {
        const auto& r = j.record;
        out << r.replicate << ',' << r.method << ',' << r.status << ',' << format_number(r.msep) << ','
            << format_number(r.cslope) << ',' << format_number(r.coverage) << ',' << format_number(r.mean_width);
        if (calslope) out << ',' << format_number(j.calslope);
        out << "\n";
    }
}

/// Parses a records.csv written by write_records_csv.
inline std::vector<Record> read_records_csv(std::istream& in)
{
    const auto table = read_csv(in);
    auto num = [](const std::string& s) {
        double v;
        return shrinkage::detail::parse_double(s, v) ? v : std::numeric_limits<double>::quiet_NaN();
    };
    const auto& rep = table.column("replicate");
    const auto& meth = table.column("method");
    const auto& status = table.column("status");
    const auto& ms = table.column("msep");
    const auto& cs = table.column("cslope");
    const auto& cv = table.column("coverage");
    const auto& mw = table.column("mean_width");
    std::vector<Record> out;
    for (std::size_t i = 0; i < rep.size(); ++i) {
        out.push_back({static_cast<int>(num(rep[i])), meth[i], status[i], num(ms[i]), num(cs[i]), num(cv[i]), num(mw[i])});
    }
    return out;
}

inline Json to_json(const MetricSummary& s)
{
    auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
    Json j;
    j["count"] = s.count;
    j["mean"] = num(s.mean);
    j["median"] = num(s.median);
    j["q10"] = num(s.q10);
    j["q90"] = num(s.q90);
    return j;
}

inline Json aggregates_json(const std::vector<MethodAggregate>& aggs)
{
    Json arr = Json::array();
    for (const auto& a : aggs) {
        Json j;
        j["method"] = a.method;
        j["records"] = a.records;
        j["failures"] = a.failures;
        j["msep"] = to_json(a.msep);
        j["cslope"] = to_json(a.cslope);
        j["coverage"] = to_json(a.coverage);
        j["mean_width"] = to_json(a.mean_width);
        j["rmse_cslope_vs_1"] = std::isfinite(a.rmse_cslope_vs_1) ? Json(a.rmse_cslope_vs_1) : Json(nullptr);
        arr.push_back(j);
    }
    Json out;
    out["methods"] = arr;
    return out;
}

inline Json manifest_json(const RunConfig& cfg, const RunResult& res)
{
    Json m;
    m["toolkit"] = "shrinkage";
    m["version"] = version;
    m["config"] = cfg.echo;
    m["seed"] = cfg.seed;
    Json reps = Json::array();
    for (int r = 0; r < cfg.replicates; ++r) {
        Json e;
        e["replicate"] = r + 1;
        e["seed"] = replicate_seed(cfg.seed, r);
        reps.push_back(e);
    }
    m["replicates"] = reps;
    Json msgs = Json::array();
    for (const auto& j : res.jobs) {
        for (const auto& s : j.messages) {
            Json e;
            e["replicate"] = j.record.replicate;
            e["method"] = j.record.method;
            e["status"] = j.record.status;
            e["message"] = s;
            msgs.push_back(e);
        }
    }
    m["messages"] = msgs;
    m["notes"] = cfg.notes;
    m["fatal_errors"] = res.fatal_errors;
    return m;
}

/// Writes records.csv, aggregates.json and manifest.json to `dir`.
inline void write_outputs(const std::string& dir, const RunConfig& cfg, const RunResult& res)
{
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    {
        std::ofstream f(base / "records.csv", std::ios::binary);
        if (!f) throw Error("cannot write " + (base / "records.csv").string());
        write_records_csv(f, res.jobs, cfg.calibration_slope);
    }
    {
        std::ofstream f(base / "aggregates.json", std::ios::binary);
        f << aggregates_json(res.aggregates).dump(2) << "\n";
    }
    {
        std::ofstream f(base / "manifest.json", std::ios::binary);
        f << manifest_json(cfg, res).dump(2) << "\n";
    }
}

}  // namespace shrinkage::harness
