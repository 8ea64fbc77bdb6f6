#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bayes.hpp"
#include "coding.hpp"
#include "core.hpp"
#include "logistic.hpp"
#include "stats.hpp"

namespace shrinkage {

using Json = nlohmann::ordered_json;

/// 17 significant digits, "NA" for non-finite values.
inline std::string format_number(double x)
{
    if (!std::isfinite(x)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline Json to_json(const VectorXd& v)
{
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v(i)) ? Json(v(i)) : Json(nullptr));
    return a;
}

/// Row-major nested arrays.
inline Json to_json(const MatrixXd& m)
{
    Json a = Json::array();
    for (Index i = 0; i < m.rows(); ++i) a.push_back(to_json(VectorXd(m.row(i).transpose())));
    return a;
}

inline Json to_json(const FitResult& f)
{
    Json j;
    j["method_tag"] = f.method_tag;
    j["intercept"] = f.intercept;
    j["beta"] = to_json(f.beta);
    j["sigma2"] = f.sigma2;
    j["lambda"] = to_json(f.lambda);
    j["cov_beta"] = to_json(f.cov_beta());
    const auto corr = f.cov_beta_corrected();
    j["cov_beta_corrected"] = corr ? to_json(*corr) : Json(nullptr);
    j["cov_full"] = to_json(f.covariance);
    j["warnings"] = f.warnings;
    return j;
}

inline Json to_json(const LogisticFit& f)
{
    Json j;
    j["method_tag"] = f.method_tag;
    j["intercept"] = f.intercept;
    j["beta"] = to_json(f.beta);
    j["converged"] = f.converged;
    j["iterations"] = f.iterations;
    j["lambda"] = f.lambda;
    j["warnings"] = f.warnings;
    return j;
}

namespace detail {

inline VectorXd vector_from_json(const Json& j)
{
    VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Index>(i)) = j[i].is_null() ? std::nan("") : j[i].get<double>();
    }
    return v;
}

inline MatrixXd matrix_from_json(const Json& j)
{
    const auto r = static_cast<Index>(j.size());
    const auto c = r > 0 ? static_cast<Index>(j[0].size()) : 0;
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i) m.row(i) = vector_from_json(j[static_cast<std::size_t>(i)]).transpose();
    return m;
}

}  // namespace detail

inline FitResult fit_from_json(const Json& j)
{
    FitResult f;
    f.method_tag = j.at("method_tag").get<std::string>();
    f.intercept = j.at("intercept").get<double>();
    f.beta = detail::vector_from_json(j.at("beta"));
    f.sigma2 = j.at("sigma2").get<double>();
    f.lambda = detail::vector_from_json(j.at("lambda"));
    f.covariance = detail::matrix_from_json(j.at("cov_full"));
    if (j.contains("warnings")) f.warnings = j["warnings"].get<std::vector<std::string>>();
    return f;
}

/// One row per retained draw.
inline void write_draws_csv(std::ostream& out, const PosteriorDraws& d)
{
    out << "chain,beta0";
    for (Index k = 0; k < d.p(); ++k) out << ",beta[" << k + 1 << "]";
    out << ",sigma2";
    for (Index g = 0; g < d.tau2.cols(); ++g) out << ",tau2[" << g + 1 << "]";
    for (Index g = 0; g < d.nu.cols(); ++g) out << ",nu[" << g + 1 << "]";
    out << "\n";
    for (Index i = 0; i < d.draws(); ++i) {
        out << (d.per_chain > 0 ? i / d.per_chain + 1 : 1) << ',' << format_number(d.beta0(i));
        for (Index k = 0; k < d.p(); ++k) out << ',' << format_number(d.beta(i, k));
        out << ',' << format_number(d.sigma2(i));
        for (Index g = 0; g < d.tau2.cols(); ++g) out << ',' << format_number(d.tau2(i, g));
        for (Index g = 0; g < d.nu.cols(); ++g) out << ',' << format_number(d.nu(i, g));
        out << "\n";
    }
}

/// Mean, sd, quantiles, ESS and split-Rhat per parameter.
inline Json draws_summary(const PosteriorDraws& d)
{
    Json params = Json::array();
    auto add = [&](const std::string& name, const VectorXd& v) {
        Json p;
        p["name"] = name;
        std::vector<double> x(v.data(), v.data() + v.size());
        const double m = v.mean();
        const double sd = v.size() > 1 ? std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
        p["mean"] = std::isfinite(m) ? Json(m) : Json(nullptr);
        p["sd"] = std::isfinite(sd) ? Json(sd) : Json(nullptr);
        for (double q : {0.025, 0.5, 0.975}) {
            const double val = quantile(x, q);
            p["q" + format_number(q * 100)] = std::isfinite(val) ? Json(val) : Json(nullptr);
        }
        const auto* diag = d.diagnostic(name);
        p["ess"] = diag ? Json(diag->ess) : Json(nullptr);
        p["rhat"] = diag && std::isfinite(diag->rhat) ? Json(diag->rhat) : Json(nullptr);
        params.push_back(p);
    };
    add("beta0", d.beta0);
    for (Index k = 0; k < d.p(); ++k) add("beta[" + std::to_string(k + 1) + "]", d.beta.col(k));
    add("sigma2", d.sigma2);
    for (Index g = 0; g < d.tau2.cols(); ++g) add("tau2[" + std::to_string(g + 1) + "]", d.tau2.col(g));
    Json j;
    j["draws"] = d.draws();
    j["chains"] = d.chains;
    j["parameters"] = params;
    j["warnings"] = d.warnings;
    return j;
}

/**
 * Coding policy from a sidecar schema {column: {kind, baseline?}}; kind is one
 * of continuous, binary, nominal, noise, raw. Columns keep schema order; the
 * response column is excluded from the covariates.
 */
inline CodingPolicy policy_from_schema(const Json& schema, const std::string& response)
{
    if (!schema.is_object()) throw Error("schema must be a JSON object {column: {kind, baseline?}}");
    CodingPolicy pol;
    pol.response = response;
    for (const auto& [name, spec] : schema.items()) {
        if (name == response) continue;
        if (!spec.is_object() || !spec.contains("kind")) throw Error("schema." + name + ".kind is required");
        const auto kind = spec["kind"].get<std::string>();
        ColumnSpec cs;
        if (kind == "continuous") cs.kind = RawKind::continuous;
        else if (kind == "binary") cs.kind = RawKind::binary;
        else if (kind == "nominal") cs.kind = RawKind::nominal;
        else if (kind == "noise") cs.kind = RawKind::noise;
        else if (kind == "raw") cs.kind = RawKind::raw;
        else throw Error("schema." + name + ".kind: unknown kind '" + kind + "'");
        if (spec.contains("baseline")) {
            cs.baseline = spec["baseline"].is_string() ? spec["baseline"].get<std::string>() : spec["baseline"].dump();
        }
        pol.covariates.emplace_back(name, cs);
    }
    if (pol.covariates.empty()) throw Error("schema declares no covariates");
    return pol;
}

}  // namespace shrinkage
