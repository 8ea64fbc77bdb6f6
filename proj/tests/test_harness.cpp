#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "shrinkage/shrinkage.hpp"

using namespace shrinkage;
using namespace shrinkage::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("shrink_harness_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error_path(const Json& j)
{
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

Json intro(Json methods, int reps = 1)
{
    return {{"scenario", "intro"}, {"seed", 42}, {"replicates", reps}, {"methods", std::move(methods)}};
}

struct Cmd {
    int status;
    std::string out, err;
};

Cmd shrink(const std::string& args, const fs::path& dir)
{
    const auto o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = std::string(SHRINK_BINARY) + " " + args + " > " + o.string() + " 2> " + e.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(o), slurp(e)};
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

// small mixed-type cohort for the data-based scenarios
void write_cohort(const fs::path& dir, int n)
{
    Rng rng(5);
    std::ofstream csv(dir / "cohort.csv");
    csv << "sbp,age,sex,eth\n";
    const char* eth[] = {"A", "B", "C"};
    for (int i = 0; i < n; ++i) {
        const double age = 40.0 + 10.0 * rng.normal();
        const int sex = rng.uniform() < 0.5;
        const int e = static_cast<int>(rng.uniform() * 3.0) % 3;
        const double sbp = 120.0 + 0.5 * age + 4.0 * sex + 2.0 * e + 8.0 * rng.normal();
        csv << format_number(sbp) << ',' << format_number(age) << ',' << (sex ? "m" : "f") << ',' << eth[e] << "\n";
    }
    write_file(dir / "schema.json", R"({"sbp": {"kind": "continuous"}, "age": {"kind": "continuous"},
        "sex": {"kind": "binary", "baseline": "f"}, "eth": {"kind": "nominal", "baseline": "A"}})");
}

}  // namespace

TEST(Config, ErrorsCarryFieldPaths)
{
    EXPECT_EQ(config_error_path(Json::parse(R"({"scenario": "intro", "methods": ["ols"]})")), "seed");
    EXPECT_EQ(config_error_path(Json::parse(R"({"scenario": "nope", "seed": 1, "methods": ["ols"]})")), "scenario");
    EXPECT_EQ(config_error_path(Json::parse(R"({"scenario": "intro", "seed": 1})")), "methods");
    EXPECT_EQ(config_error_path(intro({"ols", "ols"})), "methods[1].tag");
    EXPECT_EQ(config_error_path(intro({"ols", "frob"})), "methods[1]");
    auto j = intro({"ols"});
    j["colour"] = 1;
    EXPECT_EQ(config_error_path(j), "colour");
    j = intro({"ols"});
    j["parallelism"] = 0;
    EXPECT_EQ(config_error_path(j), "parallelism");
    j = intro(Json::array({{{"method", "bayes"}, {"prior", "grouped"}}}));
    EXPECT_EQ(config_error_path(j), "methods[0].groups");
    j = intro(Json::array({{{"method", "bayes"}, {"mcmc", {{"chains", "four"}}}}}));
    EXPECT_EQ(config_error_path(j), "methods[0].mcmc.chains");
    EXPECT_EQ(config_error_path(intro({"ridge_3"})), "methods[0].groups");
    EXPECT_EQ(config_error_path(Json::parse(R"({"scenario": "logistic-weak", "seed": 1, "methods": ["ridge"]})")),
              "methods[0]");
}

TEST(Config, GroupIndexBeyondP)
{
    auto j = intro(Json::array({{{"method", "ridge"}, {"groups", {{1, 2}, {3, 9}}}}}));
    try {
        parse_config(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "methods[0].groups[1][1]");
        EXPECT_NE(std::string(e.what()).find("9"), std::string::npos);
    }
}

TEST(Config, MinimalAndDefaults)
{
    auto c = parse_config(intro({"ols"}));
    EXPECT_EQ(c.family, Family::linear);
    EXPECT_EQ(c.methods.size(), 1u);
    EXPECT_TRUE(c.notes.empty());

    c = parse_config(intro({"bayes-2"}));
    ASSERT_EQ(c.notes.size(), 1u);
    EXPECT_NE(c.notes[0].find("chains 4, iterations 5000, burn_in 2500"), std::string::npos);
    EXPECT_EQ(c.methods[0].mcmc.chains, 4);
    EXPECT_EQ(c.methods[0].mcmc.iterations, 5000);

    c = parse_config(Json::parse(R"({"scenario": "logistic-moderate", "seed": 3, "methods": ["ml", "bayes-loc"]})"));
    EXPECT_EQ(c.family, Family::logistic);
    EXPECT_EQ(c.methods[1].tag, "bayes-loc");
}

TEST(Run, OneReplicateOneRow)
{
    const auto dir = scratch("one");
    auto cfg = parse_config(intro({"ols"}));
    auto res = run(cfg, nullptr);
    write_outputs(dir.string(), cfg, res);
    std::ifstream in(dir / "records.csv");
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 1);
    EXPECT_EQ(res.jobs[0].record.status, "ok");
    auto man = Json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(man["version"], version);
    EXPECT_EQ(man["config"], intro({"ols"}));
    EXPECT_EQ(man["replicates"][0]["seed"], replicate_seed(42, 0));
}

TEST(Run, RerunAndParallelismAreByteIdentical)
{
    auto j = intro({"ols", "step", "lasso", "ridge", "ridge_2"}, 6);
    auto write = [&](int par, const std::string& name) {
        j["parallelism"] = par;
        auto cfg = parse_config(j);
        const auto dir = scratch(name);
        write_outputs(dir.string(), cfg, run(cfg, nullptr));
        return std::make_pair(slurp(dir / "records.csv"), slurp(dir / "aggregates.json"));
    };
    const auto a = write(1, "p1a"), b = write(1, "p1b"), c = write(3, "p3");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Run, AggregatesRecomputableFromRecords)
{
    auto cfg = parse_config(intro({"ols", "ridge"}, 5));
    const auto dir = scratch("recompute");
    auto res = run(cfg, nullptr);
    write_outputs(dir.string(), cfg, res);
    std::ifstream in(dir / "records.csv");
    const auto again = aggregates_json(aggregate(read_records_csv(in)));
    EXPECT_EQ(again, Json::parse(slurp(dir / "aggregates.json")));
}

TEST(Run, LogisticAndFatalErrorsPreservePartialResults)
{
    auto j = Json::parse(R"({"scenario": "logistic-moderate", "seed": 8, "replicates": 2, "n_test": 500,
                             "methods": ["ml", "firth", "ridge05"]})");
    auto res = run(parse_config(j), nullptr);
    ASSERT_EQ(res.jobs.size(), 6u);
    for (const auto& job : res.jobs) {
        EXPECT_TRUE(job.record.status == "ok" || job.record.status == "nonconverged");
        EXPECT_TRUE(std::isfinite(job.record.msep));
    }

    // OLS on 4 rows with p = 6 fails per job; the other method's records survive
    const auto dir = scratch("fatal");
    write_cohort(dir, 100);
    Json d = {{"scenario", "subsets"}, {"seed", 1}, {"replicates", 2}, {"methods", {"ols", "ridge"}}};
    d["data"] = {{"path", (dir / "cohort.csv").string()}, {"schema", (dir / "schema.json").string()},
                 {"response", "sbp"}, {"subset_size", 4}, {"noise_covariates", 2}};
    auto cfg = parse_config(d, 6);
    auto bad = run(cfg, nullptr);
    EXPECT_EQ(bad.fatal_errors, 2);
    EXPECT_EQ(bad.jobs[0].record.status, "error");
    EXPECT_FALSE(bad.jobs[0].messages.empty());
    EXPECT_NE(bad.jobs[1].record.status, "error");
    write_file(dir / "fatal.json", d.dump());
    auto r = shrink("simulate --config " + (dir / "fatal.json").string() + " --out " + (dir / "out").string(), dir);
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(Json::parse(slurp(dir / "out" / "manifest.json"))["fatal_errors"], 2);
}

TEST(Run, DataBasedScenarios)
{
    const auto dir = scratch("data");
    write_cohort(dir, 600);
    Json data = {{"path", (dir / "cohort.csv").string()}, {"schema", (dir / "schema.json").string()},
                 {"response", "sbp"}, {"subset_size", 60}, {"noise_covariates", 2}};
    Json j = {{"scenario", "subsets"}, {"seed", 4}, {"replicates", 3}, {"data", data},
              {"methods", {"ols", "ridge", "ridge_3"}}};
    auto cfg = parse_config(j, 6);
    auto res = run(cfg, nullptr);
    for (const auto& job : res.jobs) EXPECT_NE(job.record.status, "error") << job.record.method;
    // p = age, sex, eth(2 dummies), 2 noise
    j["groups"] = {{1, 2}, {7}};
    EXPECT_THROW(parse_config(j, 6), ConfigError);

    j["scenario"] = "diy";
    j.erase("groups");
    j["data"].erase("subset_size");
    j["methods"] = {"ols", "lasso"};
    res = run(parse_config(j, 6), nullptr);
    for (const auto& job : res.jobs) EXPECT_EQ(job.record.status, "ok");
}

TEST(Cli, ValidateExitCodes)
{
    const auto dir = scratch("cli_validate");
    write_file(dir / "ok.json", intro({"ols"}).dump());
    auto r = shrink("validate --config " + (dir / "ok.json").string(), dir);
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(r.out, "ok\n");

    write_file(dir / "bayes.json", intro({"bayes-glo"}).dump());
    r = shrink("validate --config " + (dir / "bayes.json").string(), dir);
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("info: "), std::string::npos);

    write_file(dir / "bad.json", intro(Json::array({{{"method", "ridge"}, {"groups", {{1, 12}}}}})).dump());
    r = shrink("validate --config " + (dir / "bad.json").string(), dir);
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("methods[0].groups[0][1]"), std::string::npos);
    EXPECT_NE(r.err.find("12"), std::string::npos);

    r = shrink("validate --config " + (dir / "missing.json").string(), dir);
    EXPECT_NE(r.status, 0);
}

TEST(Cli, SimulateAndEvaluate)
{
    const auto dir = scratch("cli_sim");
    const auto out1 = dir / "a", out2 = dir / "b";
    auto r = shrink("simulate --scenario intro --methods ols,ridge --replicates 3 --out " + out1.string(), dir);
    EXPECT_EQ(r.status, 1);  // no seed
    EXPECT_NE(r.err.find("seed"), std::string::npos);

    const std::string args = "simulate --scenario intro --methods ols,ridge,lasso --replicates 4 --seed 9 --out ";
    r = shrink(args + out1.string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_TRUE(r.out.empty());  // progress goes to stderr
    EXPECT_NE(r.err.find("jobs done"), std::string::npos);
    r = shrink(args + out2.string() + " --parallelism 3", dir);
    ASSERT_EQ(r.status, 0);
    for (const char* f : {"records.csv", "aggregates.json"}) EXPECT_EQ(slurp(out1 / f), slurp(out2 / f)) << f;

    r = shrink("evaluate --records " + (out1 / "records.csv").string(), dir);
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(Json::parse(r.out), Json::parse(slurp(out1 / "aggregates.json")));
    r = shrink("evaluate --records " + (out1 / "records.csv").string() + " --winsorize 0.9,1.1", dir);
    ASSERT_EQ(r.status, 0);
    for (const auto& m : Json::parse(r.out)["methods"]) {
        EXPECT_GE(m["cslope"]["q10"].get<double>(), 0.9);
        EXPECT_LE(m["cslope"]["q90"].get<double>(), 1.1);
    }
}

TEST(Cli, Fit)
{
    const auto dir = scratch("cli_fit");
    write_cohort(dir, 200);
    const std::string base = "fit --data " + (dir / "cohort.csv").string() + " --schema " + (dir / "schema.json").string() +
                             " --response sbp ";
    auto r = shrink(base + "--method ols --seed 1", dir);
    ASSERT_EQ(r.status, 0) << r.err;
    auto j = Json::parse(r.out);
    EXPECT_EQ(j["beta"].size(), 4u);

    r = shrink(base + "--method ridge --groups \"1;2,3,4\" --modes unpenalized,estimated --seed 1", dir);
    ASSERT_EQ(r.status, 0) << r.err;
    r = shrink(base + "--method ridge --groups \"1;2,3,9\" --seed 1", dir);
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("9"), std::string::npos);
    r = shrink(base + "--method ols", dir);
    EXPECT_EQ(r.status, 1);

    const auto o1 = dir / "b1", o2 = dir / "b2";
    const std::string bayes = base + "--method bayes --prior loc --chains 2 --iterations 600 --burn-in 200 --seed 3 --out ";
    ASSERT_EQ(shrink(bayes + o1.string(), dir).status, 0);
    ASSERT_EQ(shrink(bayes + o2.string(), dir).status, 0);
    EXPECT_EQ(slurp(o1 / "draws.csv"), slurp(o2 / "draws.csv"));
    EXPECT_EQ(slurp(o1 / "fit.json"), slurp(o2 / "fit.json"));
}
