#include "rwbound/cli.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <regex>

using namespace rwbound;

namespace {

std::string shipped(int i) { return std::string(RWBOUND_SOURCE_DIR) + "/configs/example" + std::to_string(i) + ".json"; }

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "rwbound");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::vector<json> json_rows(const std::string& text) {
    std::vector<json> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) rows.push_back(json::parse(line));
    }
    return rows;
}

std::vector<json> rows_of(const std::vector<json>& rows, const std::string& table) {
    std::vector<json> out;
    for (const auto& r : rows) {
        if (r["table"] == table) out.push_back(r);
    }
    return out;
}

double quantity(const std::vector<json>& rows, const std::string& table, const std::string& name) {
    for (const auto& r : rows_of(rows, table)) {
        if (r.value("quantity", r.value("name", "")) == name) return r.contains("value") ? r["value"].get<double>() : r["used"].get<double>();
    }
    ADD_FAILURE() << "no " << name << " in " << table;
    return 0.0;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("rwbound_test_" + name)).string();
}

std::vector<double> numbers_in(const std::string& s) {
    static const std::regex num(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)");
    std::vector<double> out;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), num); it != std::sregex_iterator(); ++it) {
        out.push_back(std::stod(it->str()));
    }
    return out;
}

// Every number printed in the text report must appear among the
// machine-readable values (or inside a string cell carrying the same text).
void expect_text_numbers_in_json(const std::vector<std::string>& args) {
    auto text_args = args;
    text_args.insert(text_args.end(), {"--format", "text"});
    auto json_args = args;
    json_args.insert(json_args.end(), {"--format", "json-lines"});
    const auto text = run(text_args);
    const auto lines = run(json_args);
    ASSERT_EQ(text.code, lines.code);
    std::vector<double> pool;
    for (const auto& row : json_rows(lines.out)) {
        for (const auto& [k, v] : row.items()) {
            if (v.is_number()) pool.push_back(v.get<double>());
            if (v.is_string()) {
                for (double d : numbers_in(v.get<std::string>())) pool.push_back(d);
            }
        }
    }
    std::istringstream in(text.out);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '[') continue;
        for (double d : numbers_in(line)) {
            bool found = false;
            for (double p : pool) found = found || std::abs(p - d) <= 1e-9 * std::max(1.0, std::abs(d));
            EXPECT_TRUE(found) << d << " from line: " << line;
        }
    }
}

} // namespace

TEST(Cli, ExamplesAllPass) {
    const auto r = run({"examples"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.find("MISMATCH"), std::string::npos);
    EXPECT_EQ(rows_of(json_rows(run({"examples", "all", "--format", "json-lines"}).out), "golden").size(), 41u);
}

TEST(Cli, ExampleFourStepFunction) {
    const auto rows = json_rows(run({"examples", "4", "--format", "json-lines"}).out);
    bool saw_below = false, saw_at = false;
    for (const auto& r : rows) {
        if (r["quantity"] == "psi(17.9) exact") {
            saw_below = true;
            EXPECT_EQ(r["computed"], 1.0);
        }
        if (r["quantity"] == "psi(18) exact") {
            saw_at = true;
            EXPECT_EQ(r["computed"], 0.0);
        }
    }
    EXPECT_TRUE(saw_below && saw_at);
}

TEST(Cli, ExamplesRejectsUnknownIndex) {
    EXPECT_EQ(run({"examples", "5"}).code, kExitConfig);
    EXPECT_EQ(run({"examples", "two"}).code, kExitConfig);
}

TEST(Cli, BoundOnHarmonicWalk) {
    const auto r = run({"bound", "--config", shipped(2), "--delta", "0.05", "--x", "100", "--format", "json-lines"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = json_rows(r.out);
    EXPECT_NEAR(quantity(rows, "certificate", "rate"), 0.05, 1e-15);
    EXPECT_LE(quantity(rows, "certificate", "prefactor"), 178.0);
    EXPECT_NEAR(quantity(rows, "certificate", "Delta"), 0.11528, 1e-5);
    const auto b = rows_of(rows, "bound");
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0]["bound"], 1.0);
}

TEST(Cli, ConditionsReportCertificates) {
    const auto r = run({"conditions", "--config", shipped(1), "--format", "json-lines"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = json_rows(r.out);
    const auto cond = rows_of(rows, "conditions");
    ASSERT_EQ(cond.size(), 4u);
    EXPECT_EQ(cond[0]["value"].get<double>(), -1.0 / 7.0);
    EXPECT_EQ(cond[0]["attained_at"], 7);
    EXPECT_EQ(cond[0]["error_budget"], 0.0);
    EXPECT_LT(cond[2]["value"].get<double>(), 1.79);
    EXPECT_LT(cond[3]["value"].get<double>(), 2.48);
    EXPECT_NEAR(quantity(rows, "feasibility", "delta_max"), 2.0 / 63.0, 1e-15);

    const auto r3 = json_rows(run({"conditions", "--config", shipped(3), "--format", "json-lines"}).out);
    EXPECT_NEAR(quantity(r3, "feasibility", "delta_max"), 10.0 / 102.0, 1e-15);
    EXPECT_NEAR(quantity(r3, "constants", "alpha"), 2.0, 1e-12);
    EXPECT_EQ(quantity(r3, "constants", "nu2"), 1.0);
}

TEST(Cli, PositiveDriftIsInfeasible) {
    const auto path = temp_path("positive.json");
    {
        std::ofstream f(path);
        f << R"({"model": {"walk": {"iid": {"uniform": [0, 2]}}}, "constants": {"h": 1, "c": 1}})";
    }
    auto r = run({"conditions", "--config", path});
    EXPECT_EQ(r.code, kExitInfeasible);
    EXPECT_NE(r.err.find("condition (i) fails"), std::string::npos) << r.err;
    {
        std::ofstream f(path);
        f << R"({"model": {"walk": {"iid": {"uniform": [0, 2]}}}, "constants": {"h": 1, "c": 1, "b": 3}})";
    }
    r = run({"conditions", "--config", path});
    EXPECT_EQ(r.code, kExitInfeasible);
    EXPECT_NE(r.err.find("condition (i) fails"), std::string::npos) << r.err;
    std::remove(path.c_str());
}

TEST(Cli, StatedConstantsMustBeConservative) {
    auto cfg = example_config(1);
    cfg.constants.stated.d1 = 1.5;  // below the derived 1.785
    const auto path = temp_path("optimistic.json");
    {
        std::ofstream f(path);
        f << to_json(cfg).dump();
    }
    const auto r = run({"bound", "--config", path});
    EXPECT_EQ(r.code, kExitInfeasible);
    EXPECT_NE(r.err.find("stated d1"), std::string::npos);
    std::remove(path.c_str());
}

TEST(Cli, ConfigErrors) {
    EXPECT_EQ(run({"simulate", "--config", shipped(1), "--trials", "0"}).code, kExitConfig);
    EXPECT_EQ(run({"bound"}).code, kExitConfig);
    EXPECT_EQ(run({"bound", "--config", "/nonexistent.json"}).code, kExitConfig);
    EXPECT_EQ(run({"bound", "--config", shipped(1), "--grid", "0:1"}).code, kExitConfig);
    EXPECT_EQ(run({"bound", "--config", shipped(1), "--delta", "0.9"}).code, kExitConfig);
    EXPECT_EQ(run({"bound", "--config", shipped(1), "--format", "yaml"}).code, kExitConfig);
    EXPECT_EQ(run({"ruin-bound", "--config", shipped(1)}).code, kExitConfig);
    EXPECT_EQ(run({}).code, kExitConfig);
    const auto path = temp_path("broken.json");
    {
        std::ofstream f(path);
        f << R"({"model": {"walk": {"iid": {"uniform": [3, 1]}}}, "constants": {"h": 1, "c": 1}})";
    }
    const auto r = run({"bound", "--config", path});
    EXPECT_EQ(r.code, kExitConfig);
    EXPECT_NE(r.err.find("model.walk.iid"), std::string::npos) << r.err;
    std::remove(path.c_str());
}

TEST(Cli, InfeasibleDeltaExitsThree) {
    EXPECT_EQ(run({"bound", "--config", shipped(1), "--delta", "0.04"}).code, kExitInfeasible);
}

TEST(Cli, RuinBoundForErlangModel) {
    const auto r = run({"ruin-bound", "--config", shipped(3), "--delta", "0.08823529411764706", "--grid", "0:400:100",
                        "--format", "json-lines"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = json_rows(r.out);
    double c2 = 0.0;
    for (const auto& row : rows_of(rows, "certificate")) {
        if (row["scope"] == "corollary" && row["quantity"] == "prefactor") c2 = row["value"];
    }
    EXPECT_GE(c2, 169.0);
    EXPECT_LE(c2, 170.0);
    for (const auto& row : rows_of(rows, "ruin_bound")) {
        EXPECT_LE(row["direct_bound"].get<double>(), row["corollary_bound"].get<double>() * (1.0 + 1e-9));
    }
}

TEST(Cli, RuinBoundForDeterministicModel) {
    const auto rows =
        json_rows(run({"ruin-bound", "--config", shipped(4), "--grid", "16:20:1", "--format", "json-lines"}).out);
    const auto b = rows_of(rows, "ruin_bound");
    ASSERT_EQ(b.size(), 5u);
    const std::vector<int> expected{1, 1, 0, 0, 0};
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i]["exact_psi"], expected[i]);
}

TEST(Cli, RuinBoundReportsAdjustmentCoefficient) {
    const auto path = temp_path("classic.json");
    {
        std::ofstream f(path);
        f << R"({"model": {"risk": {"p": 2, "claims": {"iid": {"exponential": {"rate": 1}}},
                 "interarrivals": {"iid": {"exponential": {"rate": 1}}}}},
                 "constants": {"gamma": 0.25, "kappa": 4, "beta": 1}})";
    }
    const auto r = run({"ruin-bound", "--config", path, "--u", "10", "--format", "json-lines"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = json_rows(r.out);
    EXPECT_NEAR(quantity(rows, "adjustment_coefficient", "R"), 0.5, 1e-10);
    const auto b = rows_of(rows, "ruin_bound");
    ASSERT_EQ(b.size(), 1u);
    EXPECT_NEAR(b[0]["classical_e^{-Ru}"].get<double>(), std::exp(-5.0), 1e-9);
    std::remove(path.c_str());
}

TEST(Cli, OptimizeRows) {
    const auto rows =
        json_rows(run({"optimize", "--config", shipped(2), "--grid", "0:400:200", "--format", "json-lines"}).out);
    const auto t = rows_of(rows, "optimize");
    ASSERT_EQ(t.size(), 4u);
    EXPECT_EQ(t[0]["bound"], 1.0);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(t[i]["delta"].get<double>(), 10.0 / 117.0);
    EXPECT_EQ(t[3]["objective"], "asymptotic_rate");
}

TEST(Cli, SimulateChecksDominationAndWritesPlot) {
    auto cfg = example_config(2);
    const auto plot = temp_path("plot.csv");
    cfg.output.plot = plot;
    const auto path = temp_path("sim.json");
    {
        std::ofstream f(path);
        f << to_json(cfg).dump();
    }
    const auto r = run({"simulate", "--config", path, "--trials", "2000", "--horizon", "500", "--format", "json-lines"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto sim = rows_of(json_rows(r.out), "simulation");
    ASSERT_EQ(sim.size(), 10u);
    for (const auto& row : sim) {
        EXPECT_EQ(row["status"], "pass");
        EXPECT_LE(row["ci_low"].get<double>(), row["bound"].get<double>());
    }
    std::ifstream in(plot);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "x,bound,estimate,ci_low,ci_high");
    int lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    EXPECT_EQ(lines, 10);
    std::remove(plot.c_str());
    std::remove(path.c_str());
}

TEST(Cli, SimulateIsReproducible) {
    const std::vector<std::string> args{"simulate", "--config", shipped(3), "--trials", "500", "--horizon", "200",
                                        "--seed", "9", "--format", "csv"};
    EXPECT_EQ(run(args).out, run(args).out);
}

TEST(Cli, OutFlagWritesFile) {
    const auto path = temp_path("report.csv");
    const auto r = run({"bound", "--config", shipped(1), "--grid", "0:700:350", "--format", "csv", "--out", path});
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(r.out.empty());
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(first, "table,scope,quantity,value");
    std::remove(path.c_str());
}

TEST(Cli, MachineReadableRowsCarryEveryTextNumber) {
    expect_text_numbers_in_json({"conditions", "--config", shipped(1)});
    expect_text_numbers_in_json({"conditions", "--config", shipped(3)});
    expect_text_numbers_in_json({"bound", "--config", shipped(2), "--grid", "0:200:50"});
    expect_text_numbers_in_json({"optimize", "--config", shipped(1), "--x", "600"});
    expect_text_numbers_in_json({"ruin-bound", "--config", shipped(4), "--grid", "0:20:10"});
    expect_text_numbers_in_json({"simulate", "--config", shipped(4), "--trials", "100"});
    expect_text_numbers_in_json({"examples"});
}

TEST(Cli, CsvHasOneLinePerRowPlusHeaders) {
    const auto lines = json_rows(run({"conditions", "--config", shipped(1), "--format", "json-lines"}).out).size();
    const auto csv = run({"conditions", "--config", shipped(1), "--format", "csv"}).out;
    std::size_t nonblank = 0, headers = 0;
    std::istringstream in(csv);
    for (std::string l; std::getline(in, l);) {
        if (l.empty()) continue;
        ++nonblank;
        if (l.rfind("table,", 0) == 0) ++headers;
    }
    EXPECT_EQ(nonblank - headers, lines);
    EXPECT_EQ(headers, 3u);
}
