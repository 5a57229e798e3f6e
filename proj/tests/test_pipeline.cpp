#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dce/errors.hpp"
#include "dce/io.hpp"
#include "dce/pipeline.hpp"

using namespace dce;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Shell {
    int status = -1;
    std::string output;
};

Shell shell(const std::string& cmd) {
    Shell r;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
    const int st = pclose(pipe);
    r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

class PipelineTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("dce_pipe_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    RunConfig small(const std::string& preset_name, const std::string& sub, std::size_t paths = 2000) const {
        RunOverrides o;
        o.paths = paths;
        o.out = (dir_ / sub).string();
        return load_config(preset_name, o, {});
    }

    fs::path dir_;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string c;
        std::istringstream ls(line);
        while (std::getline(ls, c, ',')) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST(Config, PresetsParse) {
    ASSERT_EQ(preset_names().size(), 4u);
    for (const auto& name : preset_names()) {
        const auto cfg = parse_config(preset(name));
        EXPECT_EQ(cfg.name, name);
        EXPECT_EQ(cfg.methods.size(), 3u);
        EXPECT_EQ(cfg.lsm.seed, 987654321u);
    }
    EXPECT_EQ(parse_config(preset("swaption_hw")).simulation.maturity, 5.0);
    EXPECT_EQ(parse_config(preset("bermudan_merton")).engine.degree, 256u);
    EXPECT_THROW(preset("nope"), ConfigurationError);
    EXPECT_THROW(load_config("nope", {}, {}), ConfigurationError);
}

TEST(Config, EnvironmentOverrides) {
    auto tree = preset("european_bs");
    apply_env_overrides(tree, {"DCE_ENGINE__N=64", "DCE_SIMULATION__SEED_Q=7", "DCE_NAME=tagged", "PATH=/bin",
                               "DCE_OUTPUT__DIR=some/where"});
    const auto cfg = parse_config(tree);
    EXPECT_EQ(cfg.engine.degree, 64u);
    EXPECT_EQ(cfg.simulation.seed_q, 7u);
    EXPECT_EQ(cfg.name, "tagged");
    EXPECT_EQ(cfg.output_dir, "some/where");
    // existing key spelling is kept
    EXPECT_TRUE(tree["simulation"].contains("seed_Q"));
    EXPECT_FALSE(tree["simulation"].contains("seed_q"));
}

TEST(Config, CommandLineBeatsEnvironment) {
    RunOverrides o;
    o.seed = 11;
    o.paths = 123;
    o.threads = 2;
    const auto cfg = load_config("european_bs", o, {"DCE_SIMULATION__M=999", "DCE_SIMULATION__SEED_Q=5"});
    EXPECT_EQ(cfg.simulation.paths, 123u);
    EXPECT_EQ(cfg.simulation.seed_q, 11u);
    EXPECT_EQ(cfg.simulation.seed_p, 12u);
    EXPECT_EQ(cfg.threads, 2u);
}

TEST(Config, SchemaErrorsNameTheField) {
    auto expect_field = [](Json tree, const std::string& field) {
        try {
            parse_config(tree);
            ADD_FAILURE() << "accepted " << field;
        } catch (const ConfigurationError& e) {
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    auto t = preset("european_bs");
    t["engine"]["alpha"] = 1.5;
    expect_field(t, "engine.alpha");
    t = preset("european_bs");
    t["engine"]["bogus"] = 1;
    expect_field(t, "engine.bogus");
    t = preset("european_bs");
    t["simulation"]["T"] = 2.0;
    expect_field(t, "simulation.T");
    t = preset("european_bs");
    t["model"]["type"] = "heston";
    expect_field(t, "model.type");
    t = preset("european_bs");
    t["methods"] = {"dc", "mc"};
    expect_field(t, "methods");
    t = preset("european_bs");
    t["model"]["sigma"] = -0.1;
    expect_field(t, "model");
    t = preset("swaption_hw");
    t["model"] = preset("european_bs")["model"];
    expect_field(t, "product");
}

TEST_F(PipelineTest, CliRejectsBadAlphaWithExitTwo) {
    auto tree = preset("european_bs");
    tree["engine"]["alpha"] = 1.5;
    const auto path = dir_ / "bad.json";
    std::ofstream(path) << tree.dump(2);
    const auto r = shell(std::string(DCE_CLI_PATH) + " run " + path.string());
    EXPECT_EQ(r.status, 2) << r.output;
    EXPECT_NE(r.output.find("engine.alpha"), std::string::npos) << r.output;
    EXPECT_FALSE(fs::exists(dir_ / "out"));
}

TEST_F(PipelineTest, CliSmokeRunIsFast) {
    const auto out = dir_ / "smoke";
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = shell(std::string(DCE_CLI_PATH) + " run european_bs --seed 1 --paths 1000 --out " + out.string());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_LT(secs, 5.0);
    for (const char* f : {"summary.json", "errors.csv", "profile_dc_Q.csv", "profile_dc_P.csv", "profile_lsm_Q.csv",
                          "profile_full_reeval_P.csv", "plot_ee_dc_Q.dat", "plot_pfe_dc_P.dat"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    const auto v = shell(std::string(DCE_CLI_PATH) + " --version");
    EXPECT_EQ(v.status, 0);
    EXPECT_NE(v.output.find(DCE_VERSION), std::string::npos);
}

TEST_F(PipelineTest, CliPresetDumpRoundTrips) {
    const auto r = shell(std::string(DCE_CLI_PATH) + " presets barrier_bs");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(Json::parse(r.output), preset("barrier_bs"));
}

TEST_F(PipelineTest, ErrorsCsvIsDeterministicAcrossThreadCounts) {
    auto a = small("bermudan_merton", "a");
    a.lsm.pricing_paths = 5000;
    a.engine.degree = 64;
    a.reference.cos.terms = 1024;
    auto b = a;
    b.output_dir = (dir_ / "b").string();
    a.threads = 1;
    b.threads = 3;
    run(a);
    run(b);
    const auto ea = slurp(dir_ / "a" / "errors.csv");
    EXPECT_FALSE(ea.empty());
    EXPECT_EQ(ea, slurp(dir_ / "b" / "errors.csv"));
    EXPECT_EQ(slurp(dir_ / "a" / "profile_dc_P.csv"), slurp(dir_ / "b" / "profile_dc_P.csv"));
}

TEST_F(PipelineTest, SummaryAgreesWithWrittenProfiles) {
    auto cfg = small("european_bs", "s", 3000);
    cfg.lsm.pricing_paths = 5000;
    const auto res = run(cfg);
    const auto summary = Json::parse(slurp(dir_ / "s" / "summary.json"));
    EXPECT_EQ(summary, res.summary);
    EXPECT_EQ(summary["seeds"]["lsm_pricing"], 987654321u);
    EXPECT_TRUE(summary["checks"]["ee_price_constant"].get<bool>());

    const double norm = summary["error_normalizer"].get<double>();
    const auto rows = read_csv(dir_ / "s" / "errors.csv");
    ASSERT_EQ(rows.size(), 3u);  // header, dc, lsm
    EXPECT_EQ(rows[0][0], "method");
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const std::string m = rows[k][0];
        for (const char* meas : {"Q", "P"}) {
            const auto p = read_profile_csv((dir_ / "s" / ("profile_" + m + "_" + meas + ".csv")).string());
            const auto ref = read_profile_csv((dir_ / "s" / (std::string("profile_full_reeval_") + meas + ".csv")).string());
            const auto& stats = summary["methods"][m]["profiles"][meas];
            EXPECT_EQ(stats["max_ee"].get<double>(), *std::max_element(p.ee.begin(), p.ee.end()));
            EXPECT_EQ(stats["terminal_pfe"].get<double>(), p.pfe.back());
            EXPECT_EQ(stats["terminal_alive"].get<std::size_t>(), p.alive_counts.back());
            double ee = 0.0, pfe = 0.0;
            for (std::size_t u = 0; u < p.ee.size(); ++u) {
                ee = std::max(ee, std::fabs(p.ee[u] - ref.ee[u]) / norm);
                pfe = std::max(pfe, std::fabs(p.pfe[u] - ref.pfe[u]) / norm);
            }
            const std::size_t col = std::string(meas) == "Q" ? 3 : 5;
            EXPECT_EQ(std::stod(rows[k][col]), ee) << m << meas;
            EXPECT_EQ(std::stod(rows[k][col + 1]), pfe) << m << meas;
        }
        const double price = summary["methods"][m]["price"].get<double>();
        const double ref_price = summary["methods"]["full_reeval"]["price"].get<double>();
        EXPECT_EQ(std::stod(rows[k][2]), std::fabs(price - ref_price) / norm);
    }
}

TEST_F(PipelineTest, MomentDumpMatchesOperator) {
    auto cfg = small("european_bs", "m");
    cfg.engine.degree = 16;
    const auto path = dump_moments(cfg);
    const auto m = read_moment_matrix_csv(path);
    EXPECT_EQ(m.degree(), 16u);
    EXPECT_EQ(m.gamma.rows(), 17);
    EXPECT_EQ(m.dt, 0.02);
    EXPECT_EQ(m.model_tag, "black_scholes");
}
