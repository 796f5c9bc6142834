#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "nmoc/csv.hpp"
#include "nmoc/scenario.hpp"
#include "nmoc/threshold_map.hpp"

using namespace nmoc;
namespace fs = std::filesystem;

namespace {

const char* minimal_config = R"([system]
omega_c = 100
omega_0 = 98
g0 = 6e-4
E = 0
alpha_re = 120
alpha_im = 0
q_init = linked
p_init = 0

[cavity_bath]
eta = 0.05
cutoff = 1100
exponent = 3

[mechanical_bath]
eta = 0.03
cutoff = 11
exponent = 1
)";

Scenario parse(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("nmoc_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NMOC_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Presets, Fig2MatchesCaption) {
    const Scenario s = preset("fig2").front();
    EXPECT_EQ(s.system.g0, 6e-4);
    EXPECT_EQ(s.mechanical.eta, 0.03);
    EXPECT_EQ(s.mechanical.cutoff, 11.0);
    EXPECT_EQ(s.mechanical.exponent, 1.0);
    EXPECT_EQ(s.system.E, 0.0);
    EXPECT_EQ(s.cavity.eta, 0.05);
    EXPECT_EQ(s.cavity.exponent, 3.0);
    EXPECT_EQ(s.cavity.cutoff, 1100.0);
    EXPECT_EQ(s.system.alpha_init, Complex(120.0, 0.0));
    EXPECT_EQ(s.system.p_init, 0.0);
    EXPECT_EQ(s.system.Delta_c(), 2.0);
    EXPECT_EQ(s.map_drive, 10.0);
    EXPECT_NEAR(s.system.q_init, 6e-4 * 120.0 * 120.0, 1e-12);
    EXPECT_NEAR(s.system.Delta_m, 1.33, 1e-12);
}

TEST(Presets, Fig3Variants) {
    const auto v = preset("fig3");
    ASSERT_EQ(v.size(), 2u);
    for (const auto& s : v) {
        EXPECT_EQ(s.beta_m, 2.5e-2);
        EXPECT_EQ(s.cavity.eta, 0.05);
    }
    EXPECT_EQ(v[0].mechanical.exponent, 1.0);
    EXPECT_EQ(v[1].mechanical.exponent, 3.0);
    EXPECT_EQ(v[1].mechanical.eta, 0.8);
    EXPECT_EQ(v[1].mechanical.cutoff, 5.0);
    EXPECT_THROW(preset("fig4"), ParameterError);
}

TEST(Config, MinimalParsesWithDefaults) {
    Scenario s = parse(minimal_config);
    s.resolve();
    EXPECT_TRUE(s.link_q);
    EXPECT_EQ(s.t_max, 50.0);
    EXPECT_TRUE(std::isinf(s.beta_m));
}

TEST(Config, RoundTripIsExact) {
    for (const auto& s : preset("fig3")) {
        const std::string text = serialize_scenario(s);
        const Scenario back = parse(text);
        EXPECT_EQ(serialize_scenario(back), text);
        EXPECT_EQ(back.beta_m, s.beta_m);
        EXPECT_EQ(back.V0, s.V0);
    }
    Scenario odd = preset("fig2").front();
    odd.system.g0 = 0.1 + 0.2;
    odd.link_q = false;
    odd.system.q_init = 1.0 / 3.0;
    const Scenario back = parse(serialize_scenario(odd));
    EXPECT_EQ(back.system.g0, odd.system.g0);
    EXPECT_EQ(back.system.q_init, odd.system.q_init);
}

TEST(Config, UnknownKeyRejected) {
    try {
        parse(std::string(minimal_config) + "\n[grid]\ntmax = 3\n");
        FAIL() << "accepted an unknown key";
    } catch (const ParameterError& e) {
        EXPECT_NE(std::string(e.what()).find("grid.tmax"), std::string::npos);
    }
    EXPECT_THROW(parse(std::string(minimal_config) + "\n[extras]\nfoo = 1\n"), ParameterError);
}

TEST(Config, MissingKeysListedExhaustively) {
    std::string text = minimal_config;
    for (const std::string line : {"g0 = 6e-4\n", "cutoff = 11\n"}) text.erase(text.find(line), line.size());
    try {
        parse(text);
        FAIL() << "accepted a config with missing keys";
    } catch (const ParameterError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("system.g0"), std::string::npos);
        EXPECT_NE(msg.find("mechanical_bath.cutoff"), std::string::npos);
    }
}

TEST(Config, BadValuesRejected) {
    Scenario s = preset("fig2").front();
    EXPECT_THROW(apply_override(s, "system.g0=abc"), ParameterError);
    EXPECT_THROW(apply_override(s, "system.g0=1e-3x"), ParameterError);
    EXPECT_THROW(apply_override(s, "grid.points=2.5"), ParameterError);
    EXPECT_THROW(apply_override(s, "covariance.V0=1 2 3"), ParameterError);
    EXPECT_THROW(apply_override(s, "system.nothing=1"), ParameterError);
    EXPECT_THROW(apply_override(s, "system.g0"), ParameterError);
    apply_override(s, "cavity_bath.eta=-1");
    EXPECT_THROW(s.resolve(), ParameterError);
}

TEST(Config, OverrideRelinksDisplacement) {
    Scenario s = preset("fig2").front();
    apply_override(s, "system.alpha_re=60");
    s.resolve();
    EXPECT_NEAR(s.system.q_init, 6e-4 * 3600.0, 1e-12);
}

TEST(Csv, NumbersRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 6e-4, -1e-300, 123456789.123456789}) {
        EXPECT_EQ(std::stod(CsvWriter::number(v)), v);
    }
}

TEST(Csv, RejectsRaggedRows) {
    const fs::path d = scratch_dir("csv");
    CsvWriter w((d / "x.csv").string(), {"a", "b"});
    EXPECT_THROW(w.row(std::vector<double>{1.0}), ParameterError);
}

TEST(ThresholdMap, MarginMonotoneAndBoundaryAtClosedForm) {
    SystemParams sys = preset("fig2").front().system;
    sys.E = 10.0;
    sys.alpha_init = 0.0;
    const SpectralParams pc{0.05, 1100.0, 3.0};
    const auto cells = threshold_map(sys, pc, 0.0, 0.1, 11, 500.0, 1500.0, 2, 5.0);
    ASSERT_EQ(cells.size(), 22u);
    for (std::size_t j = 0; j < 2; ++j) {
        for (std::size_t i = 0; i < 11; ++i) {
            const auto& c = cells[j * 11 + i];
            EXPECT_TRUE(c.error.empty()) << c.error;
            EXPECT_EQ(c.exists, c.eta_c > threshold_eta(sys.omega_c, SpectralParams{c.eta_c, c.cutoff_c, 3.0}));
            if (i > 0) {
                EXPECT_LT(c.threshold_margin, cells[j * 11 + i - 1].threshold_margin);
            }
        }
    }
}

TEST(ThresholdMap, RecordsCellFailures) {
    SystemParams sys;
    const auto c = map_cell(sys, SpectralParams{0.05, 1100.0, 3.0}, -1.0, 1100.0, 1.0);
    EXPECT_FALSE(c.error.empty());
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, 4);
    for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Cli, ExitCodes) {
    const fs::path d = scratch_dir("cli_codes");
    EXPECT_EQ(run_cli("bound-state --preset fig2 --out " + d.string()), 0);
    EXPECT_EQ(run_cli("bound-state --out " + d.string()), 1);
    EXPECT_EQ(run_cli("bound-state --preset fig2 --override system.bogus=1 --out " + d.string()), 1);
    EXPECT_EQ(run_cli("bound-state --config " + (d / "missing.ini").string() + " --out " + d.string()), 1);
    EXPECT_EQ(run_cli("run --kind nonsense --preset fig2 --out " + d.string()), 1);
    EXPECT_EQ(run_cli("kernels --preset fig2 --override mechanical_bath.exponent=0 --out " + d.string()), 1);
}

TEST(Cli, OutputsAndManifest) {
    const fs::path d = scratch_dir("cli_out");
    std::ofstream(d / "fig.ini") << minimal_config << "\n[run]\nname = mine\n\n[grid]\nt_max = 2\n";
    ASSERT_EQ(run_cli("run --kind classical --config " + (d / "fig.ini").string() + " --out " + d.string()), 0);
    const std::string csv = slurp(d / "mine" / "classical.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,re_alpha,im_alpha,q,p");
    const std::string pert = slurp(d / "mine" / "classical_perturbative.csv");
    EXPECT_EQ(pert.substr(0, pert.find('\n')), "t,re_alpha0,im_alpha0,q0,p0,re_alpha1,im_alpha1,q1");
    const auto m = nlohmann::json::parse(slurp(d / "mine" / "manifest.json"));
    EXPECT_EQ(m["parameters"]["system.g0"], "0.00059999999999999995");
    EXPECT_EQ(m["derived"]["Delta_m"], "1.3300000000000001");
    EXPECT_TRUE(m["solver"].contains("dt"));
    EXPECT_TRUE(m["solver"].contains("frame"));
}

TEST(Cli, RepeatedRunsAreBitIdentical) {
    const fs::path a = scratch_dir("cli_rep_a"), b = scratch_dir("cli_rep_b");
    for (const auto& d : {a, b})
        ASSERT_EQ(run_cli("classical --preset fig2 --t-max 3 --out " + d.string()), 0);
    EXPECT_EQ(slurp(a / "fig2" / "classical.csv"), slurp(b / "fig2" / "classical.csv"));
    EXPECT_EQ(slurp(a / "fig2" / "classical_perturbative.csv"), slurp(b / "fig2" / "classical_perturbative.csv"));
}

TEST(Cli, SingleCellSweepMatchesBoundState) {
    const fs::path d = scratch_dir("cli_sweep");
    ASSERT_EQ(run_cli("sweep --preset fig2 --axis cavity_bath.eta=0.05:0.05:1 --override map.t_max=2 --out " +
                      d.string()),
              0);
    ASSERT_EQ(run_cli("bound-state --preset fig2 --out " + d.string()), 0);
    std::istringstream sweep(slurp(d / "fig2" / "sweep.csv")), bound(slurp(d / "fig2" / "bound-state.csv"));
    std::string line;
    std::getline(sweep, line);
    std::getline(sweep, line);
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
    std::getline(bound, line);
    std::getline(bound, line);
    std::vector<std::string> ref;
    std::istringstream brow(line);
    for (std::string c; std::getline(brow, c, ',');) ref.push_back(c);
    ASSERT_GE(cells.size(), 4u);
    EXPECT_EQ(cells[2], ref[4]);  // threshold_margin
    EXPECT_EQ(cells[3], ref[0]);  // exists
}

TEST(Cli, SweepRecordsFailingCells) {
    const fs::path d = scratch_dir("cli_sweep_err");
    ASSERT_EQ(run_cli("sweep --preset fig2 --axis cavity_bath.cutoff=-1:1100:2 --override map.t_max=1 --out " +
                      d.string()),
              0);
    std::istringstream csv(slurp(d / "fig2" / "sweep.csv"));
    std::string header, bad, good;
    std::getline(csv, header);
    std::getline(csv, bad);
    std::getline(csv, good);
    EXPECT_NE(bad.substr(bad.size() - 2), "\"\"");
    EXPECT_EQ(good.substr(good.size() - 2), "\"\"");
}
