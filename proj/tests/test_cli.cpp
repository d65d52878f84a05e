#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome run(const std::string& args) {
    const std::string cmd = std::string(FREEBOUND_CLI) + " " + args + " 2>&1";
    Outcome r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, p)) r.output += buf;
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string configs(const std::string& name) { return std::string(FREEBOUND_CONFIGS) + "/" + name; }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("freebound_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(Cli, StoppingWritesFieldAndMetadata) {
    const fs::path out = scratch("stopping");
    const Outcome r = run("stopping -c " + configs("quick.ini") + " -o " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(slurp(out / "u.csv").substr(0, 12), "x1,x2,value\n");
    const std::string meta = slurp(out / "u.json");
    EXPECT_NE(meta.find("\"version\""), std::string::npos);
    EXPECT_NE(meta.find("\"grid\""), std::string::npos);
}

TEST(Cli, HjbWithResidual) {
    const fs::path out = scratch("hjb");
    const Outcome r = run("hjb --residual -c " + configs("quick.ini") + " -o " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(out / "V.csv"));
    EXPECT_EQ(slurp(out / "residual.csv").substr(0, 21), "x1,x2,value,excluded\n");
}

TEST(Cli, BoundaryOnFixtureIsAccepted) {
    const fs::path out = scratch("boundary");
    const Outcome r = run("boundary -c " + configs("quick.ini") + " -o " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(slurp(out / "boundary.csv").substr(0, 7), "x2,psi\n");
}

TEST(Cli, BoundaryInDegenerateModeExitsWithTwo) {
    const Outcome r = run("boundary -c " + configs("degenerate.ini") + " -o " + scratch("deg").string());
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("degenerate"), std::string::npos) << r.output;
}

TEST(Cli, SimulateRayInDegenerateModeWorks) {
    const fs::path out = scratch("simdeg");
    const Outcome r = run("simulate --policy ray --x 1:3 -c " + configs("degenerate.ini") +
                      " --set sim.n_paths=50 --set sim.dt=0.01 -o " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(slurp(out / "sim.csv").find("ray-reflect,1,3,"), std::string::npos);
}

TEST(Cli, SimulateDumpsPath) {
    const fs::path out = scratch("simpath");
    const Outcome r = run("simulate --policy axis --x 1:1 --dump-path 20 -c " + configs("quick.ini") +
                      " --set sim.n_paths=20 --set sim.dt=0.01 -o " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(slurp(out / "path.csv").substr(0, 14), "t,x1,x2,y1,y2\n");
}

TEST(Cli, MissingRequiredKeyExitsWithOneAndNamesIt) {
    const fs::path dir = scratch("badcfg");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.ini") << "[model]\ntheta1 = 0\ntheta2 = 0\nsigma11 = 1\nsigma22 = 1\n"
                                      "[cost]\na = 1\nb1 = 1\nb2 = 0\n";
    const Outcome r = run("stopping -c " + (dir / "bad.ini").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("model.gamma"), std::string::npos) << r.output;
}

TEST(Cli, UsageErrorsExitWithOne) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("stopping").code, 1);
    EXPECT_EQ(run("simulate --policy nope -c " + configs("quick.ini")).code, 1);
    EXPECT_EQ(run("stopping -c " + configs("quick.ini") + " --set grid.n1=x").code, 1);
}

TEST(Cli, NonConvergenceExitsWithThree) {
    const Outcome r = run("stopping -c " + configs("quick.ini") +
                      " --set solver.method=psor --set solver.max_iters=2 --set solver.nested=false -o " +
                      scratch("nc").string());
    EXPECT_EQ(r.code, 3) << r.output;
}

TEST(Cli, Oracle1d) {
    const fs::path out = scratch("oracle");
    const Outcome r = run("oracle1d --x0 0 -c " + configs("quick.ini") + " -o " + out.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(slurp(out / "oracle1d.csv").find("0.7071"), std::string::npos);
}

// The exit code of verify is 0 exactly when the report has no FAIL line.
TEST(Cli, VerifyExitCodeMatchesReport) {
    const fs::path out = scratch("verify");
    const Outcome r = run("verify -q -c " + configs("quick.ini") + " -o " + out.string());
    const std::string text = slurp(out / "verify.txt");
    ASSERT_FALSE(text.empty()) << r.output;
    const bool any_fail = text.find("FAIL ") != std::string::npos;
    EXPECT_EQ(r.code, any_fail ? 4 : 0) << r.output;
    EXPECT_TRUE(fs::exists(out / "verify.csv"));
    EXPECT_TRUE(fs::exists(out / "verify.json"));
}
