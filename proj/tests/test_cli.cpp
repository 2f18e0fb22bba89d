#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "lake/io.hpp"

using namespace lake;
namespace fs = std::filesystem;

namespace {

const fs::path config_dir = LAKE_CONFIG_DIR;

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("lake_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Result {
    int code = -1;
    std::string err;
};

Result run(const std::string& args, const fs::path& dir, const std::string& env = "")
{
    const auto err_file = dir / "stderr.txt";
    const std::string cmd =
        env + " \"" + std::string(LAKESIM_PATH) + "\" " + args + " > /dev/null 2> \"" + err_file.string() + "\"";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = fs::exists(err_file) ? io::read_file(err_file) : "";
    return r;
}

io::json manifest(const fs::path& out) { return io::json::parse(io::read_file(out / "manifest.json")); }

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text)
{
    io::write_file(dir / name, text);
    return dir / name;
}

const char* small_sim =
    "[domain]\na = 1\nh = 1/16\n"
    "[transport]\nomega0 = exp(-4*((x-0.3)^2 + y^2))\neps = 0\nT = 0.2\noutput_every = 0.1\nperturbation = 1e-6\n";

} // namespace

TEST(Cli, SolveEllipticManufactured)
{
    const auto dir = scratch("solve");
    const auto r = run("solve-elliptic --config " + (config_dir / "disk_manufactured.ini").string() + " --out "
                           + (dir / "out").string(),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = manifest(dir / "out");
    EXPECT_EQ(m["subcommand"], "solve-elliptic");
    EXPECT_LE(m["outputs"]["l2_error"].get<double>(), 0.02);
    EXPECT_EQ(m["files"].size(), 1u);
    const auto content = io::read_file(dir / "out" / "field.csv");
    EXPECT_EQ(m["files"][0]["sha1"], io::git_blob_hash(content));
    EXPECT_EQ(content.substr(0, content.find('\n')), "i,j,x,y,psi,phi_scaled,v1,v2,flagged");
}

TEST(Cli, CflAboveOneIsAValidationFailure)
{
    const auto dir = scratch("cfl");
    const auto cfg = write_config(dir, "c.ini", "[domain]\na = 1\n[transport]\nomega0 = 1\ncfl = 2\n");
    const auto r = run("simulate --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error kind=config-validation exit=2 message=\"", 0), 0u) << r.err;
    EXPECT_NE(r.err.find("cfl"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "out" / "manifest.json"));
}

TEST(Cli, ExitCodesByFailureKind)
{
    const auto dir = scratch("codes");
    EXPECT_EQ(run("simulate --config " + (dir / "missing.ini").string(), dir).code, 6);
    EXPECT_EQ(run("frobnicate", dir).code, 2);
    const auto bad_solver = write_config(dir, "s.ini", "[domain]\na = 2\nh = 1/64\n[elliptic]\nf = 1\nmax_iter = 2\n");
    const auto r = run("solve-elliptic --config " + bad_solver.string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.code, 4);
    EXPECT_EQ(r.err.rfind("error kind=solver exit=4", 0), 0u) << r.err;
    const auto sub = write_config(dir, "k.ini", "[kernels]\na = 1\n");
    EXPECT_EQ(run("kernel-check --config " + sub.string() + " --eps 1.5 --out " + (dir / "k").string(), dir).code, 2);
}

TEST(Cli, SimulateIsDeterministic)
{
    const auto dir = scratch("determinism");
    const auto cfg = write_config(dir, "sim.ini", small_sim);
    const std::string base = "simulate --config " + cfg.string() + " --seed 5 --out ";
    ASSERT_EQ(run(base + (dir / "a").string(), dir).code, 0);
    ASSERT_EQ(run(base + (dir / "b").string() + " --threads 2", dir).code, 0);
    const auto ma = manifest(dir / "a");
    const auto mb = manifest(dir / "b");
    ASSERT_EQ(ma["files"].size(), mb["files"].size());
    for (std::size_t i = 0; i < ma["files"].size(); ++i) {
        const std::string name = ma["files"][i]["name"];
        EXPECT_EQ(ma["files"][i]["sha1"], mb["files"][i]["sha1"]) << name;
        EXPECT_EQ(io::read_file(dir / "a" / name), io::read_file(dir / "b" / name)) << name;
    }
    // Every file in the directory is listed in the manifest exactly once.
    std::size_t listed = 0;
    for (const auto& e : fs::directory_iterator(dir / "a"))
        if (e.path().filename() != "manifest.json")
            ++listed;
    EXPECT_EQ(listed, ma["files"].size());
}

TEST(Cli, OutputDirectoryPrecedence)
{
    const auto dir = scratch("outdir");
    const auto cfg = write_config(dir, "sim.ini", small_sim);
    const std::string env = "LAKE_OUT_DIR=\"" + (dir / "env").string() + "\"";
    ASSERT_EQ(run("simulate --config " + cfg.string(), dir, env).code, 0);
    EXPECT_TRUE(fs::exists(dir / "env" / "manifest.json"));
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir / "flag").string(), dir, env).code, 0);
    EXPECT_TRUE(fs::exists(dir / "flag" / "manifest.json"));
}

TEST(Cli, DiagnoseTwinRuns)
{
    const auto dir = scratch("diagnose");
    const auto cfg = write_config(dir, "sim.ini", small_sim);
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 1 --out " + (dir / "a").string(), dir).code, 0);
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 2 --out " + (dir / "b").string(), dir).code, 0);
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --seed 1 --out " + (dir / "c").string(), dir).code, 0);
    auto r = run("diagnose " + (dir / "a" / "manifest.json").string() + " " + (dir / "b" / "manifest.json").string()
                     + " --out " + (dir / "d").string(),
                 dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = manifest(dir / "d");
    EXPECT_TRUE(m["outputs"]["uniqueness_pass"].get<bool>());
    const auto summary = io::read_file(dir / "d" / "summary.txt");
    EXPECT_NE(summary.find("PASS y(t)"), std::string::npos) << summary;
    for (const char* f : {"gradient_sweep.csv", "holder.csv", "uniqueness.csv"})
        EXPECT_TRUE(fs::exists(dir / "d" / f)) << f;

    r = run("diagnose " + (dir / "a" / "manifest.json").string() + " " + (dir / "c" / "manifest.json").string()
                + " --out " + (dir / "same").string(),
            dir);
    ASSERT_EQ(r.code, 0) << r.err;
    for (double y : io::read_csv(dir / "same" / "uniqueness.csv").values("y"))
        EXPECT_EQ(y, 0.0);
}

TEST(Cli, DiagnoseRejectsMismatchedGrids)
{
    const auto dir = scratch("mismatch");
    const auto c1 = write_config(dir, "a.ini", small_sim);
    std::string other = small_sim;
    other.replace(other.find("h = 1/16"), 8, "h = 1/20");
    const auto c2 = write_config(dir, "b.ini", other);
    ASSERT_EQ(run("simulate --config " + c1.string() + " --out " + (dir / "a").string(), dir).code, 0);
    ASSERT_EQ(run("simulate --config " + c2.string() + " --out " + (dir / "b").string(), dir).code, 0);
    const auto r = run("diagnose " + (dir / "a" / "manifest.json").string() + " "
                           + (dir / "b" / "manifest.json").string() + " --out " + (dir / "d").string(),
                       dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(r.err.rfind("error kind=configuration exit=3", 0), 0u) << r.err;
}

TEST(Cli, DiagnoseDetectsTamperedSnapshots)
{
    const auto dir = scratch("tamper");
    const auto cfg = write_config(dir, "sim.ini", small_sim);
    ASSERT_EQ(run("simulate --config " + cfg.string() + " --out " + (dir / "a").string(), dir).code, 0);
    io::write_file(dir / "a" / "snapshot_0001.csv", "i,j,x,y,omega,v1,v2\n");
    EXPECT_EQ(run("diagnose " + (dir / "a" / "manifest.json").string() + " --out " + (dir / "d").string(), dir).code,
              6);
}

TEST(Cli, KernelCheckWithOverrides)
{
    const auto dir = scratch("kernels");
    const auto r = run("kernel-check --a 2 --eps 0.1,0.01 --levels 5 --samples 10 --seed 3 --out "
                           + (dir / "k").string(),
                       dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = manifest(dir / "k");
    EXPECT_EQ(m["parameters"]["a"], 2.0);
    EXPECT_EQ(m["parameters"]["eps"].size(), 2u);
    EXPECT_TRUE(m["outputs"]["bounds_asserted"].get<bool>());
    EXPECT_LT(m["outputs"]["max_spread"].get<double>(), 10.0);
    EXPECT_EQ(m["outputs"]["indicial_root"], -4.0);
    const auto rows = io::read_csv(dir / "k" / "bounds.csv").rows.size();
    EXPECT_EQ(rows, 2u * 3u * (5u * 5u + 10u));

    const auto sub = run("kernel-check --a 0.5 --eps 0.1 --levels 3 --out " + (dir / "s").string(), dir);
    ASSERT_EQ(sub.code, 0) << sub.err;
    EXPECT_FALSE(manifest(dir / "s")["outputs"]["bounds_asserted"].get<bool>());
}
