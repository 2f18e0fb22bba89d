#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lake/app.hpp"

namespace {

std::string quoted(std::string s)
{
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c == '\n' ? ' ' : c;
    }
    return '"' + out + '"';
}

int report(const char* kind, int code, const std::string& message)
{
    std::cerr << "error kind=" << kind << " exit=" << code << " message=" << quoted(message) << '\n';
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App cli{"Lake equations solver and diagnostics"};
    cli.set_version_flag("--version", lake::app::tool_version);
    cli.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> out_flag;
    unsigned long long seed = 0;
    int threads = 1;
    bool no_timing = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", config_path, "Configuration file");
        if (config_required)
            c->required();
        sub->add_option("--out", out_flag, "Output directory (overrides LAKE_OUT_DIR)");
        sub->add_option("--seed", seed, "Random seed");
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 256));
        sub->add_flag("--no-timing", no_timing, "Leave wall time out of the manifest");
    };

    auto* solve = cli.add_subcommand("solve-elliptic", "Solve the weighted elliptic problem");
    add_common(solve, true);
    auto* sim = cli.add_subcommand("simulate", "Run vorticity transport");
    add_common(sim, true);

    auto* kern = cli.add_subcommand("kernel-check", "Check kernel bounds, identities and calibration");
    add_common(kern, false);
    lake::app::KernelOverrides ov;
    std::vector<double> eps_list;
    kern->add_option("--a", ov.a, "Exponent a");
    kern->add_option("--n", ov.n, "Dimension n");
    kern->add_option("--eps", eps_list, "Truncation parameters")->delimiter(',');
    kern->add_option("--levels", ov.levels, "Distance levels in [1e-3, 1]");
    kern->add_option("--samples", ov.random_samples, "Extra random point pairs");

    auto* diag = cli.add_subcommand("diagnose", "Diagnostics on one or two simulate runs");
    add_common(diag, false);
    std::vector<std::string> manifests;
    diag->add_option("manifests", manifests, "simulate manifest.json paths")->required()->expected(1, 2);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return cli.exit(e);
        return report("usage", 2, e.what());
    }

    try {
        std::string text;
        if (!config_path.empty())
            text = lake::io::read_file(config_path);
        const auto cfg = lake::parse_config(text);
        lake::app::RunOptions opt;
        opt.out_dir = lake::app::resolve_out_dir(out_flag);
        opt.seed = seed;
        opt.threads = threads;
        opt.timing = !no_timing;
        if (!eps_list.empty())
            ov.eps = eps_list;

        lake::app::json manifest;
        if (*solve)
            manifest = lake::app::run_solve_elliptic(cfg, text, opt);
        else if (*sim)
            manifest = lake::app::run_simulate(cfg, text, opt);
        else if (*kern)
            manifest = lake::app::run_kernel_check(cfg, text, ov, opt);
        else {
            std::vector<std::filesystem::path> paths(manifests.begin(), manifests.end());
            manifest = lake::app::run_diagnose(cfg, text, paths, opt);
        }
        std::cout << (opt.out_dir / "manifest.json").string() << '\n';
        return 0;
    } catch (const lake::Error& e) {
        return report(lake::to_string(e.kind()), e.exit_code(), e.what());
    } catch (const std::exception& e) {
        return report("internal", 1, e.what());
    }
}
