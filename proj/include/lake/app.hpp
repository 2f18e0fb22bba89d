#pragma once

// Subcommand drivers behind the lakesim executable. Each run writes CSV
// artifacts and a manifest.json into the output directory and returns the
// manifest.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lake/config.hpp"
#include "lake/diagnostics.hpp"
#include "lake/elliptic.hpp"
#include "lake/hardy.hpp"
#include "lake/io.hpp"
#include "lake/kernels.hpp"
#include "lake/transport.hpp"

namespace lake::app {

using io::json;
namespace fs = std::filesystem;

inline constexpr const char* tool_version = "lakesim 1.0.0";

struct RunOptions {
    fs::path out_dir = "lake_out";
    unsigned long long seed = 0;
    int threads = 1;
    /// Record wall time in the manifest.
    bool timing = true;
};

/// --out wins, then LAKE_OUT_DIR, then the fallback.
inline fs::path resolve_out_dir(const std::optional<std::string>& flag, const fs::path& fallback = "lake_out")
{
    if (flag && !flag->empty())
        return *flag;
    if (const char* env = std::getenv("LAKE_OUT_DIR"); env && *env)
        return env;
    return fallback;
}

namespace detail {

inline json config_json(const RunConfig& cfg, const std::string& text)
{
    json echo = json::object();
    for (const auto& [k, v] : cfg.echo)
        echo[k] = v;
    return {{"text", text}, {"values", echo}};
}

class Manifest {
public:
    Manifest(std::string subcommand, const RunOptions& opt)
        : opt_(opt), start_(std::chrono::steady_clock::now())
    {
        doc_["tool"] = tool_version;
        doc_["subcommand"] = std::move(subcommand);
        doc_["seed"] = opt.seed;
        doc_["threads"] = opt.threads;
        doc_["outputs"] = json::object();
    }

    json& operator[](const std::string& key) { return doc_[key]; }
    json& outputs() { return doc_["outputs"]; }

    json finish(io::ArtifactSet& files)
    {
        doc_["files"] = files.files();
        if (opt_.timing)
            doc_["wall_time_s"] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        io::write_file(files.dir() / "manifest.json", doc_.dump(2) + "\n");
        return doc_;
    }

private:
    RunOptions opt_;
    std::chrono::steady_clock::time_point start_;
    json doc_;
};

inline std::string snapshot_name(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "snapshot_%04zu.csv", i);
    return buf;
}

inline std::string field_csv(const Grid& g, std::span<const double> omega, const VectorField& v)
{
    io::CsvWriter w({"i", "j", "x", "y", "omega", "v1", "v2"});
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto [i, j] = g.cell(k);
        const Vec2 c = g.center(k);
        w.row(i, j, c.x, c.y, omega[k], v.v1[k], v.v2[k]);
    }
    return w.str();
}

} // namespace detail

// ---------------------------------------------------------------------------

inline json run_solve_elliptic(const RunConfig& cfg, const std::string& config_text, const RunOptions& opt)
{
    require(cfg.elliptic.has_value(), ErrorKind::config_validation, "solve-elliptic needs an [elliptic] section");
    const auto& el = *cfg.elliptic;
    detail::Manifest man("solve-elliptic", opt);
    man["config"] = detail::config_json(cfg, config_text);

    const auto grid = build_grid(cfg.domain.profile(), cfg.domain.h,
                                 cfg.domain.shape == "polynomial" ? std::optional<Box>(cfg.domain.box)
                                                                  : std::nullopt);
    const WeightedPoissonProblem problem{grid, sample(grid, el.f)};
    SolveOptions so;
    so.tol = el.tol;
    so.max_iter = el.max_iter;
    const auto sol = solve(problem, so);
    const auto op = assemble(problem);

    io::ArtifactSet files(opt.out_dir);
    io::CsvWriter w({"i", "j", "x", "y", "psi", "phi_scaled", "v1", "v2", "flagged"});
    for (std::size_t k = 0; k < grid->size(); ++k) {
        const auto [i, j] = grid->cell(k);
        const Vec2 c = grid->center(k);
        w.row(i, j, c.x, c.y, sol.psi[k], sol.phi_scaled[k], sol.velocity.v1[k], sol.velocity.v2[k],
              static_cast<int>(sol.flagged[k]));
    }
    files.add("field.csv", "field", w.str());

    auto& out = man.outputs();
    out["cells"] = grid->size();
    out["residual"] = sol.residual;
    out["iterations"] = sol.iterations;
    out["energy"] = discrete_energy(op, sol.psi.values, problem.rhs.values);
    out["normal_trace_residual"] = normal_trace_residual(sol.velocity, BoundaryChart::for_grid(*grid), 64);
    if (el.exact) {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < grid->size(); ++k) {
            const double ex = (*el.exact)(grid->center(k));
            num += (sol.psi[k] - ex) * (sol.psi[k] - ex);
            den += ex * ex;
        }
        out["l2_error"] = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num * grid->cell_area());
    }
    return man.finish(files);
}

// ---------------------------------------------------------------------------

inline TransportConfig transport_config(const TransportSection& tr, int threads)
{
    TransportConfig c;
    c.cfl = tr.cfl;
    c.end_time = tr.end_time;
    c.viscosity = tr.eps;
    c.truncation = tr.R;
    c.output_every = tr.output_every;
    c.shifted_elliptic = tr.shifted_elliptic;
    c.threads = threads;
    return c;
}

/// omega0 from the expression, plus perturbation * (seeded smooth field scaled to max 1).
inline ScalarField initial_vorticity(const GridPtr& grid, const TransportSection& tr, unsigned long long seed)
{
    auto w = sample(grid, tr.omega0);
    if (tr.perturbation > 0.0) {
        const auto noise = random_smooth_field(grid, seed);
        double mx = 0.0;
        for (double v : noise.values)
            mx = std::max(mx, std::abs(v));
        if (mx > 0.0)
            for (std::size_t k = 0; k < w.size(); ++k)
                w[k] += tr.perturbation * noise[k] / mx;
    }
    return w;
}

inline GridPtr grid_for(const DomainConfig& d)
{
    return build_grid(d.profile(), d.h, d.shape == "polynomial" ? std::optional<Box>(d.box) : std::nullopt);
}

inline json run_simulate(const RunConfig& cfg, const std::string& config_text, const RunOptions& opt)
{
    require(cfg.transport.has_value(), ErrorKind::config_validation, "simulate needs a [transport] section");
    const auto& tr = *cfg.transport;
    const auto tcfg = transport_config(tr, opt.threads);
    tcfg.validate();
    detail::Manifest man("simulate", opt);
    man["config"] = detail::config_json(cfg, config_text);

    const auto grid = grid_for(cfg.domain);
    const auto w0 = initial_vorticity(grid, tr, opt.seed);
    for (double v : w0.values)
        require(std::isfinite(v), ErrorKind::config_validation, "omega0 is not finite on the grid");
    const TransportContext ctx(grid, tcfg.viscosity, tcfg.shifted_elliptic, tcfg.threads);

    io::ArtifactSet files(opt.out_dir);
    Trajectory traj;
    try {
        traj = simulate(w0, tcfg, ctx);
    } catch (const TransportAbort& abort) {
        const auto& s = abort.last_state();
        files.add("abort_state.csv", "abort-dump", detail::field_csv(*grid, s.omega.values, VectorField(grid)),
                  {{"time", s.time}});
        man.outputs()["abort_time"] = s.time;
        man.finish(files);
        throw;
    }

    for (std::size_t i = 0; i < traj.snapshots.size(); ++i)
        files.add(detail::snapshot_name(i), "snapshot",
                  detail::field_csv(*grid, traj.snapshots[i].omega.values, traj.velocities[i]),
                  {{"time", traj.records[i].time}});

    io::CsvWriter d({"t", "steps", "mass", "norm_b_1", "norm_b_2", "norm_b_4", "norm_b_inf", "norm_beps_1",
                     "norm_beps_2", "norm_beps_4", "norm_beps_inf", "trunc_b_2", "trunc_b_4", "trunc_beps_2",
                     "trunc_beps_4", "max_abs", "energy", "trace_residual"});
    for (const auto& r : traj.records) {
        d.row(std::vector<double>{r.time, static_cast<double>(r.steps), r.mass, r.norm_b[0], r.norm_b[1],
                                  r.norm_b[2], r.norm_b[3], r.norm_beps[0], r.norm_beps[1], r.norm_beps[2],
                                  r.norm_beps[3], r.truncated_b[0], r.truncated_b[1], r.truncated_beps[0],
                                  r.truncated_beps[1], r.max_abs, r.energy, r.trace_residual});
    }
    files.add("diagnostics.csv", "diagnostics", d.str());

    const auto& first = traj.records.front();
    const auto& last = traj.records.back();
    auto& out = man.outputs();
    out["cells"] = grid->size();
    out["steps"] = last.steps;
    out["final_time"] = last.time;
    double abs_mass = 0.0;
    const auto mw = ctx.mass_weights();
    for (std::size_t k = 0; k < grid->size(); ++k)
        abs_mass += mw[k] * std::abs(w0[k]);
    abs_mass *= grid->cell_area();
    out["mass_drift"] = abs_mass > 0.0 ? std::abs(last.mass - first.mass) / abs_mass : 0.0;
    out["l2b_drift"] = first.norm_b[1] > 0.0 ? std::abs(last.norm_b[1] - first.norm_b[1]) / first.norm_b[1] : 0.0;
    double max_abs = 0.0;
    for (const auto& r : traj.records)
        max_abs = std::max(max_abs, r.max_abs);
    out["max_abs_initial"] = first.max_abs;
    out["max_abs_overall"] = max_abs;
    out["maximum_principle"] = max_abs <= first.max_abs + 1e-10;
    return man.finish(files);
}

// ---------------------------------------------------------------------------

struct KernelOverrides {
    std::optional<double> a;
    std::optional<int> n;
    std::optional<std::vector<double>> eps;
    std::optional<int> levels;
    int random_samples = 0;
};

inline json run_kernel_check(const RunConfig& cfg, const std::string& config_text, const KernelOverrides& ov,
                             const RunOptions& opt)
{
    using namespace kernels;
    KernelSection ks = cfg.kernels;
    if (ov.a)
        ks.a = *ov.a;
    if (ov.n)
        ks.n = *ov.n;
    if (ov.eps)
        ks.eps = *ov.eps;
    if (ov.levels)
        ks.levels = *ov.levels;
    require(ks.a > 0.0, ErrorKind::config_validation, "kernel exponent a must be positive");
    require(ks.n >= 2 && ks.n <= 4, ErrorKind::config_validation, "dimension n must lie in [2, 4]");
    require(ks.levels >= 2, ErrorKind::config_validation, "levels must be at least 2");
    for (double e : ks.eps)
        require(e > 0.0 && e < 1.0, ErrorKind::config_validation, "kernel eps values must lie in (0, 1)");
    require(ov.random_samples >= 0, ErrorKind::config_validation, "sample count must be non-negative");

    detail::Manifest man("kernel-check", opt);
    man["config"] = detail::config_json(cfg, config_text);
    man["parameters"] = {{"a", ks.a}, {"n", ks.n}, {"eps", ks.eps}, {"levels", ks.levels},
                         {"calibration_eps", ks.calibration_eps}, {"h_fd", ks.h_fd},
                         {"random_samples", ov.random_samples}};
    io::ArtifactSet files(opt.out_dir);
    auto& out = man.outputs();

    auto point = [&](double t, double xn) {
        std::vector<double> c(static_cast<std::size_t>(ks.n), 0.0);
        c[0] = t;
        c.back() = xn;
        return HalfSpacePoint(std::move(c));
    };

    // Calibration and approximate identity.
    const auto cal = calibrate_gamma(ks.a, ks.n, ks.calibration_eps, point(0.0, 0.5));
    out["gamma"] = cal.gamma;
    out["calibration_limit"] = cal.limit;
    io::CsvWriter ai({"x_n", "eps", "integral"});
    for (double xn : {0.3, 0.5, 0.7})
        for (double e : ks.eps)
            ai.row(xn, e, approx_identity_integral(KernelParams{ks.a, ks.n, cal.gamma, e}, point(0.0, xn)));
    files.add("approx_identity.csv", "approximate-identity", ai.str());

    // Model identity at a fixed pair.
    io::CsvWriter id({"eps", "h_fd", "relative_residual"});
    const std::vector<std::pair<HalfSpacePoint, HalfSpacePoint>> pair{{point(0.0, 0.8), point(0.3, 0.5)}};
    double worst_identity = 0.0;
    for (double e : ks.eps)
        for (double h : {2.0 * ks.h_fd, ks.h_fd, 0.5 * ks.h_fd}) {
            const auto rep = verify_model_identity(KernelParams{ks.a, ks.n, cal.gamma, e}, pair, h);
            id.row(e, h, rep.max_relative);
            if (h == ks.h_fd)
                worst_identity = std::max(worst_identity, rep.max_relative);
        }
    files.add("identity.csv", "model-identity", id.str());
    out["identity_residual"] = worst_identity;

    // Decay bounds.
    auto pairs = scale_sweep_pairs(ks.n, 1e-3, 1.0, ks.levels);
    const std::size_t sweep_count = pairs.size();
    if (ov.random_samples > 0) {
        std::mt19937_64 rng(opt.seed);
        std::uniform_real_distribution<double> ut(-1.0, 1.0);
        std::uniform_real_distribution<double> un(0.0, 1.0);
        auto draw = [&] {
            std::vector<double> c(static_cast<std::size_t>(ks.n));
            for (int i = 0; i + 1 < ks.n; ++i)
                c[static_cast<std::size_t>(i)] = ut(rng);
            c.back() = un(rng);
            return HalfSpacePoint(std::move(c));
        };
        for (int s = 0; s < ov.random_samples; ++s) {
            auto x = draw();
            auto y = draw();
            if (distance(x, y) > 1e-3)
                pairs.emplace_back(std::move(x), std::move(y));
        }
    }
    const bool asserted = ks.a >= 1.0;
    out["bounds_asserted"] = asserted;
    io::CsvWriter bw({"eps", "k", "sample", "r", "ratio", "weighted", "near_diagonal"});
    io::CsvWriter sw({"eps", "k", "max_ratio", "max_weighted", "spread", "weighted_spread"});
    double worst_spread = 0.0;
    for (double e : ks.eps)
        for (int k = 0; k <= 2; ++k) {
            const auto rep = kernel_bound_report(KernelParams{ks.a, ks.n, cal.gamma, e}, k, pairs, !asserted);
            for (std::size_t i = 0; i < rep.samples.size(); ++i) {
                const auto& s = rep.samples[i];
                bw.row(e, k, i, s.r, s.ratio, s.weighted, s.near_diagonal);
            }
            // Random pairs land in sparse bins; the spread uses the sweep only.
            BoundReport sweep = rep;
            sweep.samples.resize(std::min(sweep_count, sweep.samples.size()));
            const double sp = scale_spread(sweep, false);
            const double wsp = k >= 1 ? scale_spread(sweep, true) : 1.0;
            sw.row(e, k, rep.max_ratio, rep.max_weighted, sp, wsp);
            worst_spread = std::max({worst_spread, sp, wsp});
        }
    files.add("bounds.csv", "bound-samples", bw.str());
    files.add("bounds_summary.csv", "bound-summary", sw.str());
    out["max_spread"] = worst_spread;
    out["indicial_root"] = indicial_root(ks.a);
    return man.finish(files);
}

// ---------------------------------------------------------------------------

struct LoadedRun {
    fs::path dir;
    json manifest;
    RunConfig config;
    GridPtr grid;
    Trajectory trajectory;
};

inline LoadedRun load_run(const fs::path& manifest_path)
{
    LoadedRun run;
    run.dir = manifest_path.parent_path();
    try {
        run.manifest = json::parse(io::read_file(manifest_path));
    } catch (const json::exception& e) {
        fail(ErrorKind::io, "cannot parse manifest " + manifest_path.string() + ": " + e.what());
    }
    require(run.manifest.value("subcommand", "") == "simulate", ErrorKind::configuration,
            manifest_path.string() + " is not a simulate manifest");
    const std::string text = run.manifest.at("config").at("text").get<std::string>();
    run.config = parse_config(text);
    run.grid = grid_for(run.config.domain);
    for (const auto& f : run.manifest.at("files")) {
        if (f.at("role") != "snapshot")
            continue;
        const auto path = run.dir / f.at("name").get<std::string>();
        const std::string content = io::read_file(path);
        require(io::git_blob_hash(content) == f.at("sha1").get<std::string>(), ErrorKind::io,
                "content hash mismatch for " + path.string());
        const auto table = io::read_csv(path);
        require(table.rows.size() == run.grid->size(), ErrorKind::configuration,
                path.string() + " does not match the configured grid");
        VorticityState s{ScalarField(run.grid, table.values("omega")), f.at("time").get<double>(),
                         run.config.transport ? run.config.transport->eps : 0.0};
        VectorField v(run.grid);
        v.v1 = table.values("v1");
        v.v2 = table.values("v2");
        TrajectoryRecord r;
        r.time = s.time;
        run.trajectory.records.push_back(r);
        run.trajectory.snapshots.push_back(std::move(s));
        run.trajectory.velocities.push_back(std::move(v));
    }
    require(!run.trajectory.snapshots.empty(), ErrorKind::configuration,
            manifest_path.string() + " lists no snapshots");
    return run;
}

inline bool same_grid(const LoadedRun& a, const LoadedRun& b)
{
    const auto& ga = *a.grid;
    const auto& gb = *b.grid;
    const auto& da = a.config.domain;
    const auto& db = b.config.domain;
    return ga.size() == gb.size() && ga.nx() == gb.nx() && ga.ny() == gb.ny() && ga.h() == gb.h()
        && da.shape == db.shape && da.a == db.a && da.ax == db.ax && da.ay == db.ay;
}

inline json run_diagnose(const RunConfig& cfg, const std::string& config_text,
                         const std::vector<fs::path>& manifests, const RunOptions& opt)
{
    require(manifests.size() == 1 || manifests.size() == 2, ErrorKind::config_validation,
            "diagnose takes one or two run manifests");
    std::vector<LoadedRun> runs;
    for (const auto& m : manifests)
        runs.push_back(load_run(m));
    if (runs.size() == 2)
        require(same_grid(runs[0], runs[1]), ErrorKind::configuration, "diagnose: runs use different grids");

    const auto& dc = cfg.diagnose;
    detail::Manifest man("diagnose", opt);
    man["config"] = detail::config_json(cfg, config_text);
    json inputs = json::array();
    for (const auto& m : manifests)
        inputs.push_back(m.string());
    man["inputs"] = inputs;
    io::ArtifactSet files(opt.out_dir);
    auto& out = man.outputs();
    std::string summary;

    // Gradient sweep and Hoelder quotients on the last snapshot of the first run.
    const auto& run = runs.front();
    const Grid& g = *run.grid;
    const double eps = run.config.transport ? run.config.transport->eps : 0.0;
    const auto& last = run.trajectory.snapshots.back();
    std::vector<double> bw(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        bw[k] = -(g.depth(k) + eps) * last.omega[k];
    io::CsvWriter gw({"p", "ratio"});
    bool any_data = false;
    for (double v : bw)
        any_data = any_data || v != 0.0;
    if (any_data) {
        const FactorizedStreamSolver solver(run.grid);
        const auto sol = solver.solve(bw);
        const auto fit = fit_gradient_constant(sol, bw, dc.p);
        for (std::size_t i = 0; i < fit.p_values.size(); ++i)
            gw.row(fit.p_values[i], fit.ratios[i]);
        out["gradient_constant"] = fit.constant;
        out["gradient_uniform"] = fit.uniform;
        summary += std::string(fit.uniform ? "PASS" : "FAIL") + " gradient constant uniform in p (C = "
            + io::format_double(fit.constant) + ")\n";
    } else {
        summary += "SKIP gradient constant: vorticity is identically zero\n";
    }
    files.add("gradient_sweep.csv", "gradient-sweep", gw.str());

    io::CsvWriter hw({"component", "mu", "quotient"});
    const auto pairs = random_pairs(g.defining(), static_cast<std::size_t>(dc.pairs), opt.seed);
    const auto& v = run.trajectory.velocities.back();
    for (double mu : dc.mu) {
        const auto q1 = holder_quotient(ScalarField(run.grid, v.v1), mu, pairs);
        const auto q2 = holder_quotient(ScalarField(run.grid, v.v2), mu, pairs);
        hw.row(1, mu, q1.quotient);
        hw.row(2, mu, q2.quotient);
    }
    files.add("holder.csv", "holder-quotients", hw.str());

    if (runs.size() == 2) {
        const auto rep = uniqueness_report(runs[0].trajectory, runs[1].trajectory, dc.p, dc.slack);
        io::CsvWriter uw({"t", "y", "envelope", "saturated"});
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            uw.row(rep.times[i], rep.gap[i], rep.envelope[i], static_cast<bool>(rep.saturated[i]));
        files.add("uniqueness.csv", "uniqueness", uw.str());
        out["M"] = rep.M;
        out["M_percentile"] = rep.M_percentile;
        out["C"] = rep.C;
        out["slack"] = rep.slack;
        out["uniqueness_pass"] = rep.pass;
        summary += std::string(rep.pass ? "PASS" : "FAIL") + " y(t) below " + io::format_double(rep.slack)
            + " x Osgood envelope (M = " + io::format_double(rep.M) + ", C = " + io::format_double(rep.C) + ")\n";
    }
    files.add("summary.txt", "summary", summary);
    return man.finish(files);
}

} // namespace lake::app
