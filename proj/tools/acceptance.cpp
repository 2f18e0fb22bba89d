// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failing criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lake/app.hpp"
#include "lake/diagnostics.hpp"
#include "lake/elliptic.hpp"
#include "lake/hardy.hpp"
#include "lake/kernels.hpp"
#include "lake/transport.hpp"

using namespace lake;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& detail)
{
    if (!pass)
        ++failures;
    std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

GridPtr disk(double a, double h) { return build_grid({DefiningFunction::unit_disk(), a}, h); }

ScalarField initial_blob(const GridPtr& g)
{
    return sample(g, [](Vec2 p) { return std::exp(-4.0 * ((p.x - 0.3) * (p.x - 0.3) + p.y * p.y)) + 0.3 * p.y; });
}

struct ManufacturedRun {
    double error = 0.0;
    double trace = 0.0;
    double seconds = 0.0;
};

ManufacturedRun manufactured(double a, double h)
{
    const auto t0 = Clock::now();
    const auto g = disk(a, h);
    const auto sol = solve(WeightedPoissonProblem{g, ScalarField(g, -4.0 * (a + 1.0))}, 1e-12, 0);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < g->size(); ++k) {
        const Vec2 c = g->center(k);
        const double ex = std::pow(1.0 - dot(c, c), a + 1.0);
        num += (sol.psi[k] - ex) * (sol.psi[k] - ex);
        den += ex * ex;
    }
    ManufacturedRun r;
    r.error = std::sqrt(num / den);
    r.trace = normal_trace_residual(sol.velocity, BoundaryChart::for_grid(*g), 256);
    r.seconds = seconds_since(t0);
    return r;
}

void criteria_1_and_2()
{
    bool ok1 = true, ok2 = true;
    std::string d1, d2;
    for (double a : {0.5, 1.0, 2.0}) {
        const auto c = manufactured(a, 1.0 / 64.0);
        const auto f = manufactured(a, 1.0 / 128.0);
        const double order = std::log2(c.error / f.error);
        ok1 = ok1 && c.error <= 0.02 && order >= 1.0 && c.seconds < 30.0 && f.seconds < 30.0;
        d1 += fmt("a=%g: err(1/64)=%.2e order=%.2f t=%.1fs; ", a, c.error, order, std::max(c.seconds, f.seconds));
        ok2 = ok2 && c.trace <= 5.0 / 64.0 && f.trace <= 5.0 / 128.0 && f.trace < c.trace;
        d2 += fmt("a=%g: %.2e -> %.2e; ", a, c.trace, f.trace);
    }
    report(1, ok1, "manufactured disk " + d1);
    report(2, ok2, "normal trace residual h=1/64 -> 1/128 (bound 5h) " + d2);
}

void criterion_3()
{
    const auto g = disk(1.0, 1.0 / 128.0);
    const std::vector<double> ps{3, 4, 8, 16, 32, 64};
    bool ok = true;
    std::string d;
    for (unsigned long long seed = 1; seed <= 3; ++seed) {
        const auto bw = random_smooth_field(g, seed);
        const auto sol = solve(WeightedPoissonProblem{g, bw});
        const auto fit = fit_gradient_constant(sol, bw.values, ps);
        ok = ok && fit.uniform;
        d += fmt("seed %llu: max=%.3f low=%.3f; ", seed, fit.constant, fit.low_max);
    }
    report(3, ok, "||grad v||_p / (p ||b w||_p), p in 3..64, h=1/128: " + d);
}

void criterion_4()
{
    using namespace kernels;
    const std::vector<double> eps{3e-3, 1e-3, 3e-4, 1e-4};
    const auto cal = calibrate_gamma(1.0, 2, eps, {0.0, 0.5});
    bool integrals_ok = true;
    std::string d = fmt("gamma=%.5f (2/pi=%.5f); integrals at eps=1e-3:", cal.gamma, 2.0 / std::numbers::pi);
    for (double xn : {0.3, 0.5, 0.7}) {
        const double I = approx_identity_integral({1.0, 2, cal.gamma, 1e-3}, {0.0, xn});
        integrals_ok = integrals_ok && I >= 0.95 && I <= 1.05;
        d += fmt(" %.4f", I);
    }
    const KernelParams p{1.0, 2, cal.gamma, 0.1};
    const HalfSpacePoint x{0.0, 0.5};
    const HalfSpacePoint y{0.5, 0.5};
    const double ratio = eval_G_eps(p.with_eps(1e-3), x, y) / eval_G_eps(p, x, y);
    const bool decay_ok = ratio <= 1e-3;
    d += fmt(" [%s]; G^1e-3/G^1e-1 at x=(0,0.5), y=(0.5,0.5): %.3e (needs <= 1e-3) [%s]", integrals_ok ? "ok" : "no",
             ratio, decay_ok ? "ok" : "no");
    report(4, integrals_ok && decay_ok, d);
}

void criterion_5()
{
    using namespace kernels;
    const KernelParams p{1.0, 2, 2.0 / std::numbers::pi, 0.1};
    const std::vector<std::pair<HalfSpacePoint, HalfSpacePoint>> pair{{{0.0, 0.8}, {0.3, 0.5}}};
    std::vector<double> res;
    for (double h : {4e-3, 2e-3, 1e-3})
        res.push_back(verify_model_identity(p, pair, h).max_relative);
    const double o1 = std::log2(res[0] / res[1]);
    const double o2 = std::log2(res[1] / res[2]);
    const bool ok = res[2] <= 1e-4 && o1 > 1.8 && o2 > 1.8;
    report(5, ok, fmt("relative residual %.2e, %.2e, %.2e at h_fd = 4e-3, 2e-3, 1e-3; orders %.2f, %.2f", res[0],
                      res[1], res[2], o1, o2));
}

void criterion_6()
{
    using namespace kernels;
    const auto pairs = scale_sweep_pairs(2, 1e-3, 1.0, 11);
    double worst = 0.0;
    std::string d;
    for (double a : {1.0, 2.0}) {
        double wa = 0.0;
        for (double e : {0.1, 0.01, 0.001})
            for (int k = 0; k <= 2; ++k) {
                const auto rep = kernel_bound_report({a, 2, 2.0 / std::numbers::pi, e}, k, pairs);
                wa = std::max(wa, scale_spread(rep, false));
                if (k >= 1)
                    wa = std::max(wa, scale_spread(rep, true));
            }
        worst = std::max(worst, wa);
        d += fmt("a=%g: max spread %.2f; ", a, wa);
    }
    report(6, worst < 1e3, d + "bound 1e3 over |x-y| in [1e-3, 1], k = 0, 1, 2, eps in {0.1, 0.01, 0.001}");
}

void criterion_7()
{
    std::string d;
    // Inviscid conservation.
    const auto g = disk(1.0, 1.0 / 128.0);
    const auto w0 = initial_blob(g);
    TransportConfig c;
    c.end_time = 1.0;
    c.output_every = 0.1;
    const TransportContext ctx(g, 0.0);
    const auto traj = simulate(w0, c, ctx);
    double abs_mass = 0.0;
    const auto mw = ctx.mass_weights();
    for (std::size_t k = 0; k < g->size(); ++k)
        abs_mass += mw[k] * std::abs(w0[k]);
    abs_mass *= g->cell_area();
    double mass_drift = 0.0, l2_drift = 0.0;
    const auto& r0 = traj.records.front();
    bool max_ok = true;
    for (const auto& r : traj.records) {
        mass_drift = std::max(mass_drift, std::abs(r.mass - r0.mass) / abs_mass);
        l2_drift = std::max(l2_drift, std::abs(r.norm_b[1] - r0.norm_b[1]) / r0.norm_b[1]);
        max_ok = max_ok && r.max_abs <= r0.max_abs + 1e-10;
    }
    const bool inviscid_ok = mass_drift <= 1e-12 && l2_drift <= 0.03 && max_ok;
    d += fmt("eps=0 h=1/128 T=1: mass drift %.1e, L2(b) drift %.2f%%, max ok=%d [%s]; ", mass_drift, 100 * l2_drift,
             max_ok, inviscid_ok ? "ok" : "no");

    // Viscous runs: untruncated norms, maximum, truncated norms at R = max|w0| / 2.
    const auto gv = disk(1.0, 1.0 / 64.0);
    const auto v0 = initial_blob(gv);
    double m0 = 0.0;
    for (double w : v0.values)
        m0 = std::max(m0, std::abs(w));
    bool plain_ok = true, max_ok_v = true, trunc_ok = true;
    std::string td;
    for (double eps : {0.1, 0.01, 0.001}) {
        TransportConfig cv;
        cv.viscosity = eps;
        cv.end_time = 1.0;
        cv.output_every = 0.1;
        cv.truncation = 0.5 * m0;
        const auto tv = simulate(v0, cv);
        double worst_growth = 0.0;
        for (std::size_t i = 1; i < tv.records.size(); ++i) {
            const auto& a = tv.records[i - 1];
            const auto& b = tv.records[i];
            for (std::size_t p = 1; p <= 2; ++p) {
                plain_ok = plain_ok && b.norm_b[p] <= a.norm_b[p] * (1.0 + 1e-12)
                    && b.norm_beps[p] <= a.norm_beps[p] * (1.0 + 1e-12);
            }
            max_ok_v = max_ok_v && b.max_abs <= m0 + 1e-10;
            for (std::size_t p = 0; p < 2; ++p)
                worst_growth = std::max(worst_growth, b.truncated_b[p] / a.truncated_b[p] - 1.0);
        }
        trunc_ok = trunc_ok && worst_growth <= 1e-12;
        td += fmt(" eps=%g: %+.1e", eps, worst_growth);
    }
    d += fmt("viscous h=1/64: untruncated L2/L4 non-increasing=%d, max ok=%d; truncated R=max|w0|/2 largest "
             "step growth:%s [%s]",
             plain_ok, max_ok_v, td.c_str(), trunc_ok ? "ok" : "no");
    report(7, inviscid_ok && plain_ok && max_ok_v && trunc_ok, d);
}

void criterion_8()
{
    const auto g = disk(1.0, 1.0 / 64.0);
    const auto w0 = initial_blob(g);
    const auto noise = random_smooth_field(g, 42);
    double mx = 0.0;
    for (double v : noise.values)
        mx = std::max(mx, std::abs(v));
    TransportConfig c;
    c.end_time = 1.0;
    c.output_every = 0.1;
    const TransportContext ctx(g, 0.0);
    const auto A = simulate(w0, c, ctx);
    const std::vector<double> ps{3, 4, 8, 16, 32, 64};
    bool ok = true;
    std::string d;
    for (double eta : {1e-6, 5e-7}) {
        auto wb = w0;
        for (std::size_t k = 0; k < wb.size(); ++k)
            wb[k] += eta * noise[k] / mx;
        const auto rep = uniqueness_report(A, simulate(wb, c, ctx), ps, 10.0);
        double worst = 0.0;
        for (std::size_t i = 1; i < rep.times.size(); ++i)
            if (rep.envelope[i] > 0.0)
                worst = std::max(worst, rep.gap[i] / rep.envelope[i]);
        ok = ok && rep.pass;
        d += fmt("eta=%g: M=%.4f C=%.4f max y/envelope (t > 0)=%.3f; ", eta, rep.M, rep.C, worst);
    }
    const auto same = uniqueness_report(A, simulate(w0, c, ctx), ps, 10.0);
    bool zero = true;
    for (double y : same.gap)
        zero = zero && y == 0.0;
    ok = ok && zero;
    report(8, ok, d + fmt("identical runs y == 0: %s", zero ? "yes" : "no"));
}

void criterion_9()
{
    using namespace hardy;
    const Function one = [](double) { return 1.0; };
    double e1 = 0.0;
    for (double alpha : {0.5, 1.0, 2.0, 3.0})
        for (double x : {0.0, 0.1, 0.5, 0.9, 1.0}) {
            e1 = std::max(e1, std::abs(hardy_I(alpha, one, x) - 1.0 / alpha));
            e1 = std::max(e1, std::abs(hardy_J(alpha, one, x) - (1.0 - std::pow(x, alpha)) / alpha));
        }
    std::mt19937_64 rng(9);
    std::normal_distribution<double> cn;
    std::uniform_real_distribution<double> kn(0.5, 4.0);
    double e2 = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const double c1 = cn(rng), c2 = cn(rng), c3 = cn(rng), k1 = kn(rng), k2 = kn(rng);
        auto u = [=](double x) { return c1 * std::sin(k1 * x) + c2 * (std::exp(k2 * x) - 1.0) + c3 * x * x; };
        const Function du = [=](double x) {
            return c1 * k1 * std::cos(k1 * x) + c2 * k2 * std::exp(k2 * x) + 2.0 * c3 * x;
        };
        for (double x : {0.05, 0.25, 0.5, 0.75, 1.0})
            e2 = std::max(e2, std::abs(x * hardy_I(1.0, du, x) - u(x)));
    }
    double e3 = 0.0;
    double phi_max = 0.0;
    std::vector<double> xs;
    for (int i = 0; i <= 50; ++i)
        xs.push_back(i / 50.0);
    for (double a : {0.5, 1.0, 2.0}) {
        const double c = 1.3;
        const auto s = solve_fuchsian_1d(a, [c](double) { return c; }, xs);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double x = xs[i];
            e3 = std::max(e3, std::abs(s.u[i] - (c * std::pow(x, a + 1.0) / (a + 1.0)
                                                 - c * std::pow(x, a + 2.0) / (a + 2.0))));
            phi_max = std::max(phi_max, std::abs(s.phi[i]));
        }
    }
    const bool ok = e1 <= 1e-8 && e2 <= 1e-6 && e3 <= 1e-6 && std::isfinite(phi_max);
    report(9, ok, fmt("I/J on constants err %.1e; x I_1(u') reconstruction err %.1e (20 samples); Fuchsian closed form "
                      "err %.1e, max |Phi| %.3f",
                      e1, e2, e3, phi_max));
}

void criterion_10()
{
    namespace fs = std::filesystem;
    const std::string text = "[domain]\na = 1\nh = 1/48\n"
                             "[transport]\nomega0 = exp(-4*((x-0.3)^2 + y^2)) + 0.3*y\neps = 0.01\nT = 0.3\n"
                             "output_every = 0.1\nperturbation = 1e-6\n";
    const auto cfg = parse_config(text);
    const auto root = fs::temp_directory_path() / "lake_acceptance_determinism";
    fs::remove_all(root);
    app::RunOptions o1;
    o1.out_dir = root / "a";
    o1.seed = 17;
    auto o2 = o1;
    o2.out_dir = root / "b";
    o2.threads = 2;
    const auto m1 = app::run_simulate(cfg, text, o1);
    const auto m2 = app::run_simulate(cfg, text, o2);
    bool same = m1["files"].size() == m2["files"].size();
    std::size_t bytes = 0;
    for (std::size_t i = 0; same && i < m1["files"].size(); ++i) {
        const std::string name = m1["files"][i]["name"];
        const auto a = io::read_file(root / "a" / name);
        same = same && a == io::read_file(root / "b" / name) && m1["files"][i]["sha1"] == m2["files"][i]["sha1"];
        bytes += a.size();
    }
    report(10, same,
           fmt("repeated simulate (seed 17, threads 1 vs 2): %zu files, %zu bytes byte-identical: %s",
               m1["files"].size(), bytes, same ? "yes" : "no"));
    fs::remove_all(root);
}

template <class Fn>
void guarded(int id, Fn&& fn)
{
    try {
        fn();
    } catch (const std::exception& e) {
        report(id, false, std::string("error: ") + e.what());
    }
}

} // namespace

int main()
{
    const auto t0 = Clock::now();
    guarded(1, criteria_1_and_2);
    guarded(3, criterion_3);
    guarded(4, criterion_4);
    guarded(5, criterion_5);
    guarded(6, criterion_6);
    guarded(7, criterion_7);
    guarded(8, criterion_8);
    guarded(9, criterion_9);
    guarded(10, criterion_10);
    std::printf("%d of 10 criteria failed (%.1f s)\n", failures, seconds_since(t0));
    return failures;
}
