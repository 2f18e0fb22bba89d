#pragma once

// Run configuration: INI-style sections of key = value lines, '#' comments.
//
//   [domain]     shape (disk | ellipse | polynomial), ax, ay, terms, box, center, a, h
//   [elliptic]   f, exact, tol, max_iter
//   [transport]  omega0, eps, cfl, T, R, output_every, elliptic_weight (b | b_eps), perturbation
//   [kernels]    a, n, eps, levels, calibration_eps, h_fd, seed
//   [diagnose]   p, mu, pairs, slack
//
// Numeric values may be constant expressions (h = 1/64). Every problem found
// is reported with its line number; unknown and duplicate keys are errors.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lake/error.hpp"
#include "lake/expression.hpp"
#include "lake/geometry.hpp"

namespace lake {

struct DomainConfig {
    std::string shape = "disk";
    double ax = 1.0;
    double ay = 1.0;
    std::vector<DefiningFunction::Term> terms;
    Box box{};
    Vec2 center{};
    double a = 1.0;
    double h = 1.0 / 64.0;

    DefiningFunction defining() const
    {
        if (shape == "ellipse")
            return DefiningFunction::ellipse(ax, ay);
        if (shape == "polynomial")
            return {"polynomial", terms, box, center};
        return DefiningFunction::unit_disk();
    }
    DepthProfile profile() const { return {defining(), a}; }
};

struct EllipticConfig {
    Expression f;
    std::optional<Expression> exact;
    double tol = 1e-10;
    int max_iter = 0;
};

struct TransportSection {
    Expression omega0;
    double eps = 0.0;
    double cfl = 0.9;
    double end_time = 1.0;
    std::optional<double> R;
    double output_every = 0.1;
    bool shifted_elliptic = false;
    double perturbation = 0.0;
};

struct KernelSection {
    double a = 1.0;
    int n = 2;
    std::vector<double> eps{1e-1, 1e-2, 1e-3};
    int levels = 11;
    std::vector<double> calibration_eps{3e-3, 1e-3, 3e-4, 1e-4};
    double h_fd = 1e-3;
};

struct DiagnoseSection {
    std::vector<double> p{3, 4, 8, 16, 32, 64};
    std::vector<double> mu{0.25, 0.5, 0.75};
    int pairs = 100000;
    double slack = 10.0;
};

struct RunConfig {
    DomainConfig domain;
    std::optional<EllipticConfig> elliptic;
    std::optional<TransportSection> transport;
    KernelSection kernels;
    bool has_kernels = false;
    DiagnoseSection diagnose;
    /// Normalized key = value lines, in file order, for the manifest echo.
    std::vector<std::pair<std::string, std::string>> echo;
};

namespace detail {

inline std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        out.push_back(trim(cur));
    return out;
}

struct Entry {
    std::string value;
    int line = 0;
};

class ConfigReader {
public:
    ConfigReader(std::map<std::string, std::map<std::string, Entry>> sections, std::vector<std::string>& errors)
        : sections_(std::move(sections)), errors_(errors)
    {
    }

    bool has(const std::string& sec) const { return sections_.count(sec) > 0; }

    const Entry* find(const std::string& sec, const std::string& key) const
    {
        auto s = sections_.find(sec);
        if (s == sections_.end())
            return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    void error(const Entry& e, const std::string& sec, const std::string& key, const std::string& msg) const
    {
        errors_.push_back("line " + std::to_string(e.line) + ": [" + sec + "] " + key + ": " + msg);
    }

    std::optional<double> number(const std::string& sec, const std::string& key) const
    {
        const Entry* e = find(sec, key);
        if (!e)
            return std::nullopt;
        try {
            const auto ex = Expression::parse(e->value);
            const double v = ex(0.0, 0.0);
            const auto probe = ex(0.37, -0.61);
            if (!(v == probe || (std::isnan(v) && std::isnan(probe)))) {
                error(*e, sec, key, "expected a number, got an expression in x, y");
                return std::nullopt;
            }
            if (!std::isfinite(v)) {
                error(*e, sec, key, "value is not finite");
                return std::nullopt;
            }
            return v;
        } catch (const Error& err) {
            error(*e, sec, key, "expected a number (" + std::string(err.what()) + ")");
            return std::nullopt;
        }
    }

    /// Reads a number and checks lo < v <= hi style bounds via a predicate.
    template <class Pred>
    void number_into(double& dst, const std::string& sec, const std::string& key, Pred&& ok, const char* range) const
    {
        if (auto v = number(sec, key)) {
            if (ok(*v))
                dst = *v;
            else
                error(*find(sec, key), sec, key, std::string("out of range: must be ") + range);
        }
    }

    template <class Pred>
    void integer_into(int& dst, const std::string& sec, const std::string& key, Pred&& ok, const char* range) const
    {
        if (auto v = number(sec, key)) {
            if (std::floor(*v) != *v || std::abs(*v) > 1e9)
                error(*find(sec, key), sec, key, "expected an integer");
            else if (!ok(static_cast<int>(*v)))
                error(*find(sec, key), sec, key, std::string("out of range: must be ") + range);
            else
                dst = static_cast<int>(*v);
        }
    }

    template <class Pred>
    void list_into(std::vector<double>& dst, const std::string& sec, const std::string& key, Pred&& ok,
                   const char* range) const
    {
        const Entry* e = find(sec, key);
        if (!e)
            return;
        std::vector<double> out;
        for (const auto& item : split(e->value, ',')) {
            try {
                const double v = Expression::parse(item)(0.0, 0.0);
                if (!ok(v)) {
                    error(*e, sec, key, "list entry " + item + " out of range: must be " + range);
                    return;
                }
                out.push_back(v);
            } catch (const Error&) {
                error(*e, sec, key, "bad list entry '" + item + "'");
                return;
            }
        }
        if (out.empty())
            error(*e, sec, key, "empty list");
        else
            dst = std::move(out);
    }

    std::optional<Expression> expression(const std::string& sec, const std::string& key) const
    {
        const Entry* e = find(sec, key);
        if (!e)
            return std::nullopt;
        try {
            return Expression::parse(e->value);
        } catch (const Error& err) {
            error(*e, sec, key, err.what());
            return std::nullopt;
        }
    }

private:
    std::map<std::string, std::map<std::string, Entry>> sections_;
    std::vector<std::string>& errors_;
};

inline const std::map<std::string, std::set<std::string>>& allowed_keys()
{
    static const std::map<std::string, std::set<std::string>> keys{
        {"domain", {"shape", "ax", "ay", "terms", "box", "center", "a", "h"}},
        {"elliptic", {"f", "exact", "tol", "max_iter"}},
        {"transport", {"omega0", "eps", "cfl", "T", "R", "output_every", "elliptic_weight", "perturbation"}},
        {"kernels", {"a", "n", "eps", "levels", "calibration_eps", "h_fd"}},
        {"diagnose", {"p", "mu", "pairs", "slack"}},
    };
    return keys;
}

} // namespace detail

/// Parses and validates a configuration; throws Error(config_validation) listing
/// every problem with its line number.
inline RunConfig parse_config(const std::string& text)
{
    using detail::Entry;
    std::vector<std::string> errors;
    std::map<std::string, std::map<std::string, Entry>> sections;
    RunConfig cfg;

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    const auto& allowed = detail::allowed_keys();
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty())
            continue;
        if (s.front() == '[') {
            if (s.back() != ']') {
                errors.push_back("line " + std::to_string(line) + ": malformed section header");
                continue;
            }
            section = detail::trim(s.substr(1, s.size() - 2));
            if (!allowed.count(section))
                errors.push_back("line " + std::to_string(line) + ": unknown section [" + section + "]");
            else if (sections.count(section))
                errors.push_back("line " + std::to_string(line) + ": duplicate section [" + section + "]");
            else
                sections[section];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(line) + ": expected key = value");
            continue;
        }
        const std::string key = detail::trim(s.substr(0, eq));
        std::string value = detail::trim(s.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (section.empty()) {
            errors.push_back("line " + std::to_string(line) + ": key '" + key + "' outside any section");
            continue;
        }
        if (!allowed.count(section))
            continue;
        if (!allowed.at(section).count(key)) {
            errors.push_back("line " + std::to_string(line) + ": unknown key '" + key + "' in [" + section + "]");
            continue;
        }
        auto& sec = sections[section];
        if (sec.count(key)) {
            errors.push_back("line " + std::to_string(line) + ": duplicate key '" + key + "' in [" + section
                             + "] (first set on line " + std::to_string(sec[key].line) + ")");
            continue;
        }
        sec[key] = Entry{value, line};
        cfg.echo.emplace_back(section + "." + key, value);
    }

    const detail::ConfigReader rd(sections, errors);
    auto positive = [](double v) { return v > 0.0; };
    auto nonneg = [](double v) { return v >= 0.0; };

    // [domain]
    if (const Entry* e = rd.find("domain", "shape")) {
        if (e->value == "disk" || e->value == "ellipse" || e->value == "polynomial")
            cfg.domain.shape = e->value;
        else
            rd.error(*e, "domain", "shape", "expected disk, ellipse or polynomial");
    }
    rd.number_into(cfg.domain.ax, "domain", "ax", positive, "> 0");
    rd.number_into(cfg.domain.ay, "domain", "ay", positive, "> 0");
    rd.number_into(cfg.domain.a, "domain", "a", positive, "> 0");
    rd.number_into(cfg.domain.h, "domain", "h", [](double v) { return v > 0.0 && v <= 0.5; }, "in (0, 0.5]");
    if (cfg.domain.shape == "polynomial") {
        const Entry* t = rd.find("domain", "terms");
        const Entry* b = rd.find("domain", "box");
        if (!t || !b) {
            errors.push_back("[domain] shape = polynomial needs 'terms' and 'box'");
        } else {
            for (const auto& term : detail::split(t->value, ';')) {
                std::istringstream ts(term);
                double c = 0.0;
                int px = 0, py = 0;
                if (!(ts >> c >> px >> py) || px < 0 || py < 0) {
                    rd.error(*t, "domain", "terms", "each term is 'coeff px py' with px, py >= 0");
                    break;
                }
                cfg.domain.terms.push_back({px, py, c});
            }
            std::istringstream bs(b->value);
            Box box;
            if (!(bs >> box.xmin >> box.xmax >> box.ymin >> box.ymax) || !(box.xmax > box.xmin)
                || !(box.ymax > box.ymin))
                rd.error(*b, "domain", "box", "expected 'xmin xmax ymin ymax' with positive extent");
            else
                cfg.domain.box = box;
            if (const Entry* c = rd.find("domain", "center")) {
                std::istringstream cs(c->value);
                if (!(cs >> cfg.domain.center.x >> cfg.domain.center.y))
                    rd.error(*c, "domain", "center", "expected 'cx cy'");
            }
        }
    }

    // [elliptic]
    if (rd.has("elliptic")) {
        EllipticConfig el;
        if (auto f = rd.expression("elliptic", "f"))
            el.f = *f;
        else if (!rd.find("elliptic", "f"))
            errors.push_back("[elliptic] missing required key 'f'");
        el.exact = rd.expression("elliptic", "exact");
        rd.number_into(el.tol, "elliptic", "tol", [](double v) { return v > 0.0 && v < 1.0; }, "in (0, 1)");
        rd.integer_into(el.max_iter, "elliptic", "max_iter", [](int v) { return v >= 0; }, ">= 0");
        cfg.elliptic = el;
    }

    // [transport]
    if (rd.has("transport")) {
        TransportSection tr;
        if (auto w = rd.expression("transport", "omega0"))
            tr.omega0 = *w;
        else if (!rd.find("transport", "omega0"))
            errors.push_back("[transport] missing required key 'omega0'");
        rd.number_into(tr.eps, "transport", "eps", nonneg, ">= 0");
        rd.number_into(tr.cfl, "transport", "cfl", [](double v) { return v > 0.0 && v <= 1.0; }, "in (0, 1]");
        rd.number_into(tr.end_time, "transport", "T", positive, "> 0");
        rd.number_into(tr.output_every, "transport", "output_every", positive, "> 0");
        rd.number_into(tr.perturbation, "transport", "perturbation", nonneg, ">= 0");
        if (const Entry* e = rd.find("transport", "R")) {
            if (e->value != "none") {
                double R = 0.0;
                rd.number_into(R, "transport", "R", positive, "> 0 or none");
                if (R > 0.0)
                    tr.R = R;
            }
        }
        if (const Entry* e = rd.find("transport", "elliptic_weight")) {
            if (e->value == "b_eps")
                tr.shifted_elliptic = true;
            else if (e->value != "b")
                rd.error(*e, "transport", "elliptic_weight", "expected b or b_eps");
        }
        cfg.transport = tr;
    }

    // [kernels]
    if (rd.has("kernels")) {
        cfg.has_kernels = true;
        auto& k = cfg.kernels;
        rd.number_into(k.a, "kernels", "a", positive, "> 0");
        rd.integer_into(k.n, "kernels", "n", [](int v) { return v >= 2 && v <= 4; }, "in [2, 4]");
        rd.list_into(k.eps, "kernels", "eps", [](double v) { return v > 0.0 && v < 1.0; }, "in (0, 1)");
        rd.integer_into(k.levels, "kernels", "levels", [](int v) { return v >= 2 && v <= 40; }, "in [2, 40]");
        rd.list_into(k.calibration_eps, "kernels", "calibration_eps", [](double v) { return v > 0.0 && v < 0.1; },
                     "in (0, 0.1)");
        rd.number_into(k.h_fd, "kernels", "h_fd", [](double v) { return v > 0.0 && v < 0.1; }, "in (0, 0.1)");
    }

    // [diagnose]
    if (rd.has("diagnose")) {
        auto& d = cfg.diagnose;
        rd.list_into(d.p, "diagnose", "p", [](double v) { return v >= 3.0 && v <= 64.0; }, "in [3, 64]");
        rd.list_into(d.mu, "diagnose", "mu", [](double v) { return v > 0.0 && v < 1.0; }, "in (0, 1)");
        rd.integer_into(d.pairs, "diagnose", "pairs", [](int v) { return v >= 1; }, ">= 1");
        rd.number_into(d.slack, "diagnose", "slack", [](double v) { return v >= 1.0; }, ">= 1");
    }

    if (!errors.empty()) {
        std::string msg;
        for (const auto& e : errors)
            msg += (msg.empty() ? "" : "; ") + e;
        fail(ErrorKind::config_validation, msg);
    }
    return cfg;
}

} // namespace lake
