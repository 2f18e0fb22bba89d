#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "lake/config.hpp"

using namespace lake;

namespace {

std::string error_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config_validation);
        return e.what();
    }
    return {};
}

} // namespace

TEST(Expression, ArithmeticAndPrecedence)
{
    EXPECT_DOUBLE_EQ(Expression::parse("1 + 2 * 3")(0, 0), 7.0);
    EXPECT_DOUBLE_EQ(Expression::parse("2 ^ 3 ^ 2")(0, 0), 512.0);
    EXPECT_DOUBLE_EQ(Expression::parse("-2 ^ 2")(0, 0), -4.0);
    EXPECT_DOUBLE_EQ(Expression::parse("(1 - 2) * -3")(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(Expression::parse("1/64")(0, 0), 1.0 / 64.0);
    EXPECT_DOUBLE_EQ(Expression::parse("1e-3 * 2")(0, 0), 2e-3);
    EXPECT_DOUBLE_EQ(Expression::parse("x - y")(3, 5), -2.0);
    EXPECT_DOUBLE_EQ(Expression::parse("r2")(3, 4), 25.0);
    EXPECT_DOUBLE_EQ(Expression::parse("(1 - r2)^2")(Vec2{0.5, 0.0}), 0.5625);
    EXPECT_NEAR(Expression::parse("exp(1) + sin(0) + cos(0)")(0, 0), std::exp(1.0) + 1.0, 1e-15);
}

TEST(Expression, ErrorsCarryColumns)
{
    for (const char* bad : {"1 +", "foo(1)", "2 * (x", "exp 1", "1 2", "$"}) {
        try {
            Expression::parse(bad);
            FAIL() << bad << " accepted";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::config_validation);
            EXPECT_NE(std::string(e.what()).find("column"), std::string::npos) << e.what();
        }
    }
}

TEST(Config, MinimalDiskConfig)
{
    const auto cfg = parse_config("[domain]\na = 1\nh = 1/64\n[elliptic]\nf = -8\n");
    EXPECT_EQ(cfg.domain.shape, "disk");
    EXPECT_DOUBLE_EQ(cfg.domain.a, 1.0);
    EXPECT_DOUBLE_EQ(cfg.domain.h, 1.0 / 64.0);
    ASSERT_TRUE(cfg.elliptic.has_value());
    EXPECT_DOUBLE_EQ(cfg.elliptic->f(0.3, 0.2), -8.0);
    EXPECT_FALSE(cfg.transport.has_value());
    ASSERT_EQ(cfg.echo.size(), 3u);
    EXPECT_EQ(cfg.echo[0].first, "domain.a");
}

TEST(Config, NegativeExponentNamesTheField)
{
    const auto msg = error_of("[domain]\na = -1\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[domain] a"), std::string::npos) << msg;
}

TEST(Config, DuplicateAndUnknownKeys)
{
    auto msg = error_of("[domain]\na = 1\na = 2\n");
    EXPECT_NE(msg.find("duplicate key 'a'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    msg = error_of("[domain]\ndepth = 1\n");
    EXPECT_NE(msg.find("unknown key 'depth'"), std::string::npos) << msg;
    msg = error_of("[lake]\n");
    EXPECT_NE(msg.find("unknown section"), std::string::npos) << msg;
    msg = error_of("a = 1\n");
    EXPECT_NE(msg.find("outside any section"), std::string::npos) << msg;
}

TEST(Config, CollectsEveryError)
{
    const auto msg = error_of("[domain]\na = 0\nh = 2\n[transport]\ncfl = 2\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos);
    EXPECT_NE(msg.find("line 3"), std::string::npos);
    EXPECT_NE(msg.find("line 5"), std::string::npos);
    EXPECT_NE(msg.find("omega0"), std::string::npos);
}

TEST(Config, TypeMismatch)
{
    EXPECT_NE(error_of("[domain]\nh = abc\n").find("expected a number"), std::string::npos);
    EXPECT_NE(error_of("[domain]\nh = x\n").find("expression in x, y"), std::string::npos);
    EXPECT_NE(error_of("[kernels]\nn = 2.5\n").find("integer"), std::string::npos);
    EXPECT_NE(error_of("[kernels]\neps = 0.1, 2\n").find("out of range"), std::string::npos);
}

TEST(Config, TransportSection)
{
    const auto cfg = parse_config(
        "[domain]\nshape = ellipse\nax = 1.5\nay = 1\n"
        "[transport]\nomega0 = exp(-r2)\neps = 0.01\nT = 0.5\nR = none\nelliptic_weight = b_eps\n");
    ASSERT_TRUE(cfg.transport.has_value());
    EXPECT_DOUBLE_EQ(cfg.transport->eps, 0.01);
    EXPECT_DOUBLE_EQ(cfg.transport->end_time, 0.5);
    EXPECT_FALSE(cfg.transport->R.has_value());
    EXPECT_TRUE(cfg.transport->shifted_elliptic);
    EXPECT_EQ(cfg.domain.defining().name(), "ellipse");
    EXPECT_NE(error_of("[transport]\nomega0 = 1\nelliptic_weight = c\n").find("b or b_eps"), std::string::npos);
}

TEST(Config, PolynomialDomain)
{
    const auto cfg = parse_config("[domain]\nshape = polynomial\nterms = 1 0 0; -1 2 0; -2 0 2\nbox = -1 1 -1 1\n");
    const auto phi = cfg.domain.defining();
    EXPECT_DOUBLE_EQ(phi({0.5, 0.5}), 1.0 - 0.25 - 0.5);
    EXPECT_NE(error_of("[domain]\nshape = polynomial\nterms = 1 0 0\n").find("needs 'terms' and 'box'"),
              std::string::npos);
    EXPECT_NE(error_of("[domain]\nshape = polynomial\nterms = 1 -1 0\nbox = -1 1 -1 1\n").find("px, py >= 0"),
              std::string::npos);
}

TEST(Config, KernelAndDiagnoseLists)
{
    const auto cfg = parse_config("[kernels]\na = 2\nn = 3\neps = 0.1, 1e-3\n[diagnose]\np = 3, 8\nmu = 0.5\n");
    EXPECT_TRUE(cfg.has_kernels);
    EXPECT_EQ(cfg.kernels.n, 3);
    EXPECT_EQ(cfg.kernels.eps, (std::vector<double>{0.1, 1e-3}));
    EXPECT_EQ(cfg.diagnose.p, (std::vector<double>{3.0, 8.0}));
    EXPECT_NE(error_of("[diagnose]\np = 2\n").find("in [3, 64]"), std::string::npos);
}
