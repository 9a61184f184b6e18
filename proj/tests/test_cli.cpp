#include <cmath>
#include <complex>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <spzeros/cli.hpp>

using namespace spzeros;

namespace
{

const double pi = std::numbers::pi;

errc code_of(const std::function<void()> &fn)
{
    try {
        fn();
    } catch (const error &e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return errc::invalid_argument;
}

const char *example1_text = R"({"coefficients":[[-1,0],[0,0],[2,0]],"fixed_point_hint":[1,0],"max_support":12,)"
                            R"("product_tolerance":1e-12,"n_cap":200,"root_tolerance":1e-13})";

problem_spec spec_for(int example, int max_support)
{
    problem_spec spec;
    if (example == 1) {
        spec.coefficients = {-1.0, 0.0, 2.0};
        spec.fixed_point_hint = 1.0;
    } else if (example == 2) {
        spec.coefficients = {-1.0, 0.0, 1.0};
        spec.fixed_point_hint = 1.6;
    } else {
        spec.coefficients = {-6.0, 0.0, 0.0, 1.0};
        spec.fixed_point_hint = 2.0;
    }
    spec.max_support = max_support;
    return spec;
}

problem_spec failing_spec()
{
    problem_spec spec;
    spec.coefficients = {0.34, 0.0, 1.0};
    spec.fixed_point_hint = {0.5, 0.3};
    spec.max_support = 3;
    return spec;
}

// Splits CRLF-terminated CSV text into rows of fields; no quoted fields expected.
std::vector<std::vector<std::string>> read_csv(const std::string &text)
{
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto end = text.find("\r\n", pos);
        EXPECT_NE(end, std::string::npos);
        const std::string line = text.substr(pos, end - pos);
        std::vector<std::string> fields;
        std::size_t a = 0;
        while (true) {
            const auto comma = line.find(',', a);
            fields.push_back(line.substr(a, comma == std::string::npos ? std::string::npos : comma - a));
            if (comma == std::string::npos) {
                break;
            }
            a = comma + 1;
        }
        rows.push_back(fields);
        pos = end + 2;
    }
    return rows;
}

} // namespace

TEST(Parse, ExampleOne)
{
    const auto spec = parse_problem(example1_text);
    EXPECT_EQ(spec.coefficients, (std::vector<complex>{-1.0, 0.0, 2.0}));
    EXPECT_EQ(spec.fixed_point_hint, complex(1.0));
    EXPECT_EQ(spec.max_support, 12);
    EXPECT_EQ(spec.product_tolerance, 1e-12);
    EXPECT_EQ(spec.n_cap, 200);
    EXPECT_EQ(spec.root_tolerance, 1e-13);
    const auto sys = build_system(spec);
    EXPECT_NEAR(std::abs(sys.b() - 1.0), 0.0, 1e-15);
}

TEST(Parse, ExampleThreeWithDefaults)
{
    const auto spec = parse_problem(R"({"coefficients":[[-6,0],[0,0],[0,0],[1,0]],"fixed_point_hint":[2,0]})");
    EXPECT_EQ(spec.coefficients.size(), 4u);
    EXPECT_EQ(spec.max_support, 10);
    EXPECT_EQ(spec.product_tolerance, 1e-13);
    EXPECT_EQ(spec.n_cap, 200);
    EXPECT_EQ(spec.root_tolerance, 1e-13);
    EXPECT_NEAR(std::abs(build_system(spec).a() - 12.0), 0.0, 1e-13);
}

TEST(Parse, SyntaxErrorsCarryPosition)
{
    try {
        parse_problem("{\n  \"coefficients\": [[-1,0],\n  ]\n}");
        FAIL() << "expected ParseError";
    } catch (const error &e) {
        EXPECT_EQ(e.code(), errc::parse_error);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("column"), std::string::npos);
    }
}

TEST(Parse, ValidationErrors)
{
    EXPECT_EQ(code_of([] { parse_problem(R"({"coefficients":[[1,0],[2,0]],"fixed_point_hint":[0,0]})"); }),
              errc::validation_error);
    EXPECT_EQ(code_of([] { parse_problem(R"({"coefficients":[[-1,0],[0,0],[2,0]],"fixed_point_hint":[1,0],)"
                                         R"("product_tolerence":1e-12})"); }),
              errc::validation_error);
    EXPECT_EQ(code_of([] { parse_problem(R"({"coefficients":[[-1,0],[0,0],[2,0]]})"); }), errc::validation_error);
    EXPECT_EQ(code_of([] { parse_problem(R"({"coefficients":[[-1,0],[0,0],[0,0]],"fixed_point_hint":[1,0]})"); }),
              errc::validation_error);
    EXPECT_EQ(code_of([] { parse_problem(R"({"coefficients":[[-1,0],[0],[2,0]],"fixed_point_hint":[1,0]})"); }),
              errc::validation_error);
    EXPECT_EQ(code_of([] { parse_problem(R"({"coefficients":[[-1,0],[0,0],[2,0]],"fixed_point_hint":[1,0],)"
                                         R"("n_cap":0})"); }),
              errc::validation_error);
    EXPECT_EQ(code_of([] { parse_problem(R"({"coefficients":[[-1,0],[0,0],[2,0]],"fixed_point_hint":[1,0],)"
                                         R"("product_tolerance":-1})"); }),
              errc::validation_error);
    EXPECT_EQ(code_of([] { parse_problem("[1, 2]"); }), errc::validation_error);
}

TEST(Parse, EnumerationGuard)
{
    auto spec = spec_for(2, 24);
    EXPECT_NO_THROW(validate_problem(spec));
    spec.max_support = 25;
    EXPECT_EQ(code_of([&] { validate_problem(spec); }), errc::validation_error);
    auto cubic = spec_for(3, 18);
    EXPECT_NO_THROW(validate_problem(cubic));
    cubic.max_support = 19; // 3^19 > 2^30
    EXPECT_EQ(code_of([&] { validate_problem(cubic); }), errc::validation_error);
}

TEST(ParseProperty, SerializeRoundtrip)
{
    std::vector<problem_spec> specs{spec_for(1, 12), spec_for(2, 0), spec_for(3, 7), failing_spec()};
    specs[1].product_tolerance = 3.0000000000000004e-13;
    specs[2].coefficients[1] = complex(0.1, -1.0 / 3.0);
    specs[3].n_cap = 17;
    specs[3].root_tolerance = 1e-11;
    for (const auto &spec : specs) {
        const auto text = serialize_problem(spec);
        EXPECT_EQ(parse_problem(text), spec) << text;
        EXPECT_EQ(serialize_problem(parse_problem(text)), text);
    }
}

TEST(Csv, Quoting)
{
    EXPECT_EQ(csv_field("1011"), "1011");
    EXPECT_EQ(csv_field(""), "");
    EXPECT_EQ(csv_field("11,0,3"), "\"11,0,3\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    std::ostringstream os;
    csv_writer csv(os);
    csv << "a" << 1.5 << 3 << "b,c";
    csv.end_row();
    csv << "";
    csv.end_row();
    EXPECT_EQ(os.str(), "a,1.5,3,\"b,c\"\r\n\r\n");
}

TEST(CsvProperty, RealsRoundTrip)
{
    for (double x : {0.1, -pi * pi / 8.0, 1e-300, 5e-324, 1.0 / 3.0, 6.02214076e23, -0.0}) {
        EXPECT_EQ(std::strtod(format_real(x).c_str(), nullptr), x);
    }
}

TEST(RunZeros, ExampleOne)
{
    std::ostringstream out, log;
    EXPECT_EQ(run_zeros(spec_for(1, 3), out, log), exit_code::ok);
    const auto rows = read_csv(out.str());
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"sigma", "re", "im", "terms_used", "tail_estimate"}));
    EXPECT_EQ(rows[1][0], "");
    EXPECT_NEAR(std::stod(rows[1][1]), -pi * pi / 8.0, 1e-12);
    EXPECT_EQ(std::stod(rows[1][2]), 0.0);
    EXPECT_EQ(rows[2][0], "1");
    EXPECT_NEAR(std::stod(rows[2][1]), -9.0 * pi * pi / 8.0, 1e-11);
    EXPECT_EQ(rows[8][0], "111");
}

TEST(RunZeros, SupportZeroAndRowCounts)
{
    std::ostringstream out, log;
    EXPECT_EQ(run_zeros(spec_for(1, 0), out, log), exit_code::ok);
    EXPECT_EQ(read_csv(out.str()).size(), 2u);
    std::ostringstream out2;
    EXPECT_EQ(run_zeros(spec_for(2, 10), out2, log), exit_code::ok);
    EXPECT_EQ(read_csv(out2.str()).size(), 1025u);
}

TEST(RunZeros, PartialOutputOnNonConvergence)
{
    auto spec = spec_for(1, 2);
    spec.n_cap = 5;
    std::ostringstream out, log;
    EXPECT_EQ(run_zeros(spec, out, log), exit_code::numeric);
    const auto rows = read_csv(out.str());
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0].back(), "converged");
    EXPECT_EQ(rows[1].back(), "false");
    EXPECT_NE(log.str().find("NonConvergence"), std::string::npos);
}

TEST(RunZeros, HypothesisProbe)
{
    std::ostringstream out, log;
    zeros_options opts;
    opts.check_hypothesis = true;
    EXPECT_EQ(run_zeros(failing_spec(), out, log, opts), exit_code::hypothesis);
    EXPECT_TRUE(out.str().empty());
    EXPECT_NE(log.str().find("FAILED"), std::string::npos);

    std::ostringstream out1, log1;
    EXPECT_EQ(run_zeros(spec_for(1, 2), out1, log1, opts), exit_code::ok);
    EXPECT_NE(log1.str().find("passed"), std::string::npos);
}

TEST(RunInvert, MatchesZerosAtOrigin)
{
    std::ostringstream zeros, inv, log;
    run_zeros(spec_for(1, 3), zeros, log);
    invert_options opts;
    EXPECT_EQ(run_invert(spec_for(1, 3), opts, inv, log), exit_code::ok);
    const auto a = read_csv(zeros.str()), b = read_csv(inv.str());
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(b[0].back(), "prefactor_exponent");
    for (std::size_t i = 1; i < a.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            EXPECT_EQ(a[i][k], b[i][k]);
        }
        EXPECT_EQ(b[i].back(), "");
    }
}

TEST(RunInvert, FixedPointRowsCarryExponent)
{
    invert_options opts;
    opts.w = 1.0;
    std::ostringstream out, log;
    EXPECT_EQ(run_invert(spec_for(1, 3), opts, out, log), exit_code::ok);
    const auto rows = read_csv(out.str());
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows[1], (std::vector<std::string>{"", "0", "0", "0", "0", ""}));
    EXPECT_EQ(rows[2][0], "1");
    EXPECT_EQ(rows[2].back(), "1");
    EXPECT_EQ(rows[3][0], "01");
    EXPECT_EQ(rows[3].back(), "2");
    // g_01(b) = a g_1(b).
    EXPECT_NEAR(std::stod(rows[3][1]), 4.0 * std::stod(rows[2][1]), 1e-12 * std::abs(std::stod(rows[3][1])));
}

TEST(RunInvert, CircleWithVerify)
{
    invert_options opts;
    opts.circle = std::make_pair(8.0, 5);
    opts.verify = true;
    std::ostringstream out, log;
    EXPECT_EQ(run_invert(spec_for(2, 6), opts, out, log), exit_code::ok) << log.str();
    const auto rows = read_csv(out.str());
    ASSERT_EQ(rows.size(), 1u + 5u * 64u);
    EXPECT_EQ(rows[0].front(), "w_re");
    EXPECT_EQ(rows[0].back(), "roundtrip_error");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_TRUE(std::isfinite(std::stod(rows[i][3])));
        EXPECT_LE(std::stod(rows[i].back()), 1e-7);
    }
    EXPECT_NE(log.str().find("roundtrip"), std::string::npos);
}

TEST(RunInvert, BadCircle)
{
    invert_options opts;
    opts.circle = std::make_pair(1.0, 0);
    std::ostringstream out, log;
    EXPECT_EQ(code_of([&] { run_invert(spec_for(1, 1), opts, out, log); }), errc::invalid_argument);
}

TEST(RunMoments, ExampleThree)
{
    std::ostringstream out, log;
    EXPECT_EQ(run_moments(spec_for(3, 12), {1, 2}, 0.0, out, log), exit_code::ok) << log.str();
    const auto rows = read_csv(out.str());
    ASSERT_EQ(rows.size(), 1u + 2u * 13u);
    EXPECT_EQ(rows[0][6], "abs_error");
    const auto &last1 = rows[13];
    EXPECT_EQ(last1[0], "1");
    EXPECT_EQ(last1[1], "12");
    EXPECT_LE(std::stod(last1[6]), std::stod(last1[7]) + 1e-8);
    const auto &last2 = rows[26];
    EXPECT_NEAR(std::stod(last2[4]), 9.0 / 11.0, 1e-14);
    EXPECT_LE(std::stod(last2[6]), 1e-12);
}

TEST(RunMoments, Refusals)
{
    std::ostringstream out, log;
    EXPECT_EQ(code_of([&] { run_moments(failing_spec(), {1}, 0.0, out, log); }), errc::divergent_moment);
    EXPECT_EQ(exit_code_for(errc::divergent_moment), exit_code::usage);
    EXPECT_EQ(code_of([&] { run_moments(spec_for(3, 3), {1}, 2.0, out, log); }), errc::invalid_argument);
}

TEST(RunWh, ExampleOneFirstZero)
{
    std::ostringstream out, log;
    EXPECT_EQ(run_wh(spec_for(1, 16), {-pi * pi / 8.0, complex(-1.0, 0.5)}, 0.3, out, log), exit_code::ok)
        << log.str();
    const auto rows = read_csv(out.str());
    ASSERT_EQ(rows.size(), 3u);
    for (int k : {2, 4, 6}) {
        EXPECT_NEAR(std::stod(rows[1][k]), 0.0, 1e-3);
    }
    EXPECT_NEAR(std::stod(rows[1][2]), 0.0, 1e-12);
}

TEST(RunWh, OrderTooLarge)
{
    std::ostringstream out, log;
    EXPECT_EQ(code_of([&] { run_wh(failing_spec(), {0.1}, 0.0, out, log); }), errc::order_too_large);
}

TEST(RunCheck, PassingAndFailingSystems)
{
    std::ostringstream out;
    EXPECT_EQ(run_check(spec_for(2, 10), out), exit_code::ok) << out.str();
    EXPECT_NE(out.str().find("functional equation: PASS"), std::string::npos);
    EXPECT_NE(out.str().find("roundtrip f(g(w)) = w: PASS"), std::string::npos);

    std::ostringstream bad;
    EXPECT_EQ(run_check(failing_spec(), bad), exit_code::hypothesis);
    EXPECT_NE(bad.str().find("hypothesis1: FAILED"), std::string::npos);
}

TEST(ExitCodes, Mapping)
{
    EXPECT_EQ(exit_code_for(errc::non_convergence), 2);
    EXPECT_EQ(exit_code_for(errc::zero_denominator), 2);
    EXPECT_EQ(exit_code_for(errc::basin_escape), 2);
    EXPECT_EQ(exit_code_for(errc::ambiguous_clustering), 2);
    EXPECT_EQ(exit_code_for(errc::fixed_point_violation), 2);
    EXPECT_EQ(exit_code_for(errc::parse_error), 1);
    EXPECT_EQ(exit_code_for(errc::validation_error), 1);
}

TEST(Scatter, PlotsPointsInsideFrame)
{
    const auto empty = render_scatter({}, 4, 3);
    EXPECT_EQ(empty.pixels, std::vector<std::uint8_t>(12, 255));
    const auto img = render_scatter({complex(0.0, 0.0), complex(1.0, 1.0), complex(NAN, 0.0)}, 20, 20);
    int dark = 0;
    for (auto p : img.pixels) {
        dark += p == 0 ? 1 : 0;
    }
    EXPECT_EQ(dark, 2);
    // Upper right point lands in the upper right quadrant.
    bool upper_right = false;
    for (int y = 0; y < 10; ++y) {
        for (int x = 10; x < 20; ++x) {
            upper_right = upper_right || img.pixels[y * 20 + x] == 0;
        }
    }
    EXPECT_TRUE(upper_right);
    EXPECT_EQ(code_of([] { render_scatter({}, 0, 3); }), errc::invalid_argument);
}

TEST(CliProperty, OutputIndependentOfThreads)
{
    std::ostringstream one, four, log;
    ::setenv("SPZEROS_THREADS", "1", 1);
    run_zeros(spec_for(3, 6), one, log);
    ::setenv("SPZEROS_THREADS", "4", 1);
    run_zeros(spec_for(3, 6), four, log);
    ::unsetenv("SPZEROS_THREADS");
    EXPECT_EQ(one.str(), four.str());
}
