#ifndef SPZEROS_CLI_HPP
#define SPZEROS_CLI_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include <spzeros/branch.hpp>
#include <spzeros/error.hpp>
#include <spzeros/factor.hpp>
#include <spzeros/system.hpp>
#include <spzeros/verify.hpp>

namespace spzeros
{

struct problem_spec {
    std::vector<complex> coefficients;
    complex fixed_point_hint;
    int max_support = 10;
    double product_tolerance = 1e-13;
    int n_cap = 200;
    double root_tolerance = 1e-13;

    friend bool operator==(const problem_spec &, const problem_spec &) = default;
};

inline constexpr int max_support_limit = 24;
inline constexpr std::uint64_t enumeration_limit = std::uint64_t{1} << 30;

// Checks the invariants that parsing alone cannot: degree, positive knobs and
// the enumeration guard d^max_support <= 2^30.
inline void validate_problem(const problem_spec &spec)
{
    auto fail = [](const std::string &msg) { throw error(errc::validation_error, msg); };
    if (spec.coefficients.size() < 3) {
        fail("coefficients: need at least 3 entries (degree >= 2), got " + std::to_string(spec.coefficients.size()));
    }
    for (const auto &c : spec.coefficients) {
        if (!is_finite(c)) {
            fail("coefficients: entries must be finite");
        }
    }
    if (spec.coefficients.back() == complex{0.0}) {
        fail("coefficients: leading coefficient must be nonzero");
    }
    if (!is_finite(spec.fixed_point_hint)) {
        fail("fixed_point_hint: must be finite");
    }
    if (!(spec.product_tolerance > 0.0) || !std::isfinite(spec.product_tolerance)) {
        fail("product_tolerance: must be positive");
    }
    if (!(spec.root_tolerance > 0.0) || !std::isfinite(spec.root_tolerance)) {
        fail("root_tolerance: must be positive");
    }
    if (spec.n_cap <= 0) {
        fail("n_cap: must be positive");
    }
    if (spec.max_support < 0 || spec.max_support > max_support_limit) {
        fail("max_support: must be in [0, " + std::to_string(max_support_limit) + "]");
    }
    const auto d = static_cast<std::uint64_t>(spec.coefficients.size() - 1);
    std::uint64_t count = 1;
    for (int i = 0; i < spec.max_support; ++i) {
        count *= d;
        if (count > enumeration_limit) {
            fail("max_support: d^max_support exceeds 2^30 addresses");
        }
    }
}

namespace detail
{

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte)
{
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

inline double json_real(const nlohmann::json &v, const std::string &where)
{
    if (!v.is_number()) {
        throw error(errc::validation_error, where + ": expected a number");
    }
    return v.get<double>();
}

inline complex json_complex(const nlohmann::json &v, const std::string &where)
{
    if (!v.is_array() || v.size() != 2) {
        throw error(errc::validation_error, where + ": expected [re, im]");
    }
    return {json_real(v[0], where + "[0]"), json_real(v[1], where + "[1]")};
}

inline int json_int(const nlohmann::json &v, const std::string &where)
{
    if (!v.is_number_integer()) {
        throw error(errc::validation_error, where + ": expected an integer");
    }
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
        throw error(errc::validation_error, where + ": out of range");
    }
    return static_cast<int>(x);
}

} // namespace detail

// Strict JSON problem file. Unknown keys are rejected; coefficients and
// fixed_point_hint are required, the rest default.
inline problem_spec parse_problem(std::string_view text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error &e) {
        const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        const auto [line, column] = detail::line_column(text, byte);
        std::string msg = e.what();
        if (const auto pos = msg.find("parse error"); pos != std::string::npos) {
            msg = msg.substr(pos);
        }
        throw error(errc::parse_error,
                    "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg);
    }
    if (!doc.is_object()) {
        throw error(errc::validation_error, "problem file must be a JSON object");
    }
    static const std::set<std::string> known{"coefficients",      "fixed_point_hint", "max_support",
                                             "product_tolerance", "n_cap",            "root_tolerance"};
    for (const auto &item : doc.items()) {
        if (!known.contains(item.key())) {
            throw error(errc::validation_error, "unknown key '" + item.key() + "'");
        }
    }
    problem_spec spec;
    if (!doc.contains("coefficients")) {
        throw error(errc::validation_error, "missing required key 'coefficients'");
    }
    if (!doc.contains("fixed_point_hint")) {
        throw error(errc::validation_error, "missing required key 'fixed_point_hint'");
    }
    const auto &coeffs = doc["coefficients"];
    if (!coeffs.is_array()) {
        throw error(errc::validation_error, "coefficients: expected an array of [re, im]");
    }
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        spec.coefficients.push_back(detail::json_complex(coeffs[i], "coefficients[" + std::to_string(i) + "]"));
    }
    spec.fixed_point_hint = detail::json_complex(doc["fixed_point_hint"], "fixed_point_hint");
    if (doc.contains("max_support")) {
        spec.max_support = detail::json_int(doc["max_support"], "max_support");
    }
    if (doc.contains("product_tolerance")) {
        spec.product_tolerance = detail::json_real(doc["product_tolerance"], "product_tolerance");
    }
    if (doc.contains("n_cap")) {
        spec.n_cap = detail::json_int(doc["n_cap"], "n_cap");
    }
    if (doc.contains("root_tolerance")) {
        spec.root_tolerance = detail::json_real(doc["root_tolerance"], "root_tolerance");
    }
    validate_problem(spec);
    return spec;
}

inline std::string serialize_problem(const problem_spec &spec)
{
    nlohmann::json doc;
    doc["coefficients"] = nlohmann::json::array();
    for (const auto &c : spec.coefficients) {
        doc["coefficients"].push_back({c.real(), c.imag()});
    }
    doc["fixed_point_hint"] = {spec.fixed_point_hint.real(), spec.fixed_point_hint.imag()};
    doc["max_support"] = spec.max_support;
    doc["product_tolerance"] = spec.product_tolerance;
    doc["n_cap"] = spec.n_cap;
    doc["root_tolerance"] = spec.root_tolerance;
    return doc.dump(2) + "\n";
}

inline sp_system build_system(const problem_spec &spec)
{
    return build_system(polynomial(spec.coefficients), spec.fixed_point_hint,
                        root_options{spec.root_tolerance, 200});
}

// ---- CSV ----------------------------------------------------------------

inline std::string format_real(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(s);
    }
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') {
            out += '"';
        }
        out += ch;
    }
    out += '"';
    return out;
}

class csv_writer
{
public:
    explicit csv_writer(std::ostream &os) : m_os(os) {}

    csv_writer &operator<<(std::string_view s)
    {
        sep();
        m_os << csv_field(s);
        return *this;
    }
    csv_writer &operator<<(const char *s)
    {
        return *this << std::string_view(s);
    }
    csv_writer &operator<<(double x)
    {
        sep();
        m_os << format_real(x);
        return *this;
    }
    csv_writer &operator<<(int x)
    {
        sep();
        m_os << x;
        return *this;
    }
    csv_writer &operator<<(std::uint64_t x)
    {
        sep();
        m_os << x;
        return *this;
    }
    void end_row()
    {
        m_os << "\r\n";
        m_first = true;
    }

private:
    void sep()
    {
        if (!m_first) {
            m_os << ',';
        }
        m_first = false;
    }

    std::ostream &m_os;
    bool m_first = true;
};

// ---- scatter raster ------------------------------------------------------

struct raster {
    int width = 0;
    int height = 0;
    // 8-bit grayscale, row-major, 255 = background.
    std::vector<std::uint8_t> pixels;
};

// Black points on white over the bounding box of the finite points plus a 5%
// margin, aspect ratio preserved.
inline raster render_scatter(const std::vector<complex> &points, int width, int height)
{
    if (width < 1 || height < 1) {
        throw error(errc::invalid_argument, "raster size must be positive");
    }
    raster img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 255)};
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto &p : points) {
        if (is_finite(p)) {
            x0 = std::min(x0, p.real());
            x1 = std::max(x1, p.real());
            y0 = std::min(y0, p.imag());
            y1 = std::max(y1, p.imag());
        }
    }
    if (!(x0 <= x1)) {
        return img;
    }
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    double span = std::max({(x1 - x0) / width, (y1 - y0) / height, 1e-300}) * 1.1;
    for (const auto &p : points) {
        if (!is_finite(p)) {
            continue;
        }
        const auto px = static_cast<long>(std::floor((p.real() - cx) / span + 0.5 * width));
        const auto py = static_cast<long>(std::floor(0.5 * height - (p.imag() - cy) / span));
        if (px >= 0 && px < width && py >= 0 && py < height) {
            img.pixels[static_cast<std::size_t>(py) * width + px] = 0;
        }
    }
    return img;
}

// ---- commands ------------------------------------------------------------

namespace exit_code
{
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int numeric = 2;
inline constexpr int hypothesis = 3;
} // namespace exit_code

inline int exit_code_for(errc code) noexcept
{
    switch (code) {
    case errc::non_convergence:
    case errc::zero_denominator:
    case errc::basin_escape:
    case errc::ambiguous_clustering:
    case errc::fixed_point_violation:
        return exit_code::numeric;
    default:
        return exit_code::usage;
    }
}

struct hypothesis_probe {
    double radius = 10.0;
    int points = 64;
};

inline void write_hypothesis(std::ostream &log, const hypothesis_report &rep)
{
    log << "hypothesis1: " << (rep.passed ? "passed" : "FAILED") << " (" << rep.converged_points << "/"
        << rep.sampled_points << " points, longest orbit " << rep.max_orbit_length << ", worst point "
        << format_real(rep.worst_point.real()) << (rep.worst_point.imag() < 0 ? "" : "+")
        << format_real(rep.worst_point.imag()) << "i)\n";
}

struct zeros_options {
    bool check_hypothesis = false;
    hypothesis_probe probe{};
    // Filled with every value when set, for the scatter plot.
    std::vector<complex> *points = nullptr;
};

namespace detail
{

inline std::optional<int> probe_hypothesis(const sp_system &sys, const problem_spec &spec,
                                           const hypothesis_probe &probe, std::ostream &log)
{
    const auto rep = check_hypothesis1(sys, probe.radius, probe.points, spec.n_cap);
    write_hypothesis(log, rep);
    if (!rep.passed) {
        return exit_code::hypothesis;
    }
    return std::nullopt;
}

enum class exponent_column { none, blank, filled };

inline void write_branch_rows(csv_writer &csv, const branch_set &set, const std::optional<complex> &w_column,
                              exponent_column exponent, bool converged_column, const std::vector<double> *roundtrip)
{
    const int d = set.degree;
    for (std::uint64_t i = 0; i < set.values.size(); ++i) {
        const auto s = set.sigma(i);
        if (w_column) {
            csv << w_column->real() << w_column->imag();
        }
        csv << s.to_string(d) << set.values[i].real() << set.values[i].imag() << set.terms_used[i]
            << set.tail_estimates[i];
        if (exponent == exponent_column::blank) {
            csv << "";
        } else if (exponent == exponent_column::filled) {
            if (s.is_zero()) {
                csv << "";
            } else {
                csv << s.first_nonzero();
            }
        }
        if (converged_column) {
            csv << (set.converged[i] ? "true" : "false");
        }
        if (roundtrip) {
            csv << (*roundtrip)[i];
        }
        csv.end_row();
    }
}

} // namespace detail

// sigma,re,im,terms_used,tail_estimate for every enumerated zero; a converged
// column is appended when some product failed.
inline int run_zeros(const problem_spec &spec, std::ostream &out, std::ostream &log, const zeros_options &opts = {})
{
    const auto sys = build_system(spec);
    if (opts.check_hypothesis) {
        if (auto code = detail::probe_hypothesis(sys, spec, opts.probe, log)) {
            return *code;
        }
    }
    const auto set = enumerate_branches(sys, complex{0.0}, spec.max_support,
                                        product_options{spec.product_tolerance, spec.n_cap}, true);
    const bool partial = set.nonconverged > 0;
    csv_writer csv(out);
    csv << "sigma" << "re" << "im" << "terms_used" << "tail_estimate";
    if (partial) {
        csv << "converged";
    }
    csv.end_row();
    detail::write_branch_rows(csv, set, std::nullopt, detail::exponent_column::none, partial, nullptr);
    if (opts.points) {
        opts.points->assign(set.values.begin(), set.values.end());
    }
    if (partial) {
        log << "NonConvergence: " << set.nonconverged << " of " << set.values.size()
            << " products did not converge\n";
        return exit_code::numeric;
    }
    return exit_code::ok;
}

struct invert_options {
    complex w{0.0};
    // --circle r,k: k anchors w = r e^{2 pi i j/k}.
    std::optional<std::pair<double, int>> circle;
    bool verify = false;
    double verify_tolerance = 1e-7;
    bool check_hypothesis = false;
    hypothesis_probe probe{};
    std::vector<complex> *points = nullptr;
};

// g_sigma(w) for every enumerated sigma. w ~ b goes through the ladder form;
// prefactor_exponent holds m (first nonzero position) there and is empty
// otherwise. With verify, roundtrip_error = |f(g) - w| is appended and any
// value above verify_tolerance max(1, |w|) fails the run.
inline int run_invert(const problem_spec &spec, const invert_options &opts, std::ostream &out, std::ostream &log)
{
    const auto sys = build_system(spec);
    if (opts.check_hypothesis) {
        if (auto code = detail::probe_hypothesis(sys, spec, opts.probe, log)) {
            return *code;
        }
    }
    std::vector<complex> anchors;
    if (opts.circle) {
        const auto [r, k] = *opts.circle;
        if (k < 1 || !(r >= 0.0)) {
            throw error(errc::invalid_argument, "--circle needs r >= 0 and k >= 1");
        }
        for (int j = 0; j < k; ++j) {
            const double t = 2.0 * std::numbers::pi * j / k;
            anchors.push_back(r * complex{std::cos(t), std::sin(t)});
        }
    } else {
        anchors.push_back(opts.w);
    }
    const product_options popts{spec.product_tolerance, spec.n_cap};
    std::vector<branch_set> sets;
    std::uint64_t failed = 0;
    for (const auto &w : anchors) {
        sets.push_back(enumerate_branches(sys, w, spec.max_support, popts, true));
        failed += sets.back().nonconverged;
    }
    const bool partial = failed > 0;
    const bool multi = opts.circle.has_value();

    std::vector<std::vector<double>> roundtrip(sets.size());
    double worst = 0.0;
    if (opts.verify) {
        for (std::size_t k = 0; k < sets.size(); ++k) {
            auto &errs = roundtrip[k];
            errs.resize(sets[k].values.size());
            parallel_for(errs.size(), [&](std::size_t i) {
                errs[i] = std::abs(eval_f_direct(sys, sets[k].values[i]) - anchors[k])
                          / std::max(1.0, std::abs(anchors[k]));
            });
            for (double e : errs) {
                worst = std::max(worst, e);
            }
        }
    }

    csv_writer csv(out);
    if (multi) {
        csv << "w_re" << "w_im";
    }
    csv << "sigma" << "re" << "im" << "terms_used" << "tail_estimate" << "prefactor_exponent";
    if (partial) {
        csv << "converged";
    }
    if (opts.verify) {
        csv << "roundtrip_error";
    }
    csv.end_row();
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const auto exponent = detail::near_fixed_point(sys, anchors[k]) ? detail::exponent_column::filled
                                                                          : detail::exponent_column::blank;
        detail::write_branch_rows(csv, sets[k], multi ? std::optional<complex>(anchors[k]) : std::nullopt, exponent,
                                  partial, opts.verify ? &roundtrip[k] : nullptr);
        if (opts.points) {
            opts.points->insert(opts.points->end(), sets[k].values.begin(), sets[k].values.end());
        }
    }
    if (partial) {
        log << "NonConvergence: " << failed << " products did not converge\n";
        return exit_code::numeric;
    }
    if (opts.verify) {
        log << "roundtrip: max relative error " << format_real(worst) << "\n";
        if (!(worst <= opts.verify_tolerance)) {
            log << "roundtrip check FAILED (tolerance " << format_real(opts.verify_tolerance) << ")\n";
            return exit_code::numeric;
        }
    }
    return exit_code::ok;
}

// Per-shell convergence table of the momenta at anchor w. Fails when the final
// error exceeds tail_bound + slack.
inline int run_moments(const problem_spec &spec, const std::vector<int> &orders, complex w, std::ostream &out,
                       std::ostream &log, double slack = 1e-8)
{
    const auto sys = build_system(spec);
    for (int m : orders) {
        detail::check_moment_order(sys, m);
    }
    detail::check_anchor(sys, w);
    const auto set = enumerate_branches(sys, w, spec.max_support,
                                        product_options{spec.product_tolerance, spec.n_cap}, true);
    detail::check_converged(set);
    const double c_est = growth_constant(sys, set);
    csv_writer csv(out);
    csv << "m" << "support" << "partial_re" << "partial_im" << "closed_form_re" << "closed_form_im" << "abs_error"
        << "tail_bound";
    csv.end_row();
    int code = exit_code::ok;
    for (int m : orders) {
        const auto rep = moment_sum(sys, m, set);
        const double scale = std::pow(std::abs(w - sys.b()), m);
        for (const auto &[n, partial] : rep.shells) {
            csv << m << n << partial.real() << partial.imag() << rep.closed_form_rhs.real()
                << rep.closed_form_rhs.imag() << std::abs(partial - rep.closed_form_rhs)
                << scale * tail_bound(sys, n + 1, m, c_est);
            csv.end_row();
        }
        const double err = std::abs(rep.computed_sum - rep.closed_form_rhs);
        const bool ok = err <= rep.tail_bound + slack;
        log << "m=" << m << ": |computed - closed form| = " << format_real(err) << ", tail bound "
            << format_real(rep.tail_bound) << (ok ? "" : "  VIOLATION") << "\n";
        if (!ok) {
            code = exit_code::numeric;
        }
    }
    return code;
}

// Three routes to f(z): direct limit, WH from the anchor, WH from b.
inline int run_wh(const problem_spec &spec, const std::vector<complex> &zs, complex anchor, std::ostream &out,
                  std::ostream &log, double slack = 1e-6)
{
    const auto sys = build_system(spec);
    const product_options popts{spec.product_tolerance, spec.n_cap};
    const int support = std::max(1, spec.max_support);
    const wh_factorization general(sys, anchor, support, popts);
    const wh_factorization special(sys, sys.b(), support, popts);
    csv_writer csv(out);
    csv << "z_re" << "z_im" << "direct_re" << "direct_im" << "wh_anchor_re" << "wh_anchor_im" << "wh_b_re"
        << "wh_b_im" << "tail_anchor" << "tail_b" << "max_deviation";
    csv.end_row();
    int code = exit_code::ok;
    for (const auto &z : zs) {
        const complex direct = eval_f_direct(sys, z, spec.n_cap);
        const auto g = general(z);
        const auto s = special(z);
        const double dev = std::max({std::abs(direct - g.product_value), std::abs(direct - s.product_value),
                                     std::abs(g.product_value - s.product_value)});
        csv << z.real() << z.imag() << direct.real() << direct.imag() << g.product_value.real()
            << g.product_value.imag() << s.product_value.real() << s.product_value.imag() << g.tail_bound
            << s.tail_bound << dev;
        csv.end_row();
        if (!(dev <= slack + g.tail_bound + s.tail_bound)) {
            log << "z=" << format_real(z.real()) << "," << format_real(z.imag()) << ": routes disagree by "
                << format_real(dev) << "\n";
            code = exit_code::numeric;
        }
    }
    return code;
}

struct check_options {
    hypothesis_probe probe{};
    int wh_support = 12;
    int roundtrip_support = 4;
};

// Hypothesis-1 probe followed by the invariant suite: functional equation,
// three-route agreement and inverse-branch roundtrips on fixed samples.
inline int run_check(const problem_spec &spec, std::ostream &out, const check_options &opts = {})
{
    const auto sys = build_system(spec);
    out << "system: d=" << sys.degree() << " b=" << format_real(sys.b().real()) << ","
        << format_real(sys.b().imag()) << " a=" << format_real(sys.a().real()) << ","
        << format_real(sys.a().imag()) << " rho=" << format_real(sys.rho()) << "\n";
    const auto rep = check_hypothesis1(sys, opts.probe.radius, opts.probe.points, spec.n_cap);
    write_hypothesis(out, rep);
    if (!rep.passed) {
        return exit_code::hypothesis;
    }
    std::vector<complex> unit, wide;
    for (int k = 0; k < 10; ++k) {
        const double t = 2.0 * std::numbers::pi * k * 0.6180339887498949;
        unit.push_back((k + 1) / 10.0 * complex{std::cos(t), std::sin(t)});
        wide.push_back(2.0 * (k + 1) / 10.0 * complex{std::cos(t + 0.3), std::sin(t + 0.3)});
    }
    bool ok = true;
    auto line = [&](const char *name, bool pass, double value) {
        out << name << ": " << (pass ? "PASS" : "FAIL") << " (" << format_real(value) << ")\n";
        ok = ok && pass;
    };

    double fe = 0.0;
    for (const auto &z : unit) {
        fe = std::max(fe, std::abs(eval_f_direct(sys, sys.a() * z) - sys.p()(eval_f_direct(sys, z))));
    }
    line("functional equation", fe <= 1e-9, fe);

    const auto cc = cross_check(sys, sys.degree() < std::abs(sys.a()) ? wide : std::vector<complex>{},
                                std::min(std::max(1, spec.max_support), opts.wh_support),
                                {complex{0.0}, complex{0.3, 0.1}, complex{-2.0}},
                                cross_check_options{{0.3, 0.0}, std::min(spec.max_support, opts.roundtrip_support),
                                                    product_options{spec.product_tolerance, spec.n_cap}});
    if (cc.wh_available) {
        line("three-route agreement (deviation - tail bounds)", cc.max_excess <= 1e-6, cc.max_excess);
    } else {
        out << "three-route agreement: skipped (d >= |a|)\n";
    }
    line("roundtrip f(g(w)) = w", cc.max_roundtrip_error <= 1e-7, cc.max_roundtrip_error);
    return ok ? exit_code::ok : exit_code::numeric;
}

} // namespace spzeros

#endif
