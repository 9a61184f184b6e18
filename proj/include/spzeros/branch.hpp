#ifndef SPZEROS_BRANCH_HPP
#define SPZEROS_BRANCH_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <spzeros/error.hpp>
#include <spzeros/parallel.hpp>
#include <spzeros/poly.hpp>
#include <spzeros/system.hpp>

namespace spzeros
{

// Branch address sigma: digit n selects the inverse branch applied at depth n,
// digit 0 always being the principal branch. Stored in canonical form with the
// trailing zeros stripped, so size() is |supp sigma|.
class sigma_sequence
{
public:
    sigma_sequence() = default;

    explicit sigma_sequence(std::vector<int> digits) : m_digits(std::move(digits))
    {
        for (int v : m_digits) {
            if (v < 0) {
                throw error(errc::invalid_argument, "sigma digits must be non-negative");
            }
        }
        while (!m_digits.empty() && m_digits.back() == 0) {
            m_digits.pop_back();
        }
    }

    sigma_sequence(std::initializer_list<int> digits) : sigma_sequence(std::vector<int>(digits)) {}

    [[nodiscard]] int support() const noexcept
    {
        return static_cast<int>(m_digits.size());
    }
    [[nodiscard]] bool is_zero() const noexcept
    {
        return m_digits.empty();
    }
    [[nodiscard]] std::span<const int> digits() const noexcept
    {
        return m_digits;
    }
    // 1-based digit access; positions past the support are 0.
    [[nodiscard]] int at(int position) const noexcept
    {
        return position >= 1 && position <= support() ? m_digits[position - 1] : 0;
    }
    // 1-based index of the first nonzero digit, 0 for sigma = 0.
    [[nodiscard]] int first_nonzero() const noexcept
    {
        for (int i = 0; i < support(); ++i) {
            if (m_digits[i] != 0) {
                return i + 1;
            }
        }
        return 0;
    }

    void validate(int d) const
    {
        for (int v : m_digits) {
            if (v >= d) {
                throw error(errc::invalid_argument,
                            "sigma digit " + std::to_string(v) + " out of range for degree " + std::to_string(d));
            }
        }
    }

    // Digit string sigma_1..sigma_L; comma separated when d > 10.
    [[nodiscard]] std::string to_string(int d) const
    {
        std::string out;
        for (std::size_t i = 0; i < m_digits.size(); ++i) {
            if (d > 10) {
                if (i > 0) {
                    out += ',';
                }
                out += std::to_string(m_digits[i]);
            } else {
                out += static_cast<char>('0' + m_digits[i]);
            }
        }
        return out;
    }

    static sigma_sequence parse(std::string_view text, int d)
    {
        std::vector<int> digits;
        if (d > 10) {
            std::size_t pos = 0;
            while (pos < text.size()) {
                const auto comma = text.find(',', pos);
                const auto part = text.substr(pos, comma == std::string_view::npos ? text.size() - pos : comma - pos);
                digits.push_back(std::stoi(std::string(part)));
                if (comma == std::string_view::npos) {
                    break;
                }
                pos = comma + 1;
            }
        } else {
            for (char ch : text) {
                if (ch < '0' || ch > '9') {
                    throw error(errc::invalid_argument, "bad sigma digit '" + std::string(1, ch) + "'");
                }
                digits.push_back(ch - '0');
            }
        }
        sigma_sequence s(std::move(digits));
        s.validate(d);
        return s;
    }

    // Enumeration order: by support, then lexicographic.
    friend std::strong_ordering operator<=>(const sigma_sequence &x, const sigma_sequence &y)
    {
        if (auto c = x.support() <=> y.support(); c != 0) {
            return c;
        }
        return std::lexicographical_compare_three_way(x.m_digits.begin(), x.m_digits.end(), y.m_digits.begin(),
                                                      y.m_digits.end());
    }
    friend bool operator==(const sigma_sequence &, const sigma_sequence &) = default;

private:
    std::vector<int> m_digits;
};

namespace detail
{

inline std::uint64_t ipow(std::uint64_t base, int e) noexcept
{
    std::uint64_t acc = 1;
    for (int i = 0; i < e; ++i) {
        acc *= base;
    }
    return acc;
}

} // namespace detail

// Number of canonical sigma with support exactly n: d^(n-1) (d-1), and 1 for n = 0.
inline std::uint64_t shell_size(int d, int n) noexcept
{
    return n == 0 ? 1 : detail::ipow(d, n - 1) * static_cast<std::uint64_t>(d - 1);
}

// Number of canonical sigma with support <= max_support, which is d^max_support.
inline std::uint64_t sigma_count(int d, int max_support) noexcept
{
    return detail::ipow(d, max_support);
}

// Position of sigma in enumeration order. Shell n starts at d^(n-1).
inline std::uint64_t sigma_index(const sigma_sequence &s, int d) noexcept
{
    const int n = s.support();
    if (n == 0) {
        return 0;
    }
    std::uint64_t code = 0;
    for (int i = 0; i + 1 < n; ++i) {
        code = code * d + static_cast<std::uint64_t>(s.digits()[i]);
    }
    return detail::ipow(d, n - 1) + code * (d - 1) + static_cast<std::uint64_t>(s.digits()[n - 1] - 1);
}

inline sigma_sequence sigma_at(int d, std::uint64_t index)
{
    if (index == 0) {
        return {};
    }
    int n = 1;
    std::uint64_t start = 1;
    while (start * d <= index) {
        start *= d;
        ++n;
    }
    const std::uint64_t local = index - start;
    std::vector<int> digits(n);
    digits[n - 1] = static_cast<int>(local % (d - 1)) + 1;
    std::uint64_t code = local / (d - 1);
    for (int i = n - 2; i >= 0; --i) {
        digits[i] = static_cast<int>(code % d);
        code /= d;
    }
    return sigma_sequence(std::move(digits));
}

// Range over every canonical sigma with |supp sigma| <= max_support, shell by
// shell and lexicographically inside a shell.
class sigma_range
{
public:
    class iterator
    {
    public:
        using iterator_category = std::input_iterator_tag;
        using value_type = sigma_sequence;
        using difference_type = std::ptrdiff_t;

        iterator() = default;
        iterator(int d, std::uint64_t index) : m_d(d), m_index(index) {}

        value_type operator*() const
        {
            return sigma_at(m_d, m_index);
        }
        iterator &operator++() noexcept
        {
            ++m_index;
            return *this;
        }
        iterator operator++(int) noexcept
        {
            auto copy = *this;
            ++m_index;
            return copy;
        }
        friend bool operator==(const iterator &x, const iterator &y) noexcept
        {
            return x.m_index == y.m_index;
        }

    private:
        int m_d = 2;
        std::uint64_t m_index = 0;
    };

    sigma_range(int d, int max_support) : m_d(d), m_count(sigma_count(d, max_support)) {}

    [[nodiscard]] iterator begin() const
    {
        return {m_d, 0};
    }
    [[nodiscard]] iterator end() const
    {
        return {m_d, m_count};
    }
    [[nodiscard]] std::uint64_t size() const noexcept
    {
        return m_count;
    }

private:
    int m_d;
    std::uint64_t m_count;
};

inline sigma_range enumerate_sigma(int d, int max_support)
{
    if (d < 2 || max_support < 0) {
        throw error(errc::invalid_argument, "enumerate_sigma needs d >= 2 and max_support >= 0");
    }
    return {d, max_support};
}

struct branch_product {
    complex value;
    int terms_used = 0;
    // Estimated relative error from truncating the infinite product.
    double tail_estimate = 0.0;
    bool converged = false;
};

struct product_options {
    double tolerance = 1e-13;
    int n_cap = 200;
};

namespace detail
{

// Orbits are carried as deviations v = x - b: near b that keeps the digits
// that the factors a/Q(x) = a v_k / v_{k-1} depend on.

// Newton on P(b + v) - b = y from the linearised guess y/a, accepted only when
// every other solution is provably farther from 0.
inline bool principal_fast(const sp_system &sys, complex y, complex &out)
{
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const auto &p = sys.p_dev();
    complex v = y / sys.a();
    bool settled = false;
    for (int it = 0; it < 12; ++it) {
        auto [val, der] = eval_with_derivative(p, v);
        val -= y;
        if (der == complex{0.0}) {
            return false;
        }
        const complex step = val / der;
        v -= step;
        if (std::abs(step) <= 4.0 * eps * std::max(std::abs(v), 1e-300)) {
            settled = true;
            break;
        }
    }
    if (!settled) {
        return false;
    }
    const double dist = std::abs(v);
    const auto c = p.coefficients();
    const int d = p.degree();
    double lower;
    if (d == 2) {
        lower = std::abs(-c[1] / c[2] - v);
    } else {
        // Deflate (P~(t) - y) / (t - v) and bound its roots from below with
        // Fujiwara's bound on the reversal.
        std::vector<complex> r(d);
        r[d - 1] = c[d];
        for (int k = d - 1; k-- > 0;) {
            r[k] = c[k + 1] + v * r[k + 1];
        }
        if (r[0] == complex{0.0}) {
            return false;
        }
        double worst = 0.0;
        for (int k = 1; k < d; ++k) {
            worst = std::max(worst, std::pow(std::abs(r[k] / r[0]), 1.0 / k));
        }
        lower = worst > 0.0 ? 0.5 / worst : std::numeric_limits<double>::infinity();
    }
    if (!(lower > dist * (1.0 + 1e-8) + 1e-14)) {
        return false;
    }
    out = v;
    return true;
}

// All solutions of P(x) = b + y as deviations x - b. The roots are found for P
// itself, which keeps exact critical values (and so repeated roots) exact;
// the one nearest b is then polished in deviation form when y is small.
inline std::vector<complex> deviation_roots(const sp_system &sys, complex y, std::size_t &principal)
{
    auto roots = all_roots(sys.p(), sys.b() + y, sys.roots());
    for (auto &r : roots) {
        r -= sys.b();
    }
    principal = nearest_root_index(roots, complex{0.0});
    if (std::abs(y) < sys.contraction_radius()) {
        complex &v = roots[principal];
        for (int it = 0; it < 3; ++it) {
            const auto [val, der] = eval_with_derivative(sys.p_dev(), v);
            if (der == complex{0.0}) {
                break;
            }
            v -= (val - y) / der;
        }
    }
    return roots;
}

inline complex principal_slow(const sp_system &sys, complex y)
{
    std::size_t pick = 0;
    const auto roots = deviation_roots(sys, y, pick);
    return roots[pick];
}

inline complex principal_step(const sp_system &sys, complex y)
{
    complex v;
    if (principal_fast(sys, y, v)) {
        return v;
    }
    return principal_slow(sys, y);
}

// Deviations of the d solutions of P(x) = b + y: principal first, the rest by
// arg, then (re, im).
inline void labels_into(const sp_system &sys, complex y, std::vector<complex> &out)
{
    std::size_t pick = 0;
    auto roots = deviation_roots(sys, y, pick);
    std::swap(roots[0], roots[pick]);
    std::sort(roots.begin() + 1, roots.end(), [](complex x, complex y) {
        const double ax = normalized_arg(x);
        const double ay = normalized_arg(y);
        if (ax != ay) {
            return ax < ay;
        }
        if (x.real() != y.real()) {
            return x.real() < y.real();
        }
        return x.imag() < y.imag();
    });
    out = std::move(roots);
}

// a / Q(x_k) with Q(x_k) = v_{k-1} / v_k.
inline complex checked_factor(const sp_system &sys, complex v_prev, complex v)
{
    if (v_prev == complex{0.0}) {
        if (v == complex{0.0}) {
            return complex{1.0};
        }
        throw error(errc::zero_denominator, "Q vanished on the inverse orbit (w = b upstream?)");
    }
    return sys.a() * (v / v_prev);
}

struct tail_result {
    complex product{1.0};
    int steps = 0;
    double tail_estimate = std::numeric_limits<double>::infinity();
    bool converged = false;
    bool reached_region = false;
};

// Product of a / Q along the principal orbit v_{k+1} = P0^{-1}(v_k) starting
// after v. Stops when the factor is within tol of 1, the orbit has spent 3
// consecutive steps inside the contraction disc and the geometric tail
// estimate |factor - 1| c / (1 - c) is below tol.
inline tail_result principal_tail(const sp_system &sys, complex v, double tol, int budget)
{
    tail_result out;
    const double delta = sys.contraction_radius();
    double prev_dist = std::abs(v);
    int streak = prev_dist < delta ? 1 : 0;
    for (int k = 0; k < budget; ++k) {
        const complex next = principal_step(sys, v);
        const complex factor = checked_factor(sys, v, next);
        v = next;
        out.product *= factor;
        ++out.steps;
        const double dist = std::abs(v);
        streak = dist < delta ? streak + 1 : 0;
        if (streak > 0) {
            out.reached_region = true;
        }
        const double gap = std::abs(factor - 1.0);
        double ratio = prev_dist > 0.0 ? dist / prev_dist : 0.0;
        ratio = std::min(ratio, 0.999);
        out.tail_estimate = gap * ratio / (1.0 - ratio);
        prev_dist = dist;
        if (gap < tol && streak >= 3 && out.tail_estimate <= tol) {
            out.converged = true;
            return out;
        }
    }
    return out;
}

// prefactor * prod_{digits} a/Q * principal tail, from the deviation v_0 = start.
inline branch_product evaluate_orbit(const sp_system &sys, complex start, complex prefactor,
                                     std::span<const int> digits, const product_options &opts,
                                     std::vector<complex> &scratch)
{
    branch_product out;
    complex v = start;
    complex prod = prefactor;
    for (int digit : digits) {
        labels_into(sys, v, scratch);
        prod *= checked_factor(sys, v, scratch[digit]);
        v = scratch[digit];
        ++out.terms_used;
    }
    const auto tail = principal_tail(sys, v, opts.tolerance, opts.n_cap - out.terms_used);
    out.value = prod * tail.product;
    out.terms_used += tail.steps;
    out.tail_estimate = tail.tail_estimate;
    out.converged = tail.converged;
    return out;
}

inline bool near_fixed_point(const sp_system &sys, complex w) noexcept
{
    return std::abs(w - sys.b()) < 1e-12;
}

// g_{sigma',0} = (P_{s1}^{-1}(b) - b) prod_{n>=2} a/Q(...), sigma'_1 != 0.
inline branch_product ladder_base(const sp_system &sys, std::span<const int> digits, const product_options &opts,
                                  std::vector<complex> &scratch)
{
    labels_into(sys, complex{0.0}, scratch);
    const complex v1 = scratch[digits[0]];
    return evaluate_orbit(sys, v1, v1, digits.subspan(1), opts, scratch);
}

} // namespace detail

// Root of P(z) = w nearest to b: the numerical principal branch P0^{-1}(w).
inline complex principal_branch(const sp_system &sys, complex w)
{
    if (!is_finite(w)) {
        throw error(errc::invalid_argument, "principal_branch: w must be finite");
    }
    return sys.b() + detail::principal_step(sys, w - sys.b());
}

// All d roots of P(z) = w: index 0 is the principal branch, the rest ordered
// by the principal argument of (root - b), ties by (re, im).
inline std::vector<complex> branch_labels(const sp_system &sys, complex w)
{
    if (!is_finite(w)) {
        throw error(errc::invalid_argument, "branch_labels: w must be finite");
    }
    std::vector<complex> out;
    detail::labels_into(sys, w - sys.b(), out);
    for (auto &x : out) {
        x += sys.b();
    }
    return out;
}

struct hypothesis_report {
    int sampled_points = 0;
    int converged_points = 0;
    int max_orbit_length = 0;
    complex worst_point;
    bool passed = false;
};

// Samples grid_count points on concentric circles around b (radii up to
// grid_radius) and follows the principal orbit of each until it enters the
// contraction disc |w - b| < delta.
inline hypothesis_report check_hypothesis1(const sp_system &sys, double grid_radius, int grid_count, int orbit_cap)
{
    if (grid_count < 1 || orbit_cap < 1 || !(grid_radius > 0.0)) {
        throw error(errc::invalid_argument, "check_hypothesis1 needs grid_count, orbit_cap >= 1 and radius > 0");
    }
    hypothesis_report rep;
    const int rings = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(grid_count)))));
    const int per_ring = (grid_count + rings - 1) / rings;
    const complex b = sys.b();
    const double delta = sys.contraction_radius();
    int worst_len = -1;
    for (int i = 0; i < grid_count; ++i) {
        const int ring = i / per_ring;
        const int slot = i % per_ring;
        const double r = grid_radius * (ring + 1) / rings;
        // Offset alternate rings by half a slot so the rays do not align.
        const double t = 2.0 * std::numbers::pi * (slot + 0.5 * (ring % 2)) / per_ring;
        const complex v0 = r * complex{std::cos(t), std::sin(t)};
        const complex w0 = b + v0;
        complex v = v0;
        int steps = 0;
        bool ok = std::abs(v) < delta;
        while (!ok && steps < orbit_cap) {
            v = detail::principal_step(sys, v);
            ++steps;
            ok = std::abs(v) < delta;
        }
        ++rep.sampled_points;
        const int len = ok ? steps : orbit_cap + 1;
        if (ok) {
            ++rep.converged_points;
            rep.max_orbit_length = std::max(rep.max_orbit_length, steps);
        }
        if (len > worst_len) {
            worst_len = len;
            rep.worst_point = w0;
        }
    }
    rep.passed = rep.converged_points == rep.sampled_points;
    return rep;
}

// g_sigma(w) = (w - b) prod_n a / Q(P_{s_n}^{-1} o ... o P_{s_1}^{-1}(w)). For
// w = b (within 1e-12): 0 for sigma = 0, otherwise a^m g_{sigma',0} where m
// is the first nonzero position and sigma' the address from m on.
inline branch_product inverse_branch(const sp_system &sys, const sigma_sequence &sigma, complex w,
                                     double tol = 1e-13, int n_cap = 200)
{
    if (!(tol > 0.0) || n_cap < 1) {
        throw error(errc::invalid_argument, "inverse_branch needs tol > 0 and n_cap >= 1");
    }
    if (!is_finite(w)) {
        throw error(errc::invalid_argument, "inverse_branch: w must be finite");
    }
    sigma.validate(sys.degree());
    const product_options opts{tol, n_cap};
    std::vector<complex> scratch;
    branch_product out;
    if (detail::near_fixed_point(sys, w)) {
        if (sigma.is_zero()) {
            return {complex{0.0}, 0, 0.0, true};
        }
        const int m = sigma.first_nonzero();
        out = detail::ladder_base(sys, sigma.digits().subspan(m - 1), opts, scratch);
        for (int i = 0; i < m; ++i) {
            out.value *= sys.a();
        }
    } else {
        out = detail::evaluate_orbit(sys, w - sys.b(), w - sys.b(), sigma.digits(), opts, scratch);
    }
    if (!out.converged) {
        throw error(errc::non_convergence, "product for sigma '" + sigma.to_string(sys.degree())
                                               + "' did not converge within n_cap = " + std::to_string(n_cap));
    }
    return out;
}

// z(sigma) = -b prod_n a / Q(P_{s_n}^{-1} o ... o P_{s_1}^{-1}(0)): a zero of f.
inline branch_product zero_product(const sp_system &sys, const sigma_sequence &sigma, double tol = 1e-13,
                                   int n_cap = 200)
{
    return inverse_branch(sys, sigma, complex{0.0}, tol, n_cap);
}

// The inner orbit u_1..u_steps used by the product for (sigma, w).
inline std::vector<complex> inverse_orbit(const sp_system &sys, const sigma_sequence &sigma, complex w, int steps)
{
    sigma.validate(sys.degree());
    std::vector<complex> orbit;
    std::vector<complex> scratch;
    complex v = w - sys.b();
    for (int n = 1; n <= steps; ++n) {
        const int digit = sigma.at(n);
        if (digit == 0) {
            v = detail::principal_step(sys, v);
        } else {
            detail::labels_into(sys, v, scratch);
            v = scratch[digit];
        }
        orbit.push_back(sys.b() + v);
    }
    return orbit;
}

// g0(w) by the sigma = 0 product and g0'(w) = prod_n a / P'((P0^{-1})^n(w)).
inline std::pair<complex, complex> g0_and_derivative(const sp_system &sys, complex w, double tol = 1e-13,
                                                     int n_cap = 200)
{
    if (!(tol > 0.0) || n_cap < 1) {
        throw error(errc::invalid_argument, "g0_and_derivative needs tol > 0 and n_cap >= 1");
    }
    if (detail::near_fixed_point(sys, w)) {
        return {complex{0.0}, complex{1.0}};
    }
    const auto tail = detail::principal_tail(sys, w - sys.b(), tol, n_cap);
    if (!tail.reached_region) {
        throw error(errc::basin_escape, "principal orbit did not reach the contraction disc");
    }
    if (!tail.converged) {
        throw error(errc::non_convergence, "g0 product did not converge within n_cap");
    }
    const complex g0 = (w - sys.b()) * tail.product;

    const double delta = sys.contraction_radius();
    complex v = w - sys.b();
    complex deriv{1.0};
    int streak = 0;
    double prev_dist = std::abs(v);
    for (int k = 0; k < n_cap; ++k) {
        v = detail::principal_step(sys, v);
        const complex dp = sys.dp_dev()(v);
        if (dp == complex{0.0}) {
            throw error(errc::zero_denominator, "P' vanished on the principal orbit");
        }
        const complex factor = sys.a() / dp;
        deriv *= factor;
        const double dist = std::abs(v);
        streak = dist < delta ? streak + 1 : 0;
        const double ratio = std::min(prev_dist > 0.0 ? dist / prev_dist : 0.0, 0.999);
        prev_dist = dist;
        if (std::abs(factor - 1.0) < tol && streak >= 3 && std::abs(factor - 1.0) * ratio / (1.0 - ratio) <= tol) {
            return {g0, deriv};
        }
    }
    throw error(errc::non_convergence, "g0' product did not converge within n_cap");
}

// Bound on sum_{|supp sigma| >= N} |g_sigma(w)|^{-m}: c_est^{-m} sum_{n>=N} (d |a|^{-m})^n,
// with c_est the growth constant in |g_sigma| >= C |a|^{|supp sigma|}.
inline double tail_bound(const sp_system &sys, int n_start, int m, double c_est)
{
    if (m < 1 || n_start < 0 || !(c_est > 0.0)) {
        throw error(errc::invalid_argument, "tail_bound needs m >= 1, N >= 0 and c_est > 0");
    }
    const double ratio = sys.degree() * std::pow(std::abs(sys.a()), -m);
    if (ratio >= 1.0) {
        throw error(errc::divergent_tail, "d |a|^-m = " + std::to_string(ratio) + " >= 1");
    }
    return std::pow(c_est, -m) * std::pow(ratio, n_start) / (1.0 - ratio);
}

// Values of g_sigma(w) for every canonical sigma with |supp sigma| <= max_support,
// in enumeration order. With `ladder` set, holds instead g_{sigma',0} for the
// addresses with sigma'_1 != 0 (same order, the sigma_1 = 0 block skipped).
struct branch_set {
    int degree = 2;
    int max_support = 0;
    complex w;
    bool ladder = false;
    std::vector<complex> values;
    // Filled when details are requested.
    std::vector<int> terms_used;
    std::vector<double> tail_estimates;
    std::vector<unsigned char> converged;
    std::uint64_t nonconverged = 0;
    double max_tail_estimate = 0.0;

    [[nodiscard]] std::uint64_t shell_begin(int n) const noexcept
    {
        if (!ladder) {
            return n == 0 ? 0 : detail::ipow(degree, n - 1);
        }
        if (n <= 1) {
            return 0;
        }
        return detail::ipow(degree, n - 2) * static_cast<std::uint64_t>(degree - 1);
    }
    [[nodiscard]] std::uint64_t shell_end(int n) const noexcept
    {
        return shell_begin(n + 1);
    }
    [[nodiscard]] sigma_sequence sigma(std::uint64_t index) const
    {
        if (!ladder) {
            return sigma_at(degree, index);
        }
        int n = 1;
        while (shell_end(n) <= index) {
            ++n;
        }
        const std::uint64_t skipped = detail::ipow(degree, n - 1);
        return sigma_at(degree, index + skipped);
    }
};

namespace detail
{

struct tree_node {
    complex v; // deviation from b
    complex prod;
    int depth;
    std::uint64_t code; // digits sigma_1..sigma_depth as a base-d number
    int last;
};

struct tree_walk {
    const sp_system &sys;
    const product_options &opts;
    branch_set &out;
    bool details;

    void emit(const tree_node &node, std::vector<complex> &scratch) const
    {
        const int d = out.degree;
        std::uint64_t index = 0;
        if (node.depth > 0) {
            index = ipow(d, node.depth - 1) + (node.code / d) * (d - 1) + static_cast<std::uint64_t>(node.last - 1);
            if (out.ladder) {
                index -= ipow(d, node.depth - 1);
            }
        }
        (void)scratch;
        const auto tail = principal_tail(sys, node.v, opts.tolerance, opts.n_cap - node.depth);
        out.values[index] = node.prod * tail.product;
        if (details) {
            out.terms_used[index] = node.depth + tail.steps - (out.ladder ? 1 : 0);
            out.tail_estimates[index] = tail.tail_estimate;
            out.converged[index] = tail.converged ? 1 : 0;
        }
    }

    void expand(const tree_node &node, std::vector<tree_node> &children, std::vector<complex> &scratch) const
    {
        labels_into(sys, node.v, scratch);
        children.clear();
        for (int j = 0; j < out.degree; ++j) {
            children.push_back({scratch[j], node.prod * checked_factor(sys, node.v, scratch[j]), node.depth + 1,
                                node.code * out.degree + static_cast<std::uint64_t>(j), j});
        }
    }

    void walk(const tree_node &node, std::vector<complex> &scratch) const
    {
        if (node.depth == 0 || node.last != 0) {
            emit(node, scratch);
        }
        if (node.depth >= out.max_support) {
            return;
        }
        std::vector<tree_node> children;
        expand(node, children, scratch);
        for (const auto &child : children) {
            walk(child, scratch);
        }
    }
};

// Expands breadth-first down to a split depth, then runs one depth-first task
// per frontier node.
inline void run_walk(const tree_walk &walker, std::vector<tree_node> level)
{
    const int d = walker.out.degree;
    const int split = std::min(walker.out.max_support, d >= 4 ? 2 : (d == 3 ? 3 : 5));
    std::vector<complex> scratch;
    std::vector<tree_node> children;
    while (!level.empty() && level.front().depth < split) {
        std::vector<tree_node> next;
        for (const auto &node : level) {
            if (node.depth == 0 || node.last != 0) {
                walker.emit(node, scratch);
            }
            walker.expand(node, children, scratch);
            next.insert(next.end(), children.begin(), children.end());
        }
        level = std::move(next);
    }
    parallel_for(level.size(), [&](std::size_t i) {
        std::vector<complex> local;
        walker.walk(level[i], local);
    });
}

inline void allocate(branch_set &out, std::uint64_t total, bool details)
{
    out.values.assign(total, complex{0.0});
    if (details) {
        out.terms_used.assign(total, 0);
        out.tail_estimates.assign(total, 0.0);
        out.converged.assign(total, 1);
    }
}

inline void summarize(branch_set &out)
{
    for (std::size_t i = 0; i < out.converged.size(); ++i) {
        if (!out.converged[i]) {
            ++out.nonconverged;
        }
        out.max_tail_estimate = std::max(out.max_tail_estimate, out.tail_estimates[i]);
    }
}

} // namespace detail

// g_{sigma',0} = (P_{s1}^{-1}(b) - b) prod_{n>=2} a/Q(u_n) for every sigma' with
// sigma'_1 != 0 and |supp sigma'| <= max_support. Index of sigma' is its
// enumeration index minus d^(|supp| - 1).
inline branch_set enumerate_ladder(const sp_system &sys, int max_support, const product_options &opts = {},
                                   bool details = false)
{
    if (max_support < 1) {
        throw error(errc::invalid_argument, "enumerate_ladder needs max_support >= 1");
    }
    const int d = sys.degree();
    branch_set out;
    out.degree = d;
    out.max_support = max_support;
    out.w = sys.b();
    out.ladder = true;
    detail::allocate(out, detail::ipow(d, max_support - 1) * static_cast<std::uint64_t>(d - 1), details);
    std::vector<complex> first;
    detail::labels_into(sys, complex{0.0}, first);
    std::vector<detail::tree_node> level;
    for (int j = 1; j < d; ++j) {
        level.push_back({first[j], first[j], 1, static_cast<std::uint64_t>(j), j});
    }
    detail::run_walk(detail::tree_walk{sys, opts, out, details}, std::move(level));
    if (details) {
        detail::summarize(out);
    }
    return out;
}

// Evaluates g_sigma(w) for every sigma with |supp sigma| <= max_support by a
// depth-first walk of the prefix tree, so each inverse-orbit prefix is
// computed once. Subtrees are independent tasks; every value lands in a fixed
// slot, so the output does not depend on the thread count. Non-converged
// products are flagged, not thrown.
inline branch_set enumerate_branches(const sp_system &sys, complex w, int max_support,
                                     const product_options &opts = {}, bool details = false)
{
    if (max_support < 0) {
        throw error(errc::invalid_argument, "max_support must be >= 0");
    }
    if (!is_finite(w)) {
        throw error(errc::invalid_argument, "enumerate_branches: w must be finite");
    }
    const int d = sys.degree();
    branch_set out;
    out.degree = d;
    out.max_support = max_support;
    out.w = w;
    const auto total = sigma_count(d, max_support);
    detail::allocate(out, total, details);

    if (detail::near_fixed_point(sys, w)) {
        // g_sigma(b) = a^m g_{sigma',0} with m the first nonzero position.
        if (max_support >= 1) {
            const auto bases = enumerate_ladder(sys, max_support, opts, details);
            for (std::uint64_t i = 1; i < total; ++i) {
                const auto s = sigma_at(d, i);
                const int m = s.first_nonzero();
                const sigma_sequence tail(std::vector<int>(s.digits().begin() + (m - 1), s.digits().end()));
                const std::uint64_t j = sigma_index(tail, d) - detail::ipow(d, tail.support() - 1);
                complex v = bases.values[j];
                for (int k = 0; k < m; ++k) {
                    v *= sys.a();
                }
                out.values[i] = v;
                if (details) {
                    out.terms_used[i] = bases.terms_used[j];
                    out.tail_estimates[i] = bases.tail_estimates[j];
                    out.converged[i] = bases.converged[j];
                }
            }
        }
    } else {
        detail::run_walk(detail::tree_walk{sys, opts, out, details}, {{w - sys.b(), w - sys.b(), 0, 0, 0}});
    }
    if (details) {
        detail::summarize(out);
    }
    return out;
}

} // namespace spzeros

#endif
