#ifndef SPZEROS_FACTOR_HPP
#define SPZEROS_FACTOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <spzeros/branch.hpp>
#include <spzeros/error.hpp>
#include <spzeros/poly.hpp>
#include <spzeros/system.hpp>

namespace spzeros
{

// Neumaier-compensated complex accumulator; adding terms in a fixed order
// gives a fixed result.
class compensated_sum
{
public:
    void add(complex x) noexcept
    {
        add_part(m_re, m_re_c, x.real());
        add_part(m_im, m_im_c, x.imag());
    }
    [[nodiscard]] complex value() const noexcept
    {
        return {m_re + m_re_c, m_im + m_im_c};
    }

private:
    static void add_part(double &s, double &c, double x) noexcept
    {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x)) {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }

    double m_re = 0.0, m_re_c = 0.0;
    double m_im = 0.0, m_im_c = 0.0;
};

// min over the set of |g_sigma| |a|^-|supp sigma|: the empirical growth constant.
inline double growth_constant(const sp_system &sys, const branch_set &set)
{
    const double abs_a = std::abs(sys.a());
    double best = std::numeric_limits<double>::infinity();
    for (int n = set.ladder ? 1 : 0; n <= set.max_support; ++n) {
        const double scale = std::pow(abs_a, set.ladder ? -(n - 1) : -n);
        for (auto i = set.shell_begin(n); i < set.shell_end(n); ++i) {
            best = std::min(best, std::abs(set.values[i]) * scale);
        }
    }
    return best;
}

// Per-shell minima of |g_sigma| |a|^-n for n = 0..max_support.
inline std::vector<double> shell_growth(const sp_system &sys, const branch_set &set)
{
    const double abs_a = std::abs(sys.a());
    std::vector<double> out;
    for (int n = set.ladder ? 1 : 0; n <= set.max_support; ++n) {
        const double scale = std::pow(abs_a, set.ladder ? -(n - 1) : -n);
        double best = std::numeric_limits<double>::infinity();
        for (auto i = set.shell_begin(n); i < set.shell_end(n); ++i) {
            best = std::min(best, std::abs(set.values[i]) * scale);
        }
        out.push_back(best);
    }
    return out;
}

struct moment_report {
    int order_m = 1;
    complex w;
    complex computed_sum;
    complex closed_form_rhs;
    // (support length, cumulative sum over shells 0..n)
    std::vector<std::pair<int, complex>> shells;
    double tail_bound = 0.0;
    double c_est = 0.0;
};

// Right-hand side of the m-th momentum identity at anchor w:
// sum_j (w - b)^(m-j) (j-1)!/(m-1)! B_{m,j}(f'(0), ..., f^(m-j+1)(0)).
inline complex closed_form_moment(const sp_system &sys, int m, complex w)
{
    if (m < 1) {
        throw error(errc::invalid_argument, "moment order must be >= 1");
    }
    const auto t = taylor_at_zero(sys, m);
    std::vector<complex> derivs(m);
    for (int k = 1; k <= m; ++k) {
        derivs[k - 1] = t.values[k] * detail::factorial(k);
    }
    const complex shift = w - sys.b();
    complex total{0.0};
    for (int j = 1; j <= m; ++j) {
        total += std::pow(shift, m - j) * (detail::factorial(j - 1) / detail::factorial(m - 1))
                 * bell_polynomial(m, j, derivs);
    }
    return total;
}

namespace detail
{

inline void check_moment_order(const sp_system &sys, int m)
{
    if (m < 1) {
        throw error(errc::invalid_argument, "moment order must be >= 1");
    }
    const double ratio = sys.degree() * std::pow(std::abs(sys.a()), -m);
    if (ratio >= 1.0) {
        throw error(errc::divergent_moment,
                    "d |a|^-m = " + std::to_string(ratio) + " >= 1 for m = " + std::to_string(m));
    }
}

inline void check_anchor(const sp_system &sys, complex w)
{
    if (!is_finite(w)) {
        throw error(errc::invalid_argument, "anchor w must be finite");
    }
    if (near_fixed_point(sys, w)) {
        throw error(errc::invalid_argument, "momenta need an anchor w != b");
    }
}

inline void check_converged(const branch_set &set)
{
    if (set.nonconverged > 0) {
        throw error(errc::non_convergence,
                    std::to_string(set.nonconverged) + " branch products did not converge");
    }
}

} // namespace detail

// Momentum sum_sigma ((w - b)/g_sigma(w))^m over an already enumerated set.
inline moment_report moment_sum(const sp_system &sys, int m, const branch_set &set)
{
    detail::check_moment_order(sys, m);
    detail::check_anchor(sys, set.w);
    if (set.ladder) {
        throw error(errc::invalid_argument, "moment_sum needs a w != b branch set");
    }
    moment_report rep;
    rep.order_m = m;
    rep.w = set.w;
    rep.closed_form_rhs = closed_form_moment(sys, m, set.w);
    const complex shift = set.w - sys.b();
    compensated_sum acc;
    for (int n = 0; n <= set.max_support; ++n) {
        for (auto i = set.shell_begin(n); i < set.shell_end(n); ++i) {
            acc.add(std::pow(shift / set.values[i], m));
        }
        rep.shells.emplace_back(n, acc.value());
    }
    rep.computed_sum = rep.shells.back().second;
    rep.c_est = growth_constant(sys, set);
    rep.tail_bound = std::pow(std::abs(shift), m) * tail_bound(sys, set.max_support + 1, m, rep.c_est);
    return rep;
}

inline moment_report moment_sum(const sp_system &sys, int m, complex w, int max_support,
                                const product_options &opts = {})
{
    detail::check_moment_order(sys, m);
    detail::check_anchor(sys, w);
    const auto set = enumerate_branches(sys, w, max_support, opts, true);
    detail::check_converged(set);
    return moment_sum(sys, m, set);
}

struct vieta_result {
    complex s1;
    // Elementary symmetric sum over unordered pairs sigma != tau.
    complex s2;
    // Power sum of order 2, the input to s2.
    complex p2;
};

inline vieta_result vieta_sums(const sp_system &sys, const branch_set &set)
{
    if (!(sys.degree() < std::abs(sys.a()))) {
        throw error(errc::divergent_moment, "Vieta sums need d < |a|");
    }
    detail::check_anchor(sys, set.w);
    const complex shift = set.w - sys.b();
    compensated_sum p1, p2;
    for (std::size_t i = 0; i < set.values.size(); ++i) {
        const complex x = shift / set.values[i];
        p1.add(x);
        p2.add(x * x);
    }
    const complex s1 = p1.value();
    return {s1, 0.5 * (s1 * s1 - p2.value()), p2.value()};
}

inline vieta_result vieta_sums(const sp_system &sys, complex w, int max_support, const product_options &opts = {})
{
    detail::check_anchor(sys, w);
    if (!(sys.degree() < std::abs(sys.a()))) {
        throw error(errc::divergent_moment, "Vieta sums need d < |a|");
    }
    const auto set = enumerate_branches(sys, w, max_support, opts, true);
    detail::check_converged(set);
    return vieta_sums(sys, set);
}

// Limits of (s1, s2): f'(0) = 1 and (b - w) f''(0)/2.
inline std::pair<complex, complex> vieta_closed_form(const sp_system &sys, complex w)
{
    const auto t = taylor_at_zero(sys, 2);
    return {complex{1.0}, (sys.b() - w) * t.values[2]};
}

struct wh_evaluation {
    complex z;
    complex w_anchor;
    complex product_value;
    std::uint64_t factors_used = 1;
    double tail_bound = 0.0;
};

// Truncated Weierstrass-Hadamard product for f built from one anchor. For
// w != b: f(z) = w + (b - w) prod_sigma (1 - z/g_sigma(w)). For w = b:
// f(z) = b + z prod_{m>=1} prod_{sigma'} (1 - z/(a^m g_{sigma',0})), with the
// inner m range cut per base once |z|/(|a|^m |g|) < tol/2.
class wh_factorization
{
public:
    wh_factorization(const sp_system &sys, complex anchor, int max_support, const product_options &opts = {})
        : m_sys(&sys), m_anchor(anchor), m_tol(opts.tolerance)
    {
        if (!(sys.degree() < std::abs(sys.a()))) {
            throw error(errc::order_too_large, "WH product needs d < |a|, got d = " + std::to_string(sys.degree())
                                                   + ", |a| = " + std::to_string(std::abs(sys.a())));
        }
        if (max_support < 1) {
            throw error(errc::invalid_argument, "WH product needs max_support >= 1");
        }
        if (!is_finite(anchor)) {
            throw error(errc::invalid_argument, "WH anchor must be finite");
        }
        m_special = detail::near_fixed_point(sys, anchor);
        m_set = m_special ? enumerate_ladder(sys, max_support, opts, true)
                          : enumerate_branches(sys, anchor, max_support, opts, true);
        detail::check_converged(m_set);
        m_c_est = growth_constant(sys, m_set);
        const double abs_a = std::abs(sys.a());
        const double r = sys.degree() / abs_a;
        m_omitted_shells = std::pow(r, max_support + 1) / (1.0 - r) / m_c_est;
        if (m_special) {
            m_omitted_shells *= abs_a / (abs_a - 1.0);
        }
    }

    [[nodiscard]] bool special() const noexcept
    {
        return m_special;
    }
    [[nodiscard]] const branch_set &zeros() const noexcept
    {
        return m_set;
    }
    [[nodiscard]] double c_est() const noexcept
    {
        return m_c_est;
    }

    [[nodiscard]] wh_evaluation operator()(complex z) const
    {
        if (!is_finite(z)) {
            throw error(errc::invalid_argument, "WH evaluation point must be finite");
        }
        const sp_system &sys = *m_sys;
        wh_evaluation out;
        out.z = z;
        out.w_anchor = m_anchor;
        if (z == complex{0.0}) {
            out.product_value = sys.b();
            out.factors_used = 1;
            return out;
        }
        const double abs_z = std::abs(z);
        complex prod{1.0};
        std::uint64_t used = 0;
        double omitted = 0.0;
        if (!m_special) {
            for (const auto &g : m_set.values) {
                prod *= 1.0 - z / g;
            }
            used = m_set.values.size();
            out.product_value = m_anchor + (sys.b() - m_anchor) * prod;
            omitted = abs_z * m_omitted_shells;
            out.tail_bound = std::abs(sys.b() - m_anchor) * std::abs(prod) * std::expm1(omitted);
        } else {
            const complex a = sys.a();
            const double abs_a = std::abs(a);
            for (const auto &base : m_set.values) {
                complex zeta = base;
                double mag = std::abs(base);
                // m >= 1 up to the first m with |z|/(|a|^m |base|) < tol/2.
                do {
                    zeta *= a;
                    mag *= abs_a;
                    prod *= 1.0 - z / zeta;
                    ++used;
                } while (abs_z / mag >= 0.5 * m_tol);
                omitted += abs_z / (mag * (abs_a - 1.0));
            }
            omitted += abs_z * m_omitted_shells;
            out.product_value = sys.b() + z * prod;
            out.tail_bound = abs_z * std::abs(prod) * std::expm1(omitted);
        }
        out.factors_used = std::max<std::uint64_t>(used, 1);
        return out;
    }

private:
    const sp_system *m_sys;
    complex m_anchor;
    double m_tol;
    bool m_special = false;
    branch_set m_set;
    double m_c_est = 0.0;
    // Bound on sum |1/g| over the addresses beyond max_support (per unit |z|).
    double m_omitted_shells = 0.0;
};

inline wh_evaluation wh_eval(const sp_system &sys, complex z, complex w_anchor, int max_support,
                             const product_options &opts = {})
{
    return wh_factorization(sys, w_anchor, max_support, opts)(z);
}

} // namespace spzeros

#endif
