#ifndef SPZEROS_SYSTEM_HPP
#define SPZEROS_SYSTEM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <spzeros/error.hpp>
#include <spzeros/poly.hpp>

namespace spzeros
{

namespace detail
{

inline double normalized_arg(complex z) noexcept
{
    const double t = std::arg(z);
    return t <= -std::numbers::pi ? std::numbers::pi : t;
}

// Index of the root nearest to b. Equidistant roots (to 1e-10 relative) are
// ordered by the principal argument of (root - b), then by (re, im).
inline std::size_t nearest_root_index(std::span<const complex> roots, complex b) noexcept
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto &r : roots) {
        best = std::min(best, std::abs(r - b));
    }
    const double cutoff = best * (1.0 + 1e-10);
    std::size_t pick = roots.size();
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (std::abs(roots[i] - b) > cutoff) {
            continue;
        }
        if (pick == roots.size()) {
            pick = i;
            continue;
        }
        const double ai = normalized_arg(roots[i] - b);
        const double ap = normalized_arg(roots[pick] - b);
        if (ai < ap
            || (ai == ap
                && (roots[i].real() < roots[pick].real()
                    || (roots[i].real() == roots[pick].real() && roots[i].imag() < roots[pick].imag())))) {
            pick = i;
        }
    }
    return pick;
}

inline double factorial(int n) noexcept
{
    double acc = 1.0;
    for (int k = 2; k <= n; ++k) {
        acc *= k;
    }
    return acc;
}

} // namespace detail

// Partial exponential Bell polynomial B_{m,j}(x_1, ..., x_{m-j+1}), summed over
// all (k_1, ..., k_{m-j+1}) with sum k_i = j and sum i k_i = m.
inline complex bell_polynomial(int m, int j, std::span<const complex> x)
{
    if (j < 1 || j > m) {
        throw error(errc::invalid_indices,
                    "bell_polynomial: need 1 <= j <= m, got m=" + std::to_string(m) + " j=" + std::to_string(j));
    }
    const int width = m - j + 1;
    if (static_cast<int>(x.size()) < width) {
        throw error(errc::invalid_indices, "bell_polynomial: need at least m-j+1 arguments");
    }
    std::vector<complex> scaled(width + 1);
    for (int i = 1; i <= width; ++i) {
        scaled[i] = x[i - 1] / detail::factorial(i);
    }
    const double m_fact = detail::factorial(m);

    // Depth-first over part sizes from the largest down; `count` parts and
    // `weight` total still to be placed.
    complex total{0.0};
    std::function<void(int, int, int, complex)> place = [&](int size, int count, int weight, complex term) {
        if (count == 0 || size == 0) {
            if (count == 0 && weight == 0) {
                total += term;
            }
            return;
        }
        complex power{1.0};
        double k_fact = 1.0;
        for (int k = 0; k <= count && k * size <= weight; ++k) {
            if (k > 0) {
                power *= scaled[size];
                k_fact *= k;
            }
            // The remaining count-k parts need at least that much weight.
            if (weight - k * size >= count - k) {
                place(size - 1, count - k, weight - k * size, term * power / k_fact);
            }
        }
    };
    place(width, j, m, complex{m_fact});
    return total;
}

struct taylor_coefficients {
    // values[m] = f^(m)(0) / m!
    std::vector<complex> values;
};

namespace detail
{

// f^(m)(0) for m = 0..max_order via f''(0) = P''(b)/(a^2 - a) and the
// Faa di Bruno recursion; derivs_at_b[j] = P^(j)(b).
inline std::vector<complex> derivatives_at_zero(complex a, complex b, std::span<const complex> derivs_at_b,
                                                int max_order)
{
    std::vector<complex> fd(max_order + 1);
    fd[0] = b;
    if (max_order >= 1) {
        fd[1] = complex{1.0};
    }
    const int d = static_cast<int>(derivs_at_b.size()) - 1;
    complex a_pow = a;
    for (int m = 2; m <= max_order; ++m) {
        a_pow *= a;
        complex acc{0.0};
        const std::span<const complex> known(fd.data() + 1, m - 1);
        for (int j = 2; j <= std::min(m, d); ++j) {
            acc += derivs_at_b[j] * bell_polynomial(m, j, known);
        }
        fd[m] = acc / (a_pow - a);
    }
    return fd;
}

} // namespace detail

// A validated instance of f(az) = P(f(z)) with f(0) = b, f'(0) = 1.
class sp_system
{
public:
    [[nodiscard]] const polynomial &p() const noexcept
    {
        return m_p;
    }
    [[nodiscard]] const polynomial &dp() const noexcept
    {
        return m_dp;
    }
    [[nodiscard]] const polynomial &q() const noexcept
    {
        return m_q;
    }
    // P(b + v) - b as a polynomial in v (no constant term), and its derivative.
    [[nodiscard]] const polynomial &p_dev() const noexcept
    {
        return m_p_dev;
    }
    [[nodiscard]] const polynomial &dp_dev() const noexcept
    {
        return m_dp_dev;
    }
    [[nodiscard]] complex b() const noexcept
    {
        return m_b;
    }
    [[nodiscard]] complex a() const noexcept
    {
        return m_a;
    }
    [[nodiscard]] int degree() const noexcept
    {
        return m_p.degree();
    }
    // Order of f, ln d / ln |a|.
    [[nodiscard]] double rho() const noexcept
    {
        return std::log(static_cast<double>(degree())) / std::log(std::abs(m_a));
    }
    // Radius around b on which the principal inverse branch contracts by at
    // least (1 + 1/|a|) / 2.
    [[nodiscard]] double contraction_radius() const noexcept
    {
        return m_delta;
    }
    // P^(j)(b), j = 0..d.
    [[nodiscard]] std::span<const complex> derivatives_at_b() const noexcept
    {
        return m_derivs_at_b;
    }
    [[nodiscard]] std::span<const complex> seed_coefficients() const noexcept
    {
        return m_seed;
    }
    [[nodiscard]] double seed_radius() const noexcept
    {
        return m_seed_radius;
    }
    [[nodiscard]] const root_options &roots() const noexcept
    {
        return m_root_opts;
    }

private:
    friend sp_system build_system(const polynomial &, complex, const root_options &);

    sp_system() = default;

    polynomial m_p, m_dp, m_q, m_p_dev, m_dp_dev;
    complex m_b, m_a;
    double m_delta = 0.0;
    std::vector<complex> m_derivs_at_b;
    std::vector<complex> m_seed;
    double m_seed_radius = 0.0;
    root_options m_root_opts;
};

inline constexpr int seed_order = 16;

inline sp_system build_system(const polynomial &p, complex fixed_point_hint, const root_options &ropts = {})
{
    const int d = p.degree();
    if (d < 2) {
        throw error(errc::degree_too_low, "P must have degree >= 2, got " + std::to_string(d));
    }
    if (!is_finite(fixed_point_hint)) {
        throw error(errc::invalid_argument, "fixed point hint must be finite");
    }

    // Fixed points are the roots of P(z) - z.
    std::vector<complex> shifted(p.coefficients().begin(), p.coefficients().end());
    shifted[1] -= 1.0;
    const auto fixed = all_roots(polynomial(shifted), complex{0.0}, ropts);
    complex b = fixed[0];
    for (const auto &r : fixed) {
        if (std::abs(r - fixed_point_hint) < std::abs(b - fixed_point_hint)) {
            b = r;
        }
    }
    // One Newton step on P(z) - z removes the root finder's last-digit noise.
    {
        const auto [val, der] = eval_with_derivative(p, b);
        if (der != complex{1.0}) {
            const complex nb = b - (val - b) / (der - 1.0);
            if (std::abs(p(nb) - nb) < std::abs(val - b)) {
                b = nb;
            }
        }
    }

    if (std::abs(b) <= 1e-12) {
        throw error(errc::zero_fixed_point, "selected fixed point is 0; shift the problem so that b != 0");
    }
    sp_system sys;
    sys.m_root_opts = ropts;
    sys.m_p = p;
    sys.m_dp = derivative(p);
    sys.m_b = b;
    sys.m_a = sys.m_dp(b);
    if (!(std::abs(sys.m_a) > 1.0)) {
        throw error(errc::no_repelling_fixed_point,
                    "fixed point nearest the hint has |P'(b)| = " + std::to_string(std::abs(sys.m_a)) + " <= 1");
    }
    sys.m_q = q_polynomial(p, b);

    sys.m_derivs_at_b.resize(d + 1);
    polynomial dj = p;
    for (int j = 0; j <= d; ++j) {
        sys.m_derivs_at_b[j] = dj(b);
        dj = derivative(dj);
    }
    {
        std::vector<complex> c(d + 1, complex{0.0});
        for (int j = 1; j <= d; ++j) {
            c[j] = sys.m_derivs_at_b[j] / detail::factorial(j);
        }
        sys.m_p_dev = polynomial(c);
        sys.m_dp_dev = derivative(sys.m_p_dev);
    }

    // Contraction radius: largest 2^-k with max over a 32-point circle of
    // |P0^{-1}(b + r e^{it}) - b| / r <= (1 + 1/|a|) / 2.
    const double target = 0.5 * (1.0 + 1.0 / std::abs(sys.m_a));
    for (int k = 1; k <= 40 && sys.m_delta == 0.0; ++k) {
        const double r = std::ldexp(1.0, -k);
        double worst = 0.0;
        for (int i = 0; i < 32; ++i) {
            const double t = 2.0 * std::numbers::pi * i / 32.0;
            const complex w = b + r * complex{std::cos(t), std::sin(t)};
            const auto roots = all_roots(p, w, ropts);
            const complex pick = roots[detail::nearest_root_index(roots, b)];
            worst = std::max(worst, std::abs(pick - b) / r);
        }
        if (worst <= target) {
            sys.m_delta = r;
        }
    }
    if (sys.m_delta == 0.0) {
        throw error(errc::non_convergence, "no contraction radius found around the fixed point");
    }

    // Taylor seed for the direct evaluator, and the radius on which its
    // truncation error is below rounding.
    const auto fd = detail::derivatives_at_zero(sys.m_a, b, sys.m_derivs_at_b, seed_order);
    sys.m_seed.resize(fd.size());
    for (std::size_t m = 0; m < fd.size(); ++m) {
        sys.m_seed[m] = fd[m] / detail::factorial(static_cast<int>(m));
    }
    double radius = 1.0;
    const double floor = 1e-2 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(b));
    for (int k = seed_order - 1; k <= seed_order; ++k) {
        const double t = std::abs(sys.m_seed[k]);
        if (t > 0.0) {
            radius = std::min(radius, std::pow(floor / t, 1.0 / k));
        }
    }
    sys.m_seed_radius = radius;
    return sys;
}

// f^(m)(0)/m! for m = 0..max_order.
inline taylor_coefficients taylor_at_zero(const sp_system &sys, int max_order)
{
    if (max_order < 1) {
        throw error(errc::invalid_argument, "taylor_at_zero needs max_order >= 1");
    }
    auto fd = detail::derivatives_at_zero(sys.a(), sys.b(), sys.derivatives_at_b(), max_order);
    for (std::size_t m = 0; m < fd.size(); ++m) {
        fd[m] /= detail::factorial(static_cast<int>(m));
    }
    return {std::move(fd)};
}

namespace detail
{

struct forward_result {
    complex value;
    double amplification;
};

// P^n applied to the Taylor seed of f at z a^{-n}, tracking |(P^n)'| for
// the rounding estimate.
inline forward_result forward_orbit(const sp_system &sys, complex z, int n)
{
    // Iterate the deviation u = x - b so rounding stays relative to |u|
    // while the orbit is still near b.
    const complex eps_arg = z / std::pow(sys.a(), n);
    const auto seed = sys.seed_coefficients();
    complex u = seed.back();
    for (auto k = seed.size() - 1; k-- > 1;) {
        u = u * eps_arg + seed[k];
    }
    u *= eps_arg;
    double amp = 1.0;
    for (int k = 0; k < n; ++k) {
        const auto [val, der] = eval_with_derivative(sys.p_dev(), u);
        u = val;
        amp *= std::abs(der);
        if (!(std::abs(u) <= 1e150) || !std::isfinite(amp)) {
            throw error(errc::non_convergence, "forward iterate overflow at step " + std::to_string(k + 1));
        }
    }
    return {sys.b() + u, amp};
}

} // namespace detail

// f(z) = lim P^n(f(a^{-n} z)). The inner value is taken from a degree-16
// Taylor polynomial of f at 0 (f(w) = b + w + O(w^2) is the first-order case),
// so n only has to bring a^{-n} z into the seed radius; n = 0 is allowed.
inline complex eval_f_direct(const sp_system &sys, complex z, int n_max = 200)
{
    if (n_max < 1) {
        throw error(errc::invalid_argument, "eval_f_direct needs n_max >= 1");
    }
    if (!is_finite(z)) {
        throw error(errc::invalid_argument, "eval_f_direct: z must be finite");
    }
    if (z == complex{0.0}) {
        return sys.b();
    }
    const double log_a = std::log(std::abs(sys.a()));
    int n = std::max(0, static_cast<int>(std::ceil(std::log(std::abs(z) / sys.seed_radius()) / log_a)));
    if (n + 1 > n_max) {
        throw error(errc::non_convergence, "eval_f_direct: |z| needs n = " + std::to_string(n + 1) + " > n_max");
    }
    constexpr double eps = std::numeric_limits<double>::epsilon();
    auto prev = detail::forward_orbit(sys, z, n);
    for (; n < n_max; ++n) {
        const auto next = detail::forward_orbit(sys, z, n + 1);
        const double gap = std::abs(next.value - prev.value);
        const double allowed = 1e-12 * std::max(1.0, std::abs(next.value))
                               + 1e3 * eps * std::max(1.0, std::abs(sys.b()))
                                     * std::max(prev.amplification, next.amplification);
        if (gap <= allowed) {
            // Both are inside the seed radius; the shorter orbit carries less rounding.
            return prev.value;
        }
        prev = next;
    }
    throw error(errc::non_convergence, "eval_f_direct: successive iterates still differ at n_max = "
                                           + std::to_string(n_max) + " (last value "
                                           + std::to_string(prev.value.real()) + "+"
                                           + std::to_string(prev.value.imag()) + "i)");
}

} // namespace spzeros

#endif
