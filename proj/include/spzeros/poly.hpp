#ifndef SPZEROS_POLY_HPP
#define SPZEROS_POLY_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <spzeros/error.hpp>

namespace spzeros
{

using complex = std::complex<double>;

inline bool is_finite(complex z) noexcept
{
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

// Dense polynomial with complex coefficients, lowest degree first. The
// leading coefficient is nonzero except for the zero polynomial, which is
// stored as the single coefficient 0 with degree 0.
class polynomial
{
public:
    polynomial() : m_coeffs{complex{0.0}} {}

    explicit polynomial(std::vector<complex> coeffs) : m_coeffs(std::move(coeffs))
    {
        for (const auto &c : m_coeffs) {
            if (!is_finite(c)) {
                throw error(errc::invalid_argument, "polynomial coefficients must be finite");
            }
        }
        while (m_coeffs.size() > 1 && m_coeffs.back() == complex{0.0}) {
            m_coeffs.pop_back();
        }
        if (m_coeffs.empty()) {
            m_coeffs.emplace_back(0.0);
        }
    }

    polynomial(std::initializer_list<complex> coeffs) : polynomial(std::vector<complex>(coeffs)) {}

    [[nodiscard]] int degree() const noexcept
    {
        return static_cast<int>(m_coeffs.size()) - 1;
    }

    [[nodiscard]] std::span<const complex> coefficients() const noexcept
    {
        return m_coeffs;
    }

    [[nodiscard]] complex operator[](std::size_t k) const noexcept
    {
        return k < m_coeffs.size() ? m_coeffs[k] : complex{0.0};
    }

    [[nodiscard]] complex leading() const noexcept
    {
        return m_coeffs.back();
    }

    [[nodiscard]] complex operator()(complex z) const noexcept
    {
        complex acc = m_coeffs.back();
        for (auto k = m_coeffs.size() - 1; k-- > 0;) {
            acc = acc * z + m_coeffs[k];
        }
        return acc;
    }

    // Sum of |c_k| |z|^k, the natural scale of rounding errors in Horner's rule.
    [[nodiscard]] double magnitude_at(double r) const noexcept
    {
        double acc = std::abs(m_coeffs.back());
        for (auto k = m_coeffs.size() - 1; k-- > 0;) {
            acc = acc * r + std::abs(m_coeffs[k]);
        }
        return acc;
    }

    [[nodiscard]] double norm1() const noexcept
    {
        double acc = 0.0;
        for (const auto &c : m_coeffs) {
            acc += std::abs(c);
        }
        return acc;
    }

    friend bool operator==(const polynomial &, const polynomial &) = default;

private:
    std::vector<complex> m_coeffs;
};

inline complex eval(const polynomial &p, complex z) noexcept
{
    return p(z);
}

// Value and first derivative in one Horner pass.
inline std::pair<complex, complex> eval_with_derivative(const polynomial &p, complex z) noexcept
{
    const auto c = p.coefficients();
    complex val = c.back();
    complex der{0.0};
    for (auto k = c.size() - 1; k-- > 0;) {
        der = der * z + val;
        val = val * z + c[k];
    }
    return {val, der};
}

inline polynomial derivative(const polynomial &p)
{
    const auto c = p.coefficients();
    if (c.size() == 1) {
        return polynomial{};
    }
    std::vector<complex> out(c.size() - 1);
    for (std::size_t k = 1; k < c.size(); ++k) {
        out[k - 1] = c[k] * static_cast<double>(k);
    }
    return polynomial(std::move(out));
}

// Taylor coefficients of p around z0: p(z0 + t) = sum_k s_k t^k.
inline std::vector<complex> taylor_shift(std::span<const complex> c, complex z0)
{
    std::vector<complex> s(c.begin(), c.end());
    const auto n = s.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (auto k = n - 1; k-- > i;) {
            s[k] += z0 * s[k + 1];
        }
    }
    return s;
}

// Q(z) = (P(z) - b) / (z - b) by synthetic division. b must be a fixed point
// of P; the tolerance is applied relative to the Horner scale of P at b.
inline polynomial q_polynomial(const polynomial &p, complex b, double tolerance = 1e-12)
{
    if (p.degree() < 1) {
        throw error(errc::invalid_argument, "q_polynomial needs degree >= 1");
    }
    const double scale = std::max(1.0, p.magnitude_at(std::abs(b)));
    const double gap = std::abs(p(b) - b);
    if (!(gap <= tolerance * scale)) {
        throw error(errc::fixed_point_violation,
                    "|P(b) - b| = " + std::to_string(gap) + " exceeds tolerance");
    }
    const auto c = p.coefficients();
    const auto d = c.size() - 1;
    std::vector<complex> q(d);
    q[d - 1] = c[d];
    for (auto k = d - 1; k-- > 0;) {
        q[k] = c[k + 1] + b * q[k + 1];
    }
    return polynomial(std::move(q));
}

struct root_options {
    double tolerance = 1e-13;
    int max_iterations = 200;
};

namespace detail
{

inline double residual_scale(const polynomial &p, complex w, complex z) noexcept
{
    return std::max({1.0, std::abs(w), p.magnitude_at(std::abs(z))});
}

// Replace groups of numerically coincident roots by their centroid when that
// does not increase the residual. Approximations of an m-fold root scatter
// on a circle of radius ~eps^(1/m); their mean is far more accurate.
inline void polish_clusters(const polynomial &p, complex w, std::vector<complex> &roots)
{
    const auto n = roots.size();
    std::vector<int> group(n, -1);
    int groups = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (group[i] >= 0) {
            continue;
        }
        group[i] = groups;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (group[j] < 0
                && std::abs(roots[i] - roots[j]) <= 1e-5 * std::max(1.0, std::abs(roots[i]))) {
                group[j] = groups;
            }
        }
        ++groups;
    }
    for (int g = 0; g < groups; ++g) {
        complex sum{0.0};
        int count = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (group[i] == g) {
                sum += roots[i];
                ++count;
                worst = std::max(worst, std::abs(p(roots[i]) - w));
            }
        }
        if (count < 2) {
            continue;
        }
        const complex centre = sum / static_cast<double>(count);
        if (std::abs(p(centre) - w) <= worst) {
            for (std::size_t i = 0; i < n; ++i) {
                if (group[i] == g) {
                    roots[i] = centre;
                }
            }
        }
    }
}

} // namespace detail

// All d solutions of p(z) = w, repeated according to multiplicity, by
// Aberth-Ehrlich simultaneous iteration. Initial guesses are a deterministic
// function of the coefficients.
inline std::vector<complex> all_roots(const polynomial &p, complex w, const root_options &opts = {})
{
    const int d = p.degree();
    if (d < 1) {
        throw error(errc::invalid_argument, "all_roots needs degree >= 1");
    }
    if (!is_finite(w)) {
        throw error(errc::invalid_argument, "all_roots: w must be finite");
    }
    std::vector<complex> c(p.coefficients().begin(), p.coefficients().end());
    c[0] -= w;
    if (d == 1) {
        return {-c[0] / c[1]};
    }

    const complex centre = -c[d - 1] / (static_cast<double>(d) * c[d]);
    const auto shifted = taylor_shift(c, centre);
    double radius = 0.0;
    for (int k = 0; k < d; ++k) {
        const double ratio = std::abs(shifted[k] / shifted[d]);
        if (ratio > 0.0) {
            radius = std::max(radius, std::pow(ratio, 1.0 / (d - k)));
        }
    }
    if (radius == 0.0) {
        // p(z) - w = c_d (z - centre)^d.
        return std::vector<complex>(d, centre);
    }

    const polynomial target(c);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    std::vector<complex> z(d);
    for (int k = 0; k < d; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / d + 0.7;
        z[k] = centre + radius * complex{std::cos(theta), std::sin(theta)};
    }
    std::vector<char> done(d, 0);
    int remaining = d;
    for (int iter = 0; iter < opts.max_iterations && remaining > 0; ++iter) {
        for (int i = 0; i < d; ++i) {
            if (done[i]) {
                continue;
            }
            const auto [val, der] = eval_with_derivative(target, z[i]);
            const double scale = detail::residual_scale(p, w, z[i]);
            if (std::abs(val) <= 4.0 * eps * scale) {
                done[i] = 1;
                --remaining;
                continue;
            }
            complex repulsion{0.0};
            for (int j = 0; j < d; ++j) {
                if (j != i) {
                    const complex diff = z[i] - z[j];
                    if (diff != complex{0.0}) {
                        repulsion += 1.0 / diff;
                    }
                }
            }
            const complex denom = der - val * repulsion;
            complex step;
            if (denom == complex{0.0} || !is_finite(denom)) {
                step = complex{radius * 1e-3, radius * 1e-3};
            } else {
                step = val / denom;
            }
            z[i] -= step;
            if (std::abs(step) <= 2.0 * eps * std::abs(z[i])) {
                done[i] = 1;
                --remaining;
            }
        }
    }

    detail::polish_clusters(p, w, z);
    for (int i = 0; i < d; ++i) {
        const double res = std::abs(p(z[i]) - w);
        if (!(res <= opts.tolerance * detail::residual_scale(p, w, z[i]))) {
            throw error(errc::non_convergence, "all_roots: residual " + std::to_string(res)
                                                   + " above tolerance after "
                                                   + std::to_string(opts.max_iterations)
                                                   + " iterations");
        }
    }
    return z;
}

} // namespace spzeros

#endif
