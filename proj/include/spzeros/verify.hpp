#ifndef SPZEROS_VERIFY_HPP
#define SPZEROS_VERIFY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include <spzeros/branch.hpp>
#include <spzeros/error.hpp>
#include <spzeros/factor.hpp>
#include <spzeros/system.hpp>

namespace spzeros
{

// The three worked examples: 2z^2 - 1 (b = 1), z^2 - 1 (b = golden ratio),
// z^3 - 6 (b = 2).
inline sp_system example_system(int which)
{
    switch (which) {
    case 1:
        return build_system(polynomial{-1.0, 0.0, 2.0}, 1.0);
    case 2:
        return build_system(polynomial{-1.0, 0.0, 1.0}, 1.6);
    case 3:
        return build_system(polynomial{-6.0, 0.0, 0.0, 1.0}, 2.0);
    default:
        throw error(errc::invalid_argument, "example systems are numbered 1..3");
    }
}

// cos sqrt(-2z) as the entire series sum_n (2z)^n / (2n)!.
inline complex oracle_example1(complex z)
{
    const complex x = 2.0 * z;
    complex term{1.0};
    complex sum{1.0};
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (int n = 1; n < 400; ++n) {
        term *= x / (static_cast<double>(2 * n - 1) * (2 * n));
        sum += term;
        // Past the peak of the terms once (2n)^2 > |x|.
        if (4.0 * n * n > std::abs(x) && std::abs(term) <= 0.1 * eps * std::max(1.0, std::abs(sum))) {
            break;
        }
    }
    return sum;
}

struct zero_cluster {
    complex center;
    std::vector<sigma_sequence> members;
    int multiplicity = 0;
    double diameter = 0.0;
};

// Single-linkage clustering with linkage distance tol. Output order is by
// center (re, im), members in sigma order, independent of input order.
// Multiplicities are lower bounds: only the enumerated addresses are seen.
inline std::vector<zero_cluster> cluster_zeros(std::vector<std::pair<sigma_sequence, complex>> zeros, double tol)
{
    if (!(tol > 0.0)) {
        throw error(errc::invalid_argument, "cluster_zeros needs tol > 0");
    }
    std::sort(zeros.begin(), zeros.end(), [](const auto &x, const auto &y) { return x.first < y.first; });
    const std::size_t n = zeros.size();
    std::vector<std::size_t> by_re(n);
    std::iota(by_re.begin(), by_re.end(), std::size_t{0});
    std::sort(by_re.begin(), by_re.end(), [&](std::size_t i, std::size_t j) {
        const double ri = zeros[i].second.real();
        const double rj = zeros[j].second.real();
        return ri != rj ? ri < rj : i < j;
    });

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i) {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        return i;
    };
    // Sweep pairs within the 10 tol band once; link those within tol.
    std::vector<std::pair<std::size_t, std::size_t>> near;
    for (std::size_t s = 0; s < n; ++s) {
        const auto i = by_re[s];
        for (std::size_t t = s + 1; t < n; ++t) {
            const auto j = by_re[t];
            if (zeros[j].second.real() - zeros[i].second.real() > 10.0 * tol) {
                break;
            }
            const double dist = std::abs(zeros[i].second - zeros[j].second);
            if (dist <= tol) {
                const auto ri = find(i), rj = find(j);
                if (ri != rj) {
                    parent[std::max(ri, rj)] = std::min(ri, rj);
                }
            } else if (dist < 10.0 * tol) {
                near.emplace_back(i, j);
            }
        }
    }
    for (const auto &[i, j] : near) {
        if (find(i) != find(j)) {
            throw error(errc::ambiguous_clustering,
                        "zeros of '" + zeros[i].first.to_string(16) + "' and '" + zeros[j].first.to_string(16)
                            + "' are " + std::to_string(std::abs(zeros[i].second - zeros[j].second))
                            + " apart, within 10 tol of the linkage distance");
        }
    }

    std::vector<zero_cluster> out;
    std::vector<std::size_t> slot(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = find(i);
        if (slot[r] == n) {
            slot[r] = out.size();
            out.emplace_back();
        }
        auto &c = out[slot[r]];
        c.members.push_back(zeros[i].first);
        c.center += zeros[i].second;
    }
    std::vector<std::vector<complex>> points(out.size());
    for (std::size_t i = 0; i < n; ++i) {
        points[slot[find(i)]].push_back(zeros[i].second);
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto &c = out[k];
        c.multiplicity = static_cast<int>(c.members.size());
        c.center /= static_cast<double>(c.multiplicity);
        for (std::size_t x = 0; x < points[k].size(); ++x) {
            for (std::size_t y = x + 1; y < points[k].size(); ++y) {
                c.diameter = std::max(c.diameter, std::abs(points[k][x] - points[k][y]));
            }
        }
        if (c.diameter > tol) {
            throw error(errc::ambiguous_clustering, "single-linkage chain of diameter " + std::to_string(c.diameter)
                                                        + " exceeds tol");
        }
    }
    std::sort(out.begin(), out.end(), [](const zero_cluster &x, const zero_cluster &y) {
        if (x.center.real() != y.center.real()) {
            return x.center.real() < y.center.real();
        }
        if (x.center.imag() != y.center.imag()) {
            return x.center.imag() < y.center.imag();
        }
        return x.members.front() < y.members.front();
    });
    return out;
}

struct route_comparison {
    complex z;
    complex direct;
    complex wh_general;
    complex wh_special;
    double tail_general = 0.0;
    double tail_special = 0.0;
    double max_deviation = 0.0;
};

struct roundtrip_result {
    complex w;
    std::uint64_t branches = 0;
    double max_error = 0.0;
};

struct cross_check_report {
    bool wh_available = false;
    complex anchor;
    std::vector<route_comparison> routes;
    std::vector<roundtrip_result> roundtrips;
    double max_deviation = 0.0;
    // max over samples of deviation minus (tail_general + tail_special)
    double max_excess = -std::numeric_limits<double>::infinity();
    double max_roundtrip_error = 0.0;
};

struct cross_check_options {
    complex anchor{0.3, 0.0};
    int roundtrip_support = 6;
    product_options products{};
};

// f(z) by the direct limit and both WH products, and f(g_sigma(w)) = w over
// the enumerated addresses for each roundtrip sample w.
inline cross_check_report cross_check(const sp_system &sys, const std::vector<complex> &samples, int max_support,
                                      const std::vector<complex> &roundtrip_w = {},
                                      const cross_check_options &opts = {})
{
    cross_check_report rep;
    rep.anchor = opts.anchor;
    rep.wh_available = sys.degree() < std::abs(sys.a());
    if (rep.wh_available && !samples.empty()) {
        const wh_factorization general(sys, opts.anchor, max_support, opts.products);
        const wh_factorization special(sys, sys.b(), max_support, opts.products);
        for (const auto &z : samples) {
            route_comparison row;
            row.z = z;
            row.direct = eval_f_direct(sys, z);
            const auto g = general(z);
            const auto s = special(z);
            row.wh_general = g.product_value;
            row.wh_special = s.product_value;
            row.tail_general = g.tail_bound;
            row.tail_special = s.tail_bound;
            row.max_deviation = std::max({std::abs(row.direct - row.wh_general), std::abs(row.direct - row.wh_special),
                                          std::abs(row.wh_general - row.wh_special)});
            rep.max_deviation = std::max(rep.max_deviation, row.max_deviation);
            rep.max_excess = std::max(rep.max_excess, row.max_deviation - row.tail_general - row.tail_special);
            rep.routes.push_back(row);
        }
    } else {
        for (const auto &z : samples) {
            route_comparison row;
            row.z = z;
            row.direct = eval_f_direct(sys, z);
            row.wh_general = row.wh_special = complex{std::numeric_limits<double>::quiet_NaN()};
            rep.routes.push_back(row);
        }
    }
    for (const auto &w : roundtrip_w) {
        const auto set = enumerate_branches(sys, w, opts.roundtrip_support, opts.products, true);
        roundtrip_result rt;
        rt.w = w;
        rt.branches = set.values.size();
        for (const auto &g : set.values) {
            rt.max_error = std::max(rt.max_error, std::abs(eval_f_direct(sys, g) - w));
        }
        if (set.nonconverged > 0) {
            rt.max_error = std::numeric_limits<double>::infinity();
        }
        rep.max_roundtrip_error = std::max(rep.max_roundtrip_error, rt.max_error);
        rep.roundtrips.push_back(rt);
    }
    return rep;
}

} // namespace spzeros

#endif
