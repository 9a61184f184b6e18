// One PASS/FAIL line per acceptance criterion; nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spzeros/factor.hpp>
#include <spzeros/verify.hpp>

using namespace spzeros;

namespace
{

const double pi = std::numbers::pi;
const double phi = (1.0 + std::sqrt(5.0)) / 2.0;

struct outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(int id, const char *title, const std::function<outcome()> &body)
{
    const auto t0 = std::chrono::steady_clock::now();
    outcome o;
    try {
        o = body();
    } catch (const std::exception &e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %s | %s | %.2f s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) {
        ++failures;
    }
}

std::string fmt(const char *format, double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, format, x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<complex> disc_points(std::uint64_t seed, int count, double radius)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-radius, radius);
    std::vector<complex> out;
    while (static_cast<int>(out.size()) < count) {
        const complex z(u(rng), u(rng));
        if (std::abs(z) <= radius) {
            out.push_back(z);
        }
    }
    return out;
}

std::string read_all(const std::filesystem::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main()
{
    run(1, "Ex.1 zeros -(2k-1)^2 pi^2/8, rel <= 1e-10, < 1 s", [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto s1 = example_system(1);
        const std::vector<std::pair<sigma_sequence, double>> cases{
            {{}, 1.0}, {{1}, 9.0}, {{1, 1}, 25.0}, {{0, 1}, 49.0}};
        double worst = 0.0;
        for (const auto &[sigma, k2] : cases) {
            const double want = -k2 * pi * pi / 8.0;
            const auto z = zero_product(s1, sigma, 1e-13, 200);
            worst = std::max(worst, std::abs(z.value - want) / std::abs(want));
        }
        const double secs = seconds_since(t0);
        return outcome{worst <= 1e-10 && secs < 1.0,
                       "max rel error " + fmt("%.3g", worst) + " (tol 1e-10), " + fmt("%.3f", secs) + " s"};
    });

    run(2, "Ex.2 momenta m=1,2,3 at N=20, |err| <= tail + 1e-8, m=1 shell ratio in [0.4, 0.8], < 60 s", [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto s2 = example_system(2);
        const auto set = enumerate_branches(s2, 0.0, 20, {}, true);
        if (set.nonconverged > 0) {
            return outcome{false, "non-converged products"};
        }
        const double want[] = {1.0, 1.0 - 1.0 / std::sqrt(5.0), 0.4};
        bool ok = true;
        std::string detail;
        std::vector<std::pair<int, complex>> shells1;
        for (int m = 1; m <= 3; ++m) {
            const auto rep = moment_sum(s2, m, set);
            const double err = std::abs(rep.computed_sum - want[m - 1]);
            ok = ok && err <= rep.tail_bound + 1e-8;
            detail += "m=" + std::to_string(m) + " err " + fmt("%.3g", err) + " tail " + fmt("%.3g", rep.tail_bound)
                      + "; ";
            if (m == 1) {
                shells1 = rep.shells;
            }
        }
        std::vector<double> ratios;
        for (int n = 13; n <= 20; ++n) {
            ratios.push_back(std::abs(shells1[n].second - 1.0) / std::abs(shells1[n - 1].second - 1.0));
        }
        std::sort(ratios.begin(), ratios.end());
        const double median = 0.5 * (ratios[3] + ratios[4]);
        const double predicted = 2.0 / std::abs(s2.a());
        const bool ratio_ok = ratios.front() >= 0.4 && ratios.back() <= 0.8;
        const double secs = seconds_since(t0);
        detail += "shell ratio " + fmt("%.4f", ratios.front()) + ".." + fmt("%.4f", ratios.back()) + " (median "
                  + fmt("%.4f", median) + ", predicted " + fmt("%.4f", predicted) + "); " + fmt("%.1f", secs) + " s";
        return outcome{ok && ratio_ok && secs < 60.0, detail};
    });

    run(3, "Ex.3 momenta m=1 -> 1, m=2 -> 9/11 at N=10, |err| <= 1e-8, < 10 s", [] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto s3 = example_system(3);
        const auto set = enumerate_branches(s3, 0.0, 10, {}, true);
        const auto r1 = moment_sum(s3, 1, set);
        const auto r2 = moment_sum(s3, 2, set);
        const double e1 = std::abs(r1.computed_sum - 1.0);
        const double e2 = std::abs(r2.computed_sum - 9.0 / 11.0);
        const double secs = seconds_since(t0);
        return outcome{e1 <= 1e-8 && e2 <= 1e-8 && secs < 10.0,
                       "m=1 err " + fmt("%.3g", e1) + " (tail bound " + fmt("%.3g", r1.tail_bound) + "), m=2 err "
                           + fmt("%.3g", e2) + ", tol 1e-8; " + fmt("%.2f", secs) + " s"};
    });

    run(4, "functional equation |f(az) - P(f(z))| <= 1e-9, 100 points |z| <= 1, all systems", [] {
        double worst = 0.0;
        for (int k = 1; k <= 3; ++k) {
            const auto s = example_system(k);
            for (const auto &z : disc_points(100 + k, 100, 1.0)) {
                worst = std::max(worst, std::abs(eval_f_direct(s, s.a() * z) - s.p()(eval_f_direct(s, z))));
            }
        }
        return outcome{worst <= 1e-9, "max residual " + fmt("%.3g", worst) + " (tol 1e-9)"};
    });

    run(5, "three routes to f agree within 1e-6 + tail bounds, 10 points |z| <= 2, N=14, all systems", [] {
        bool ok = true;
        std::string detail;
        for (int k = 1; k <= 3; ++k) {
            const auto s = example_system(k);
            const auto rep = cross_check(s, disc_points(200 + k, 10, 2.0), 14);
            double tails = 0.0;
            for (const auto &r : rep.routes) {
                tails = std::max(tails, r.tail_general + r.tail_special);
            }
            ok = ok && rep.wh_available && rep.max_excess <= 1e-6;
            detail += "ex" + std::to_string(k) + " dev " + fmt("%.3g", rep.max_deviation) + " tails<=" + fmt("%.3g", tails)
                      + "; ";
        }
        return outcome{ok, detail + "excess tol 1e-6"};
    });

    run(6, "roundtrip |f(g_sigma(w)) - w| <= 1e-7, |supp| <= 6, w in {0, 0.3+0.1i, -2}, all systems", [] {
        double worst = 0.0;
        std::uint64_t count = 0;
        for (int k = 1; k <= 3; ++k) {
            const auto s = example_system(k);
            cross_check_options opts;
            opts.roundtrip_support = 6;
            const auto rep = cross_check(s, {}, 1, {complex(0.0), complex(0.3, 0.1), complex(-2.0)}, opts);
            worst = std::max(worst, rep.max_roundtrip_error);
            for (const auto &r : rep.roundtrips) {
                count += r.branches;
            }
        }
        return outcome{worst <= 1e-7,
                       "max error " + fmt("%.3g", worst) + " over " + std::to_string(count) + " branches (tol 1e-7)"};
    });

    run(7, "growth floor min |g_sigma(0)| |a|^-n positive, levels 4..8 within 10x, all systems", [] {
        bool ok = true;
        std::string detail;
        for (int k = 1; k <= 3; ++k) {
            const auto s = example_system(k);
            const auto set = enumerate_branches(s, 0.0, 8);
            const auto floors = shell_growth(s, set);
            const double lo = *std::min_element(floors.begin() + 4, floors.begin() + 9);
            const double hi = *std::max_element(floors.begin() + 4, floors.begin() + 9);
            const double all = *std::min_element(floors.begin() + 1, floors.begin() + 9);
            ok = ok && all > 0.0 && hi / lo < 10.0;
            detail += "ex" + std::to_string(k) + " C=" + fmt("%.3g", all) + " spread " + fmt("%.3g", hi / lo) + "; ";
        }
        return outcome{ok, detail + "spread tol 10"};
    });

    run(8, "direct limit vs cos sqrt(-2z) series <= 1e-9, 50 points |z| <= 3", [] {
        const auto s1 = example_system(1);
        double worst = 0.0;
        for (const auto &z : disc_points(300, 50, 3.0)) {
            worst = std::max(worst, std::abs(eval_f_direct(s1, z) - oracle_example1(z)));
        }
        return outcome{worst <= 1e-9, "max deviation " + fmt("%.3g", worst) + " (tol 1e-9)"};
    });

    run(9, "f''(0) = 1/3 (Ex.1), 1/(phi sqrt 5) (Ex.2), central differences within 1e-5 rel", [] {
        bool ok = true;
        std::string detail;
        const double exact[] = {1.0 / 3.0, 1.0 / (phi * std::sqrt(5.0))};
        for (int k = 1; k <= 2; ++k) {
            const auto s = example_system(k);
            const complex f2 = 2.0 * taylor_at_zero(s, 2).values[2];
            const double h = 1e-4;
            const complex fd = (eval_f_direct(s, h) - 2.0 * eval_f_direct(s, 0.0) + eval_f_direct(s, -h)) / (h * h);
            const double rel_exact = std::abs(f2 - exact[k - 1]) / exact[k - 1];
            const double rel_fd = std::abs(fd - f2) / std::abs(f2);
            ok = ok && rel_exact <= 1e-12 && rel_fd <= 1e-5;
            detail += "ex" + std::to_string(k) + " f''=" + fmt("%.12g", f2.real()) + " vs exact " + fmt("%.2g", rel_exact)
                      + ", vs FD " + fmt("%.2g", rel_fd) + "; ";
        }
        return outcome{ok, detail + "tol 1e-5"};
    });

    run(10, "zeros CSV for Ex.2, N=10, byte-identical for SPZEROS_THREADS 1 and 4", [] {
        const auto dir = std::filesystem::temp_directory_path() / "spzeros_acceptance";
        std::filesystem::create_directories(dir);
        const std::string problem = std::string(SPZEROS_SOURCE_DIR) + "/problems/example2.json";
        std::string outputs[2];
        const char *threads[] = {"1", "4"};
        for (int i = 0; i < 2; ++i) {
            const auto path = dir / (std::string("zeros_") + threads[i] + ".csv");
            const std::string cmd = std::string("SPZEROS_THREADS=") + threads[i] + " '" + SPZEROS_CLI + "' zeros '"
                                    + problem + "' --max-support 10 -o '" + path.string() + "'";
            if (std::system(cmd.c_str()) != 0) {
                return outcome{false, "command failed: " + cmd};
            }
            outputs[i] = read_all(path);
        }
        std::size_t rows = std::count(outputs[0].begin(), outputs[0].end(), '\n');
        return outcome{!outputs[0].empty() && outputs[0] == outputs[1],
                       std::to_string(outputs[0].size()) + " bytes, " + std::to_string(rows) + " lines, "
                           + (outputs[0] == outputs[1] ? "identical" : "DIFFERENT")};
    });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
