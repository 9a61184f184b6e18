#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <spzeros/cli.hpp>

#include "png_writer.hpp"

using namespace spzeros;

namespace
{

complex parse_complex(const std::string &text)
{
    std::stringstream ss(text);
    std::string re, im;
    std::getline(ss, re, ',');
    std::getline(ss, im);
    try {
        std::size_t used = 0;
        const double x = std::stod(re, &used);
        if (used != re.size()) {
            throw std::invalid_argument(re);
        }
        double y = 0.0;
        if (!im.empty()) {
            y = std::stod(im, &used);
            if (used != im.size()) {
                throw std::invalid_argument(im);
            }
        }
        return {x, y};
    } catch (const std::logic_error &) {
        throw error(errc::invalid_argument, "expected a complex number as 're' or 're,im', got '" + text + "'");
    }
}

std::pair<int, int> parse_size(const std::string &text)
{
    const auto x = text.find('x');
    try {
        if (x != std::string::npos) {
            return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
        }
    } catch (const std::logic_error &) {
    }
    throw error(errc::invalid_argument, "--png expects WxH, got '" + text + "'");
}

std::string read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error(errc::invalid_argument, "cannot read problem file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct common_args {
    std::string problem;
    std::string output = "-";
    int max_support = -1;
    double tol = 0.0;
};

void add_common(CLI::App *cmd, common_args &args)
{
    cmd->add_option("problem", args.problem, "problem file (JSON)")->required();
    cmd->add_option("-o,--output", args.output, "output path, '-' for stdout");
    cmd->add_option("--max-support", args.max_support, "override max_support");
    cmd->add_option("--tol", args.tol, "override product_tolerance");
}

problem_spec load(const common_args &args)
{
    auto spec = parse_problem(read_file(args.problem));
    if (args.max_support >= 0) {
        spec.max_support = args.max_support;
    }
    if (args.tol != 0.0) {
        spec.product_tolerance = args.tol;
    }
    validate_problem(spec);
    return spec;
}

template <typename Fn>
int with_output(const std::string &path, Fn &&fn)
{
    if (path == "-") {
        return fn(std::cout);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw error(errc::invalid_argument, "cannot open '" + path + "' for writing");
    }
    return fn(out);
}

void maybe_png(const std::string &size, const std::string &png_path, const std::string &output,
               const std::vector<complex> &points)
{
    if (size.empty()) {
        return;
    }
    const auto [w, h] = parse_size(size);
    const std::string path = !png_path.empty() ? png_path : (output == "-" ? "spzeros.png" : output + ".png");
    write_png(path, render_scatter(points, w, h));
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Zeros, inverse branches and momenta of solutions of f(az) = P(f(z))"};
    app.require_subcommand(1);

    common_args zeros_args, invert_args, moments_args, wh_args, check_args;
    std::string png, png_out, w_text = "0", circle, anchor_text = "0.3", m_text = "1,2";
    std::vector<std::string> z_texts;
    bool check_hyp = false, verify = false;

    auto *zeros = app.add_subcommand("zeros", "enumerate zeros z(sigma) as CSV");
    add_common(zeros, zeros_args);
    zeros->add_option("--png", png, "also render a WxH scatter plot");
    zeros->add_option("--png-out", png_out, "scatter plot path (default <output>.png)");
    zeros->add_flag("--check-hypothesis", check_hyp, "probe the principal-orbit hypothesis first");

    auto *invert = app.add_subcommand("invert", "inverse branches g_sigma(w) as CSV");
    add_common(invert, invert_args);
    invert->add_option("--w", w_text, "target value re,im");
    invert->add_option("--circle", circle, "sweep k targets on |w| = r, given as r,k");
    invert->add_flag("--verify", verify, "check f(g_sigma(w)) = w for every row");
    invert->add_option("--png", png, "also render a WxH scatter plot");
    invert->add_option("--png-out", png_out, "scatter plot path (default <output>.png)");
    invert->add_flag("--check-hypothesis", check_hyp, "probe the principal-orbit hypothesis first");

    auto *moments = app.add_subcommand("moments", "momenta sums against their closed forms");
    add_common(moments, moments_args);
    moments->add_option("--m", m_text, "comma separated orders");
    moments->add_option("--w", w_text, "anchor re,im (must differ from b)");

    auto *wh = app.add_subcommand("wh", "f(z) by the direct limit and both product factorizations");
    add_common(wh, wh_args);
    wh->add_option("--z", z_texts, "evaluation point re,im (repeatable)")->required();
    wh->add_option("--anchor", anchor_text, "anchor w re,im for the general product");

    auto *check = app.add_subcommand("check", "hypothesis probe and invariant suite");
    add_common(check, check_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? exit_code::ok : exit_code::usage;
    }

    try {
        if (*zeros) {
            const auto spec = load(zeros_args);
            std::vector<complex> points;
            zeros_options opts;
            opts.check_hypothesis = check_hyp;
            opts.points = png.empty() ? nullptr : &points;
            const int code =
                with_output(zeros_args.output, [&](std::ostream &os) { return run_zeros(spec, os, std::cerr, opts); });
            maybe_png(png, png_out, zeros_args.output, points);
            return code;
        }
        if (*invert) {
            const auto spec = load(invert_args);
            std::vector<complex> points;
            invert_options opts;
            opts.w = parse_complex(w_text);
            if (!circle.empty()) {
                const auto rk = parse_complex(circle);
                if (rk.imag() != std::floor(rk.imag())) {
                    throw error(errc::invalid_argument, "--circle expects r,k with integer k");
                }
                opts.circle = std::make_pair(rk.real(), static_cast<int>(rk.imag()));
            }
            opts.verify = verify;
            opts.check_hypothesis = check_hyp;
            opts.points = png.empty() ? nullptr : &points;
            const int code = with_output(invert_args.output,
                                         [&](std::ostream &os) { return run_invert(spec, opts, os, std::cerr); });
            maybe_png(png, png_out, invert_args.output, points);
            return code;
        }
        if (*moments) {
            const auto spec = load(moments_args);
            std::vector<int> orders;
            std::stringstream ss(m_text);
            for (std::string part; std::getline(ss, part, ',');) {
                try {
                    orders.push_back(std::stoi(part));
                } catch (const std::logic_error &) {
                    throw error(errc::invalid_argument, "--m expects comma separated integers");
                }
            }
            const auto w = parse_complex(w_text);
            return with_output(moments_args.output,
                               [&](std::ostream &os) { return run_moments(spec, orders, w, os, std::cerr); });
        }
        if (*wh) {
            const auto spec = load(wh_args);
            std::vector<complex> zs;
            for (const auto &t : z_texts) {
                zs.push_back(parse_complex(t));
            }
            const auto anchor = parse_complex(anchor_text);
            return with_output(wh_args.output,
                               [&](std::ostream &os) { return run_wh(spec, zs, anchor, os, std::cerr); });
        }
        if (*check) {
            const auto spec = load(check_args);
            return with_output(check_args.output, [&](std::ostream &os) { return run_check(spec, os); });
        }
    } catch (const error &e) {
        std::cerr << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code::numeric;
    }
    return exit_code::usage;
}
