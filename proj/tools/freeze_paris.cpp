// Writes the principal zero of the golden-ratio system as a golden file.
#include <cstdio>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include <spzeros/branch.hpp>
#include <spzeros/cli.hpp>
#include <spzeros/verify.hpp>

int main(int argc, char **argv)
{
    if (argc != 2) {
        std::cerr << "usage: freeze_paris <out.json>\n";
        return 1;
    }
    const auto sys = spzeros::example_system(2);
    const auto z = spzeros::zero_product(sys, {}, 1e-14, 200);
    nlohmann::ordered_json j;
    j["system"] = "z^2 - 1, b = (1 + sqrt 5)/2";
    j["sigma"] = "";
    j["tolerance"] = 1e-14;
    j["n_cap"] = 200;
    j["re"] = spzeros::format_real(z.value.real());
    j["im"] = spzeros::format_real(z.value.imag());
    j["terms_used"] = z.terms_used;
    j["tail_estimate"] = z.tail_estimate;
    j["converged"] = z.converged;
    std::ofstream(argv[1]) << j.dump(2) << "\n";
    std::printf("%.17g %+.3g i (tail %.3g)\n", z.value.real(), z.value.imag(), z.tail_estimate);
    return z.converged ? 0 : 2;
}
