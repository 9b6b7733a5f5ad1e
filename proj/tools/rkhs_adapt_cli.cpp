// rkhs-adapt: command-line front end for the estimator experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "rkhs_adapt/harness/experiments.hpp"

namespace {

using namespace rkhs_adapt;
using namespace rkhs_adapt::harness;

// "10,20,30" or the progression shorthand "10,20,...,100".
std::vector<int> parse_n_list(const std::string& text) {
    std::vector<std::string> items;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(',', start);
        items.emplace_back(harness::detail::trim(std::string_view(text).substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    auto to_int = [](const std::string& s) { return static_cast<int>(harness::detail::to_integer("--n-list", s)); };
    std::vector<int> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i] != "...") {
            out.push_back(to_int(items[i]));
            continue;
        }
        if (out.size() < 2 || i + 1 != items.size() - 1)
            throw Error(Errc::invalid_argument, "--n-list: '...' needs two leading terms and one final term");
        const int step = out[out.size() - 1] - out[out.size() - 2];
        const int last = to_int(items[i + 1]);
        if (step <= 0 || (last - out.back()) % step != 0)
            throw Error(Errc::invalid_argument, "--n-list: progression does not reach the final term");
        for (int v = out.back() + step; v <= last; v += step) out.push_back(v);
        break;
    }
    if (out.empty()) throw Error(Errc::invalid_argument, "--n-list: empty list");
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] <= out[i - 1]) throw Error(Errc::invalid_argument, "--n-list: must be strictly ascending");
    return out;
}

KernelKind parse_kernel(const std::string& s) {
    if (s == "gaussian") return KernelKind::gaussian;
    if (s == "bspline1") return KernelKind::bspline1;
    if (s == "bspline2") return KernelKind::bspline2;
    throw Error(Errc::invalid_argument, "--kernel: expected gaussian, bspline1 or bspline2");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive estimation of road profiles in a reproducing kernel Hilbert space"};
    app.require_subcommand(1);

    std::string config, out, kernel, n_list;
    std::optional<int> n;
    std::optional<std::uint64_t> seed;
    bool svg = false;
    double t0 = 0.0, delta = 0.0;
    std::optional<double> threshold;

    auto* sim = app.add_subcommand("simulate", "Run one estimator simulation");
    sim->add_option("--config", config, "Configuration file")->required();
    sim->add_option("--n", n, "Number of basis functions");
    sim->add_option("--kernel", kernel, "gaussian|bspline1|bspline2");
    sim->add_option("--out", out, "Output directory");
    sim->add_flag("--svg", svg, "Also write SVG plots");
    sim->add_option("--seed", seed, "Seed for random initial coefficients");

    auto* swp = app.add_subcommand("sweep", "Error against basis count");
    swp->add_option("--config", config, "Configuration file")->required();
    swp->add_option("--n-list", n_list, "Basis counts, e.g. 10,20,...,100")->required();
    swp->add_option("--out", out, "Output directory");
    swp->add_flag("--svg", svg, "Also write SVG plots");

    auto* cnd = app.add_subcommand("condnum", "Grammian condition numbers against basis count");
    cnd->add_option("--config", config, "Configuration file")->required();
    cnd->add_option("--n-list", n_list, "Basis counts")->required();
    cnd->add_option("--out", out, "Output directory");
    cnd->add_flag("--svg", svg, "Also write SVG plots");

    auto* pe = app.add_subcommand("pe", "Persistency-of-excitation bound over a window");
    pe->add_option("--config", config, "Configuration file")->required();
    pe->add_option("--t0", t0, "Window start [s]")->required();
    pe->add_option("--delta", delta, "Window length [s]")->required();
    pe->add_option("--threshold", threshold, "Excitation threshold on gamma");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = load_config(config);
        if (n) cfg.n = *n;
        if (!kernel.empty()) cfg.kernel = parse_kernel(kernel);
        if (seed) cfg.seed = *seed;
        if (svg) cfg.svg = true;
        validate(cfg);
        const std::string dir = out.empty() ? cfg.out_dir : out;

        if (sim->parsed()) {
            const auto r = run_simulate(cfg, dir);
            fmt::print("n = {}  l2 = {:.6g}  sup = {:.6g}  xerr_final/xerr_max = {:.3e}\n", r.run.setup.centers.size(),
                       r.error.l2, r.error.sup,
                       r.run.max_x_err > 0 ? r.run.samples.back().x_err_norm / r.run.max_x_err : 0.0);
            fmt::print("wrote {} and {}\n", r.trajectory_csv.string(), r.function_csv.string());
        } else if (swp->parsed()) {
            const auto r = run_sweep(cfg, parse_n_list(n_list), dir);
            for (const auto& rec : r.records)
                fmt::print("n = {:4d}  l2 = {:.6g}  sup = {:.6g}  cond = {:.4g}\n", rec.n, rec.l2, rec.sup,
                           rec.grammian_condition);
            if (r.records.size() >= 2) fmt::print("log-log slope (L2) = {:.4f}\n", r.slope);
        } else if (cnd->parsed()) {
            const auto t = run_condnum(cfg, parse_n_list(n_list), dir);
            for (const auto& r : t)
                fmt::print("n = {:4d}  bspline1 = {:.4g}  bspline2 = {:.4g}  gauss = 1e{:.2f}\n", r.n, r.bspline1.value,
                           r.bspline2.value, r.gauss.log10);
        } else if (pe->parsed()) {
            const auto r = run_pe(cfg, t0, delta, threshold.value_or(cfg.pe_threshold), dir);
            fmt::print("gamma = {:.6g}  threshold = {:.3g}  excited = {}\n", r.gamma, r.threshold, r.excited);
            return r.excited ? 0 : 1;
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "rkhs-adapt: " << e.what() << '\n';
        return exit_status(e.code());
    } catch (const std::exception& e) {
        std::cerr << "rkhs-adapt: " << e.what() << '\n';
        return 3;
    }
}
