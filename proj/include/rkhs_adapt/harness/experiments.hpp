#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <fmt/core.h>

#include "rkhs_adapt/dynamics.hpp"
#include "rkhs_adapt/harness/config.hpp"
#include "rkhs_adapt/harness/svg.hpp"
#include "rkhs_adapt/precise_condition.hpp"
#include "rkhs_adapt/rkhs.hpp"
#include "rkhs_adapt/vehicle.hpp"

namespace rkhs_adapt::harness {

constexpr int error_grid_points = 2048;

[[nodiscard]] inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_error, fmt::format("cannot open config '{}'", path));
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = parse_config(buf.str());
    cfg.base_dir = std::filesystem::path(path).parent_path().string();
    validate(cfg);
    return cfg;
}

[[nodiscard]] inline Domain1D make_domain(const ExperimentConfig& c) { return {c.domain_length, c.periodic}; }

[[nodiscard]] inline Kernel make_kernel(const ExperimentConfig& c, KernelKind kind) {
    const Domain1D dom = make_domain(c);
    switch (kind) {
    case KernelKind::gaussian: return GaussianKernel(c.sigma, dom);
    case KernelKind::bspline1: return MultiscaleKernel(1, c.bspline1_smoothness, c.bspline_levels, dom, c.bspline_unit);
    case KernelKind::bspline2: return MultiscaleKernel(2, c.bspline2_smoothness, c.bspline_levels, dom, c.bspline_unit);
    }
    throw Error(Errc::invalid_argument, "kernel.kind: unknown kernel");
}

[[nodiscard]] inline std::vector<double> make_centers(const ExperimentConfig& c, int n) {
    if (c.centers == CentersPolicy::explicit_list) return c.explicit_centers;
    return uniform_centers(make_domain(c), n);
}

/// Spatial frequency (cycles per domain unit) of the sine road.
[[nodiscard]] inline double road_spatial_frequency(const ExperimentConfig& c) {
    switch (c.frequency_unit) {
    case FrequencyUnit::per_unit: return c.frequency;
    case FrequencyUnit::per_lap: return c.frequency / c.domain_length;
    case FrequencyUnit::hertz: return c.frequency / c.path_speed;
    }
    return c.frequency;
}

[[nodiscard]] inline RoadProfile make_road(const ExperimentConfig& c) {
    if (c.road == RoadKind::sine) return RoadProfile::sine(c.amplitude, road_spatial_frequency(c), make_domain(c));
    std::filesystem::path p(c.profile_path);
    if (p.is_relative() && !c.base_dir.empty()) p = std::filesystem::path(c.base_dir) / p;
    return ingest_profile_csv(p.string(), c.s_column, c.z_column, c.domain_length, c.periodic);
}

/// Everything needed for one estimator run.
struct Experiment {
    LtiPlant plant;
    LearningLaw law;
    SimulationSetup setup;
    RoadProfile road;
    std::optional<RkhsExpansion> truth; ///< the road projected onto the span when road.in_span
};

[[nodiscard]] inline Experiment prepare(const ExperimentConfig& c, int n, KernelKind kind) {
    validate(c);
    LtiPlant plant = build_plant(c.vehicle);
    Matrix q = Eigen::Map<const Vector>(c.q_diagonal.data(), 4).asDiagonal();
    LearningLaw law = LearningLaw::make(plant, c.mode, Eigen::Map<const Vector>(c.gain.data(), static_cast<Eigen::Index>(c.gain.size())), q,
                                        c.ridge);
    SimulationSetup st;
    st.kernel = make_kernel(c, kind);
    st.centers = make_centers(c, n);
    st.path_speed = c.path_speed;
    st.t_final = c.t_final;
    st.dt = c.dt;
    st.sample_every = c.sample_every;
    RoadProfile road = make_road(c);
    std::optional<RkhsExpansion> truth;
    if (c.in_span) truth = project([&](double s) { return road(s); }, st.kernel, st.centers, {.ridge = c.ridge});
    const auto m = static_cast<Eigen::Index>(st.centers.size());
    switch (c.initial) {
    case InitialCoefficients::zero: break;
    case InitialCoefficients::alpha_star: st.alpha_hat0 = truth->coefficients(); break;
    case InitialCoefficients::random: {
        std::mt19937_64 rng(c.seed);
        std::normal_distribution<double> normal(0.0, c.initial_scale);
        Vector a(m);
        for (Eigen::Index i = 0; i < m; ++i) a(i) = normal(rng);
        st.alpha_hat0 = a;
        break;
    }
    }
    return {std::move(plant), std::move(law), std::move(st), std::move(road), std::move(truth)};
}

[[nodiscard]] inline EstimatorRun execute(const Experiment& e) {
    if (e.truth) return simulate(e.plant, *e.truth, e.law, e.setup);
    return simulate(e.plant, e.road, e.law, e.setup);
}

/// The function the estimator is chasing: the projected road when in span, else the road.
[[nodiscard]] inline double true_value(const Experiment& e, double s) { return e.truth ? (*e.truth)(s) : e.road(s); }

[[nodiscard]] inline std::vector<double> error_grid(const Domain1D& dom) {
    std::vector<double> g(error_grid_points);
    const double step = dom.periodic ? dom.length / error_grid_points : dom.length / (error_grid_points - 1);
    for (int i = 0; i < error_grid_points; ++i) g[static_cast<std::size_t>(i)] = i * step;
    return g;
}

struct FunctionError {
    double l2 = 0.0;
    double sup = 0.0;
};

/// L2 = sqrt(sum (f - f_hat)^2 ds) and sup |f - f_hat| on the fixed uniform grid.
template <class F, class G>
[[nodiscard]] FunctionError function_error(const F& f, const G& f_hat, const Domain1D& dom) {
    const auto grid = error_grid(dom);
    const double ds = dom.periodic ? dom.length / error_grid_points : dom.length / (error_grid_points - 1);
    FunctionError out;
    double acc = 0.0;
    for (double s : grid) {
        const double e = f(s) - f_hat(s);
        acc += e * e;
        out.sup = std::max(out.sup, std::abs(e));
    }
    out.l2 = std::sqrt(acc * ds);
    return out;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(Errc::io_error, fmt::format("cannot create '{}': {}", dir, ec.message()));
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, fmt::format("cannot write '{}'", path.string()));
    out << content;
    if (!out) throw Error(Errc::io_error, fmt::format("write failed for '{}'", path.string()));
}

inline std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{}", v);
}

inline const char* kind_name(KernelKind k) {
    switch (k) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::bspline1: return "bspline1";
    case KernelKind::bspline2: return "bspline2";
    }
    return "?";
}

} // namespace detail

/// Natural-log least-squares slope of log(y) against log(x).
[[nodiscard]] inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(Errc::invalid_argument, "slope needs at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct SimulateOutput {
    EstimatorRun run;
    FunctionError error;
    std::filesystem::path trajectory_csv;
    std::filesystem::path function_csv;
};

[[nodiscard]] inline std::string trajectory_csv(const EstimatorRun& run) {
    std::string out = "t,x1,x2,x3,x4,xh1,xh2,xh3,xh4,V,xerr\n";
    for (const auto& s : run.samples) {
        out += detail::num(s.t);
        for (Eigen::Index i = 0; i < s.x.size(); ++i) out += "," + detail::num(s.x(i));
        for (Eigen::Index i = 0; i < s.x_hat.size(); ++i) out += "," + detail::num(s.x_hat(i));
        out += "," + detail::num(s.V) + "," + detail::num(s.x_err_norm) + "\n";
    }
    return out;
}

/// One simulation; writes trajectory.csv, function.csv and optionally function.svg.
inline SimulateOutput run_simulate(const ExperimentConfig& cfg, const std::string& out_dir) {
    const Experiment e = prepare(cfg, cfg.n, cfg.kernel);
    SimulateOutput out{execute(e), {}, {}, {}};
    const Domain1D dom = make_domain(cfg);
    auto truth = [&](double s) { return true_value(e, s); };
    out.error = function_error(truth, out.run.estimate, dom);

    detail::ensure_dir(out_dir);
    out.trajectory_csv = std::filesystem::path(out_dir) / "trajectory.csv";
    out.function_csv = std::filesystem::path(out_dir) / "function.csv";
    detail::write_file(out.trajectory_csv, trajectory_csv(out.run));
    std::string f = "s,f_true,f_hat\n";
    Series st{"f", {}, {}, "#000000"}, sh{"f_hat", {}, {}, "#d62728"};
    for (double s : error_grid(dom)) {
        const double ft = truth(s), fh = out.run.estimate(s);
        f += fmt::format("{},{},{}\n", detail::num(s), detail::num(ft), detail::num(fh));
        st.x.push_back(s), st.y.push_back(ft), sh.x.push_back(s), sh.y.push_back(fh);
    }
    detail::write_file(out.function_csv, f);
    if (cfg.svg) {
        PlotSpec spec{fmt::format("Road estimate, {} kernel, n = {}", detail::kind_name(cfg.kernel), e.setup.centers.size()),
                      "s", "elevation",
                      {fmt::format("L2 error {:.4g}, sup error {:.4g}", out.error.l2, out.error.sup)}};
        detail::write_file(std::filesystem::path(out_dir) / "function.svg", render_svg(spec, {st, sh}));
    }
    return out;
}

struct SweepRecord {
    int n = 0;
    double l2 = 0.0;
    double sup = 0.0;
    double grammian_condition = 0.0;
    double grammian_condition_log10 = 0.0;
    double final_state_error = 0.0; ///< ||x_err(t_final)|| / max_t ||x_err(t)||
};

struct SweepResult {
    KernelKind kernel = KernelKind::gaussian;
    std::vector<SweepRecord> records;
    double slope = 0.0; ///< natural-log least-squares slope of l2 against n
};

/// Worker count: hardware concurrency, capped by RKHS_ADAPT_THREADS and the job count.
[[nodiscard]] inline unsigned worker_count(std::size_t jobs) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("RKHS_ADAPT_THREADS")) {
        const long long cap = std::atoll(env);
        if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(jobs, 1))));
}

/// Runs `job(i)` for i in [0, count) on a worker pool; the first exception is rethrown.
template <class Job>
void parallel_for(std::size_t count, Job&& job) {
    const unsigned workers = worker_count(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

[[nodiscard]] inline SweepResult sweep(const ExperimentConfig& cfg, const std::vector<int>& n_list, KernelKind kind) {
    if (n_list.empty()) throw Error(Errc::invalid_argument, "n_list must be non-empty");
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) throw Error(Errc::invalid_argument, "n_list must be strictly ascending");
    SweepResult res;
    res.kernel = kind;
    res.records.resize(n_list.size());
    const Domain1D dom = make_domain(cfg);
    parallel_for(n_list.size(), [&](std::size_t i) {
        const Experiment e = prepare(cfg, n_list[i], kind);
        const EstimatorRun run = execute(e);
        const auto err = function_error([&](double s) { return true_value(e, s); }, run.estimate, dom);
        const auto cond = precise_grammian_condition(e.setup.kernel, e.setup.centers);
        res.records[i] = {n_list[i], err.l2, err.sup, cond.value, cond.log10,
                          run.max_x_err > 0.0 ? run.samples.back().x_err_norm / run.max_x_err : 0.0};
    });
    if (n_list.size() >= 2) {
        std::vector<double> x, y;
        for (const auto& r : res.records) x.push_back(r.n), y.push_back(r.l2);
        res.slope = loglog_slope(x, y);
    }
    return res;
}

[[nodiscard]] inline std::string sweep_csv(const SweepResult& r) {
    std::string out = "n,l2,sup,cond\n";
    for (const auto& rec : r.records)
        out += fmt::format("{},{},{},{}\n", rec.n, detail::num(rec.l2), detail::num(rec.sup),
                           detail::num(rec.grammian_condition));
    return out;
}

/// Sweep over n; writes sweep.csv and optionally sweep.svg (log-log with fitted slope).
inline SweepResult run_sweep(const ExperimentConfig& cfg, const std::vector<int>& n_list, const std::string& out_dir) {
    SweepResult r = sweep(cfg, n_list, cfg.kernel);
    detail::ensure_dir(out_dir);
    detail::write_file(std::filesystem::path(out_dir) / "sweep.csv", sweep_csv(r));
    if (cfg.svg) {
        Series l2{"log L2 error", {}, {}, "#1f77b4", true}, sup{"log sup error", {}, {}, "#ff7f0e", true};
        for (const auto& rec : r.records) {
            l2.x.push_back(std::log(rec.n)), l2.y.push_back(std::log(rec.l2));
            sup.x.push_back(std::log(rec.n)), sup.y.push_back(std::log(rec.sup));
        }
        PlotSpec spec{fmt::format("Error against basis count, {} kernel", detail::kind_name(r.kernel)), "log n",
                      "log error", {fmt::format("least-squares slope (L2): {:.3f}", r.slope)}};
        detail::write_file(std::filesystem::path(out_dir) / "sweep.svg", render_svg(spec, {l2, sup}));
    }
    return r;
}

struct CondRecord {
    int n = 0;
    PreciseCondition bspline1, bspline2, gauss;
};

[[nodiscard]] inline std::vector<CondRecord> condition_table(const ExperimentConfig& cfg, const std::vector<int>& n_list) {
    std::vector<CondRecord> out(n_list.size());
    const Kernel kb1 = make_kernel(cfg, KernelKind::bspline1);
    const Kernel kb2 = make_kernel(cfg, KernelKind::bspline2);
    const Kernel kg = make_kernel(cfg, KernelKind::gaussian);
    parallel_for(n_list.size(), [&](std::size_t i) {
        const auto c = make_centers(cfg, n_list[i]);
        out[i] = {n_list[i], precise_grammian_condition(kb1, c), precise_grammian_condition(kb2, c),
                  precise_grammian_condition(kg, c)};
    });
    return out;
}

/// Writes condnum.csv (condition numbers, inf past the double range), condnum_log10.csv
/// and optionally condnum.svg.
inline std::vector<CondRecord> run_condnum(const ExperimentConfig& cfg, const std::vector<int>& n_list,
                                           const std::string& out_dir) {
    for (std::size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) throw Error(Errc::invalid_argument, "n_list must be strictly ascending");
    if (n_list.empty() || n_list.front() < 1) throw Error(Errc::invalid_argument, "n_list entries must be >= 1");
    const auto table = condition_table(cfg, n_list);
    std::string csv = "n,cond_bspline1,cond_bspline2,cond_gauss\n";
    std::string logcsv = "n,log10_cond_bspline1,log10_cond_bspline2,log10_cond_gauss\n";
    for (const auto& r : table) {
        csv += fmt::format("{},{},{},{}\n", r.n, detail::num(r.bspline1.value), detail::num(r.bspline2.value),
                           detail::num(r.gauss.value));
        logcsv += fmt::format("{},{},{},{}\n", r.n, detail::num(r.bspline1.log10), detail::num(r.bspline2.log10),
                              detail::num(r.gauss.log10));
    }
    detail::ensure_dir(out_dir);
    detail::write_file(std::filesystem::path(out_dir) / "condnum.csv", csv);
    detail::write_file(std::filesystem::path(out_dir) / "condnum_log10.csv", logcsv);
    if (cfg.svg) {
        Series b1{"bspline1", {}, {}, "#2ca02c", true}, b2{"bspline2", {}, {}, "#1f77b4", true},
            g{"gaussian", {}, {}, "#d62728", true};
        for (const auto& r : table) {
            b1.x.push_back(r.n), b1.y.push_back(r.bspline1.log10);
            b2.x.push_back(r.n), b2.y.push_back(r.bspline2.log10);
            g.x.push_back(r.n), g.y.push_back(r.gauss.log10);
        }
        detail::write_file(std::filesystem::path(out_dir) / "condnum.svg",
                           render_svg({"Grammian condition number", "n", "log10 condition number", {}}, {b1, b2, g}));
    }
    return table;
}

struct PeReport {
    double t0 = 0.0;
    double delta = 0.0;
    double gamma = 0.0;
    double threshold = 0.0;
    bool excited = false;
    Matrix M;
};

/// Simulates up to t0 + delta and evaluates the excitation bound on [t0, t0 + delta].
/// Writes pe.csv (summary) and pe_matrix.csv.
inline PeReport run_pe(const ExperimentConfig& cfg, double t0, double delta, double threshold,
                       const std::string& out_dir) {
    if (!(t0 >= 0.0) || !(delta > 0.0) || !std::isfinite(t0 + delta))
        throw Error(Errc::invalid_argument, "pe window needs t0 >= 0 and delta > 0");
    ExperimentConfig c = cfg;
    c.t_final = t0 + delta;
    const Experiment e = prepare(c, c.n, c.kernel);
    const EstimatorRun run = execute(e);
    PeReport rep;
    rep.t0 = t0;
    rep.delta = delta;
    rep.threshold = threshold;
    rep.M = pe_matrix(run, t0, delta, e.setup.kernel, e.setup.centers);
    rep.gamma = pe_lower_bound(rep.M, grammian(e.setup.kernel, e.setup.centers), c.ridge);
    rep.excited = rep.gamma > threshold;

    detail::ensure_dir(out_dir);
    detail::write_file(std::filesystem::path(out_dir) / "pe.csv",
                       fmt::format("t0,delta,n,gamma,threshold,excited\n{},{},{},{},{},{}\n", detail::num(t0),
                                   detail::num(delta), rep.M.rows(), detail::num(rep.gamma), detail::num(threshold),
                                   rep.excited ? "true" : "false"));
    std::string m;
    for (Eigen::Index i = 0; i < rep.M.rows(); ++i) {
        for (Eigen::Index j = 0; j < rep.M.cols(); ++j) m += (j ? "," : "") + detail::num(rep.M(i, j));
        m += "\n";
    }
    detail::write_file(std::filesystem::path(out_dir) / "pe_matrix.csv", m);
    return rep;
}

} // namespace rkhs_adapt::harness
