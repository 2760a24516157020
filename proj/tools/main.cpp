// Command-line front end: simulate / quantiles / monitor / bench / segment.
//
// Exit codes: 0 success (monitor: no alarm), 1 alarm raised (monitor),
// 2 configuration error, 3 runtime or numerical error.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "../src/cli/bench.hpp"
#include "../src/cli/io.hpp"
#include "seqcpd/detector.hpp"
#include "seqcpd/limits.hpp"
#include "seqcpd/model.hpp"
#include "seqcpd/retro.hpp"

namespace {

using namespace seqcpd;

struct Options {
    std::string model = "ar";
    int order = 1;
    bool no_intercept = false;
    std::string noise = "garch";
    int noise_order = 1;
    std::vector<double> noise_theta;
    std::vector<double> theta0;
    std::vector<double> theta1;
    long n = 500;
    long kstar = 0;  // absolute change index, 0 = none
    long horizon = 500;
    double alpha = 0.05;
    double vexp = 0.0;  // 0 selects the per-family default
    double boundary_c = 0.0;
    std::string detectors = "c";
    std::uint64_t seed = 1;
    long reps = 200;
    long burn_in = 500;
    std::string input;
    std::string format = "values";
    std::string out;
    std::string table_path;
    long grid = 5000;
    long mc_reps = 50000;
    double cusum_gamma = 0.0;
    std::string cusum_variance = "empirical";
    double retro_cv = 0.0;
    double retro_cv_ls = 0.0;
    double retro_vexp = 2.0;
};

Eigen::VectorXd to_vec(const std::vector<double>& v) {
    Eigen::VectorXd out(static_cast<long>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<long>(i)) = v[i];
    return out;
}

std::string join(const std::vector<double>& v) {
    std::ostringstream s;
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    return s.str();
}

ModelSpec build_model(const Options& o) {
    if (o.model == "ar") {
        // Intercept presence is inferred from the theta0 length when given.
        bool intercept = !o.no_intercept;
        if (!o.theta0.empty()) {
            if (static_cast<int>(o.theta0.size()) == o.order)
                intercept = false;
            else if (static_cast<int>(o.theta0.size()) == o.order + 1)
                intercept = true;
            else
                throw CLI::ValidationError("--theta0 must list p or p+1 values for an AR(p) model");
        }
        return ModelSpec::ar(o.order, intercept);
    }
    if (o.model == "garch") return ModelSpec::garch11();
    if (o.model == "meanshift") {
        if (o.noise_theta.empty())
            throw CLI::ValidationError("--noise-theta is required for --model meanshift");
        ModelSpec noise = (o.noise == "garch")
                              ? ModelSpec::garch11()
                              : ModelSpec::ar(o.noise_order,
                                              static_cast<int>(o.noise_theta.size()) == o.noise_order + 1);
        return ModelSpec::mean_shift(noise, to_vec(o.noise_theta));
    }
    throw CLI::ValidationError("unknown --model '" + o.model + "'");
}

double default_vexp(const ModelSpec& m) {
    return m.family() == ModelFamily::Garch11 ? 2.0 : 1.5;
}

io::ConfigEcho base_echo(const std::string& cmd, const Options& o) {
    io::ConfigEcho e;
    e.emplace_back("subcommand", cmd);
    e.emplace_back("model", o.model);
    e.emplace_back("order", std::to_string(o.order));
    if (o.model == "meanshift") {
        e.emplace_back("noise", o.noise);
        e.emplace_back("noise_order", std::to_string(o.noise_order));
        e.emplace_back("noise_theta", join(o.noise_theta));
    }
    e.emplace_back("theta0", join(o.theta0));
    e.emplace_back("theta1", join(o.theta1));
    e.emplace_back("n", std::to_string(o.n));
    e.emplace_back("kstar", std::to_string(o.kstar));
    e.emplace_back("horizon", std::to_string(o.horizon));
    e.emplace_back("alpha", std::to_string(o.alpha));
    e.emplace_back("vexp", std::to_string(o.vexp));
    e.emplace_back("boundary_c", std::to_string(o.boundary_c));
    e.emplace_back("detector", o.detectors);
    e.emplace_back("seed", std::to_string(o.seed));
    e.emplace_back("reps", std::to_string(o.reps));
    e.emplace_back("burn_in", std::to_string(o.burn_in));
    e.emplace_back("input", o.input);
    e.emplace_back("format", o.format);
    e.emplace_back("out", o.out);
    return e;
}

void emit(const std::string& path, const std::string& contents) {
    if (path.empty())
        std::cout << contents;
    else
        io::atomic_write(path, contents);
}

ChangeScenario build_scenario(const Options& o) {
    ChangeScenario sc;
    sc.theta0 = to_vec(o.theta0);
    if (!o.theta1.empty()) {
        if (o.kstar <= o.n) throw CLI::ValidationError("--kstar must exceed --n when --theta1 is given");
        sc.theta1 = to_vec(o.theta1);
        sc.k_star = o.kstar;
    } else if (o.kstar != 0) {
        throw CLI::ValidationError("--kstar requires --theta1");
    }
    sc.n = o.n;
    sc.horizon = o.horizon;
    return sc;
}

int run_simulate(const Options& o) {
    ModelSpec model = build_model(o);
    Series s = simulate(model, build_scenario(o), o.seed, o.burn_in);
    emit(o.out, io::format_series(s, base_echo("simulate", o)));
    return 0;
}

int run_quantiles(const Options& o) {
    QuantileTable t;
    const McOptions mc{o.grid, o.mc_reps, o.seed};
    for (int d = 1; d <= 5; ++d) {
        std::vector<double> ud = simulate_ud(d, mc.grid_size, mc.replications, mc.seed);
        std::vector<double> sn = simulate_sup_norm(d, mc.grid_size, mc.replications, mc.seed);
        for (double alpha : {0.01, 0.05, 0.10}) {
            QuantileEntry e;
            e.grid_size = mc.grid_size;
            e.replications = mc.replications;
            e.seed = mc.seed;
            e.alpha = alpha;
            e.d = d;
            e.functional = Functional::UdWeighted;
            e.quantile = empirical_quantile_upper(ud, alpha);
            t.insert(e);
            e.functional = Functional::SupNorm;
            e.quantile = empirical_quantile_upper(sn, alpha);
            t.insert(e);
        }
    }
    std::vector<double> sw = simulate_sup_weighted(o.cusum_gamma, mc.grid_size, mc.replications, mc.seed);
    for (double alpha : {0.01, 0.05, 0.10}) {
        QuantileEntry e;
        e.grid_size = mc.grid_size;
        e.replications = mc.replications;
        e.seed = mc.seed;
        e.alpha = alpha;
        e.d = 1;
        e.gamma = o.cusum_gamma;
        e.functional = Functional::SupWeighted;
        e.quantile = empirical_quantile_upper(sw, alpha);
        t.insert(e);
    }
    if (o.out.empty()) throw CLI::ValidationError("quantiles: --out is required");
    t.save(o.out + ".tmp");
    std::rename((o.out + ".tmp").c_str(), o.out.c_str());
    std::cout << "wrote " << t.entries().size() << " quantiles to " << o.out << "\n";
    return 0;
}

Series obtain_series(const Options& o, long needed) {
    if (!o.input.empty()) {
        io::IngestReport rep;
        Series s = io::ingest(o.input,
                              o.format == "prices" ? io::InputFormat::Prices : io::InputFormat::Values,
                              &rep);
        if (rep.dropped_rows > 0)
            std::cerr << "warning: dropped " << rep.dropped_rows << " non-positive/missing rows\n";
        return s;
    }
    if (o.theta0.empty())
        throw CLI::ValidationError("either --input or --theta0 (simulation) is required");
    Options sim = o;
    sim.horizon = std::max(o.horizon, needed - o.n);
    ModelSpec model = build_model(o);
    return simulate(model, build_scenario(sim), o.seed, o.burn_in);
}

int run_monitor(const Options& o) {
    Series all = obtain_series(o, o.n + o.horizon);
    if (all.size() <= o.n) throw CLI::ValidationError("series shorter than --n: nothing to monitor");
    const Series hist = all.slice(1, o.n);
    const Series stream = all.slice(o.n + 1, all.size());

    MonitorOutcome mo;
    double cv = o.boundary_c;
    if (o.detectors == "c") {
        ModelSpec model = build_model(o);
        ScanConfig cfg;
        cfg.v_exponent = o.vexp > 0 ? o.vexp : default_vexp(model);
        cfg.alpha = o.alpha;
        cfg.horizon = o.horizon;
        if (cv > 0) cfg.boundary = Boundary::constant(cv);
        mo = monitor(model, hist, stream, cfg,
                     o.kstar > 0 ? std::optional<long>(o.kstar) : std::nullopt);
    } else if (o.detectors == "d") {
        ModelSpec model = build_model(o);
        if (cv <= 0)
            cv = quantile(QuantileTable::builtin(), Functional::SupNorm, model.dim(), o.alpha);
        mo = monitor_na(model, hist, stream, cv, FitOptions{},
                        o.kstar > 0 ? std::optional<long>(o.kstar) : std::nullopt, o.horizon);
    } else if (o.detectors == "q") {
        if (cv <= 0)
            cv = quantile(QuantileTable::builtin(), Functional::SupWeighted, 1, o.alpha, o.cusum_gamma);
        const VarianceMethod vm = o.cusum_variance == "bartlett" ? VarianceMethod::Bartlett
                                                                 : VarianceMethod::Empirical;
        mo = monitor_cusum(hist, stream, o.cusum_gamma, cv, vm,
                           o.kstar > 0 ? std::optional<long>(o.kstar) : std::nullopt, o.horizon);
    } else {
        throw CLI::ValidationError("monitor: --detector must be one of c, d, q");
    }

    io::ConfigEcho echo = base_echo("monitor", o);
    echo.emplace_back("stopped", mo.stopped ? "1" : "0");
    if (mo.tau) echo.emplace_back("tau", std::to_string(*mo.tau));
    if (mo.delay) echo.emplace_back("delay", std::to_string(*mo.delay));
    emit(o.out, io::format_trajectory(mo, echo));
    if (mo.stopped)
        std::cerr << "alarm at k=" << *mo.tau << "\n";
    else
        std::cerr << "no alarm within the monitoring period\n";
    return mo.stopped ? 1 : 0;
}

int run_bench_cmd(const Options& o) {
    if (o.reps < 1) {
        io::ConfigEcho echo = base_echo("bench", o);
        emit(o.out, io::format_trajectory(MonitorOutcome{}, echo));
        std::cerr << "bench: zero replications requested\n";
        return 2;
    }
    bench::Scenario sc;
    sc.model = build_model(o);
    sc.theta0 = to_vec(o.theta0);
    if (!o.theta1.empty()) {
        sc.theta1 = to_vec(o.theta1);
        if (o.kstar <= o.n) throw CLI::ValidationError("--kstar must exceed --n");
        sc.k_star_offset = o.kstar - o.n;
    }
    sc.n = o.n;
    sc.horizon = o.horizon;
    sc.burn_in = o.burn_in;

    bench::DetectorSettings st;
    st.alpha = o.alpha;
    st.v_exponent = o.vexp > 0 ? o.vexp : default_vexp(sc.model);
    if (o.boundary_c > 0) st.c_scan = o.boundary_c;
    st.cusum_gamma = o.cusum_gamma;
    st.cusum_variance = o.cusum_variance == "bartlett" ? VarianceMethod::Bartlett
                                                       : VarianceMethod::Empirical;

    std::vector<bench::DetectorKind> kinds;
    for (char c : o.detectors) {
        if (c == 'c') kinds.push_back(bench::DetectorKind::Scan);
        else if (c == 'd') kinds.push_back(bench::DetectorKind::HistoryAnchored);
        else if (c == 'q') kinds.push_back(bench::DetectorKind::Cusum);
        else if (c != ',') throw CLI::ValidationError("bench: --detector entries must be c, d or q");
    }
    bench::BenchResult r = bench::run_bench(sc, kinds, st, o.reps, o.seed);

    std::ostringstream body;
    for (const auto& [k, v] : base_echo("bench", o)) body << "# " << k << "=" << v << "\n";
    body << "# table=detection_rates\n" << bench::format_rate_table(r);
    body << "# table=delays\n" << bench::format_delay_table(r);
    emit(o.out, body.str());
    long failures = 0;
    for (const auto& db : r.detectors) failures += db.failures;
    if (failures > 0) std::cerr << "bench: " << failures << " replication failures\n";
    return 0;
}

int run_segment_cmd(const Options& o) {
    Series all = obtain_series(o, o.n + o.horizon);
    ModelSpec model = build_model(o);
    SegmentConfig cfg;
    cfg.initial_n = o.n;
    cfg.scan.v_exponent = o.vexp > 0 ? o.vexp : default_vexp(model);
    cfg.scan.alpha = o.alpha;
    if (o.boundary_c > 0) cfg.scan.boundary = Boundary::constant(o.boundary_c);
    cfg.retro_v_exponent = o.retro_vexp;
    cfg.critical_value_max2 = o.retro_cv;
    cfg.critical_value_ls = o.retro_cv_ls;
    Segmentation seg = segment(model, all, cfg);
    emit(o.out, io::format_segmentation(seg, base_echo("segment", o)));
    std::cerr << "found " << seg.break_indices.size() << " break(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential change-point monitoring for causal time series"};
    app.require_subcommand(1);
    Options o;

    auto add_model_flags = [&](CLI::App* cmd) {
        cmd->add_option("--model", o.model, "Model family: ar, garch, meanshift");
        cmd->add_option("--order", o.order, "AR order p");
        cmd->add_flag("--no-intercept", o.no_intercept, "AR without an intercept term");
        cmd->add_option("--noise", o.noise, "MeanShift noise family: ar or garch");
        cmd->add_option("--noise-order", o.noise_order, "MeanShift AR-noise order");
        cmd->add_option("--noise-theta", o.noise_theta, "MeanShift noise parameters (comma list)")
            ->delimiter(',');
        cmd->add_option("--theta0", o.theta0, "Pre-change parameters (comma list)")->delimiter(',');
        cmd->add_option("--theta1", o.theta1, "Post-change parameters (comma list)")->delimiter(',');
        cmd->add_option("--n", o.n, "Historical sample length");
        cmd->add_option("--kstar", o.kstar, "Absolute change index (> n)");
        cmd->add_option("--horizon", o.horizon, "Monitoring length");
        cmd->add_option("--seed", o.seed, "Random seed");
        cmd->add_option("--burn-in", o.burn_in, "Simulation warm-up length");
        cmd->add_option("--out", o.out, "Output path (stdout when omitted)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "Simulate a path from a change scenario");
    add_model_flags(sim);

    CLI::App* qt = app.add_subcommand("quantiles", "Regenerate the Monte-Carlo quantile table");
    qt->add_option("--grid", o.grid, "Grid points per path");
    qt->add_option("--reps", o.mc_reps, "Monte-Carlo replications");
    qt->add_option("--seed", o.seed, "Master seed");
    qt->add_option("--gamma", o.cusum_gamma, "Weighted-sup exponent (0 <= gamma < 1/2)");
    qt->add_option("--out", o.out, "Output table path")->required();

    CLI::App* mon = app.add_subcommand("monitor", "Monitor a stream for parameter change");
    add_model_flags(mon);
    mon->add_option("--input", o.input, "Input series file");
    mon->add_option("--format", o.format, "Input format: values or prices");
    mon->add_option("--alpha", o.alpha, "Nominal level");
    mon->add_option("--vexp", o.vexp, "Scan-window exponent delta (v_n = floor((log n)^delta))");
    mon->add_option("--boundary-c", o.boundary_c, "Constant boundary override");
    mon->add_option("--detector", o.detectors, "Detector: c (scan), d (history-anchored), q (CUSUM)");
    mon->add_option("--gamma", o.cusum_gamma, "CUSUM weight exponent");
    mon->add_option("--variance", o.cusum_variance, "CUSUM variance: empirical or bartlett");

    CLI::App* ben = app.add_subcommand("bench", "Empirical level/power and delay tables");
    add_model_flags(ben);
    ben->add_option("--reps", o.reps, "Replications");
    ben->add_option("--alpha", o.alpha, "Nominal level");
    ben->add_option("--vexp", o.vexp, "Scan-window exponent");
    ben->add_option("--boundary-c", o.boundary_c, "Constant boundary override (scan detector)");
    ben->add_option("--detector", o.detectors, "Detectors to run, e.g. c,d or c,q");
    ben->add_option("--gamma", o.cusum_gamma, "CUSUM weight exponent");
    ben->add_option("--variance", o.cusum_variance, "CUSUM variance: empirical or bartlett");

    CLI::App* seg = app.add_subcommand("segment", "Multi-break segmentation of a series");
    add_model_flags(seg);
    seg->add_option("--input", o.input, "Input series file");
    seg->add_option("--format", o.format, "Input format: values or prices");
    seg->add_option("--alpha", o.alpha, "Nominal level");
    seg->add_option("--vexp", o.vexp, "Scan-window exponent");
    seg->add_option("--boundary-c", o.boundary_c, "Constant boundary override");
    seg->add_option("--retro-cv", o.retro_cv, "Critical value for the split-window test");
    seg->add_option("--retro-cv-ls", o.retro_cv_ls, "Critical value for the full-sample test");
    seg->add_option("--retro-vexp", o.retro_vexp, "Retrospective v_n exponent");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return run_simulate(o);
        if (qt->parsed()) return run_quantiles(o);
        if (mon->parsed()) return run_monitor(o);
        if (ben->parsed()) return run_bench_cmd(o);
        if (seg->parsed()) return run_segment_cmd(o);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
