// arbsched: compute, check and study optimal storage arbitrage schedules.
//
// Subcommands:
//   solve   solve a price series and write schedule.csv + summary.json
//   verify  re-check a written schedule against the optimality conditions
//           and (for small horizons) an exact grid optimizer
//   sweep   re-solve across a list of eta/E/P values, one CSV row per value
//   bench   wall-time and segment statistics across horizon lengths
//   gen     write a synthetic price series as CSV
//
// Exit codes: 0 success, 1 usage/config/data error, 2 infeasible problem,
// 3 solver certificate failure, 4 verification failure.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"

#include "arbsched/arbsched.hpp"

namespace {

using namespace arbsched;

struct StoreOpts {
    double capacity = 10.0;
    double rate_in = 1.0;
    double rate_out = 1.0;
    double eta = 1.0;
    double start_level = 0.0;
    double end_level = 0.0;
};

struct SourceOpts {
    std::string prices_path;
    std::string synthetic;
    std::uint64_t seed = 1;
};

struct TolOpts {
    double tol_mu = 0.0;
    double tol_x = kTolX;
    double tol_cost = kTolCost;
};

void add_store_opts(CLI::App& cmd, StoreOpts& s) {
    cmd.add_option("--capacity", s.capacity, "store capacity E")->capture_default_str();
    cmd.add_option("--rate-in", s.rate_in, "max charge per period")->capture_default_str();
    cmd.add_option("--rate-out", s.rate_out, "max discharge per period")->capture_default_str();
    cmd.add_option("--eta", s.eta, "efficiency; scales sell prices")->capture_default_str();
    cmd.add_option("--start-level", s.start_level, "store level before the first period")
        ->capture_default_str();
    cmd.add_option("--end-level", s.end_level, "required level after the last period")
        ->capture_default_str();
}

void add_source_opts(CLI::App& cmd, SourceOpts& s) {
    auto* file = cmd.add_option("--prices", s.prices_path,
                                "price CSV (timestamp,buy,sell or timestamp,price)");
    auto* synth = cmd.add_option(
        "--synthetic", s.synthetic,
        "synthetic series spec, comma-separated key=value pairs among "
        "days,base,daily,weekly,noise (default days=7,base=50,daily=20,weekly=5,noise=2)");
    file->excludes(synth);
    cmd.add_option("--seed", s.seed, "synthetic generator seed")->capture_default_str();
}

void add_tol_opts(CLI::App& cmd, TolOpts& t) {
    cmd.add_option("--tol-mu", t.tol_mu, "mu tolerance (0 = relative default)")
        ->capture_default_str();
    cmd.add_option("--tol-x", t.tol_x, "flow/level tolerance")->capture_default_str();
    cmd.add_option("--tol-cost", t.tol_cost, "objective tolerance")->capture_default_str();
}

SyntheticSpec parse_synthetic(const std::string& s) {
    SyntheticSpec spec;
    std::string_view rest = s;
    while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        if (item.empty()) continue;
        const std::size_t eq = item.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError("bad synthetic spec item '" + std::string(item) +
                                  "': expected key=value");
        const std::string_view key = item.substr(0, eq);
        const std::string_view val = item.substr(eq + 1);
        const double v = detail::parse_double(val, 1, "synthetic spec value");
        if (key == "days")
            spec.days = static_cast<std::size_t>(v);
        else if (key == "base")
            spec.base = v;
        else if (key == "daily")
            spec.daily_amplitude = v;
        else if (key == "weekly")
            spec.weekly_amplitude = v;
        else if (key == "noise")
            spec.noise_sd = v;
        else
            throw ValidationError("unknown synthetic spec key '" + std::string(key) + "'");
    }
    return spec;
}

// Loads the configured series with the efficiency already applied to the
// sell side: synthetic sells are generated as eta*buy, file sells (or the
// single price column) are scaled by eta.
PriceSeries load_series(const SourceOpts& src, double eta, std::uint64_t seed) {
    if (!(eta > 0.0) || eta > 1.0)
        throw InvalidEfficiency("efficiency must lie in (0, 1]");
    if (!src.prices_path.empty()) {
        std::ifstream in(src.prices_path, std::ios::binary);
        if (!in)
            throw IoError("cannot open " + src.prices_path);
        PriceSeries ps = read_prices(in, 1.0);
        for (double& s : ps.sell) s *= eta;
        return ps;
    }
    SyntheticSpec spec = parse_synthetic(src.synthetic);
    spec.eta = eta;
    spec.seed = seed;
    return generate_prices(spec);
}

Problem assemble(const PriceSeries& ps, const StoreOpts& st) {
    return make_problem(ps, st.capacity, st.start_level, st.end_level,
                        {st.rate_in, st.rate_out});
}

SolverOptions solver_options(const TolOpts& t) {
    SolverOptions o;
    o.tol_x = t.tol_x;
    o.tol_cost = t.tol_cost;
    o.tol_mu = t.tol_mu;
    return o;
}

int run_solve(const StoreOpts& st, const SourceOpts& src, const TolOpts& tol,
              const std::string& out_dir) {
    const PriceSeries ps = load_series(src, st.eta, src.seed);
    const Problem p = assemble(ps, st);
    const SolveResult r = solve(p, solver_options(tol));

    VerifyOptions vopts;
    vopts.tol_x = tol.tol_x;
    vopts.tol_cost = tol.tol_cost;
    const CertificateReport rep = verify_certificate(p, r.schedule, r.certificate, vopts);
    if (!rep.ok()) {
        std::cerr << "certificate check failed: " << rep.details << "\n";
        return 3;
    }

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream csv(fs::path(out_dir) / "schedule.csv", std::ios::binary);
        write_schedule(csv, r.schedule, r.certificate, ps, tol.tol_x);
        if (!csv)
            throw IoError("cannot write schedule.csv in " + out_dir);
    }
    {
        std::ofstream js(fs::path(out_dir) / "summary.json", std::ios::binary);
        write_summary(js, r.schedule, r.certificate, ps);
        if (!js)
            throw IoError("cannot write summary.json in " + out_dir);
    }
    const double objective = series_cost(ps, r.schedule.flows);
    std::cout << "solved T=" << p.T << " segments=" << r.certificate.boundaries.size() - 1
              << " objective=" << detail::format_double(objective)
              << " profit=" << detail::format_double(-objective) << "\n";
    return 0;
}

int run_verify(const StoreOpts& st, const TolOpts& tol, const std::string& schedule_path,
               std::size_t oracle_cap, double oracle_delta, double oracle_tol) {
    std::ifstream in(schedule_path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + schedule_path);
    const ScheduleFile f = read_schedule(in);
    // The CSV's sell column is already effective; eta is not applied again.
    const Problem p = assemble(f.prices, st);
    const MuCertificate cert = reconstruct_certificate(f.mu, f.schedule.levels, st.capacity);

    VerifyOptions vopts;
    vopts.tol_x = tol.tol_x;
    vopts.tol_cost = tol.tol_cost;
    const CertificateReport rep = verify_certificate(p, f.schedule, cert, vopts);

    bool all = true;
    const auto line = [&all](const char* name, bool pass, const std::string& extra) {
        std::cout << name << (pass ? ": PASS" : ": FAIL") << extra << "\n";
        if (!pass) all = false;
    };
    line("(i) feasibility", rep.feasible, "");
    line("(ii) reduced-cost minimality", rep.pointwise_min, "");
    line("(iii) complementary slackness", rep.comp_slack, "");
    if (!rep.ok() && !rep.details.empty())
        std::cout << "details: " << rep.details << "\n";

    if (p.T <= oracle_cap) {
        GridSpec grid;
        grid.levels_per_unit = std::max<std::int64_t>(1, std::llround(1.0 / oracle_delta));
        try {
            const OracleResult dp = dp_solve(p, grid);
            const double sched = series_cost(f.prices, f.schedule.flows);
            const double gap = sched - dp.objective;
            line("oracle-gap", gap <= oracle_tol,
                 " (schedule minus grid optimum = " + detail::format_double(gap) +
                     ", tolerance " + detail::format_double(oracle_tol) + ")");
        } catch (const GridInfeasible& e) {
            std::cout << "oracle-gap: SKIP (" << e.what() << ")\n";
        }
    } else {
        std::cout << "oracle-gap: SKIP (T=" << p.T << " above cap " << oracle_cap << ")\n";
    }
    return all ? 0 : 4;
}

int run_sweep(const StoreOpts& st, const SourceOpts& src, const TolOpts& tol,
              const std::string& param, const std::vector<double>& values) {
    std::cout << "param,value,objective,active_periods,num_segments,max_horizon,status\n";
    for (const double v : values) {
        std::cout << param << ',' << detail::format_double(v) << ',';
        try {
            StoreOpts run = st;
            double eta = st.eta;
            if (param == "eta")
                eta = v;
            else if (param == "E")
                run.capacity = v;
            else
                run.rate_in = run.rate_out = v;
            const PriceSeries ps = load_series(src, eta, src.seed);
            const Problem p = assemble(ps, run);
            const SolveResult r = solve(p, solver_options(tol));
            const HorizonStats h = horizon_stats(r.certificate);
            std::cout << detail::format_double(series_cost(ps, r.schedule.flows)) << ','
                      << active_periods(r.schedule.flows, tol.tol_x) << ','
                      << r.certificate.boundaries.size() - 1 << ',' << h.max << ",ok\n";
        } catch (const InfeasibleProblem&) {
            std::cout << ",,,,infeasible\n";
        } catch (const std::exception&) {
            std::cout << ",,,,error\n";
        }
    }
    return 0;
}

int run_bench(const StoreOpts& st, const SourceOpts& src, const TolOpts& tol,
              const std::vector<std::size_t>& horizons) {
    if (!src.prices_path.empty())
        throw ValidationError("bench runs on synthetic sources only");
    std::cout << "T,wall_ms,num_segments,max_horizon,mean_horizon\n";
    for (const std::size_t T : horizons) {
        if (T == 0)
            throw ValidationError("horizon must be positive");
        SyntheticSpec spec = parse_synthetic(src.synthetic);
        spec.eta = st.eta;
        spec.seed = src.seed;
        spec.days = (T + kPeriodsPerDay - 1) / kPeriodsPerDay;
        PriceSeries ps = generate_prices(spec);
        ps.timestamps.resize(T);
        ps.buy.resize(T);
        ps.sell.resize(T);
        const Problem p = assemble(ps, st);

        const auto t0 = std::chrono::steady_clock::now();
        const SolveResult r = solve(p, solver_options(tol));
        const auto t1 = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

        const HorizonStats h = horizon_stats(r.certificate);
        char msbuf[32];
        std::snprintf(msbuf, sizeof msbuf, "%.3f", ms);
        std::cout << T << ',' << msbuf << ',' << r.certificate.boundaries.size() - 1 << ','
                  << h.max << ',' << detail::format_double(h.mean) << "\n";
    }
    return 0;
}

int run_gen(const StoreOpts& st, const SourceOpts& src, const std::string& out_dir) {
    const PriceSeries ps = load_series(src, st.eta, src.seed);
    if (out_dir.empty()) {
        write_prices(std::cout, ps);
        return 0;
    }
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "prices.csv", std::ios::binary);
    write_prices(out, ps);
    if (!out)
        throw IoError("cannot write prices.csv in " + out_dir);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal storage price arbitrage scheduling"};
    app.require_subcommand(1);

    StoreOpts st;
    SourceOpts src;
    TolOpts tol;
    std::string out_dir;
    std::string schedule_path;
    std::string sweep_param;
    std::vector<double> sweep_values;
    std::vector<std::size_t> horizons;
    std::size_t oracle_cap = 64;
    double oracle_delta = 0.01;
    double oracle_tol = 1e-6;

    int rc = 0;

    auto* c_solve = app.add_subcommand("solve", "compute a certified optimal schedule");
    add_store_opts(*c_solve, st);
    add_source_opts(*c_solve, src);
    add_tol_opts(*c_solve, tol);
    c_solve->add_option("--out", out_dir, "output directory")->required();
    c_solve->callback([&] { rc = run_solve(st, src, tol, out_dir); });

    auto* c_verify = app.add_subcommand("verify", "re-check a written schedule");
    add_store_opts(*c_verify, st);
    add_tol_opts(*c_verify, tol);
    c_verify->add_option("schedule", schedule_path, "schedule CSV from solve")->required();
    c_verify->add_option("--oracle-cap", oracle_cap, "skip the grid oracle above this T")
        ->capture_default_str();
    c_verify->add_option("--oracle-delta", oracle_delta, "grid oracle level step")
        ->capture_default_str();
    c_verify->add_option("--oracle-tol", oracle_tol, "allowed gap above the grid optimum")
        ->capture_default_str();
    c_verify->callback(
        [&] { rc = run_verify(st, tol, schedule_path, oracle_cap, oracle_delta, oracle_tol); });

    auto* c_sweep = app.add_subcommand("sweep", "re-solve across parameter values");
    add_store_opts(*c_sweep, st);
    add_source_opts(*c_sweep, src);
    add_tol_opts(*c_sweep, tol);
    c_sweep->add_option("--param", sweep_param, "swept parameter")
        ->check(CLI::IsMember({"eta", "E", "P"}))
        ->required();
    c_sweep->add_option("--values", sweep_values, "comma-separated values")
        ->delimiter(',')
        ->required();
    c_sweep->callback([&] { rc = run_sweep(st, src, tol, sweep_param, sweep_values); });

    auto* c_bench = app.add_subcommand("bench", "time solves across horizon lengths");
    add_store_opts(*c_bench, st);
    add_source_opts(*c_bench, src);
    add_tol_opts(*c_bench, tol);
    c_bench->add_option("--horizons", horizons, "comma-separated period counts")
        ->delimiter(',')
        ->required();
    c_bench->callback([&] { rc = run_bench(st, src, tol, horizons); });

    auto* c_gen = app.add_subcommand("gen", "write a synthetic price series");
    add_store_opts(*c_gen, st);
    add_source_opts(*c_gen, src);
    c_gen->add_option("--out", out_dir, "output directory (default: stdout)");
    c_gen->callback([&] { rc = run_gen(st, src, out_dir); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help/usage
        return code == 0 ? 0 : 1;
    } catch (const InfeasibleProblem& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
