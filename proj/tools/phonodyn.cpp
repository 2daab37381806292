// phonodyn command-line front end.

#include <phonodyn/dynamics.hpp>
#include <phonodyn/linstab.hpp>
#include <phonodyn/params.hpp>
#include <phonodyn/steady.hpp>
#include <phonodyn/sweep.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace pd = phonodyn;

namespace {

constexpr const char* version = "0.1.0";

constexpr int exit_usage = 2;
constexpr int exit_runtime = 1;
constexpr int exit_all_failed = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string preset;
    std::string params_file;
    std::vector<std::string> sets;
    std::string out;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--preset", o.preset, "Built-in parameter set (see `phonodyn presets`)");
    app->add_option("--params", o.params_file, "key=value parameter file, applied after the preset");
    app->add_option("--set", o.sets, "key=value override, applied last; repeatable (e.g. Delta=-0.125*Omega)");
    app->add_option("--out", o.out, "Output CSV path (default: stdout)");
}

pd::SystemParams resolve(const CommonOptions& o) {
    pd::SystemParams p;
    if (!o.preset.empty()) p = pd::detail::preset_table(o.preset);
    if (!o.params_file.empty()) pd::apply_layer(p, pd::read_parameter_file(o.params_file));
    std::vector<pd::Assignment> flags;
    for (const auto& s : o.sets) flags.push_back(pd::parse_assignment(s));
    pd::apply_layer(p, flags);
    pd::validate(p);
    return p;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
    return out;
}

double to_number(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw UsageError("bad number '" + s + "' in " + what);
    }
    if (used != s.size()) throw UsageError("bad number '" + s + "' in " + what);
    return v;
}

int to_steps(const std::string& s, const std::string& what) {
    const double v = to_number(s, what);
    if (v != std::floor(v) || v < 1 || v > 1e7) throw UsageError("steps must be a positive integer in " + what);
    return static_cast<int>(v);
}

pd::Axis parse_axis(const std::string& s, const std::string& what) {
    const auto f = split(s, ':');
    if (f.size() != 3) throw UsageError(what + " expects from:to:steps");
    return {to_number(f[0], what), to_number(f[1], what), to_steps(f[2], what)};
}

/// "1e4periods" -> LF periods, otherwise ns.
double parse_duration(const std::string& s, const pd::SystemParams& p) {
    const std::string suffix = "periods";
    if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0)
        return to_number(s.substr(0, s.size() - suffix.size()), "--t-end") * p.period();
    return to_number(s, "--t-end");
}

/// Buffers data so that metadata (including wall time) precedes it.
class Output {
public:
    Output(std::string path, std::string command, const std::optional<pd::SystemParams>& params)
        : path_(std::move(path)), command_(std::move(command)), params_(params),
          start_(std::chrono::steady_clock::now()) {}

    std::ostringstream& data() { return data_; }
    void meta(const std::string& k, const std::string& v) { extra_.emplace_back(k, v); }

    void flush() {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ostringstream head;
        head << "# phonodyn_version=" << version << '\n';
        head << "# command=" << command_ << '\n';
        if (params_) {
            std::istringstream ps(pd::serialize(*params_));
            for (std::string line; std::getline(ps, line);) head << "# " << line << '\n';
        }
        for (const auto& [k, v] : extra_) head << "# " << k << '=' << v << '\n';
        head << "# wall_time_s=" << pd::format_double(wall) << '\n';
        if (path_.empty() || path_ == "-") {
            std::cout << head.str() << data_.str();
            std::cout.flush();
        } else {
            std::ofstream f(path_, std::ios::binary);
            if (!f) throw pd::Error("cannot open '" + path_ + "' for writing");
            f << head.str() << data_.str();
        }
    }

private:
    std::string path_, command_;
    std::optional<pd::SystemParams> params_;
    std::chrono::steady_clock::time_point start_;
    std::ostringstream data_;
    std::vector<std::pair<std::string, std::string>> extra_;
};

struct GridOptions {
    std::string delta = "-1.5:-0.5:101";
    std::string e1;
    int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string branch = "lowest";
    std::string envelope = "fallback";
    double max_periods = 2e4;
    double window_periods = 200;
};

void add_grid(CLI::App* app, GridOptions& g) {
    app->add_option("--delta", g.delta, "Delta axis in units of Omega, from:to:steps")->capture_default_str();
    app->add_option("--e1", g.e1, "E1 axis in rad/ns, from:to:steps (default: 0.1*E1..2*E1, 101 steps)");
    app->add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--branch", g.branch, "Damping branch: lowest or highest stable n_LF")
        ->check(CLI::IsMember({"lowest", "highest"}))
        ->capture_default_str();
    app->add_option("--envelope", g.envelope, "Envelope fit: fallback (on attribution failure), always, never")
        ->check(CLI::IsMember({"fallback", "always", "never"}))
        ->capture_default_str();
    app->add_option("--max-periods", g.max_periods, "Lasing transient cap in LF periods")->capture_default_str();
    app->add_option("--window-periods", g.window_periods, "Lasing averaging window in LF periods")
        ->capture_default_str();
}

pd::SweepGrid make_grid(const GridOptions& g, const pd::SystemParams& p, pd::SweepMode mode) {
    pd::SweepGrid grid;
    grid.base = p;
    grid.mode = mode;
    grid.delta_over_Omega = parse_axis(g.delta, "--delta");
    grid.E1 = g.e1.empty() ? pd::Axis{0.1 * p.E1, 2.0 * p.E1, 101} : parse_axis(g.e1, "--e1");
    grid.branch = g.branch == "highest" ? pd::BranchChoice::highest : pd::BranchChoice::lowest;
    grid.envelope = g.envelope == "always"  ? pd::EnvelopePolicy::always
                    : g.envelope == "never" ? pd::EnvelopePolicy::never
                                            : pd::EnvelopePolicy::fallback;
    grid.cycle.max_periods = g.max_periods;
    grid.cycle.window_periods = g.window_periods;
    pd::validate(grid);
    return grid;
}

std::string join_args(int argc, char** argv) {
    std::string s;
    for (int i = 1; i < argc; ++i) {
        if (i > 1) s += ' ';
        s += argv[i];
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semiclassical LF/HF dynamics: steady states, lasing and effective damping.\n"
                 "Units: rates and frequencies in rad/ns (a value 'X GHz' is X, '2pi*X GHz' is 2pi X), time in ns."};
    app.require_subcommand(1);
    app.set_version_flag("--version", version);
    const std::string command = join_args(argc, argv);

    auto* presets = app.add_subcommand("presets", "List built-in parameter sets in canonical units (CSV)");
    std::string presets_out;
    presets->add_option("--out", presets_out, "Output CSV path (default: stdout)");

    CommonOptions ev_o;
    std::string t_end = "1000periods";
    int samples = 32;
    double rtol = 1e-9, atol = 1e-12, init_q = 0.0;
    auto* evolve = app.add_subcommand(
        "evolve", "Integrate from the ground state (or a q displacement).\n"
                  "CSV: t,Re_B,Im_B,Re_P,Im_P,U,n_LF,n_HF (t in ns; U is |P|^2 for OM)");
    add_common(evolve, ev_o);
    evolve->add_option("--t-end", t_end, "End time in ns, or with suffix 'periods' in LF periods")
        ->capture_default_str();
    evolve->add_option("--samples-per-period", samples, "Output samples per LF period")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    evolve->add_option("--rtol", rtol, "Relative tolerance")->capture_default_str();
    evolve->add_option("--atol", atol, "Absolute tolerance (dimensionless variables)")->capture_default_str();
    evolve->add_option("--init-q", init_q, "Initial LF displacement q = sqrt2 Re B");

    CommonOptions bi_o;
    std::string scan;
    bool hysteresis = false;
    std::string limit;
    auto* bistab = app.add_subcommand(
        "bistab", "Steady-state scan.\n"
                  "CSV: sweep_value,branch_index,U_tot,q_s,n_LF,stability,max_re_lambda\n"
                  "--hysteresis CSV: sweep_value,up_n_LF,down_n_LF,branch_count,ok\n"
                  "--limit CSV: N,max_rel_deviation,compared_points,skipped_points");
    add_common(bistab, bi_o);
    bistab->add_option("--scan", scan, "Field:from:to:steps; Delta in units of Omega, E1 in rad/ns")->required();
    bistab->add_flag("--hysteresis", hysteresis, "Follow stable branches up and down the scan");
    bistab->add_option("--limit", limit,
                       "Comma-separated N list: compare the SC ensemble (E1 total, E1/sqrt(N) per emitter) "
                       "with the OM cavity over the OM bistable part of a Delta scan");

    CommonOptions sw_o;
    GridOptions sw_g;
    std::string mode = "damping";
    auto* sweep = app.add_subcommand(
        "sweep", std::string("(Delta, E1) grid, row-major with Delta outer.\nCSV: ") + pd::sweep_header);
    add_common(sweep, sw_o);
    add_grid(sweep, sw_g);
    sweep->add_option("--mode", mode, "bistability, lasing or damping")
        ->check(CLI::IsMember({"bistability", "lasing", "damping"}))
        ->capture_default_str();

    CommonOptions dm_o;
    GridOptions dm_g;
    auto* damping = app.add_subcommand(
        "damping", "Effective LF damping on a (Delta, E1) grid.\n"
                   "CSV: Delta,E1,kappa_eff_L,kappa_eff_analytic,Omega_eff,lf_weight,validity_flag");
    add_common(damping, dm_o);
    add_grid(damping, dm_g);

    CommonOptions rs_o;
    std::optional<double> n_hf;
    std::string e1_list;
    std::string window = "0.05:3";
    auto* resonance = app.add_subcommand(
        "resonance", "Predicted lasing resonance Delta* > 0.\nCSV: E1,n_HF,Delta_star,Delta_star_over_Omega");
    add_common(resonance, rs_o);
    resonance->add_option("--n-hf", n_hf, "HF excitation in the lasing state (default: N/2 for SC, 0 for OM)");
    resonance->add_option("--e1-list", e1_list, "Comma-separated pump strengths (default: the resolved E1)");
    resonance->add_option("--window", window, "Search window lo:hi in units of Omega")->capture_default_str();

    CommonOptions ca_o;
    GridOptions ca_g;
    ca_g.envelope = "never";
    auto* compare = app.add_subcommand(
        "compare-analytic", "Closed-form against eigenvalue damping on a grid.\n"
                            "CSV: Delta,E1,kappa_eff_L,kappa_eff_N,kappa_eff_analytic,rel_deviation,validity_flag");
    add_common(compare, ca_o);
    add_grid(compare, ca_g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    }

    try {
        if (*presets) {
            Output out(presets_out, command, std::nullopt);
            out.data() << "name,kind,Omega,kappa,gamma,gamma_pd,g,Delta,E1,N\n";
            for (auto n : pd::preset_names) {
                const auto p = pd::preset(n);
                out.data() << n << ',' << pd::to_string(p.kind) << ',' << pd::format_double(p.Omega) << ','
                           << pd::format_double(p.kappa) << ',' << pd::format_double(p.gamma) << ','
                           << pd::format_double(p.gamma_pd) << ',' << pd::format_double(p.g) << ','
                           << pd::format_double(p.Delta) << ',' << pd::format_double(p.E1) << ',' << p.N << '\n';
            }
            out.flush();
            return 0;
        }

        if (*evolve) {
            const auto p = resolve(ev_o);
            const double t = parse_duration(t_end, p);
            if (!(t > 0)) throw UsageError("--t-end must be > 0");
            pd::SemiclassicalState s0;
            s0.B = pd::cplx(init_q / pd::sqrt2, 0.0);
            Output out(ev_o.out, command, p);
            const auto tr = pd::integrate(p, s0, t, {rtol, atol}, p.period() / samples);
            pd::write_trajectory_csv(out.data(), tr);
            out.flush();
            return 0;
        }

        if (*bistab) {
            const auto p = resolve(bi_o);
            const auto f = split(scan, ':');
            if (f.size() != 4) throw UsageError("--scan expects Field:from:to:steps");
            pd::ScanSpec spec;
            try {
                spec.field = pd::parse_scan_field(f[0]);
            } catch (const pd::ParamError& e) {
                throw UsageError(e.what());
            }
            const double unit = spec.field == pd::ScanField::Delta ? p.Omega : 1.0;
            spec.from = to_number(f[1], "--scan") * unit;
            spec.to = to_number(f[2], "--scan") * unit;
            spec.steps = to_steps(f[3], "--scan");
            Output out(bi_o.out, command, p);
            if (!limit.empty()) {
                if (spec.field != pd::ScanField::Delta) throw UsageError("--limit needs a Delta scan");
                std::vector<int> Ns;
                for (const auto& s : split(limit, ',')) Ns.push_back(to_steps(s, "--limit"));
                const auto cmp = pd::om_limit_compare(p, Ns, spec.from, spec.to, spec.steps);
                out.meta("window_from", pd::format_double(cmp.window_from));
                out.meta("window_to", pd::format_double(cmp.window_to));
                out.meta("max_om_n_LF", pd::format_double(cmp.max_om_n_LF));
                out.data() << "N,max_rel_deviation,compared_points,skipped_points\n";
                for (const auto& d : cmp.deviations)
                    out.data() << d.N << ',' << pd::format_double(d.max_rel_deviation) << ',' << d.compared_points
                               << ',' << d.skipped_points << '\n';
            } else if (hysteresis) {
                const auto pts = pd::hysteresis_scan(p, spec);
                int failed = 0;
                for (const auto& h : pts) failed += !h.ok;
                if (failed) std::cerr << "warning: no stable branch at " << failed << " scan points\n";
                out.meta("scan_field", std::string(pd::to_string(spec.field)));
                pd::write_hysteresis_csv(out.data(), pts);
            } else {
                out.meta("scan_field", std::string(pd::to_string(spec.field)));
                pd::write_scan_csv(out.data(), pd::scan_branches(p, spec));
            }
            out.flush();
            return 0;
        }

        if (*sweep || *damping || *compare) {
            const CommonOptions& o = *sweep ? sw_o : *damping ? dm_o : ca_o;
            const GridOptions& g = *sweep ? sw_g : *damping ? dm_g : ca_g;
            const auto p = resolve(o);
            const auto m = *sweep ? pd::parse_sweep_mode(mode) : pd::SweepMode::damping;
            const auto grid = make_grid(g, p, m);
            Output out(o.out, command, p);
            for (const auto& [k, v] : pd::grid_metadata(grid))
                if (k == "mode" || k == "delta_over_Omega" || k == "E1_axis" || k == "branch") out.meta(k, v);
            const auto cells = pd::run_sweep(grid, g.workers);
            if (*sweep) {
                pd::write_csv(out.data(), cells);
            } else if (*damping) {
                pd::write_damping_csv(out.data(), cells);
            } else {
                out.data() << "Delta,E1,kappa_eff_L,kappa_eff_N,kappa_eff_analytic,rel_deviation,validity_flag\n";
                for (const auto& c : cells) {
                    const double ref = std::isnan(c.kappa_eff_L) ? c.kappa_eff_N : c.kappa_eff_L;
                    out.data() << pd::format_double(c.Delta) << ',' << pd::format_double(c.E1) << ','
                               << pd::format_double(c.kappa_eff_L) << ',' << pd::format_double(c.kappa_eff_N) << ','
                               << pd::format_double(c.kappa_eff_analytic) << ','
                               << pd::format_double(std::abs(c.kappa_eff_analytic - ref) / ref) << ','
                               << c.validity_flag << '\n';
                }
            }
            const int ok = pd::count_succeeded(cells);
            if (ok < static_cast<int>(cells.size()))
                std::cerr << "warning: " << cells.size() - ok << " of " << cells.size() << " cells failed\n";
            out.flush();
            return cells.empty() || ok > 0 ? 0 : exit_all_failed;
        }

        if (*resonance) {
            const auto p = resolve(rs_o);
            const auto w = split(window, ':');
            if (w.size() != 2) throw UsageError("--window expects lo:hi");
            const double lo = to_number(w[0], "--window") * p.Omega, hi = to_number(w[1], "--window") * p.Omega;
            std::vector<double> pumps;
            if (e1_list.empty()) pumps.push_back(p.E1);
            for (const auto& s : split(e1_list, ',')) pumps.push_back(to_number(s, "--e1-list"));
            const double n = n_hf.value_or(is_semiconductor(p.kind) ? 0.5 * p.N : 0.0);
            Output out(rs_o.out, command, p);
            out.data() << "E1,n_HF,Delta_star,Delta_star_over_Omega\n";
            for (double e : pumps) {
                auto q = p;
                q.E1 = e;
                const double d = pd::lasing_resonance_predictor(q, n, lo, hi);
                out.data() << pd::format_double(e) << ',' << pd::format_double(n) << ',' << pd::format_double(d)
                           << ',' << pd::format_double(d / p.Omega) << '\n';
            }
            out.flush();
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const pd::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const pd::ParamError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_usage;
}
