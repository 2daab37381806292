#pragma once

// (Delta, E1) grid evaluation and its CSV persistence.

#include "dynamics.hpp"
#include "errors.hpp"
#include "linstab.hpp"
#include "steady.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace phonodyn {

enum class SweepMode { bistability, lasing, damping };

inline std::string_view to_string(SweepMode m) noexcept {
    switch (m) {
        case SweepMode::bistability: return "bistability";
        case SweepMode::lasing: return "lasing";
        case SweepMode::damping: return "damping";
    }
    return "?";
}

inline SweepMode parse_sweep_mode(std::string_view s) {
    if (s == "bistability") return SweepMode::bistability;
    if (s == "lasing") return SweepMode::lasing;
    if (s == "damping") return SweepMode::damping;
    throw ParamError("unknown sweep mode '" + std::string(s) + "'");
}

struct Axis {
    double from = 0.0;
    double to = 0.0;
    int steps = 2;

    double value(int k) const noexcept { return steps == 1 ? from : from + (to - from) * k / (steps - 1); }
    friend bool operator==(const Axis&, const Axis&) = default;
};

enum class BranchChoice { lowest, highest };
enum class EnvelopePolicy { fallback, always, never };

struct SweepGrid {
    Axis delta_over_Omega;  // Delta in units of Omega
    Axis E1;                // absolute
    SystemParams base;
    SweepMode mode = SweepMode::damping;
    BranchChoice branch = BranchChoice::lowest;
    EnvelopePolicy envelope = EnvelopePolicy::fallback;
    CycleOptions cycle{};
    EnvelopeOptions envelope_options{};
};

inline void validate(const SweepGrid& g) {
    for (const Axis* a : {&g.delta_over_Omega, &g.E1}) {
        if (a->steps < 1) throw ParamError("sweep axis needs at least one step");
        if (!std::isfinite(a->from) || !std::isfinite(a->to)) throw ParamError("sweep bounds must be finite");
        if (a->steps > 1 && !(a->from < a->to)) throw ParamError("sweep axis needs from < to");
    }
    validate(g.base);
}

inline constexpr double absent = std::numeric_limits<double>::quiet_NaN();

/// One grid point. Unpopulated metrics are NaN ("absent"); `status` names
/// the reason a cell produced no metric.
struct SweepCell {
    double Delta = 0.0;  // absolute
    double E1 = 0.0;
    int branch_count = 0;
    int stable_count = 0;
    // bistability
    double n_LF_0 = absent, n_LF_1 = absent, n_LF_2 = absent;
    // lasing
    double mean_n_LF = absent;
    double amplitude_n_LF = absent;
    double mean_n_HF = absent;
    // damping
    double kappa_eff_L = absent;
    double kappa_eff_N = absent;
    double kappa_eff_analytic = absent;
    double Omega_eff = absent;
    double lf_weight = absent;
    int validity_flag = 0;
    bool converged = false;
    std::string status = "ok";
};

namespace detail {

inline bool same(double a, double b) noexcept { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace detail

inline bool operator==(const SweepCell& a, const SweepCell& b) noexcept {
    using detail::same;
    return same(a.Delta, b.Delta) && same(a.E1, b.E1) && a.branch_count == b.branch_count &&
           a.stable_count == b.stable_count && same(a.n_LF_0, b.n_LF_0) && same(a.n_LF_1, b.n_LF_1) &&
           same(a.n_LF_2, b.n_LF_2) && same(a.mean_n_LF, b.mean_n_LF) && same(a.amplitude_n_LF, b.amplitude_n_LF) &&
           same(a.mean_n_HF, b.mean_n_HF) &&
           same(a.kappa_eff_L, b.kappa_eff_L) && same(a.kappa_eff_N, b.kappa_eff_N) &&
           same(a.kappa_eff_analytic, b.kappa_eff_analytic) && same(a.Omega_eff, b.Omega_eff) &&
           same(a.lf_weight, b.lf_weight) && a.validity_flag == b.validity_flag && a.converged == b.converged &&
           a.status == b.status;
}

/// Evaluates one cell of the grid.
inline SweepCell evaluate_cell(const SweepGrid& grid, double Delta, double E1) {
    SystemParams p = grid.base;
    p.Delta = Delta;
    p.E1 = E1;
    SweepCell c;
    c.Delta = Delta;
    c.E1 = E1;
    try {
        const auto branches = steady_states(p);
        c.branch_count = static_cast<int>(branches.size());
        c.stable_count = stable_count(branches);

        switch (grid.mode) {
            case SweepMode::bistability: {
                double* slots[3] = {&c.n_LF_0, &c.n_LF_1, &c.n_LF_2};
                for (std::size_t i = 0; i < branches.size() && i < 3; ++i) *slots[i] = branches[i].n_LF;
                c.converged = true;
                break;
            }
            case SweepMode::lasing: {
                const CycleStats s = cycle_stats(p, SemiclassicalState{}, grid.cycle);
                c.mean_n_LF = s.mean_n_LF;
                c.amplitude_n_LF = s.amplitude_n_LF;
                c.mean_n_HF = s.mean_n_HF;
                c.converged = s.converged;
                if (!s.converged) c.status = "not_converged";
                break;
            }
            case SweepMode::damping: {
                const SteadyBranch* chosen = nullptr;
                for (const auto& b : branches) {
                    if (b.stability != Stability::stable) continue;
                    if (!chosen || (grid.branch == BranchChoice::highest) == (b.n_LF > chosen->n_LF)) chosen = &b;
                }
                if (!chosen) {
                    c.status = "no_stable_branch";
                    break;
                }
                const LinearResponse r = kappa_eff_analytic(p, *chosen);
                c.kappa_eff_analytic = r.kappa_eff_analytic;
                c.validity_flag = r.valid ? 1 : 0;
                bool attributed = false;
                try {
                    const LfDamping d = lf_damping_lyapunov(p, *chosen);
                    c.kappa_eff_L = d.kappa_eff_L;
                    c.Omega_eff = d.Omega_eff;
                    c.lf_weight = d.lf_weight;
                    attributed = true;
                } catch (const AttributionError&) {
                    c.status = "attribution_failed";
                }
                const bool fit = grid.envelope == EnvelopePolicy::always ||
                                 (grid.envelope == EnvelopePolicy::fallback && !attributed);
                if (fit) {
                    try {
                        c.kappa_eff_N = envelope_fit(p, *chosen, grid.envelope_options).kappa_eff_N;
                        if (!attributed) c.status = "envelope";
                    } catch (const OverdampedError&) {
                        if (!attributed) c.status = "overdamped";
                    }
                }
                c.converged = !std::isnan(c.kappa_eff_L) || !std::isnan(c.kappa_eff_N);
                break;
            }
        }
    } catch (const IntegrationError&) {
        c.converged = false;
        c.status = "integration_failed";
    } catch (const Error&) {
        c.converged = false;
        c.status = "failed";
    }
    return c;
}

/// Row-major cells (Delta outer, E1 inner). Rows are split into contiguous
/// blocks, one per worker, each writing its own slice of the output.
inline std::vector<SweepCell> run_sweep(const SweepGrid& grid, int workers = 1) {
    validate(grid);
    const int rows = grid.delta_over_Omega.steps;
    const int cols = grid.E1.steps;
    std::vector<SweepCell> cells(static_cast<std::size_t>(rows) * cols);
    auto work = [&](int r0, int r1) {
        for (int r = r0; r < r1; ++r) {
            const double Delta = grid.delta_over_Omega.value(r) * grid.base.Omega;
            for (int k = 0; k < cols; ++k)
                cells[static_cast<std::size_t>(r) * cols + k] = evaluate_cell(grid, Delta, grid.E1.value(k));
        }
    };
    workers = std::clamp(workers, 1, rows);
    if (workers == 1) {
        work(0, rows);
        return cells;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, rows * w / workers, rows * (w + 1) / workers);
    for (auto& t : pool) t.join();
    return cells;
}

inline int count_succeeded(const std::vector<SweepCell>& cells) noexcept {
    return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const SweepCell& c) { return c.converged; }));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Grid description as '#' key=value lines.
inline Metadata grid_metadata(const SweepGrid& g) {
    Metadata m;
    m.emplace_back("mode", std::string(to_string(g.mode)));
    std::istringstream params(serialize(g.base));
    for (std::string line; std::getline(params, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) m.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    m.emplace_back("delta_over_Omega", format_double(g.delta_over_Omega.from) + ":" +
                                           format_double(g.delta_over_Omega.to) + ":" +
                                           std::to_string(g.delta_over_Omega.steps));
    m.emplace_back("E1_axis", format_double(g.E1.from) + ":" + format_double(g.E1.to) + ":" + std::to_string(g.E1.steps));
    m.emplace_back("branch", g.branch == BranchChoice::lowest ? "lowest" : "highest");
    return m;
}

inline const char* sweep_header =
    "Delta,E1,branch_count,stable_count,n_LF_0,n_LF_1,n_LF_2,mean_n_LF,amplitude_n_LF,mean_n_HF,"
    "kappa_eff_L,kappa_eff_N,kappa_eff_analytic,Omega_eff,lf_weight,validity_flag,converged,status";

inline void write_csv(std::ostream& os, const std::vector<SweepCell>& cells, const Metadata& meta = {}) {
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
    os << sweep_header << '\n';
    auto d = [](double v) { return format_double(v); };
    for (const auto& c : cells) {
        os << d(c.Delta) << ',' << d(c.E1) << ',' << c.branch_count << ',' << c.stable_count << ',' << d(c.n_LF_0)
           << ',' << d(c.n_LF_1) << ',' << d(c.n_LF_2) << ',' << d(c.mean_n_LF) << ',' << d(c.amplitude_n_LF) << ',' << d(c.mean_n_HF) << ','
           << d(c.kappa_eff_L) << ',' << d(c.kappa_eff_N) << ',' << d(c.kappa_eff_analytic) << ',' << d(c.Omega_eff)
           << ',' << d(c.lf_weight) << ',' << c.validity_flag << ',' << (c.converged ? 1 : 0) << ',' << c.status
           << '\n';
    }
}

inline void write_csv(const std::string& path, const std::vector<SweepCell>& cells, const Metadata& meta = {}) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    write_csv(f, cells, meta);
}

struct SweepFile {
    Metadata metadata;
    std::vector<SweepCell> cells;
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_number(const std::string& s, std::size_t line) {
    if (s == "nan" || s == "-nan") return absent;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParseError("bad number '" + s + "'", line);
    }
    if (used != s.size()) throw ParseError("bad number '" + s + "'", line);
    return v;
}

inline int parse_int(const std::string& s, std::size_t line) {
    const double v = parse_number(s, line);
    if (!(v == std::floor(v)) || std::abs(v) > 1e9) throw ParseError("bad integer '" + s + "'", line);
    return static_cast<int>(v);
}

}  // namespace detail

inline SweepFile read_csv(std::istream& in) {
    SweepFile out;
    std::string line;
    std::size_t n = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string body = detail::trim(std::string_view(line).substr(1));
            const auto eq = body.find('=');
            if (eq == std::string::npos) throw ParseError("metadata line without '='", n);
            out.metadata.emplace_back(detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
            continue;
        }
        if (!header) {
            if (line != sweep_header) throw ParseError("unexpected header", n);
            header = true;
            continue;
        }
        const auto f = detail::split_fields(line);
        if (f.size() != 18) throw ParseError("expected 18 fields, got " + std::to_string(f.size()), n);
        SweepCell c;
        c.Delta = detail::parse_number(f[0], n);
        c.E1 = detail::parse_number(f[1], n);
        c.branch_count = detail::parse_int(f[2], n);
        c.stable_count = detail::parse_int(f[3], n);
        c.n_LF_0 = detail::parse_number(f[4], n);
        c.n_LF_1 = detail::parse_number(f[5], n);
        c.n_LF_2 = detail::parse_number(f[6], n);
        c.mean_n_LF = detail::parse_number(f[7], n);
        c.amplitude_n_LF = detail::parse_number(f[8], n);
        c.mean_n_HF = detail::parse_number(f[9], n);
        c.kappa_eff_L = detail::parse_number(f[10], n);
        c.kappa_eff_N = detail::parse_number(f[11], n);
        c.kappa_eff_analytic = detail::parse_number(f[12], n);
        c.Omega_eff = detail::parse_number(f[13], n);
        c.lf_weight = detail::parse_number(f[14], n);
        c.validity_flag = detail::parse_int(f[15], n);
        const int conv = detail::parse_int(f[16], n);
        if (conv != 0 && conv != 1) throw ParseError("converged must be 0 or 1", n);
        c.converged = conv == 1;
        c.status = f[17];
        if (c.status.empty()) throw ParseError("empty status", n);
        out.cells.push_back(std::move(c));
    }
    if (!header) throw ParseError("missing header", n);
    return out;
}

inline SweepFile read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    return read_csv(f);
}

/// The narrower damping table: Delta, E1, kappa_eff_L, kappa_eff_analytic,
/// Omega_eff, lf_weight, validity_flag.
inline void write_damping_csv(std::ostream& os, const std::vector<SweepCell>& cells, const Metadata& meta = {}) {
    for (const auto& [k, v] : meta) os << "# " << k << '=' << v << '\n';
    os << "Delta,E1,kappa_eff_L,kappa_eff_analytic,Omega_eff,lf_weight,validity_flag\n";
    for (const auto& c : cells) {
        os << format_double(c.Delta) << ',' << format_double(c.E1) << ',' << format_double(c.kappa_eff_L) << ','
           << format_double(c.kappa_eff_analytic) << ',' << format_double(c.Omega_eff) << ','
           << format_double(c.lf_weight) << ',' << c.validity_flag << '\n';
    }
}

}  // namespace phonodyn
