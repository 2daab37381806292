#pragma once

// Steady states from the cubic in the total HF excitation U_tot.
//
// With Delta~ = Delta + c U_tot, c = 2 g^2 Omega / (Omega^2 + kappa^2):
//   OM: U_tot (Delta~^2 + gamma^2) = E1^2
//   SC: U_tot (Delta~^2 + gamma~^2 + 2 A / N) = A,  A = N E1^2 gamma~ / gamma
// In y = c U_tot both become monic:
//   y^3 + 2 Delta y^2 + (Delta^2 + gamma~^2 + s) y - c A' = 0.

#include "branch.hpp"
#include "cubic.hpp"
#include "errors.hpp"
#include "linstab.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace phonodyn {

/// Coefficients of the stationary cubic in U_tot itself,
/// k3 U^3 + k2 U^2 + k1 U + k0 = 0.
struct SteadyCubic {
    double k3 = 0.0, k2 = 0.0, k1 = 0.0, k0 = 0.0;

    double operator()(double U) const noexcept { return ((k3 * U + k2) * U + k1) * U + k0; }
    double largest_coefficient() const noexcept {
        return std::max({std::abs(k3), std::abs(k2), std::abs(k1), std::abs(k0)});
    }
};

namespace detail {

struct CubicTerms {
    double c;          // shift per excitation
    double linear;     // Delta^2 + gamma~^2 + s
    double pump;       // A'
};

inline CubicTerms cubic_terms(const SystemParams& p) noexcept {
    const double c = shift_per_excitation(p);
    const double gt = p.gamma_tilde();
    double pump = p.E1 * p.E1;
    double s = 0.0;
    if (is_semiconductor(p.kind)) {
        pump = p.N * p.E1 * p.E1 * gt / p.gamma;
        s = 2.0 * pump / p.N;
    }
    return {c, p.Delta * p.Delta + gt * gt + s, pump};
}

}  // namespace detail

inline SteadyCubic steady_cubic(const SystemParams& p) noexcept {
    const auto t = detail::cubic_terms(p);
    return {t.c * t.c, 2.0 * p.Delta * t.c, t.linear, -t.pump};
}

/// Fills the stability fields of a completed branch from its Jacobian.
inline void classify_branch(const SystemParams& p, SteadyBranch& b, bool repeated_root = false) {
    const Matrix J = jacobian(p, b.state(p));
    const Spectrum s = spectrum(J);
    b.max_re_lambda = max_real_part(s);
    b.stability = repeated_root ? Stability::marginal : classify(J, s);
}

/// All admissible stationary states, ascending in U_tot (and hence n_LF).
inline std::vector<SteadyBranch> steady_states(const SystemParams& p) {
    validate(p);
    const auto t = detail::cubic_terms(p);
    const bool sc = is_semiconductor(p.kind);

    std::vector<std::pair<double, bool>> roots;  // (U_tot, repeated)
    if (t.c == 0.0) {
        roots.emplace_back(t.pump / t.linear, false);
    } else {
        for (const auto& r : solve_monic_cubic(2.0 * p.Delta, t.linear, -t.c * t.pump))
            roots.emplace_back(r.value / t.c, r.repeated);
    }

    std::vector<SteadyBranch> out;
    for (const auto& [U, repeated] : roots) {
        if (!(U >= 0.0)) continue;
        if (sc && !(U / p.N < 0.5)) continue;
        SteadyBranch b = complete_branch(p, U);
        classify_branch(p, b, repeated);
        out.push_back(b);
    }
    return out;
}

inline int stable_count(const std::vector<SteadyBranch>& branches) noexcept {
    int n = 0;
    for (const auto& b : branches) n += b.stability == Stability::stable;
    return n;
}

// ---------------------------------------------------------------------------
// Scans
// ---------------------------------------------------------------------------

enum class ScanField { Delta, E1 };

inline ScanField parse_scan_field(const std::string& s) {
    if (s == "Delta") return ScanField::Delta;
    if (s == "E1") return ScanField::E1;
    throw ParamError("scan field must be Delta or E1, got '" + s + "'");
}

inline std::string_view to_string(ScanField f) noexcept { return f == ScanField::Delta ? "Delta" : "E1"; }

/// Absolute sweep values (rad/ns); steps = 1 evaluates `from` only.
struct ScanSpec {
    ScanField field = ScanField::Delta;
    double from = 0.0;
    double to = 0.0;
    int steps = 2;

    double value(int k) const noexcept { return steps == 1 ? from : from + (to - from) * k / (steps - 1); }
};

inline void validate(const ScanSpec& s) {
    if (s.steps < 1) throw ParamError("scan needs at least one step");
    if (!std::isfinite(s.from) || !std::isfinite(s.to)) throw ParamError("scan bounds must be finite");
}

inline SystemParams with_field(SystemParams p, ScanField f, double v) noexcept {
    (f == ScanField::Delta ? p.Delta : p.E1) = v;
    return p;
}

struct ScanRow {
    double sweep_value = 0.0;
    int branch_index = 0;
    SteadyBranch branch;
};

/// Every branch at every sweep value, sweep-major.
inline std::vector<ScanRow> scan_branches(const SystemParams& p, const ScanSpec& s) {
    validate(s);
    std::vector<ScanRow> rows;
    for (int k = 0; k < s.steps; ++k) {
        const double v = s.value(k);
        const auto branches = steady_states(with_field(p, s.field, v));
        for (std::size_t i = 0; i < branches.size(); ++i) rows.push_back({v, static_cast<int>(i), branches[i]});
    }
    return rows;
}

inline void write_scan_csv(std::ostream& os, const std::vector<ScanRow>& rows) {
    os << "sweep_value,branch_index,U_tot,q_s,n_LF,stability,max_re_lambda\n";
    for (const auto& r : rows) {
        os << format_double(r.sweep_value) << ',' << r.branch_index << ',' << format_double(r.branch.U_tot) << ','
           << format_double(r.branch.q_s) << ',' << format_double(r.branch.n_LF) << ','
           << to_string(r.branch.stability) << ',' << format_double(r.branch.max_re_lambda) << '\n';
    }
}

struct HysteresisPoint {
    double sweep_value = 0.0;
    double up_n_LF = std::numeric_limits<double>::quiet_NaN();
    double down_n_LF = std::numeric_limits<double>::quiet_NaN();
    int branch_count = 0;
    bool ok = true;  // false where no stable branch exists
};

/// Adiabatic following of stable branches: the upward pass starts on the
/// lowest stable branch at `from`, the downward pass on the highest stable
/// branch at `to`; each step keeps the stable branch nearest in n_LF.
inline std::vector<HysteresisPoint> hysteresis_scan(const SystemParams& p, const ScanSpec& s) {
    validate(s);
    std::vector<HysteresisPoint> pts(s.steps);
    std::vector<std::vector<double>> stable_nlf(s.steps);
    for (int k = 0; k < s.steps; ++k) {
        pts[k].sweep_value = s.value(k);
        const auto branches = steady_states(with_field(p, s.field, pts[k].sweep_value));
        pts[k].branch_count = static_cast<int>(branches.size());
        for (const auto& b : branches)
            if (b.stability == Stability::stable) stable_nlf[k].push_back(b.n_LF);
        pts[k].ok = !stable_nlf[k].empty();
    }

    auto follow = [&](int k, std::optional<double> prev, bool start_high) -> std::optional<double> {
        const auto& c = stable_nlf[k];
        if (c.empty()) return std::nullopt;
        if (!prev) return start_high ? c.back() : c.front();
        double best = c.front();
        for (double v : c)
            if (std::abs(v - *prev) < std::abs(best - *prev)) best = v;
        return best;
    };

    std::optional<double> track;
    for (int k = 0; k < s.steps; ++k) {
        if (auto v = follow(k, track, false)) {
            pts[k].up_n_LF = *v;
            track = v;
        }
    }
    track.reset();
    for (int k = s.steps - 1; k >= 0; --k) {
        if (auto v = follow(k, track, true)) {
            pts[k].down_n_LF = *v;
            track = v;
        }
    }
    return pts;
}

inline void write_hysteresis_csv(std::ostream& os, const std::vector<HysteresisPoint>& pts) {
    os << "sweep_value,up_n_LF,down_n_LF,branch_count,ok\n";
    for (const auto& h : pts) {
        os << format_double(h.sweep_value) << ',' << format_double(h.up_n_LF) << ',' << format_double(h.down_n_LF)
           << ',' << h.branch_count << ',' << (h.ok ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Large-N limit
// ---------------------------------------------------------------------------

struct LimitDeviation {
    int N = 0;
    double max_rel_deviation = 0.0;
    int compared_points = 0;
    int skipped_points = 0;  // root counts differ between SC and OM
};

struct LimitComparison {
    double window_from = 0.0;  // OM three-root window in Delta (rad/ns)
    double window_to = 0.0;
    double max_om_n_LF = 0.0;
    std::vector<LimitDeviation> deviations;
};

/// Compares the SC ensemble with the OM cavity over the OM bistable Delta
/// window inside [delta_from, delta_to]. params_sc.E1 is the total pump: the
/// ensemble of N emitters gets E1 / sqrt(N) each, so that N E1_dot^2 equals
/// the OM E1^2. Branches are matched by index where both sides have the same
/// number of roots.
inline LimitComparison om_limit_compare(const SystemParams& params_sc, const std::vector<int>& N_list,
                                        double delta_from, double delta_to, int steps = 201, int probe_steps = 2001) {
    if (!is_semiconductor(params_sc.kind)) throw ParamError("om_limit_compare: needs SC parameters");
    if (params_sc.gamma_pd != 0.0) throw ParamError("om_limit_compare: limit requires gamma_pd = 0");
    SystemParams om = params_sc;
    om.kind = SystemKind::OM;
    om.N = 1;

    LimitComparison out;
    bool found = false;
    for (int k = 0; k < probe_steps; ++k) {
        const double d = delta_from + (delta_to - delta_from) * k / (probe_steps - 1);
        if (steady_states(with_field(om, ScanField::Delta, d)).size() == 3) {
            if (!found) out.window_from = d;
            out.window_to = d;
            found = true;
        }
    }
    if (!found) throw Error("om_limit_compare: no OM bistability in the Delta window");

    std::vector<double> deltas(steps);
    std::vector<std::vector<SteadyBranch>> om_roots(steps);
    for (int k = 0; k < steps; ++k) {
        deltas[k] = steps == 1 ? out.window_from : out.window_from + (out.window_to - out.window_from) * k / (steps - 1);
        om_roots[k] = steady_states(with_field(om, ScanField::Delta, deltas[k]));
        for (const auto& b : om_roots[k]) out.max_om_n_LF = std::max(out.max_om_n_LF, b.n_LF);
    }

    for (int N : N_list) {
        SystemParams sc = params_sc;
        sc.N = N;
        sc.E1 = params_sc.E1 / std::sqrt(static_cast<double>(N));
        LimitDeviation dev{N};
        for (int k = 0; k < steps; ++k) {
            const auto a = steady_states(with_field(sc, ScanField::Delta, deltas[k]));
            const auto& b = om_roots[k];
            if (a.size() != b.size()) {
                ++dev.skipped_points;
                continue;
            }
            ++dev.compared_points;
            for (std::size_t i = 0; i < a.size(); ++i)
                dev.max_rel_deviation = std::max(dev.max_rel_deviation, std::abs(a[i].n_LF - b[i].n_LF) / b[i].n_LF);
        }
        out.deviations.push_back(dev);
    }
    return out;
}

}  // namespace phonodyn
