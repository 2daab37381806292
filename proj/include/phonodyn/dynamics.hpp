#pragma once

// Time integration in tau = Omega t with Dormand-Prince 5(4) and dense
// output, limit-cycle statistics and ring-down envelope fits.

#include "branch.hpp"
#include "errors.hpp"
#include "linstab.hpp"

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

namespace phonodyn {

struct Tolerance {
    double rel = 1e-9;
    double abs = 1e-12;
};

struct Trajectory {
    std::vector<double> times;  // ns
    std::vector<SemiclassicalState> states;
    SystemParams params;
};

namespace detail {

using OdeState = std::array<double, 5>;  // Re B, Im B, Re P, Im P, U

inline OdeState pack(const SemiclassicalState& s) noexcept {
    return {s.B.real(), s.B.imag(), s.P.real(), s.P.imag(), s.U};
}

inline SemiclassicalState unpack(const SystemParams& p, const OdeState& x) noexcept {
    return {cplx(x[0], x[1]), cplx(x[2], x[3]), is_semiconductor(p.kind) ? x[4] : 0.0};
}

/// model::rhs written out in real components and divided by Omega.
struct ScaledRhs {
    double kappa, delta, gt, gamma, g, gN, E1, inv_omega;
    bool sc;

    explicit ScaledRhs(const SystemParams& p)
        : kappa(p.kappa), delta(p.Delta), gt(p.gamma_tilde()), gamma(p.gamma), g(p.g), gN(p.g * p.N), E1(p.E1),
          inv_omega(1.0 / p.Omega), sc(is_semiconductor(p.kind)) {}

    void operator()(const OdeState& x, OdeState& dx, double) const noexcept {
        const double U = sc ? x[4] : x[2] * x[2] + x[3] * x[3];
        // dB = -(i + kappa/Omega) B - i (g N / Omega) U  in tau
        dx[0] = -kappa * inv_omega * x[0] + x[1];
        dx[1] = -kappa * inv_omega * x[1] - x[0] - gN * inv_omega * U;
        const double d = delta - 2.0 * g * x[0];
        const double drive = sc ? E1 * (1.0 - 2.0 * U) : E1;
        dx[2] = (-gt * x[2] - d * x[3] + drive) * inv_omega;
        dx[3] = (-gt * x[3] + d * x[2]) * inv_omega;
        dx[4] = sc ? (2.0 * E1 * x[2] - 2.0 * gamma * U) * inv_omega : 0.0;
    }
};

}  // namespace detail

/// Observer receives (t in ns, state) at each sample; returning false stops.
using SampleObserver = std::function<bool(double, const SemiclassicalState&)>;

/// Integrates from t = 0 to t_end (ns), calling `observe` at t = 0 and then
/// every `sample_dt` ns. Returns the time reached.
inline double integrate_observed(const SystemParams& p, const SemiclassicalState& initial, double t_end,
                                 double sample_dt, const SampleObserver& observe, Tolerance tol = {}) {
    validate(p);
    if (!(t_end > 0)) throw ParamError("integrate: t_end must be > 0");
    if (!(sample_dt > 0)) throw ParamError("integrate: sample interval must be > 0");
    if (!(tol.rel > 0) || !(tol.abs > 0)) throw ParamError("integrate: tolerances must be > 0");
    namespace ode = boost::numeric::odeint;

    const detail::ScaledRhs f(p);
    const double tau_end = p.Omega * t_end;
    const double dtau_sample = p.Omega * sample_dt;
    auto stepper = ode::make_dense_output(tol.abs, tol.rel, ode::runge_kutta_dopri5<detail::OdeState>());
    detail::OdeState x = detail::pack(initial);
    stepper.initialize(x, 0.0, std::min(1e-3, dtau_sample));

    if (!observe(0.0, initial)) return 0.0;
    long k = 1;
    double next = dtau_sample;
    try {
        while (next <= tau_end * (1 + 1e-14)) {
            while (stepper.current_time() < next) {
                stepper.do_step(f);
                const double h = stepper.current_time_step();
                if (!(h > 1e-13 * std::max(1.0, std::abs(stepper.current_time()))))
                    throw IntegrationError("step size underflow", stepper.current_time());
                if (!std::isfinite(stepper.current_state()[0]))
                    throw IntegrationError("non-finite state", stepper.current_time());
            }
            while (next <= stepper.current_time() && next <= tau_end * (1 + 1e-14)) {
                stepper.calc_state(next, x);
                if (!observe(next / p.Omega, detail::unpack(p, x))) return next / p.Omega;
                next = ++k * dtau_sample;
            }
        }
    } catch (const ode::step_adjustment_error&) {
        throw IntegrationError("step size underflow", stepper.current_time());
    }
    return (k - 1) * sample_dt;
}

/// Samples every `sample_dt` ns (default: 1/32 LF period).
inline Trajectory integrate(const SystemParams& p, const SemiclassicalState& initial, double t_end, Tolerance tol = {},
                            double sample_dt = 0.0) {
    if (sample_dt <= 0) sample_dt = p.period() / 32.0;
    Trajectory tr;
    tr.params = p;
    integrate_observed(
        p, initial, t_end, sample_dt,
        [&](double t, const SemiclassicalState& s) {
            tr.times.push_back(t);
            tr.states.push_back(s);
            return true;
        },
        tol);
    return tr;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
    os << "t,Re_B,Im_B,Re_P,Im_P,U,n_LF,n_HF\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const auto& s = tr.states[i];
        const auto o = observables(tr.params, s);
        os << format_double(tr.times[i]) << ',' << format_double(s.B.real()) << ',' << format_double(s.B.imag()) << ','
           << format_double(s.P.real()) << ',' << format_double(s.P.imag()) << ','
           << format_double(hf_occupation(tr.params, s)) << ',' << format_double(o.n_LF) << ','
           << format_double(o.n_HF) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Limit cycles
// ---------------------------------------------------------------------------

struct CycleOptions {
    double window_periods = 200.0;
    double rel_tol = 1e-3;
    double max_periods = 2e4;  // transient cap
    int samples_per_period = 16;
    Tolerance tol{};
};

struct CycleStats {
    double mean_n_LF = 0.0;
    double amplitude_n_LF = 0.0;
    double mean_n_HF = 0.0;
    bool converged = false;
    double t_start = 0.0;  // ns
    double t_end = 0.0;
};

/// Averages n_LF over consecutive windows until two successive window
/// means agree to rel_tol; otherwise reports the last window at the cap.
inline CycleStats cycle_stats(const SystemParams& p, const SemiclassicalState& initial = {},
                              const CycleOptions& opt = {}) {
    const double T = p.period();
    const long per_window = std::lround(opt.window_periods * opt.samples_per_period);
    if (per_window < 2) throw ParamError("cycle_stats: window too short");

    CycleStats out;
    double sum = 0.0, sum_hf = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    long count = 0, window = 0;
    double prev_mean = std::numeric_limits<double>::quiet_NaN();
    auto observe = [&](double t, const SemiclassicalState& s) {
        if (t == 0.0) return true;  // windows cover (t0, t0 + W]
        const double n = std::norm(s.B);
        sum += n;
        sum_hf += observables(p, s).n_HF;
        lo = std::min(lo, n);
        hi = std::max(hi, n);
        if (++count < per_window) return true;
        const double mean = sum / count;
        out.mean_n_LF = mean;
        out.amplitude_n_LF = 0.5 * (hi - lo);
        out.mean_n_HF = sum_hf / count;
        out.t_start = window * opt.window_periods * T;
        out.t_end = t;
        const bool agree = std::abs(mean - prev_mean) <= opt.rel_tol * std::max(std::abs(mean), 1e-300);
        ++window;
        prev_mean = mean;
        sum = 0.0;
        sum_hf = 0.0;
        count = 0;
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        if (agree) {
            out.converged = true;
            return false;
        }
        return true;
    };
    integrate_observed(p, initial, opt.max_periods * T, T / opt.samples_per_period, observe, opt.tol);
    return out;
}

// ---------------------------------------------------------------------------
// Envelope fit
// ---------------------------------------------------------------------------

struct EnvelopeOptions {
    double kick = 0.0;           // 0: 1e-3 max(1, |q_s|)
    double max_periods = 4000.0;
    double target_decay = 4.0;   // stop once the envelope fell by e^target_decay
    double settle_periods = 50.0;  // ... and stayed there this long
    double skip_periods = 2.0;   // initial transient excluded from the fit
    int samples_per_period = 64;
    int min_peaks = 10;
    Tolerance tol{1e-10, 1e-14};
};

struct EnvelopeFit {
    double kappa_eff_N = 0.0;
    double fit_r2 = 0.0;
    int n_peaks = 0;
};

namespace detail {

/// Vertex of the parabola through (-1, a), (0, b), (1, c): offset and value.
inline std::pair<double, double> parabolic_vertex(double a, double b, double c) noexcept {
    const double den = a - 2.0 * b + c;
    if (den == 0.0) return {0.0, b};
    const double x = 0.5 * (a - c) / den;
    return {x, b - 0.25 * (a - c) * x};
}

}  // namespace detail

/// Kicks a stable branch by +kick along q and fits an exponential to the
/// decaying oscillation of q - q_s. Each half-cycle amplitude is
/// (max - min) / 2 from adjacent extrema, which cancels slowly relaxing
/// offsets; kappa_eff,N is minus the slope of log(amplitude) against t.
inline EnvelopeFit envelope_fit(const SystemParams& p, const SteadyBranch& b, const EnvelopeOptions& opt = {}) {
    {
        const Matrix J = jacobian(p, b);
        if (classify(J, spectrum(J)) != Stability::stable)
            throw UnstableBranchError("envelope_fit: branch is not stable");
    }
    const double kick = opt.kick != 0.0 ? opt.kick : 1e-3 * std::max(1.0, std::abs(b.q_s));
    SemiclassicalState s0 = b.state(p);
    s0.B += kick / sqrt2;

    const double T = p.period();
    const double dt = T / opt.samples_per_period;
    const double t_skip = opt.skip_periods * T;

    // extrema of x = q - q_s from three consecutive samples
    struct Extremum {
        double t, v;
    };
    std::vector<Extremum> ext;
    double x0 = 0.0, x1 = 0.0;
    long n = 0;
    double first_amp = 0.0;
    double last_above = 0.0;
    auto observe = [&](double t, const SemiclassicalState& s) {
        const double x = sqrt2 * s.B.real() - b.q_s;
        if (n >= 2 && t - dt > t_skip) {
            const bool is_max = x1 > x0 && x1 >= x;
            const bool is_min = x1 < x0 && x1 <= x;
            if (is_max || is_min) {
                const auto [off, val] = detail::parabolic_vertex(x0, x1, x);
                ext.push_back({t - dt + off * dt, val});
                if (ext.size() >= 2) {
                    const double a = 0.5 * std::abs(ext.back().v - ext[ext.size() - 2].v);
                    if (first_amp == 0.0) first_amp = a;
                    if (a >= first_amp * std::exp(-opt.target_decay)) last_above = t;
                }
            }
        }
        x0 = x1;
        x1 = x;
        ++n;
        // beating between hybridized modes makes single amplitudes dip, so
        // stop only once the envelope stayed below threshold for a while
        return first_amp == 0.0 || t - last_above < opt.settle_periods * T;
    };
    integrate_observed(p, s0, opt.max_periods * T, dt, observe, opt.tol);

    // amplitudes far below the decay target are integration noise
    const double floor = first_amp * std::exp(-2.0 * opt.target_decay);
    std::vector<double> ts, ls;
    for (std::size_t i = 1; i < ext.size(); ++i) {
        const double a = 0.5 * std::abs(ext[i].v - ext[i - 1].v);
        if (!(a > floor)) continue;
        ts.push_back(0.5 * (ext[i].t + ext[i - 1].t));
        ls.push_back(std::log(a));
    }
    if (static_cast<int>(ts.size()) < opt.min_peaks)
        throw OverdampedError("envelope_fit: only " + std::to_string(ts.size()) + " usable peaks");

    const double m = static_cast<double>(ts.size());
    double st = 0, sl = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        st += ts[i];
        sl += ls[i];
    }
    const double tm = st / m, lm = sl / m;
    double stt = 0, stl = 0, sll = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        stt += (ts[i] - tm) * (ts[i] - tm);
        stl += (ts[i] - tm) * (ls[i] - lm);
        sll += (ls[i] - lm) * (ls[i] - lm);
    }
    EnvelopeFit fit;
    const double slope = stl / stt;
    fit.kappa_eff_N = -slope;
    fit.fit_r2 = sll > 0 ? stl * stl / (stt * sll) : 1.0;
    fit.n_peaks = static_cast<int>(ts.size());
    return fit;
}

}  // namespace phonodyn
