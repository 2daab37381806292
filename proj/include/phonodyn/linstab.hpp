#pragma once

// Linearization about stationary states: Jacobian, spectrum, effective LF
// damping from the slowest mode, linear-response susceptibility and the
// closed-form effective damping, and the lasing resonance predictor.
//
// Real coordinates: q = sqrt2 Re B, p = sqrt2 Im B, X = sqrt2 Re P,
// Y = sqrt2 Im P and (SC only) U. Linearizing the implemented equations
// gives the shifted detuning Delta~ = Delta - sqrt2 g q_s
// = Delta + 2 g^2 Omega U_tot / (Omega^2 + kappa^2).

#include "branch.hpp"
#include "errors.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace phonodyn {

using Matrix = Eigen::MatrixXd;

inline int state_dimension(const SystemParams& p) noexcept { return is_semiconductor(p.kind) ? 5 : 4; }

/// Jacobian of the real-variable flow (d/dt, units of rad/ns) at any state.
inline Matrix jacobian(const SystemParams& p, const SemiclassicalState& s) {
    const int n = state_dimension(p);
    const double q = sqrt2 * s.B.real();
    const double X = sqrt2 * s.P.real();
    const double Y = sqrt2 * s.P.imag();
    const double gt = p.gamma_tilde();
    const double shifted = p.Delta - sqrt2 * p.g * q;
    const double gx = sqrt2 * p.g * X;
    const double gy = sqrt2 * p.g * Y;

    Matrix J = Matrix::Zero(n, n);
    J(0, 0) = -p.kappa;
    J(0, 1) = p.Omega;
    J(1, 0) = -p.Omega;
    J(1, 1) = -p.kappa;
    J(2, 0) = gy;
    J(2, 2) = -gt;
    J(2, 3) = -shifted;
    J(3, 0) = -gx;
    J(3, 2) = shifted;
    J(3, 3) = -gt;
    if (is_semiconductor(p.kind)) {
        J(1, 4) = -sqrt2 * p.g * p.N;
        J(2, 4) = -2.0 * sqrt2 * p.E1;
        J(4, 2) = sqrt2 * p.E1;
        J(4, 4) = -2.0 * p.gamma;
    } else {
        // U = (X^2 + Y^2) / 2 enters dp/dt through -sqrt2 g U
        J(1, 2) = -gx;
        J(1, 3) = -gy;
    }
    return J;
}

/// Jacobian at a stationary branch. Throws when the branch does not satisfy
/// the force balance of `p`.
inline Matrix jacobian(const SystemParams& p, const SteadyBranch& b, double tol = 1e-8) {
    if (force_residual(p, b.q_s) > tol)
        throw ParamError("jacobian: branch is not a steady state of these parameters");
    return jacobian(p, b.state(p));
}

struct Spectrum {
    std::vector<cplx> eigenvalues;
    /// Participation of the (q, p) coordinates in each mode,
    /// Re sum_{i in q,p} V_ik (V^-1)_ki. Summed over modes this equals 2.
    std::vector<double> lf_weights;
    /// (|V_qk|^2 + |V_pk|^2) / |V_k|^2, in [0, 1].
    std::vector<double> lf_projections;
};

inline Spectrum spectrum(const Matrix& J) {
    Eigen::EigenSolver<Matrix> es(J, true);
    if (es.info() != Eigen::Success) throw Error("eigen-decomposition did not converge");
    const Eigen::MatrixXcd V = es.eigenvectors();
    const Eigen::MatrixXcd W = V.inverse();
    Spectrum s;
    for (Eigen::Index k = 0; k < J.rows(); ++k) {
        s.eigenvalues.push_back(es.eigenvalues()(k));
        s.lf_weights.push_back((V(0, k) * W(k, 0) + V(1, k) * W(k, 1)).real());
        s.lf_projections.push_back((std::norm(V(0, k)) + std::norm(V(1, k))) / V.col(k).squaredNorm());
    }
    return s;
}

inline double max_real_part(const Spectrum& s) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& l : s.eigenvalues) m = std::max(m, l.real());
    return m;
}

/// Stable when every eigenvalue lies left of -tol * ||J||, unstable when one
/// lies right of +tol * ||J||, marginal in between.
inline Stability classify(const Matrix& J, const Spectrum& s, double tol = 1e-12) {
    const double band = tol * J.norm();
    const double m = max_real_part(s);
    if (m < -band) return Stability::stable;
    if (m > band) return Stability::unstable;
    return Stability::marginal;
}

struct LfDamping {
    double kappa_eff_L = 0.0;
    double Omega_eff = 0.0;
    double lf_weight = 0.0;
};

/// Effective LF damping from the largest Lyapunov exponent: the slowest
/// decaying mode of the linearization, kappa_eff,L = -Re lambda and
/// Omega_eff = |Im lambda|. The mode must carry more than half of its weight
/// on (q, p); otherwise the slowest decay is not a phonon decay and
/// AttributionError is thrown (use an envelope fit instead).
inline LfDamping lf_damping_lyapunov(const SystemParams& p, const SteadyBranch& b) {
    const Matrix J = jacobian(p, b);
    const Spectrum s = spectrum(J);
    if (classify(J, s) != Stability::stable)
        throw UnstableBranchError("lf_damping_lyapunov: branch is not stable");

    // slowest mode; among (near) ties prefer the larger LF weight, then
    // the frequency closest to Omega
    std::size_t best = 0;
    const double top = max_real_part(s);
    const double tie = 1e-9 * J.norm();
    for (std::size_t k = 0; k < s.eigenvalues.size(); ++k) {
        if (s.eigenvalues[k].real() < top - tie) continue;
        const auto& cur = s.eigenvalues[best];
        const bool best_is_top = cur.real() >= top - tie;
        if (!best_is_top || s.lf_weights[k] > s.lf_weights[best] + 1e-12 ||
            (std::abs(s.lf_weights[k] - s.lf_weights[best]) <= 1e-12 &&
             std::abs(std::abs(s.eigenvalues[k].imag()) - p.Omega) < std::abs(std::abs(cur.imag()) - p.Omega)))
            best = k;
    }
    LfDamping d{-s.eigenvalues[best].real(), std::abs(s.eigenvalues[best].imag()), s.lf_weights[best]};
    if (!(d.lf_weight > 0.5))
        throw AttributionError("slowest mode is not phonon-like (LF weight " + std::to_string(d.lf_weight) + ")");
    return d;
}

// ---------------------------------------------------------------------------
// Linear response
// ---------------------------------------------------------------------------

/// Delta~ - Delta: the occupation-proportional shift of the HF resonance.
inline double dispersive_shift(const SystemParams& p, const SteadyBranch& b) noexcept {
    return -sqrt2 * p.g * b.q_s;
}

struct LinearResponse {
    double omega_bar = 0.0;
    cplx chi_inv{};
    double kappa_eff_analytic = 0.0;
    double Omega_eff = 0.0;
    double Delta_tilde = 0.0;
    double gamma_tilde = 0.0;
    double R = 0.0;
    double D_cal = 0.0;
    double gamma_r = 0.0;
    double omega_R = 0.0;
    bool valid = true;
};

/// Bare oscillator part of the inverse susceptibility, (Omega^2 + (kappa - i w)^2) / Omega.
inline cplx bare_inverse_susceptibility(const SystemParams& p, double w) noexcept {
    const cplx k(p.kappa, -w);
    return (p.Omega * p.Omega + k * k) / p.Omega;
}

/// Inverse susceptibility chi^-1(w) = F_q / F_F for a force F entering as
/// dp/dt += F, in closed form.
///
/// OM: chi^-1 = chi0^-1 + 4 g^2 |P_s|^2 Delta~ / ((gamma - i w)^2 + Delta~^2)
/// SC: chi^-1 = chi0^-1 + 4 N g^2 E1 [Re P_s Delta~ + Im P_s (gamma~ - i w)]
///              / ((2 gamma - i w) [(gamma~ + 2 R gamma - i w (1 - R)) (gamma~ - i w) + Delta~^2])
/// with R = 4 E1^2 / (w^2 + 4 gamma^2).
inline cplx inverse_susceptibility(const SystemParams& p, const SteadyBranch& b, double w) noexcept {
    const cplx i{0.0, 1.0};
    const double dt = p.Delta + dispersive_shift(p, b);
    const double gt = p.gamma_tilde();
    const cplx chi0 = bare_inverse_susceptibility(p, w);
    if (!is_semiconductor(p.kind)) {
        const cplx hf = gt - i * w;
        return chi0 + 4.0 * p.g * p.g * std::norm(b.P_s) * dt / (hf * hf + dt * dt);
    }
    const double R = 4.0 * p.E1 * p.E1 / (w * w + 4.0 * p.gamma * p.gamma);
    const cplx hf = gt - i * w;
    const cplx sat = cplx(gt + 2.0 * R * p.gamma, -w * (1.0 - R));
    const cplx num = 4.0 * p.N * p.g * p.g * p.E1 * (b.P_s.real() * dt + b.P_s.imag() * hf);
    const cplx den = cplx(2.0 * p.gamma, -w) * (sat * hf + dt * dt);
    return chi0 + num / den;
}

/// Matches chi^-1 to an effective damped oscillator at w:
/// kappa_eff = -Omega Im chi^-1 / (2 w).
inline double kappa_from_chi(const SystemParams& p, cplx chi_inv, double w) noexcept {
    return -p.Omega * chi_inv.imag() / (2.0 * w);
}

inline double omega_from_chi(const SystemParams& p, cplx chi_inv, double w, double kappa_eff) noexcept {
    return std::sqrt(std::max(0.0, p.Omega * chi_inv.real() + w * w - kappa_eff * kappa_eff));
}

/// Optomechanical effective damping
///   kappa - 4 g^2 |P_s|^2 Omega gamma Delta~ / ([gamma^2 + (w + Delta~)^2] [gamma^2 + (w - Delta~)^2]).
inline double kappa_eff_om(const SystemParams& p, const SteadyBranch& b, double w) noexcept {
    const double dt = p.Delta + dispersive_shift(p, b);
    const double gt = p.gamma_tilde();
    const double den = (gt * gt + (w + dt) * (w + dt)) * (gt * gt + (w - dt) * (w - dt));
    return p.kappa - 4.0 * p.g * p.g * std::norm(b.P_s) * p.Omega * gt * dt / den;
}

namespace detail {

struct SaturationTerms {
    double R, D, gamma_r, omega_R;
};

inline SaturationTerms saturation_terms(const SystemParams& p, double w) noexcept {
    const double gt = p.gamma_tilde();
    const double R = 4.0 * p.E1 * p.E1 / (w * w + 4.0 * p.gamma * p.gamma);
    const double a = 2.0 * p.gamma / gt;
    const double D = 0.5 * R * R * (1.0 - a) * (1.0 - a) / (1.0 - (1.0 + a) * R + a * R * R);
    const double gr2 = gt * gt * (1.0 - a * R);
    return {R, D, gr2 >= 0 ? std::sqrt(gr2) : std::numeric_limits<double>::quiet_NaN(), w * std::sqrt(1.0 + R)};
}

}  // namespace detail

/// Expanded real form of the SC effective damping in terms of R, D,
/// gamma_r and omega_R. It agrees with kappa_from_chi on the SC
/// susceptibility to leading order in E1 and drifts from it as the
/// excitation grows; NaN where the square roots turn imaginary.
inline double kappa_eff_sc_expanded(const SystemParams& p, const SteadyBranch& b, double w) noexcept {
    const auto t = detail::saturation_terms(p, w);
    const double dt = p.Delta + dispersive_shift(p, b);
    const double gt = p.gamma_tilde();
    const double re = b.P_s.real(), im = b.P_s.imag();
    const double root = (1.0 + t.D / 2.0) * (1.0 - t.R);
    if (!(root >= 0) || !std::isfinite(t.gamma_r)) return std::numeric_limits<double>::quiet_NaN();
    const double a = (re * dt - im * (p.gamma - p.gamma_pd)) * (t.gamma_r * t.gamma_r + dt * dt - t.omega_R * t.omega_R);
    const double c = 2.0 * (2.0 * re * dt * p.gamma + im * (2.0 * p.gamma * gt + w * w)) * t.gamma_r * std::sqrt(root);
    const double den = (t.gamma_r * t.gamma_r + (t.omega_R + dt) * (t.omega_R + dt)) *
                           (t.gamma_r * t.gamma_r + (t.omega_R - dt) * (t.omega_R - dt)) +
                       2.0 * t.D * t.gamma_r * t.gamma_r * t.omega_R * t.omega_R;
    return p.kappa - 2.0 * p.N * p.g * p.g * p.E1 * p.Omega / (w * w + 4.0 * p.gamma * p.gamma) * (a + c) / den;
}

/// Linear-response record at probe frequency w (default Omega). The
/// validity flag marks the weak-excitation regime the closed forms assume:
/// n_HF / N < 0.1 for SC, |P_s|^2 >= 1 for OM.
inline LinearResponse kappa_eff_analytic(const SystemParams& p, const SteadyBranch& b,
                                         std::optional<double> omega_bar = std::nullopt) {
    const double w = omega_bar.value_or(p.Omega);
    if (!(w > 0)) throw ParamError("kappa_eff_analytic: omega_bar must be > 0");
    LinearResponse r;
    r.omega_bar = w;
    r.chi_inv = inverse_susceptibility(p, b, w);
    r.Delta_tilde = p.Delta + dispersive_shift(p, b);
    r.gamma_tilde = p.gamma_tilde();
    if (is_semiconductor(p.kind)) {
        const auto t = detail::saturation_terms(p, w);
        r.R = t.R;
        r.D_cal = t.D;
        r.gamma_r = t.gamma_r;
        r.omega_R = t.omega_R;
        r.kappa_eff_analytic = kappa_from_chi(p, r.chi_inv, w);
        r.valid = b.U_s(p) < 0.1;
    } else {
        r.gamma_r = r.gamma_tilde;
        r.omega_R = w;
        r.kappa_eff_analytic = kappa_eff_om(p, b, w);
        r.valid = b.U_tot >= 1.0;
    }
    r.Omega_eff = omega_from_chi(p, r.chi_inv, w, r.kappa_eff_analytic);
    return r;
}

/// Same record with the probe frequency solved for w = Omega_eff(w). The
/// plain fixed-point map alternates around the root, so its first two
/// iterates bracket it for TOMS 748.
inline LinearResponse kappa_eff_analytic_selfconsistent(const SystemParams& p, const SteadyBranch& b,
                                                        int max_iter = 100, double tol = 1e-12) {
    auto f = [&](double w) { return kappa_eff_analytic(p, b, w).Omega_eff - w; };
    const LinearResponse first = kappa_eff_analytic(p, b);
    const double a = first.omega_bar, c = first.Omega_eff;
    if (!(c > 0) || c == a) return first;
    const double fa = f(a), fc = f(c);
    if (fc == 0.0) return kappa_eff_analytic(p, b, c);
    if ((fa < 0) == (fc < 0)) {
        LinearResponse r = first;
        for (int it = 0; it < max_iter && r.Omega_eff > 0; ++it) {
            LinearResponse next = kappa_eff_analytic(p, b, r.Omega_eff);
            const bool done = std::abs(next.omega_bar - r.omega_bar) <= tol * r.omega_bar;
            r = next;
            if (done) break;
        }
        return r;
    }
    std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
    const auto [lo, hi] = boost::math::tools::toms748_solve(
        f, std::min(a, c), std::max(a, c), a < c ? fa : fc, a < c ? fc : fa,
        [tol](double x, double y) { return std::abs(x - y) <= tol * std::max(std::abs(x), std::abs(y)); }, iters);
    return kappa_eff_analytic(p, b, 0.5 * (lo + hi));
}

// ---------------------------------------------------------------------------
// Lasing resonance
// ---------------------------------------------------------------------------

/// Effective detuning from the dressed HF resonance,
///   Delta_eff = -Delta - 2 E1^2 / Delta - n_HF g^2 / Omega   (SC)
///   Delta_eff = -Delta - n_HF g^2 / Omega                    (OM)
inline double effective_detuning(const SystemParams& p, double Delta, double n_HF) noexcept {
    double d = -Delta - n_HF * p.g * p.g / p.Omega;
    if (is_semiconductor(p.kind)) d -= 2.0 * p.E1 * p.E1 / Delta;
    return d;
}

/// Pump detuning Delta* of the first phonon-assisted lasing resonance,
/// where the effective detuning equals minus one phonon energy:
///   Delta_eff(Delta*) = -Omega,
/// with n_HF the HF excitation on the lasing orbit. With b = Omega - n_HF g^2 / Omega
/// this is Delta = b for OM and Delta^2 - b Delta + 2 E1^2 = 0 for SC. The SC
/// root nearer the bare resonance (the larger one in magnitude) is returned
/// if it lies in [lo, hi] (rad/ns, must exclude 0). No real root means the
/// pump is too strong for the expansion in E1 / Delta.
inline double lasing_resonance_predictor(const SystemParams& p, double n_HF, double lo, double hi) {
    if (!(lo < hi) || (lo <= 0 && hi >= 0)) throw ParamError("resonance window must exclude Delta = 0");
    const double b = p.Omega - n_HF * p.g * p.g / p.Omega;
    double root = b;
    if (is_semiconductor(p.kind)) {
        const double disc = b * b - 8.0 * p.E1 * p.E1;
        if (disc < 0) throw Error("lasing_resonance_predictor: no real resonance at this pump strength");
        root = 0.5 * (b + std::copysign(std::sqrt(disc), b));
    }
    if (!(root >= lo && root <= hi)) throw Error("lasing_resonance_predictor: no resonance in window");
    return root;
}

inline double lasing_resonance_predictor(const SystemParams& p, double n_HF) {
    return lasing_resonance_predictor(p, n_HF, 0.05 * p.Omega, 3.0 * p.Omega);
}

}  // namespace phonodyn
