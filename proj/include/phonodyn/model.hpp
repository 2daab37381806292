#pragma once

// Semiclassical equations of motion for the driven LF/HF system.
//
//   dB/dt = -(i Omega + kappa) B - i g N U
//   dP/dt = (i Delta - gamma - gamma_pd) P - i g (B + B*) P + E1 (1 - 2U)   [SC]
//                                                          + E1             [OM]
//   dU/dt = E1 (P + P*) - 2 gamma U                                         [SC]
//
// For OM the HF occupation is U = |P|^2 and has no equation of its own.

#include "params.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace phonodyn {

using cplx = std::complex<double>;

inline constexpr double sqrt2 = std::numbers::sqrt2;

/// B: LF coherence <b>. P: HF coherence in the pump frame. U: HF occupation
/// per quantum dot (SC kinds only; ignored for OM, where |P|^2 is used).
struct SemiclassicalState {
    cplx B{};
    cplx P{};
    double U = 0.0;

    friend bool operator==(const SemiclassicalState&, const SemiclassicalState&) = default;
};

struct StateDerivative {
    cplx dB{};
    cplx dP{};
    double dU = 0.0;
};

/// HF occupation per emitter: U for SC, |P|^2 for OM.
inline double hf_occupation(const SystemParams& p, const SemiclassicalState& s) noexcept {
    return is_semiconductor(p.kind) ? s.U : std::norm(s.P);
}

/// Time-independent right-hand side; `t` is accepted for integrator uniformity.
inline StateDerivative rhs(const SystemParams& p, const SemiclassicalState& s, double /*t*/ = 0.0) noexcept {
    const cplx i{0.0, 1.0};
    const bool sc = is_semiconductor(p.kind);
    const double U = hf_occupation(p, s);
    const double two_re_b = 2.0 * s.B.real();

    StateDerivative d;
    d.dB = -cplx(p.kappa, p.Omega) * s.B - i * (p.g * p.N * U);
    d.dP = cplx(-p.gamma_tilde(), p.Delta) * s.P - i * (p.g * two_re_b) * s.P + p.E1 * (sc ? 1.0 - 2.0 * U : 1.0);
    d.dU = sc ? 2.0 * p.E1 * s.P.real() - 2.0 * p.gamma * U : 0.0;
    return d;
}

struct Observables {
    double n_LF = 0.0;  // phonon number |B|^2
    double n_HF = 0.0;  // N U (SC) or |P|^2 (OM)
    double q = 0.0;     // (B + B*) / sqrt2
    double p = 0.0;     // (B - B*) / (sqrt2 i)
    double X = 0.0;     // (P + P*) / sqrt2
    double Y = 0.0;     // (P - P*) / (sqrt2 i)
};

inline Observables observables(const SystemParams& p, const SemiclassicalState& s) noexcept {
    Observables o;
    o.n_LF = std::norm(s.B);
    o.n_HF = is_semiconductor(p.kind) ? p.N * s.U : std::norm(s.P);
    o.q = sqrt2 * s.B.real();
    o.p = sqrt2 * s.B.imag();
    o.X = sqrt2 * s.P.real();
    o.Y = sqrt2 * s.P.imag();
    return o;
}

}  // namespace phonodyn
