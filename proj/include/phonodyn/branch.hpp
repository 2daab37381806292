#pragma once

// Stationary states and the force balance on the LF coordinate.

#include "model.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

namespace phonodyn {

enum class Stability { stable, unstable, marginal };

inline std::string_view to_string(Stability s) noexcept {
    switch (s) {
        case Stability::stable: return "stable";
        case Stability::unstable: return "unstable";
        case Stability::marginal: return "marginal";
    }
    return "?";
}

/// One root of the stationary problem completed to a full state.
struct SteadyBranch {
    double U_tot = 0.0;  // N U_s (SC) or |P_s|^2 (OM)
    double q_s = 0.0;
    double p_s = 0.0;
    cplx P_s{};
    double n_LF = 0.0;
    Stability stability = Stability::marginal;
    double max_re_lambda = 0.0;

    cplx B_s() const noexcept { return cplx(q_s, p_s) / sqrt2; }

    /// Per-emitter occupation; for OM this equals U_tot.
    double U_s(const SystemParams& p) const noexcept { return U_tot / p.N; }

    SemiclassicalState state(const SystemParams& p) const noexcept {
        return {B_s(), P_s, is_semiconductor(p.kind) ? U_s(p) : 0.0};
    }
};

/// Detuning shift per unit of total HF excitation, 2 g^2 Omega / (Omega^2 + kappa^2).
inline double shift_per_excitation(const SystemParams& p) noexcept {
    return 2.0 * p.g * p.g * p.Omega / (p.Omega * p.Omega + p.kappa * p.kappa);
}

/// Builds the stationary state belonging to a total HF excitation U_tot.
/// Stability fields are left for the caller (see linstab).
inline SteadyBranch complete_branch(const SystemParams& p, double U_tot) noexcept {
    const double denom = p.Omega * p.Omega + p.kappa * p.kappa;
    const double delta_tilde = p.Delta + shift_per_excitation(p) * U_tot;
    const double drive = is_semiconductor(p.kind) ? p.E1 * (1.0 - 2.0 * U_tot / p.N) : p.E1;

    SteadyBranch b;
    b.U_tot = U_tot;
    b.q_s = -sqrt2 * p.g * p.Omega * U_tot / denom;
    b.p_s = -sqrt2 * p.g * p.kappa * U_tot / denom;
    b.P_s = drive / cplx(p.gamma_tilde(), -delta_tilde);
    b.n_LF = 0.5 * (b.q_s * b.q_s + b.p_s * b.p_s);
    return b;
}

struct ForceDecomposition {
    double F_h = 0.0;    // harmonic restoring force
    double F_c = 0.0;    // coupling / radiation-pressure force
    double F_tot = 0.0;  // F_h + F_c
};

/// Stationary forces on the LF coordinate at displacement q_s.
///
/// SC: F_c = (N g / sqrt2) / (1 + (gamma / gamma~) ((Delta - sqrt2 g q)^2 + gamma~^2) / (2 E1^2)).
/// OM: F_c = (g / sqrt2) 2 E1^2 / ((Delta - sqrt2 g q)^2 + gamma^2), the exact
///     bosonic result; it coincides with the SC form at N = 1, gamma_pd = 0
///     only when E1^2 is small against the Lorentzian width.
inline ForceDecomposition forces(const SystemParams& p, double q_s) {
    if (!(p.Omega != 0.0)) throw ParamError("forces: Omega must be nonzero");
    const double gt = p.gamma_tilde();
    const double shifted = p.Delta - sqrt2 * p.g * q_s;
    const double lorentz = shifted * shifted + gt * gt;

    ForceDecomposition f;
    f.F_h = (p.Omega + p.kappa * p.kappa / p.Omega) * q_s;
    if (p.E1 == 0.0) {
        f.F_c = 0.0;
    } else if (is_semiconductor(p.kind)) {
        f.F_c = p.N * p.g / sqrt2 / (1.0 + (p.gamma / gt) * lorentz / (2.0 * p.E1 * p.E1));
    } else {
        f.F_c = p.g / sqrt2 * 2.0 * p.E1 * p.E1 / lorentz;
    }
    f.F_tot = f.F_h + f.F_c;
    return f;
}

/// The two-level force law evaluated with N = 1 and no dephasing; for OM
/// parameters this is the saturable counterpart of the bosonic force and
/// agrees with it to first order in E1^2.
inline double two_level_force(const SystemParams& p, double q_s) {
    SystemParams tl = p;
    tl.kind = SystemKind::SC_LA;
    tl.N = 1;
    tl.gamma_pd = 0.0;
    return forces(tl, q_s).F_c;
}

/// |F_h + F_c| relative to max(|F_h|, |F_c|, Omega).
inline double force_residual(const SystemParams& p, double q_s) {
    const auto f = forces(p, q_s);
    return std::abs(f.F_tot) / std::max({std::abs(f.F_h), std::abs(f.F_c), p.Omega});
}

}  // namespace phonodyn
