#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace phonodyn {

struct CubicRoot {
    double value = 0.0;
    bool repeated = false;  // part of a double/triple root within tolerance
};

/// Real roots of x^3 + a x^2 + b x + c, ascending, from the closed form
/// (trigonometric for three real roots, Cardano otherwise) followed by one
/// Newton step each. The normalized discriminant |4p^3 + 27q^2| /
/// (|4p^3| + 27q^2) below `disc_tol` marks a double root.
template <class Real = double>
std::vector<CubicRoot> solve_monic_cubic(Real a, Real b, Real c, Real disc_tol = Real(1e-9)) {
    using std::abs, std::acos, std::cbrt, std::cos, std::sqrt;
    const Real shift = a / 3;
    // depressed cubic t^3 + p t + q with x = t - a/3
    const Real p = b - a * a / 3;
    const Real q = 2 * a * a * a / 27 - a * b / 3 + c;

    const Real p3 = 4 * p * p * p;
    const Real q2 = 27 * q * q;
    const Real scale = abs(p3) + q2;
    const Real disc = p3 + q2;  // < 0: three distinct real roots

    std::vector<CubicRoot> roots;
    if (scale == 0) {
        roots.push_back({-shift, true});
    } else if (abs(disc) <= disc_tol * scale) {
        if (p == 0) {
            roots.push_back({-shift, true});
        } else {
            roots.push_back({3 * q / p - shift, false});
            roots.push_back({-3 * q / (2 * p) - shift, true});
        }
    } else if (disc < 0) {
        const Real m = 2 * sqrt(-p / 3);
        Real arg = 3 * q / (p * m);
        arg = std::clamp(arg, Real(-1), Real(1));
        const Real theta = acos(arg) / 3;
        for (int k = 0; k < 3; ++k)
            roots.push_back({m * cos(theta - 2 * std::numbers::pi_v<Real> * k / 3) - shift, false});
    } else {
        const Real s = sqrt(disc / 108);
        roots.push_back({cbrt(-q / 2 + s) + cbrt(-q / 2 - s) - shift, false});
    }

    for (auto& r : roots) {
        if (r.repeated) continue;  // Newton converges only linearly there
        const Real x = r.value;
        const Real f = ((x + a) * x + b) * x + c;
        const Real df = (3 * x + 2 * a) * x + b;
        if (df != 0) r.value = x - f / df;
    }
    std::sort(roots.begin(), roots.end(), [](const CubicRoot& l, const CubicRoot& r) { return l.value < r.value; });
    return roots;
}

}  // namespace phonodyn
