#pragma once

// Model constants, built-in presets and the flat key=value parameter format.
//
// Canonical unit: every rate and frequency is an angular frequency in rad/ns.
// A value printed as "X GHz" is stored as X, "X Hz" as X*1e-9, and a
// "2pi*" prefix multiplies by 2*pi. Time is in ns.

#include "errors.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phonodyn {

enum class SystemKind { OM, SC_LA, SC_LO };

inline constexpr bool is_semiconductor(SystemKind k) noexcept { return k != SystemKind::OM; }

inline std::string_view to_string(SystemKind k) noexcept {
    switch (k) {
        case SystemKind::OM: return "OM";
        case SystemKind::SC_LA: return "SC_LA";
        case SystemKind::SC_LO: return "SC_LO";
    }
    return "?";
}

inline SystemKind parse_kind(std::string_view s) {
    std::string up;
    for (char c : s) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "OM") return SystemKind::OM;
    if (up == "SC_LA" || up == "SC-LA") return SystemKind::SC_LA;
    if (up == "SC_LO" || up == "SC-LO") return SystemKind::SC_LO;
    throw ParamError("unknown system kind '" + std::string(s) + "' (expected OM, SC_LA or SC_LO)");
}

struct SystemParams {
    SystemKind kind = SystemKind::SC_LA;
    double Omega = 1.0;     // LF mode frequency
    double kappa = 0.0;     // LF damping
    double gamma = 1.0;     // HF damping
    double gamma_pd = 0.0;  // pure dephasing
    double g = 0.0;         // LF-HF coupling
    double Delta = 0.0;     // pump detuning omega_L - omega
    double E1 = 0.0;        // pump strength
    int N = 1;              // number of quantum dots (1 for OM)

    double gamma_tilde() const noexcept { return gamma + gamma_pd; }
    double period() const noexcept { return 2.0 * std::numbers::pi / Omega; }

    friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

inline void validate(const SystemParams& p) {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(p.Omega) || !finite(p.kappa) || !finite(p.gamma) || !finite(p.gamma_pd) ||
        !finite(p.g) || !finite(p.Delta) || !finite(p.E1))
        throw ParamError("parameters must be finite");
    if (!(p.Omega > 0)) throw ParamError("Omega must be > 0");
    if (!(p.kappa >= 0)) throw ParamError("kappa must be >= 0");
    if (!(p.gamma > 0)) throw ParamError("gamma must be > 0");
    if (!(p.gamma_pd >= 0)) throw ParamError("gamma_pd must be >= 0");
    if (!(p.E1 >= 0)) throw ParamError("E1 must be >= 0");
    if (p.N < 1) throw ParamError("N must be >= 1");
    if (p.kind == SystemKind::OM && (p.N != 1 || p.gamma_pd != 0.0))
        throw ParamError("OM kind requires N = 1 and gamma_pd = 0");
}

// ---------------------------------------------------------------------------
// Value expressions
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline double unit_scale(std::string_view u) {
    if (u.empty()) return 1.0;
    if (u == "Hz") return 1e-9;
    if (u == "kHz") return 1e-6;
    if (u == "MHz") return 1e-3;
    if (u == "GHz") return 1.0;
    if (u == "THz") return 1e3;
    throw ParamError("unknown unit suffix '" + std::string(u) + "'");
}

inline double parse_factor(std::string_view f, double omega) {
    if (f == "2pi") return 2.0 * std::numbers::pi;
    if (f == "pi") return std::numbers::pi;
    if (f == "Omega") {
        if (!(omega > 0)) throw ParamError("'Omega' referenced before Omega is set");
        return omega;
    }
    std::string s(f);
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ParamError("cannot parse number in '" + s + "'");
    return v * unit_scale(std::string_view(end));
}

}  // namespace detail

/// Evaluates a parameter value: an optional sign followed by factors joined
/// with '*' or '/'. A factor is a decimal number with an optional unit
/// suffix (Hz, kHz, MHz, GHz, THz), or one of 2pi, pi, Omega.
/// Examples: "556.6", "2pi*10MHz", "952.7Hz", "-0.125*Omega", "-Omega/8".
inline double evaluate_expression(std::string_view text, double omega) {
    std::string s = detail::trim(text);
    if (s.empty()) throw ParamError("empty value");
    double sign = 1.0;
    std::size_t pos = 0;
    if (s[0] == '+' || s[0] == '-') {
        sign = s[0] == '-' ? -1.0 : 1.0;
        pos = 1;
    }
    double value = 1.0;
    char op = '*';
    while (pos <= s.size()) {
        std::size_t next = s.find_first_of("*/", pos);
        // exponent signs such as 1e-3 are not separators, '*' and '/' never
        // appear inside numbers, so a plain scan is enough
        std::string factor = detail::trim(std::string_view(s).substr(pos, next - pos));
        if (factor.empty()) throw ParamError("malformed expression '" + s + "'");
        double f = detail::parse_factor(factor, omega);
        value = op == '*' ? value * f : value / f;
        if (next == std::string::npos) break;
        op = s[next];
        pos = next + 1;
    }
    return sign * value;
}

inline bool references_omega(std::string_view text) {
    return text.find("Omega") != std::string_view::npos;
}

/// One key=value assignment, kept unevaluated until applied.
struct Assignment {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

inline Assignment parse_assignment(std::string_view text, std::size_t line = 0) {
    auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value, got '" + std::string(text) + "'", line);
    Assignment a{detail::trim(text.substr(0, eq)), detail::trim(text.substr(eq + 1)), line};
    if (a.key.empty() || a.value.empty()) throw ParseError("expected key=value, got '" + std::string(text) + "'", line);
    return a;
}

inline void apply_assignment(SystemParams& p, const Assignment& a) {
    try {
        const std::string& k = a.key;
        if (k == "kind") {
            p.kind = parse_kind(a.value);
            return;
        }
        if (k == "N") {
            double v = evaluate_expression(a.value, p.Omega);
            if (v != std::floor(v) || v < 1 || v > 1e9) throw ParamError("N must be a positive integer");
            p.N = static_cast<int>(v);
            return;
        }
        double v = evaluate_expression(a.value, p.Omega);
        if (k == "Omega") p.Omega = v;
        else if (k == "kappa") p.kappa = v;
        else if (k == "gamma") p.gamma = v;
        else if (k == "gamma_pd") p.gamma_pd = v;
        else if (k == "g") p.g = v;
        else if (k == "Delta") p.Delta = v;
        else if (k == "E1") p.E1 = v;
        else throw ParamError("unknown parameter '" + k + "'");
    } catch (const ParamError& e) {
        if (a.line) throw ParseError(e.what(), a.line);
        throw;
    }
}

/// Applies one layer of assignments. Within a layer, kind and Omega are set
/// first so that "Delta=-Omega/8" sees the layer's own Omega.
inline void apply_layer(SystemParams& p, const std::vector<Assignment>& layer) {
    for (const auto& a : layer)
        if (a.key == "kind" || a.key == "Omega") apply_assignment(p, a);
    for (const auto& a : layer)
        if (a.key != "kind" && a.key != "Omega") apply_assignment(p, a);
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 6> preset_names{
    "om_bistab", "sc_la_bistab", "sc_lo_bistab", "om_damp", "sc_la_damp", "sc_lo_damp"};

namespace detail {

inline SystemParams preset_table(std::string_view name) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    SystemParams p;
    if (name == "om_bistab") {
        p.kind = SystemKind::OM;
        p.Omega = two_pi * 10e-3;  // 2pi x 10 MHz
        p.gamma = two_pi * 14e-3;  // 2pi x 14 MHz
        p.kappa = two_pi * 50e-9;  // 2pi x 50 Hz
        p.g = 952.7e-9;            // 952.7 Hz
        p.Delta = -2.6 * p.Omega;
        p.E1 = 6350.0;  // inside the three-root window at Delta = -2.6 Omega
        p.N = 1;
    } else if (name == "sc_la_bistab") {
        p.kind = SystemKind::SC_LA;
        p.Omega = 556.6;
        p.gamma = 5.0;
        p.kappa = 0.5;
        p.g = 197.5;
        p.Delta = -p.Omega / 8.0;
        p.E1 = 20.0;
        p.N = 1;
    } else if (name == "sc_lo_bistab") {
        p.kind = SystemKind::SC_LO;
        p.Omega = 55.3e3;
        p.gamma = 5.0;
        p.kappa = 100.0;
        p.gamma_pd = 100.0;
        p.g = 5.1e3;
        p.Delta = -p.Omega;
        p.E1 = 100.0;
        p.N = 10;
    } else if (name == "om_damp") {
        p.kind = SystemKind::OM;
        p.Omega = two_pi * 10e-3;
        p.gamma = two_pi * 2e-3;
        p.kappa = two_pi * 50e-9;
        p.g = 205e-9;
        p.Delta = -p.Omega;
        p.E1 = 60.0;
        p.N = 1;
    } else if (name == "sc_la_damp") {
        p.kind = SystemKind::SC_LA;
        p.Omega = 556.6;
        p.gamma = 5.0;
        p.kappa = 0.5;
        p.g = 197.5;
        p.Delta = -p.Omega;
        p.E1 = 80.0;
        p.N = 1;
    } else if (name == "sc_lo_damp") {
        p.kind = SystemKind::SC_LO;
        p.Omega = 55.3e3;
        p.gamma = 5.0;
        p.kappa = 50.0;
        p.gamma_pd = 100.0;
        p.g = 5.1e3;
        p.Delta = -p.Omega;
        p.E1 = 9.01e3;
        p.N = 10;
    } else {
        throw ParamError("unknown preset '" + std::string(name) + "'");
    }
    return p;
}

}  // namespace detail

/// Returns a built-in parameter set with `overrides` applied last.
inline SystemParams preset(std::string_view name, const std::vector<Assignment>& overrides = {}) {
    SystemParams p = detail::preset_table(name);
    apply_layer(p, overrides);
    validate(p);
    return p;
}

// ---------------------------------------------------------------------------
// key=value text format
// ---------------------------------------------------------------------------

inline std::vector<Assignment> parse_parameter_text(std::istream& in) {
    std::vector<Assignment> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        out.push_back(parse_assignment(t, no));
    }
    return out;
}

inline std::vector<Assignment> read_parameter_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError("cannot open parameter file '" + path + "'");
    return parse_parameter_text(in);
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, r.ptr);
}

/// Canonical serialization: one field per line, values in rad/ns in their
/// shortest round-trip form. Parsing the output reproduces `p` bit for bit.
inline std::string serialize(const SystemParams& p) {
    std::ostringstream os;
    os << "kind=" << to_string(p.kind) << '\n'
       << "Omega=" << format_double(p.Omega) << '\n'
       << "kappa=" << format_double(p.kappa) << '\n'
       << "gamma=" << format_double(p.gamma) << '\n'
       << "gamma_pd=" << format_double(p.gamma_pd) << '\n'
       << "g=" << format_double(p.g) << '\n'
       << "Delta=" << format_double(p.Delta) << '\n'
       << "E1=" << format_double(p.E1) << '\n'
       << "N=" << p.N << '\n';
    return os.str();
}

inline SystemParams parse_parameters(std::istream& in, SystemParams base = {}) {
    apply_layer(base, parse_parameter_text(in));
    validate(base);
    return base;
}

}  // namespace phonodyn
