#ifndef HYBRIDSQ_MODEL_HPP
#define HYBRIDSQ_MODEL_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "hybridsq/errors.hpp"

namespace hybridsq {

/// CODATA 2018 exact/recommended values.
namespace constants {
inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double k_B = 1.380649e-23;      // J / K
} // namespace constants

/**
 * Raw system parameters of the hybrid atom-optomechanical setup.
 *
 * Every rate and frequency except omega_m is stored as a dimensionless
 * multiple of omega_m; omega_m itself is an angular frequency in rad/s and
 * only enters the SI conversions (drive_amplitude, thermal_occupation).
 * drive_power is in watts.
 */
struct PhysicalParams
{
    double omega_m = 1.0;        // rad/s
    double omega_a = 0.0;        // cavity frequency
    double delta_a = 0.0;        // drive - cavity
    double delta_c = 0.0;        // drive - atom
    double g0_collective = 0.0;  // G0 = g0 sqrt(N)
    double g_single = 0.0;       // single-photon optomechanical coupling
    double eta = 0.0;            // cubic nonlinearity
    double kappa = 1.0;
    double gamma_c = 1.0;
    double gamma_m = 1.0;
    double drive_power = 0.0;    // W
    double n_th = 0.0;
};

/// Throws InvalidParameter naming the first violated constraint.
inline void validate(const PhysicalParams &p)
{
    const std::pair<const char *, double> finite_fields[] = {
        {"omega_m", p.omega_m},     {"omega_a", p.omega_a},
        {"delta_a", p.delta_a},     {"delta_c", p.delta_c},
        {"g0_collective", p.g0_collective},
        {"g_single", p.g_single},   {"eta", p.eta},
        {"kappa", p.kappa},         {"gamma_c", p.gamma_c},
        {"gamma_m", p.gamma_m},     {"drive_power", p.drive_power},
        {"n_th", p.n_th}};
    for (const auto &[name, value] : finite_fields) {
        if (!std::isfinite(value))
            throw InvalidParameter(std::string(name) + " is not finite");
    }
    auto require = [](bool ok, const char *msg) {
        if (!ok)
            throw InvalidParameter(msg);
    };
    require(p.omega_m > 0.0, "omega_m must be > 0");
    require(p.kappa > 0.0, "kappa must be > 0");
    require(p.gamma_c > 0.0, "gamma_c must be > 0");
    require(p.gamma_m > 0.0, "gamma_m must be > 0");
    require(p.eta >= 0.0, "eta must be >= 0");
    require(p.n_th >= 0.0, "n_th must be >= 0");
    require(p.drive_power >= 0.0, "drive_power must be >= 0");
}

/// Drive strength Omega_d = sqrt(2 P kappa / (hbar omega_d)) in units of
/// omega_m, with omega_d = omega_a + delta_a the laser frequency.
inline double drive_amplitude(const PhysicalParams &p)
{
    if (!(p.drive_power >= 0.0))
        throw InvalidParameter("drive_power must be >= 0");
    const double omega_d = p.omega_a + p.delta_a;
    if (!(omega_d > 0.0))
        throw InvalidParameter("drive frequency omega_a + delta_a must be > 0");
    if (!(p.omega_m > 0.0))
        throw InvalidParameter("omega_m must be > 0");
    // kappa_SI / omega_d,SI is dimensionless, so omega_m only appears once.
    const double rate_si =
        std::sqrt(2.0 * p.drive_power * p.kappa / (constants::hbar * omega_d));
    const double result = rate_si / p.omega_m;
    if (!std::isfinite(result))
        throw InvalidParameter("drive amplitude is not finite");
    return result;
}

/// Bose occupation of the mechanical bath at temperature T (kelvin).
inline double thermal_occupation(double temperature, const PhysicalParams &p)
{
    if (!(temperature > 0.0))
        throw DomainError("temperature must be > 0");
    const double x = constants::hbar * p.omega_m / (constants::k_B * temperature);
    return 1.0 / std::expm1(x);
}

/// Inverse of thermal_occupation.
inline double occupation_temperature(double n_th, const PhysicalParams &p)
{
    if (!(n_th > 0.0))
        throw DomainError("occupation must be > 0 to define a temperature");
    return constants::hbar * p.omega_m / (constants::k_B * std::log1p(1.0 / n_th));
}

namespace presets {

inline constexpr std::string_view fig2_high_kappa_name = "fig2_high_kappa";
inline constexpr std::string_view fig4_low_kappa_name = "fig4_low_kappa";

/// Highly dissipative cavity, kappa = 10 omega_m, P = 2.4 uW.
inline PhysicalParams fig2_high_kappa()
{
    PhysicalParams p;
    p.omega_m = 2.0 * std::numbers::pi * 5e6;
    p.omega_a = 500e12 / 5e6;
    p.delta_a = 2.0;
    p.delta_c = 1.0;
    p.g0_collective = 0.5;
    p.g_single = 1e-2;
    p.eta = 1e-4;
    p.kappa = 10.0;
    p.gamma_c = 0.1;
    p.gamma_m = 1e-6;
    p.drive_power = 2.4e-6;
    p.n_th = 1.0;
    return p;
}

/// Weakly dissipative cavity, kappa = 0.1 omega_m, P = 0.38 uW.
inline PhysicalParams fig4_low_kappa()
{
    PhysicalParams p = fig2_high_kappa();
    p.delta_a = -0.25;
    p.delta_c = 0.01;
    p.g0_collective = 0.05;
    p.g_single = 1e-3;
    p.kappa = 0.1;
    p.drive_power = 0.38e-6;
    return p;
}

inline std::vector<std::string> names()
{
    return {std::string(fig2_high_kappa_name), std::string(fig4_low_kappa_name)};
}

inline PhysicalParams by_name(std::string_view name)
{
    if (name == fig2_high_kappa_name)
        return fig2_high_kappa();
    if (name == fig4_low_kappa_name)
        return fig4_low_kappa();
    throw InvalidParameter("unknown preset '" + std::string(name) + "'");
}

} // namespace presets

} // namespace hybridsq

#endif
