#ifndef HYBRIDSQ_EFFECTIVE_MODEL_HPP
#define HYBRIDSQ_EFFECTIVE_MODEL_HPP

#include <array>
#include <cmath>
#include <sstream>

#include "hybridsq/errors.hpp"
#include "hybridsq/model.hpp"
#include "hybridsq/steady_state.hpp"

namespace hybridsq {

/// Two-mode (mechanics + atoms) parameters after eliminating the cavity.
struct EffectiveParams
{
    double omega_m_tilde_prime = 1.0;
    double G_eff = 0.0;
    double Delta_eff = 0.0;
    double gamma_eff = 0.0;
    double Lambda_prime = 0.0;
};

/// Parameters in the frame rotated by the single-mode squeezer S(zeta).
struct TransformedParams
{
    double zeta = 0.0;
    double omega_m_prime = 1.0;
    double G_prime = 0.0;
    double n_th_prime = 0.0;
    /// Lindblad weights, in order: gamma_m (n'+1) cosh^2 on L[b],
    /// gamma_m (n'+1) sinh^2 on L[b+], gamma_m n' cosh^2 on L[b+],
    /// gamma_m n' sinh^2 on L[b].
    std::array<double, 4> cooling_rates{};

    double squeezing_floor() const { return std::exp(-2.0 * zeta); }
    /// Total weight on L[b] and on L[b+].
    double lowering_rate() const { return cooling_rates[0] + cooling_rates[3]; }
    double raising_rate() const { return cooling_rates[1] + cooling_rates[2]; }
};

inline EffectiveParams eliminate_cavity(const PhysicalParams &p, const LinearizedParams &lin)
{
    const double half_kappa = p.kappa / 2.0;
    const double lorentz = lin.Delta_a * lin.Delta_a + half_kappa * half_kappa;
    if (!(p.kappa > 0.0) || !(lorentz > 0.0))
        throw InvalidParameter("cavity elimination needs kappa > 0");
    const double g0sq = p.g0_collective * p.g0_collective;
    const double shift = lin.G * lin.G * lin.Delta_a / lorentz;

    EffectiveParams e;
    e.omega_m_tilde_prime = lin.omega_m_tilde + 2.0 * shift;
    e.G_eff = std::abs(lin.G * p.g0_collective / complex{lin.Delta_a, half_kappa});
    e.Delta_eff = p.delta_c - g0sq * lin.Delta_a / lorentz;
    e.gamma_eff = p.gamma_c + g0sq * p.kappa / lorentz;
    e.Lambda_prime = lin.Lambda + shift;
    return e;
}

/// (1 + 4 Lambda'/omega_m); the squeezer exists only while this is > 0.
inline double stiffness_ratio(const EffectiveParams &e) { return 1.0 + 4.0 * e.Lambda_prime; }

inline TransformedParams transform_frame(const EffectiveParams &e, const PhysicalParams &p)
{
    const double ratio = stiffness_ratio(e);
    if (!(ratio > 0.0)) {
        std::ostringstream msg;
        msg << "1 + 4 Lambda'/omega_m = " << ratio
            << " <= 0: inverted mechanical potential, no squeezing frame";
        throw TransformDomainError(msg.str());
    }
    TransformedParams t;
    t.zeta = 0.25 * std::log(ratio);
    t.omega_m_prime = std::sqrt(ratio);
    t.G_prime = e.G_eff * std::pow(ratio, -0.25);
    const double ch = std::cosh(t.zeta);
    const double sh = std::sinh(t.zeta);
    t.n_th_prime = p.n_th * std::cosh(2.0 * t.zeta) + sh * sh;
    const double n = t.n_th_prime;
    t.cooling_rates = {p.gamma_m * (n + 1.0) * ch * ch, p.gamma_m * (n + 1.0) * sh * sh,
                       p.gamma_m * n * ch * ch, p.gamma_m * n * sh * sh};
    return t;
}

/// Steady-state X variance in terms of the transformed-frame phonon number.
inline double analytic_variance(const TransformedParams &t, double n_eff_prime)
{
    if (!(n_eff_prime >= 0.0))
        throw DomainError("transformed phonon number must be >= 0");
    return (2.0 * n_eff_prime + 1.0) * std::exp(-2.0 * t.zeta);
}

/// Delta_eff at which the transformed beam-splitter cooling is resonant.
inline double optimal_detuning(const TransformedParams &t) { return -t.omega_m_prime; }

/// Full classical + linearized + effective chain for one parameter set.
struct Pipeline
{
    PhysicalParams params;
    SteadyAmplitudes amplitudes;
    LinearizedParams linearized;
    EffectiveParams effective;
};

inline Pipeline run_pipeline(const PhysicalParams &p, const AmplitudeSolverOptions &opt = {})
{
    Pipeline out;
    out.params = p;
    out.amplitudes = solve_steady_amplitudes(p, opt);
    out.linearized = linearize(p, out.amplitudes);
    out.effective = eliminate_cavity(p, out.linearized);
    return out;
}

struct DeltaCOptions
{
    /// Re-solve the classical amplitudes for every trial Delta_c. When off,
    /// the amplitudes of the input parameters are held fixed.
    bool resolve_amplitudes = true;
    double tolerance = 1e-10;
    int max_iterations = 100;
    AmplitudeSolverOptions amplitude{};
};

struct DeltaCSolution
{
    double delta_c = 0.0;
    Pipeline pipeline;  // evaluated at delta_c
    int iterations = 0;
};

/**
 * Finds the atomic detuning Delta_c whose self-consistent Delta_eff equals
 * `target`. With re-solving on, Delta_c feeds back through xi into alpha and
 * beta, so the residual h(Delta_c) = Delta_eff(Delta_c) - target is driven to
 * zero by secant iteration on the full pipeline, falling back to bisection
 * once a sign change has been bracketed.
 */
inline DeltaCSolution solve_for_delta_c(const PhysicalParams &p, double target,
                                        const DeltaCOptions &opt = {})
{
    if (!opt.resolve_amplitudes) {
        const Pipeline base = run_pipeline(p, opt.amplitude);
        const auto &lin = base.linearized;
        const double lorentz = lin.Delta_a * lin.Delta_a + p.kappa * p.kappa / 4.0;
        PhysicalParams q = p;
        q.delta_c = target + p.g0_collective * p.g0_collective * lin.Delta_a / lorentz;
        DeltaCSolution s;
        s.delta_c = q.delta_c;
        s.pipeline = base;
        s.pipeline.params = q;
        s.pipeline.effective = eliminate_cavity(q, lin);
        s.iterations = 1;
        return s;
    }

    PhysicalParams q = p;
    auto evaluate = [&](double dc) {
        q.delta_c = dc;
        Pipeline pl = run_pipeline(q, opt.amplitude);
        return std::pair{pl.effective.Delta_eff - target, pl};
    };

    const Pipeline base = run_pipeline(p, opt.amplitude);
    // Start from the fixed-amplitude closed form; its shift is exact for G0 = 0.
    double x0 = target + (p.delta_c - base.effective.Delta_eff);
    auto [h0, pl0] = evaluate(x0);
    if (std::abs(h0) <= opt.tolerance)
        return {x0, pl0, 1};
    double x1 = x0 - h0;
    auto [h1, pl1] = evaluate(x1);

    double lo = 0.0, hi = 0.0, h_lo = 0.0, h_hi = 0.0;
    bool bracketed = false;
    auto note_bracket = [&](double xa, double ha, double xb, double hb) {
        if ((ha < 0.0) != (hb < 0.0)) {
            lo = xa; h_lo = ha; hi = xb; h_hi = hb;
            bracketed = true;
        }
    };
    note_bracket(x0, h0, x1, h1);

    for (int it = 2; it <= opt.max_iterations; ++it) {
        if (std::abs(h1) <= opt.tolerance)
            return {x1, pl1, it};
        double x2 = (h1 != h0) ? x1 - h1 * (x1 - x0) / (h1 - h0) : x1 - h1;
        if (bracketed && !(x2 > std::min(lo, hi) && x2 < std::max(lo, hi)))
            x2 = 0.5 * (lo + hi);
        auto [h2, pl2] = evaluate(x2);
        if (bracketed) {
            if ((h2 < 0.0) == (h_lo < 0.0)) {
                lo = x2; h_lo = h2;
            } else {
                hi = x2; h_hi = h2;
            }
        } else {
            note_bracket(x1, h1, x2, h2);
        }
        x0 = x1; h0 = h1;
        x1 = x2; h1 = h2;
        pl1 = std::move(pl2);
    }
    std::ostringstream msg;
    msg << "Delta_c search for Delta_eff = " << target << " did not converge";
    if (bracketed)
        msg << "; bracket [" << lo << ", " << hi << "] with residuals [" << h_lo << ", "
            << h_hi << "]";
    else
        msg << "; no sign change bracketed";
    throw ConvergenceError(msg.str(), x1, h1);
}

} // namespace hybridsq

#endif
