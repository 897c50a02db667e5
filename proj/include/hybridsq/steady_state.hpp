#ifndef HYBRIDSQ_STEADY_STATE_HPP
#define HYBRIDSQ_STEADY_STATE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "hybridsq/errors.hpp"
#include "hybridsq/model.hpp"

namespace hybridsq {

using complex = std::complex<double>;

/// Classical displacements of the cavity (alpha), mechanical (beta) and
/// collective atomic (xi) modes.
struct SteadyAmplitudes
{
    complex alpha{};
    double beta = 0.0;
    complex xi{};
    /// max |residual| over the three stationarity equations, units of omega_m
    double residual_norm = 0.0;
};

/// Coefficients of the linearized fluctuation Hamiltonian.
struct LinearizedParams
{
    double Delta_a = 0.0;        // delta_a + 2 g beta
    double omega_m_tilde = 1.0;  // omega_m + 2 Lambda
    double Lambda = 0.0;         // 6 eta beta
    double G = 0.0;              // g |alpha|
};

struct AmplitudeSolverOptions
{
    double tolerance = 1e-10;
    int max_newton_steps = 200;
    int max_continuation_steps = 20000;
};

/// Residuals of the three stationarity equations evaluated as written,
/// without going through the scalar reduction used by the solver.
struct AmplitudeResiduals
{
    complex cavity{};
    double mechanical = 0.0;
    complex atomic{};

    double max_abs() const
    {
        return std::max({std::abs(cavity), std::abs(mechanical), std::abs(atomic)});
    }
};

inline AmplitudeResiduals amplitude_residuals(const PhysicalParams &p,
                                              complex alpha, double beta,
                                              complex xi)
{
    const complex i{0.0, 1.0};
    const double omega_d = drive_amplitude(p);
    AmplitudeResiduals r;
    r.cavity = (i * (p.delta_a + 2.0 * p.g_single * beta) - p.kappa / 2.0) * alpha -
               i * p.g0_collective * xi - i * omega_d;
    r.mechanical = beta + 3.0 * p.eta * (4.0 * beta * beta + 1.0) -
                   p.g_single * std::norm(alpha);
    r.atomic = (i * p.delta_c - p.gamma_c / 2.0) * xi - i * p.g0_collective * alpha;
    return r;
}

namespace detail {

/**
 * The stationarity equations with xi and alpha eliminated:
 *
 *   f(beta; q) = beta + 3 eta (4 beta^2 + 1) - g q / |d(beta)|^2
 *
 * where q = Omega_d^2 and d(beta) = i(delta_a + 2 g beta) - kappa/2
 *                                    + G0^2 / (i Delta_c - gamma_c/2).
 */
class ReducedEquation
{
public:
    explicit ReducedEquation(const PhysicalParams &p)
        : g_(p.g_single), eta_(p.eta), delta_a_(p.delta_a)
    {
        const complex atomic_pole{-p.gamma_c / 2.0, p.delta_c};
        const complex k = p.g0_collective * p.g0_collective / atomic_pole;
        re_ = -p.kappa / 2.0 + k.real();
        im_offset_ = k.imag();
    }

    complex denominator(double beta) const
    {
        return {re_, delta_a_ + 2.0 * g_ * beta + im_offset_};
    }

    double denom_norm(double beta) const { return std::norm(denominator(beta)); }

    double value(double beta, double q) const
    {
        return beta + 3.0 * eta_ * (4.0 * beta * beta + 1.0) -
               g_ * q / denom_norm(beta);
    }

    double dbeta(double beta, double q) const
    {
        const double im = delta_a_ + 2.0 * g_ * beta + im_offset_;
        const double n = denom_norm(beta);
        return 1.0 + 24.0 * eta_ * beta + 4.0 * g_ * g_ * q * im / (n * n);
    }

    double dq(double beta) const { return -g_ / denom_norm(beta); }

    /// Lorentzian half-width of the drive term in beta.
    double resonance_width() const
    {
        return g_ > 0.0 ? std::abs(re_) / (2.0 * g_)
                        : std::numeric_limits<double>::infinity();
    }

    double eta() const { return eta_; }

private:
    double g_;
    double eta_;
    double delta_a_;
    double re_ = 0.0;
    double im_offset_ = 0.0;
};

/// Small real root of 12 eta b^2 + b + 3 eta = 0 (the undriven equation).
inline double undriven_root(double eta)
{
    if (eta == 0.0)
        return 0.0;
    const double disc = 1.0 - 144.0 * eta * eta;
    if (disc < 0.0)
        throw BranchError("undriven mechanical equation has no real root "
                          "(eta > omega_m / 12)");
    return -6.0 * eta / (1.0 + std::sqrt(disc));
}

struct ScalarRoot
{
    double x = 0.0;
    double residual = 0.0;
    bool converged = false;
};

/**
 * Damped Newton on a bracket [lo, hi] with f(lo), f(hi) of opposite sign.
 * The damping factor halves whenever |f| grows; steps leaving the bracket
 * fall back to bisection. Iterates past the tolerance until the update
 * stalls so that repeated solves land on the same floating-point value.
 */
template <class F, class DF>
ScalarRoot safeguarded_newton(F &&f, DF &&df, double x0, double lo, double hi,
                              double tol, int max_steps)
{
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0)
        return {lo, 0.0, true};
    if (fhi == 0.0)
        return {hi, 0.0, true};
    double x = std::clamp(x0, std::min(lo, hi), std::max(lo, hi));
    double fx = f(x);
    const double lo_sign = std::copysign(1.0, flo);
    double damping = 1.0;
    int polish = 0;
    for (int step = 0; step < max_steps; ++step) {
        if (fx == 0.0)
            return {x, 0.0, true};
        if (std::copysign(1.0, fx) == lo_sign) {
            lo = x;
        } else {
            hi = x;
        }
        const double d = df(x);
        double candidate = x - damping * fx / d;
        const bool inside = std::isfinite(candidate) &&
                            candidate > std::min(lo, hi) &&
                            candidate < std::max(lo, hi);
        if (!inside)
            candidate = 0.5 * (lo + hi);
        const double fc = f(candidate);
        if (inside && std::abs(fc) > std::abs(fx)) {
            damping *= 0.5;
            if (damping < 1e-6) {
                damping = 1.0;
                x = 0.5 * (lo + hi);
                fx = f(x);
            }
            continue;
        }
        damping = std::min(1.0, damping * 2.0);
        const double moved = std::abs(candidate - x);
        x = candidate;
        fx = fc;
        if (std::abs(fx) <= tol) {
            // a few extra steps pin the last bits
            if (moved <= 4.0 * std::numeric_limits<double>::epsilon() *
                             std::max(1.0, std::abs(x)) ||
                ++polish > 3)
                return {x, std::abs(fx), true};
        }
        if (std::abs(hi - lo) <= 2.0 * std::numeric_limits<double>::epsilon() *
                                     std::max(1.0, std::abs(x)))
            return {x, std::abs(fx), std::abs(fx) <= tol};
    }
    return {x, std::abs(fx), std::abs(fx) <= tol};
}

/// Brackets and solves f(.; q) starting from `from`, searching in the
/// direction the sign of f(from) dictates for a root with f' > 0.
inline std::optional<double> corrector(const ReducedEquation &eq, double q,
                                       double from, double predicted,
                                       const AmplitudeSolverOptions &opt)
{
    auto f = [&](double b) { return eq.value(b, q); };
    auto df = [&](double b) { return eq.dbeta(b, q); };
    const double f0 = f(from);
    if (std::abs(f0) <= opt.tolerance * 1e-3)
        return from;
    // f increases through the tracked root: f(from) < 0 means move right.
    const double dir = f0 < 0.0 ? 1.0 : -1.0;
    double reach = std::max(2.0 * std::abs(predicted - from), 1e-9 * (1.0 + std::abs(from)));
    double far = from + dir * reach;
    int expansions = 0;
    while (std::copysign(1.0, f(far)) == std::copysign(1.0, f0)) {
        reach *= 2.0;
        far = from + dir * reach;
        if (++expansions > 60)
            return std::nullopt;
    }
    const auto root = safeguarded_newton(f, df, predicted, from, far,
                                         opt.tolerance, opt.max_newton_steps);
    if (!root.converged)
        return std::nullopt;
    return root.x;
}

/// Follows the root of f(.; q) from (q_from, beta_from) to q_to by natural
/// parameter continuation. At a fold the tracked root jumps to the nearest
/// root beyond it; BranchError if none exists.
inline double continue_branch(const ReducedEquation &eq, double q_from,
                              double beta_from, double q_to,
                              const AmplitudeSolverOptions &opt)
{
    double q = q_from;
    double beta = beta_from;
    if (q_to == q_from) {
        const auto r = corrector(eq, q, beta, beta, opt);
        if (!r)
            throw ConvergenceError("amplitude polish failed", beta, eq.value(beta, q));
        return *r;
    }
    double step = (q_to - q_from) / 8.0;
    const double min_step = 1e-13 * std::max(std::abs(q_to), std::abs(q_from));
    for (int it = 0; it < opt.max_continuation_steps; ++it) {
        if ((step > 0.0 && q + step > q_to) || (step < 0.0 && q + step < q_to))
            step = q_to - q;
        const double q_next = q + step;
        const double slope = -eq.dq(beta) / eq.dbeta(beta, q);
        const double predicted = beta + slope * step;
        const auto r = corrector(eq, q_next, beta, predicted, opt);
        const double tolerance_band =
            0.5 * std::abs(predicted - beta) + 1e-9 * (1.0 + std::abs(beta));
        const bool accepted = r && eq.dbeta(*r, q_next) > 0.0 &&
                              std::abs(*r - predicted) <= tolerance_band;
        if (!accepted) {
            if (std::abs(step) < 4.0 * min_step && r && eq.dbeta(*r, q_next) > 0.0) {
                // past the fold: jump to the next stable root, as a slow ramp would
                q = q_next;
                beta = *r;
                if (q == q_to)
                    return beta;
                step = (q_to - q) / 8.0;
                continue;
            }
            step *= 0.5;
            if (std::abs(step) < min_step) {
                std::ostringstream msg;
                msg << "amplitude branch folds near Omega_d^2 = " << q
                    << " (beta = " << beta << ")";
                throw BranchError(msg.str());
            }
            continue;
        }
        const bool easy = std::abs(*r - predicted) < 0.05 * std::abs(predicted - beta) + 1e-12;
        q = q_next;
        beta = *r;
        if (q == q_to)
            return beta;
        if (easy)
            step *= 2.0;
    }
    throw ConvergenceError("amplitude continuation exceeded step budget", beta,
                           eq.value(beta, q));
}

inline SteadyAmplitudes assemble(const PhysicalParams &p, double beta)
{
    const ReducedEquation eq(p);
    const complex i{0.0, 1.0};
    const double omega_d = drive_amplitude(p);
    SteadyAmplitudes a;
    a.beta = beta;
    a.alpha = i * omega_d / eq.denominator(beta);
    a.xi = i * p.g0_collective * a.alpha / complex{-p.gamma_c / 2.0, p.delta_c};
    a.residual_norm = amplitude_residuals(p, a.alpha, a.beta, a.xi).max_abs();
    return a;
}

inline void check_residual(const SteadyAmplitudes &a,
                           const AmplitudeSolverOptions &opt)
{
    if (!(a.residual_norm <= opt.tolerance))
        throw ConvergenceError("amplitude residual above tolerance", a.beta,
                               a.residual_norm);
}

} // namespace detail

/**
 * Solves the classical stationarity equations on the branch that connects
 * continuously to (0, beta_0, 0) at zero drive. The gamma_m terms are
 * dropped.
 */
inline SteadyAmplitudes solve_steady_amplitudes(const PhysicalParams &p,
                                                const AmplitudeSolverOptions &opt = {})
{
    validate(p);
    const double omega_d = drive_amplitude(p);
    const detail::ReducedEquation eq(p);
    const double beta0 = detail::undriven_root(p.eta);
    const double beta = detail::continue_branch(eq, 0.0, beta0, omega_d * omega_d, opt);
    auto a = detail::assemble(p, beta);
    detail::check_residual(a, opt);
    return a;
}

/// Warm-started solve: continues the branch from a solution `from` obtained
/// at `from_power` (same parameters otherwise).
inline SteadyAmplitudes solve_steady_amplitudes(const PhysicalParams &p,
                                                double from_power,
                                                const SteadyAmplitudes &from,
                                                const AmplitudeSolverOptions &opt = {})
{
    validate(p);
    PhysicalParams origin = p;
    origin.drive_power = from_power;
    const double q_from = std::pow(drive_amplitude(origin), 2);
    const double q_to = std::pow(drive_amplitude(p), 2);
    const detail::ReducedEquation eq(p);
    const double beta = detail::continue_branch(eq, q_from, from.beta, q_to, opt);
    auto a = detail::assemble(p, beta);
    detail::check_residual(a, opt);
    return a;
}

/// All real roots of the reduced mechanical equation at the drive set by p,
/// ascending. The tracked solution is one of them.
inline std::vector<double> real_beta_roots(const PhysicalParams &p)
{
    validate(p);
    const detail::ReducedEquation eq(p);
    const double omega_d = drive_amplitude(p);
    const double q = omega_d * omega_d;
    // Roots satisfy 12 eta b^2 + b + 3 eta <= g q / min|d|^2.
    const double re = eq.denominator(0.0).real();
    const double m = p.g_single * q / std::max(re * re, 1e-300);
    double lo, hi;
    if (p.eta > 0.0) {
        const double disc = 1.0 + 48.0 * p.eta * (m - 3.0 * p.eta);
        if (disc < 0.0)
            return {};
        const double s = std::sqrt(disc);
        lo = (-1.0 - s) / (24.0 * p.eta);
        hi = (-1.0 + s) / (24.0 * p.eta);
    } else {
        lo = -1.0;
        hi = m + 1.0;
    }
    lo -= 1.0;
    hi += 1.0;
    const double width = std::min(eq.resonance_width(), 1.0 + std::abs(hi - lo));
    const auto n = static_cast<long>(
        std::clamp(std::ceil((hi - lo) / (width / 20.0)), 200.0, 2e6));
    std::vector<double> roots;
    auto f = [&](double b) { return eq.value(b, q); };
    auto df = [&](double b) { return eq.dbeta(b, q); };
    double x_prev = lo;
    double f_prev = f(lo);
    for (long k = 1; k <= n; ++k) {
        const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n);
        const double fx = f(x);
        if (f_prev == 0.0) {
            roots.push_back(x_prev);
        } else if ((f_prev < 0.0) != (fx < 0.0) && fx != 0.0) {
            const auto r = detail::safeguarded_newton(f, df, 0.5 * (x_prev + x), x_prev,
                                                      x, 1e-12, 200);
            roots.push_back(r.x);
        }
        x_prev = x;
        f_prev = fx;
    }
    return roots;
}

inline LinearizedParams linearize(const PhysicalParams &p, const SteadyAmplitudes &a)
{
    LinearizedParams lin;
    lin.Lambda = 6.0 * p.eta * a.beta;
    lin.omega_m_tilde = 1.0 + 2.0 * lin.Lambda;
    lin.Delta_a = p.delta_a + 2.0 * p.g_single * a.beta;
    lin.G = p.g_single * std::abs(a.alpha);
    return lin;
}

struct PowerPoint
{
    double power = 0.0;  // W
    SteadyAmplitudes amplitudes;
};

/// Warm-started sweep over ascending powers; each point continues the
/// branch from the previous one.
inline std::vector<PowerPoint> sweep_power(const PhysicalParams &p,
                                           const std::vector<double> &powers,
                                           const AmplitudeSolverOptions &opt = {})
{
    if (!std::is_sorted(powers.begin(), powers.end()))
        throw InvalidParameter("sweep powers must be sorted ascending");
    std::vector<PowerPoint> out;
    out.reserve(powers.size());
    PhysicalParams cur = p;
    std::optional<PowerPoint> prev;
    for (const double power : powers) {
        cur.drive_power = power;
        auto context = [&](const std::string &what) {
            std::ostringstream msg;
            msg << "at P = " << power << " W: " << what;
            return msg.str();
        };
        try {
            PowerPoint pt{power, prev ? solve_steady_amplitudes(cur, prev->power,
                                                                prev->amplitudes, opt)
                                      : solve_steady_amplitudes(cur, opt)};
            out.push_back(pt);
            prev = pt;
        } catch (const BranchError &e) {
            throw BranchError(context(e.what()));
        } catch (const ConvergenceError &e) {
            throw ConvergenceError(context(e.what()), e.last_iterate(), e.last_residual());
        } catch (const InvalidParameter &e) {
            throw InvalidParameter(context(e.what()));
        }
    }
    return out;
}

} // namespace hybridsq

#endif
