#ifndef HYBRIDSQ_REGIME_HPP
#define HYBRIDSQ_REGIME_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hybridsq/model.hpp"
#include "hybridsq/steady_state.hpp"

namespace hybridsq {

struct RegimeCondition
{
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
    double margin = 0.0;  // lhs / rhs
    /// Only required for the bad-cavity (high-kappa) elimination.
    bool high_kappa_only = false;
};

struct RegimeReport
{
    double threshold = 5.0;
    std::vector<RegimeCondition> conditions;

    /// Unsatisfied conditions, not counting the high-kappa-only one.
    int violations() const
    {
        return static_cast<int>(std::count_if(conditions.begin(), conditions.end(), [](const auto &c) {
            return !c.satisfied && !c.high_kappa_only;
        }));
    }

    bool all_satisfied() const
    {
        return std::all_of(conditions.begin(), conditions.end(),
                           [](const auto &c) { return c.satisfied; });
    }

    const RegimeCondition *find(const std::string &name) const
    {
        for (const auto &c : conditions)
            if (c.name == name)
                return &c;
        return nullptr;
    }
};

/**
 * Evaluates each "much greater than" condition of the linearized and
 * adiabatically eliminated model as lhs >= threshold * rhs. Grouped
 * conditions compare the smallest left-hand member with the largest
 * right-hand member. Never throws on a violation.
 */
inline RegimeReport validate_regime(const PhysicalParams &p, const SteadyAmplitudes &amps,
                                    const LinearizedParams &lin, double threshold = 5.0)
{
    RegimeReport r;
    r.threshold = threshold;
    auto add = [&](std::string name, double lhs, double rhs, bool high_kappa_only = false) {
        RegimeCondition c;
        c.name = std::move(name);
        c.lhs = lhs;
        c.rhs = rhs;
        c.margin = rhs != 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity();
        c.satisfied = lhs >= threshold * rhs;
        c.high_kappa_only = high_kappa_only;
        r.conditions.push_back(std::move(c));
    };
    add("|Delta_a| >> |Delta_c|", std::abs(lin.Delta_a), std::abs(p.delta_c));
    add("omega_m_tilde >> 2 Lambda", lin.omega_m_tilde, 2.0 * lin.Lambda);
    add("kappa >> gamma_c", p.kappa, p.gamma_c);
    add("kappa >> omega_m", p.kappa, 1.0, true);
    add("omega_m >> gamma_m", 1.0, p.gamma_m);
    add("(kappa, gamma_c, eta) >> gamma_m", std::min({p.kappa, p.gamma_c, p.eta}), p.gamma_m);
    add("|alpha| >> 1", std::abs(amps.alpha), 1.0);
    add("beta >> 1", amps.beta, 1.0);
    add("(Lambda, G, G0) >> (g, eta)", std::min({lin.Lambda, lin.G, p.g0_collective}),
        std::max(p.g_single, p.eta));
    return r;
}

} // namespace hybridsq

#endif
