#ifndef HYBRIDSQ_REPORT_HPP
#define HYBRIDSQ_REPORT_HPP

#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridsq/effective_model.hpp"
#include "hybridsq/regime.hpp"
#include "hybridsq/sweep.hpp"
#include "hybridsq/table.hpp"

namespace hybridsq {

struct ReportOptions
{
    std::vector<Solver> solvers{Solver::gaussian_2mode, Solver::fock, Solver::analytic};
    bool resolve_amplitudes = true;
    double regime_threshold = 5.0;
    Cutoffs fock_start{12, 12};
    int fock_cap = 64;
};

struct Report
{
    PhysicalParams params;
    double drive_amplitude = 0.0;
    Pipeline pipeline;
    std::vector<double> beta_roots;
    TransformedParams transformed;
    RegimeReport regime;
    /// Everything below is evaluated at Delta_eff = -omega_m'.
    double optimal_delta_eff = 0.0;
    DeltaCSolution optimum;
    TransformedParams optimum_transformed;
    PointSolution at_optimum;

    bool any_unstable() const
    {
        for (const auto &c : at_optimum.cells)
            if (c.unstable)
                return true;
        return false;
    }
};

/**
 * Full single-point evaluation. `stage` names the step in progress so a
 * caller can label a propagated error.
 */
inline Report make_report(const PhysicalParams &p, const ReportOptions &opt = {},
                          std::string *stage = nullptr)
{
    auto at = [&](const char *s) {
        if (stage)
            *stage = s;
    };
    Report r;
    at("parameters");
    validate(p);
    r.params = p;
    r.drive_amplitude = drive_amplitude(p);
    at("amplitudes");
    r.pipeline = run_pipeline(p);
    r.beta_roots = real_beta_roots(p);
    at("regime");
    r.regime = validate_regime(p, r.pipeline.amplitudes, r.pipeline.linearized, opt.regime_threshold);
    at("transform");
    r.transformed = transform_frame(r.pipeline.effective, p);
    r.optimal_delta_eff = optimal_detuning(r.transformed);
    at("optimal detuning");
    DeltaCOptions dopt;
    dopt.resolve_amplitudes = opt.resolve_amplitudes;
    r.optimum = solve_for_delta_c(p, r.optimal_delta_eff, dopt);
    r.optimum_transformed = transform_frame(r.optimum.pipeline.effective, r.optimum.pipeline.params);
    at("solvers");
    PointOptions popt;
    popt.fock_cutoffs = opt.fock_start;
    popt.adaptive_cutoffs = true;
    popt.keep_models = true;
    r.at_optimum = solve_point(r.optimum.pipeline, opt.solvers, popt);
    at("done");
    return r;
}

inline void write_report_text(std::ostream &os, const Report &r)
{
    const auto &p = r.params;
    const auto &a = r.pipeline.amplitudes;
    const auto &lin = r.pipeline.linearized;
    const auto &e = r.pipeline.effective;
    const auto &t = r.transformed;
    auto num = [](double v) { return format_number(v); };
    auto line = [&os](const std::string &k, const std::string &v) {
        os << "  " << std::left << std::setw(22) << k << v << '\n';
    };

    os << "parameters (units of omega_m unless noted)\n";
    line("omega_m [rad/s]", num(p.omega_m));
    line("omega_a", num(p.omega_a));
    line("delta_a", num(p.delta_a));
    line("delta_c", num(p.delta_c));
    line("g0_collective", num(p.g0_collective));
    line("g_single", num(p.g_single));
    line("eta", num(p.eta));
    line("kappa", num(p.kappa));
    line("gamma_c", num(p.gamma_c));
    line("gamma_m", num(p.gamma_m));
    line("drive_power [W]", num(p.drive_power));
    line("n_th", num(p.n_th));
    line("Omega_d", num(r.drive_amplitude));

    os << "amplitudes\n";
    line("alpha", num(a.alpha.real()) + " + " + num(a.alpha.imag()) + "i");
    line("|alpha|", num(std::abs(a.alpha)));
    line("beta", num(a.beta));
    line("xi", num(a.xi.real()) + " + " + num(a.xi.imag()) + "i");
    line("residual", num(a.residual_norm));
    std::string roots;
    for (double b : r.beta_roots)
        roots += (roots.empty() ? "" : ", ") + num(b);
    line("real beta roots", roots.empty() ? "none" : roots);

    os << "linearized\n";
    line("Delta_a", num(lin.Delta_a));
    line("omega_m_tilde", num(lin.omega_m_tilde));
    line("Lambda", num(lin.Lambda));
    line("G", num(lin.G));

    os << "effective\n";
    line("omega_m_tilde_prime", num(e.omega_m_tilde_prime));
    line("G_eff", num(e.G_eff));
    line("Delta_eff", num(e.Delta_eff));
    line("gamma_eff", num(e.gamma_eff));
    line("Lambda_prime", num(e.Lambda_prime));

    os << "transformed\n";
    line("zeta", num(t.zeta));
    line("omega_m_prime", num(t.omega_m_prime));
    line("G_prime", num(t.G_prime));
    line("n_th_prime", num(t.n_th_prime));
    for (std::size_t k = 0; k < t.cooling_rates.size(); ++k)
        line("cooling_rate[" + std::to_string(k) + "]", num(t.cooling_rates[k]));

    os << "regime (threshold " << num(r.regime.threshold) << ")\n";
    for (const auto &c : r.regime.conditions)
        os << "  " << (c.satisfied ? "ok    " : "FLAG  ") << std::left << std::setw(36) << c.name
           << " ratio " << num(c.margin) << (c.high_kappa_only ? "  (high-kappa regime only)" : "")
           << '\n';
    os << "  violations " << r.regime.violations() << '\n';

    os << "squeezing\n";
    line("e^-2zeta", num(t.squeezing_floor()));
    line("optimal Delta_eff", num(r.optimal_delta_eff));
    line("Delta_c at optimum", num(r.optimum.delta_c));
    line("e^-2zeta at optimum", num(r.optimum_transformed.squeezing_floor()));

    os << "variance <dX^2> at the optimum\n";
    for (const auto &c : r.at_optimum.cells) {
        std::string v = c.variance ? num(*c.variance) : "skipped (" + c.skipped + ")";
        if (c.solver == Solver::fock && c.variance && r.at_optimum.fock_cutoffs)
            v += "  [cutoffs " + std::to_string(r.at_optimum.fock_cutoffs->mechanical) + "x" +
                 std::to_string(r.at_optimum.fock_cutoffs->atomic) + ", tail " +
                 num(r.at_optimum.tail_population.value_or(0.0)) + "]";
        line(to_string(c.solver), v);
        if (c.solver == Solver::analytic && r.at_optimum.analytic_with_neff)
            line("analytic (n'_eff)", num(*r.at_optimum.analytic_with_neff) + "  [n'_eff = " +
                                          num(r.at_optimum.n_eff_prime.value_or(0.0)) + "]");
    }
    for (const auto &n : r.at_optimum.notes)
        os << "  note: " << n << '\n';
}

inline nlohmann::ordered_json report_json(const Report &r)
{
    using nlohmann::ordered_json;
    auto num = [](double v) { return cell_json(Cell(v)); };
    const auto &p = r.params;
    const auto &a = r.pipeline.amplitudes;
    const auto &lin = r.pipeline.linearized;
    const auto &e = r.pipeline.effective;
    const auto &t = r.transformed;
    ordered_json j;
    j["parameters"] = {{"omega_m_si", num(p.omega_m)},      {"omega_a", num(p.omega_a)},
                       {"delta_a", num(p.delta_a)},         {"delta_c", num(p.delta_c)},
                       {"g0_collective", num(p.g0_collective)}, {"g_single", num(p.g_single)},
                       {"eta", num(p.eta)},                 {"kappa", num(p.kappa)},
                       {"gamma_c", num(p.gamma_c)},         {"gamma_m", num(p.gamma_m)},
                       {"drive_power_si", num(p.drive_power)}, {"n_th", num(p.n_th)},
                       {"Omega_d", num(r.drive_amplitude)}};
    j["amplitudes"] = {{"alpha_re", num(a.alpha.real())}, {"alpha_im", num(a.alpha.imag())},
                       {"alpha_abs", num(std::abs(a.alpha))}, {"beta", num(a.beta)},
                       {"xi_re", num(a.xi.real())},       {"xi_im", num(a.xi.imag())},
                       {"residual", num(a.residual_norm)}};
    ordered_json roots = ordered_json::array();
    for (double b : r.beta_roots)
        roots.push_back(num(b));
    j["amplitudes"]["real_beta_roots"] = roots;
    j["linearized"] = {{"Delta_a", num(lin.Delta_a)}, {"omega_m_tilde", num(lin.omega_m_tilde)},
                       {"Lambda", num(lin.Lambda)},   {"G", num(lin.G)}};
    j["effective"] = {{"omega_m_tilde_prime", num(e.omega_m_tilde_prime)}, {"G_eff", num(e.G_eff)},
                      {"Delta_eff", num(e.Delta_eff)}, {"gamma_eff", num(e.gamma_eff)},
                      {"Lambda_prime", num(e.Lambda_prime)}};
    ordered_json rates = ordered_json::array();
    for (double c : t.cooling_rates)
        rates.push_back(num(c));
    j["transformed"] = {{"zeta", num(t.zeta)},         {"omega_m_prime", num(t.omega_m_prime)},
                        {"G_prime", num(t.G_prime)},   {"n_th_prime", num(t.n_th_prime)},
                        {"cooling_rates", rates}};
    ordered_json conds = ordered_json::array();
    for (const auto &c : r.regime.conditions)
        conds.push_back({{"name", c.name},
                         {"lhs", num(c.lhs)},
                         {"rhs", num(c.rhs)},
                         {"satisfied", c.satisfied},
                         {"margin", num(c.margin)},
                         {"high_kappa_only", c.high_kappa_only}});
    j["regime"] = {{"threshold", num(r.regime.threshold)},
                   {"violations", r.regime.violations()},
                   {"conditions", conds}};
    j["squeezing"] = {{"e_minus_2zeta", num(t.squeezing_floor())},
                      {"optimal_Delta_eff", num(r.optimal_delta_eff)},
                      {"Delta_c_at_optimum", num(r.optimum.delta_c)},
                      {"e_minus_2zeta_at_optimum", num(r.optimum_transformed.squeezing_floor())}};
    ordered_json solvers = ordered_json::object();
    for (const auto &c : r.at_optimum.cells) {
        if (c.variance)
            solvers[to_string(c.solver)] = num(*c.variance);
        else
            solvers[to_string(c.solver)] = {{"skipped", c.skipped}};
    }
    if (r.at_optimum.analytic_with_neff)
        solvers["analytic_neff"] = num(*r.at_optimum.analytic_with_neff);
    if (r.at_optimum.tail_population)
        solvers["fock_tail_population"] = num(*r.at_optimum.tail_population);
    j["variance_at_optimum"] = solvers;
    return j;
}

} // namespace hybridsq

#endif
