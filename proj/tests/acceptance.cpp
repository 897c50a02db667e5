// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hybridsq/report.hpp"
#include "hybridsq/sweep.hpp"

using namespace hybridsq;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 6)
{
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

/// Physicality tallies shared by criteria 1-4 and checked in 6.
struct PhysicalityLedger
{
    int covariances = 0;
    int fock_states = 0;
    std::vector<std::string> failures;

    void add_point(const PointSolution &s, const std::string &where)
    {
        for (const auto &c : s.cells) {
            if (!c.variance)
                continue;
            if (c.solver == Solver::gaussian_2mode || c.solver == Solver::gaussian_3mode)
                ++covariances;
            if (c.solver == Solver::fock)
                ++fock_states;
        }
        if (!s.physical)
            failures.push_back(where);
    }

    void add_report(const Report &r, const std::string &where)
    {
        add_point(r.at_optimum, where);
        const auto &s = r.at_optimum;
        for (const auto *g : {s.gaussian_2mode ? &*s.gaussian_2mode : nullptr,
                              s.gaussian_3mode ? &*s.gaussian_3mode : nullptr})
            if (g && g->covariance && !check_physicality(*g).ok())
                failures.push_back(where + " (covariance)");
        if (s.fock && !check_invariants(*s.fock).ok())
            failures.push_back(where + " (fock)");
    }
};

PhysicalityLedger physicality;

Outcome squeezing_floor(const char *preset, double expected, Report *keep)
{
    const auto t0 = Clock::now();
    const Report r = make_report(presets::by_name(preset));
    const double elapsed = seconds_since(t0);
    physicality.add_report(r, std::string("report ") + preset);
    const double v = r.transformed.squeezing_floor();
    if (keep)
        *keep = r;
    Outcome o;
    o.pass = std::abs(v - expected) <= 0.02 && elapsed < 1.0;
    o.detail = "e^-2zeta = " + fmt(v) + " (want " + fmt(expected) + " +- 0.02), report runtime " +
               fmt(elapsed, 3) + " s (want < 1 s); Lambda' = " +
               fmt(r.pipeline.effective.Lambda_prime) + ", beta = " + fmt(r.pipeline.amplitudes.beta);
    return o;
}

bool strictly_increasing(const std::vector<double> &v)
{
    for (std::size_t k = 1; k < v.size(); ++k)
        if (!(v[k] > v[k - 1]))
            return false;
    return true;
}

Outcome amplitudes()
{
    Outcome o;
    o.pass = true;
    std::string text;
    struct Want
    {
        const char *preset;
        double alpha;
        double alpha_tol;
        double beta;
        double beta_tol;
    };
    for (const Want w : {Want{"fig2_high_kappa", 160.0, 15.0, 200.0, 20.0},
                         Want{"fig4_low_kappa", 500.0, 50.0, 200.0, 20.0}}) {
        const PhysicalParams p = presets::by_name(w.preset);
        const SteadyAmplitudes a = solve_steady_amplitudes(p);
        const bool ok_alpha = std::abs(std::abs(a.alpha) - w.alpha) <= w.alpha_tol;
        const bool ok_beta = std::abs(a.beta - w.beta) <= w.beta_tol;

        SweepSpec s;
        s.variable = SweepVariable::power;
        s.grid = Grid{p.drive_power / 100.0, p.drive_power, 100}.values();
        const auto rows = run_power_sweep(s, p);
        std::vector<double> alphas, betas;
        bool all_solved = true;
        for (const auto &r : rows) {
            if (!r.amplitudes) {
                all_solved = false;
                continue;
            }
            alphas.push_back(std::abs(r.amplitudes->alpha));
            betas.push_back(r.amplitudes->beta);
        }
        const bool monotone = all_solved && strictly_increasing(alphas) && strictly_increasing(betas);
        o.pass = o.pass && ok_alpha && ok_beta && monotone;
        text += std::string(text.empty() ? "" : "; ") + w.preset + ": |alpha| = " +
                fmt(std::abs(a.alpha)) + (ok_alpha ? "" : " (want " + fmt(w.alpha) + " +- " + fmt(w.alpha_tol) + ")") +
                ", beta = " + fmt(a.beta) + (ok_beta ? "" : " (want " + fmt(w.beta) + " +- " + fmt(w.beta_tol) + ")") +
                ", power sweep " + (monotone ? "monotone" : "NOT monotone");
    }
    o.detail = text;
    return o;
}

struct MinimumCheck
{
    bool pass = false;
    std::string text;
};

MinimumCheck detuning_minimum(const char *preset, double lo)
{
    const PhysicalParams p = presets::by_name(preset);
    SweepSpec s;
    s.variable = SweepVariable::delta_eff;
    s.grid = Grid{lo, lo + 99 * 0.02, 100}.values();
    s.solvers = {Solver::fock, Solver::gaussian_2mode};
    s.n_th = {1.0};
    s.fock_cutoffs = {12, 12};
    const auto t0 = Clock::now();
    const auto rows = run_detuning_sweep(s, p);
    const double elapsed = seconds_since(t0);
    const SweepRow *best = nullptr;
    int fock_points = 0;
    for (const auto &r : rows) {
        physicality.add_point(r.solution, std::string("detuning sweep ") + preset + " at " + fmt(r.value));
        if (!r.solution.cells.empty() && r.solution.cells.front().variance)
            ++fock_points;
        if (r.minimum)
            best = &r;
    }
    MinimumCheck m;
    if (!best || !best->transformed) {
        m.text = std::string(preset) + ": no minimum found";
        return m;
    }
    const double step = s.grid[1] - s.grid[0];
    const double target = optimal_detuning(*best->transformed);
    const double distance = std::abs(best->value - target);
    m.pass = distance <= step + 1e-9 && elapsed < 60.0;
    m.text = std::string(preset) + ": Fock minimum at Delta_eff = " + fmt(best->value) + " vs -omega_m' = " +
             fmt(target) + " (|d| = " + fmt(distance, 3) + ", step " + fmt(step, 3) + "), min <dX^2> = " +
             fmt(*best->solution.cells.front().variance) + ", " + std::to_string(fock_points) +
             " Fock points in " + fmt(elapsed, 3) + " s";
    return m;
}

Outcome detuning_minima()
{
    const MinimumCheck a = detuning_minimum("fig2_high_kappa", -2.5);
    const MinimumCheck b = detuning_minimum("fig4_low_kappa", -3.7);
    return {a.pass && b.pass, a.text + "; " + b.text};
}

/// Random physical parameter point inside the validity regime with a stable drift.
std::optional<Pipeline> regime_draw(std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) {
        return std::exp(std::log(lo) + u(rng) * (std::log(hi) - std::log(lo)));
    };
    PhysicalParams p = presets::fig2_high_kappa();
    p.kappa = log_uniform(2.0, 20.0);
    p.delta_a = 6.0 + 6.0 * u(rng);
    p.g0_collective = log_uniform(0.2, 1.0);
    p.g_single = log_uniform(2e-3, 1e-2);
    p.eta = log_uniform(1e-5, 6e-5);
    p.gamma_c = log_uniform(0.01, 0.1);
    p.gamma_m = log_uniform(1e-7, 1e-5);
    p.drive_power = log_uniform(0.5e-6, 4e-6);
    p.n_th = 2.0 * u(rng);
    const double offset = -0.5 + u(rng);
    try {
        const Pipeline base = run_pipeline(p);
        const double target = optimal_detuning(transform_frame(base.effective, p)) + offset;
        const DeltaCSolution s = solve_for_delta_c(p, target);
        const auto &pl = s.pipeline;
        if (validate_regime(pl.params, pl.amplitudes, pl.linearized).violations() > 0)
            return std::nullopt;
        if (!is_stable(build_effective_two_mode(pl.effective, pl.params)))
            return std::nullopt;
        return pl;
    } catch (const Error &) {
        return std::nullopt;
    }
}

Outcome oracle_equivalence()
{
    std::mt19937_64 rng(20240611);
    int accepted = 0, drawn = 0, agree = 0;
    double worst = 0.0, worst_tail = 0.0;
    PointOptions opt;
    opt.adaptive_cutoffs = true;
    opt.fock_cutoffs = {12, 12};
    std::string failures;
    while (accepted < 25 && drawn < 5000) {
        ++drawn;
        const auto pl = regime_draw(rng);
        if (!pl)
            continue;
        ++accepted;
        const PointSolution s = solve_point(*pl, {Solver::fock, Solver::gaussian_2mode}, opt);
        const auto &f = s.cells[0].variance;
        const auto &g = s.cells[1].variance;
        if (!f || !g) {
            failures += " draw " + std::to_string(accepted) + " unsolved;";
            continue;
        }
        const double rel = std::abs(*f - *g) / *g;
        const double tail = s.tail_population.value_or(1.0);
        worst = std::max(worst, rel);
        worst_tail = std::max(worst_tail, tail);
        if (rel <= 0.01 && tail < 1e-6)
            ++agree;
        else
            failures += " draw " + std::to_string(accepted) + " rel " + fmt(rel, 3) + " tail " + fmt(tail, 3) + ";";
    }
    Outcome o;
    o.pass = accepted == 25 && agree == 25;
    o.detail = std::to_string(agree) + "/" + std::to_string(accepted) + " draws agree within 1% (" +
               std::to_string(drawn) + " drawn), worst relative gap " + fmt(worst, 3) +
               ", worst tail " + fmt(worst_tail, 3) + failures;
    return o;
}

Outcome physicality_suite()
{
    Outcome o;
    o.pass = physicality.failures.empty() && physicality.covariances > 0 && physicality.fock_states > 0;
    o.detail = std::to_string(physicality.covariances) + " covariances and " +
               std::to_string(physicality.fock_states) + " Fock states checked, " +
               std::to_string(physicality.failures.size()) + " failures";
    for (std::size_t k = 0; k < std::min<std::size_t>(3, physicality.failures.size()); ++k)
        o.detail += "; " + physicality.failures[k];
    return o;
}

Outcome thermal_ordering()
{
    SweepSpec s;
    s.variable = SweepVariable::delta_eff;
    s.grid = Grid{-2.5, -0.52, 100}.values();
    s.solvers = {Solver::gaussian_2mode};
    s.n_th = {1.0, 10.0, 100.0};
    const auto rows = run_detuning_sweep(s, presets::fig2_high_kappa());
    const std::size_t n = s.grid.size();
    int compared = 0, violations = 0, unsolved = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto &a = rows[k].solution;
        const auto &b = rows[n + k].solution;
        const auto &c = rows[2 * n + k].solution;
        if (a.cells.empty() || b.cells.empty() || c.cells.empty() || !a.cells[0].variance ||
            !b.cells[0].variance || !c.cells[0].variance) {
            ++unsolved;
            continue;
        }
        ++compared;
        const double v1 = *a.cells[0].variance, v10 = *b.cells[0].variance, v100 = *c.cells[0].variance;
        if (!(v100 >= v10 && v10 >= v1))
            ++violations;
    }
    Outcome o;
    o.pass = violations == 0 && unsolved == 0 && compared == static_cast<int>(n);
    o.detail = std::to_string(compared) + " grid points compared, " + std::to_string(violations) +
               " ordering violations, " + std::to_string(unsolved) + " unsolved";
    return o;
}

Outcome lambda_shift_peak()
{
    Outcome o;
    o.pass = true;
    for (const char *preset : {"fig2_high_kappa", "fig4_low_kappa"}) {
        const PhysicalParams p = presets::by_name(preset);
        LinearizedParams lin;
        lin.G = 1.6;
        lin.Lambda = 0.12;
        lin.omega_m_tilde = 1.24;
        const double resolution = 1e-3;
        const long steps = static_cast<long>(std::llround(2.0 * p.kappa / resolution));
        double best_x = 0.0, best = -INFINITY;
        for (long k = 0; k <= steps; ++k) {
            lin.Delta_a = k * resolution;
            const double shift = eliminate_cavity(p, lin).Lambda_prime - lin.Lambda;
            if (shift > best) {
                best = shift;
                best_x = lin.Delta_a;
            }
        }
        const bool ok = std::abs(best_x - p.kappa / 2.0) <= resolution;
        o.pass = o.pass && ok;
        o.detail += std::string(o.detail.empty() ? "" : "; ") + preset + ": argmax Delta_a = " +
                    fmt(best_x) + " vs kappa/2 = " + fmt(p.kappa / 2.0);
    }
    return o;
}

} // namespace

int main()
{
    struct Criterion
    {
        int id;
        const char *name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "high-kappa squeezing floor", [] { return squeezing_floor("fig2_high_kappa", 0.64, nullptr); }},
        {2, "low-kappa squeezing floor", [] { return squeezing_floor("fig4_low_kappa", 0.36, nullptr); }},
        {3, "classical amplitudes", amplitudes},
        {4, "detuning-sweep minimum", detuning_minima},
        {5, "Fock / Lyapunov equivalence", oracle_equivalence},
        {6, "physicality", physicality_suite},
        {7, "thermal ordering", thermal_ordering},
        {8, "Lambda' shift peak at kappa/2", lambda_shift_peak},
    };
    int failed = 0;
    for (const auto &c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o.pass = false;
            o.detail = std::string("error: ") + e.what();
        }
        failed += !o.pass;
        std::cout << "criterion " << c.id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << c.name << ": "
                  << o.detail << std::endl;
    }
    std::cout << (criteria.size() - failed) << '/' << criteria.size() << " criteria pass" << std::endl;
    return failed ? 1 : 0;
}
