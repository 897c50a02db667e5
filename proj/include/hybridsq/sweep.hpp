#ifndef HYBRIDSQ_SWEEP_HPP
#define HYBRIDSQ_SWEEP_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hybridsq/effective_model.hpp"
#include "hybridsq/errors.hpp"
#include "hybridsq/fock.hpp"
#include "hybridsq/gaussian.hpp"
#include "hybridsq/model.hpp"
#include "hybridsq/regime.hpp"
#include "hybridsq/steady_state.hpp"
#include "hybridsq/table.hpp"

namespace hybridsq {

enum class Solver
{
    gaussian_3mode,
    gaussian_2mode,
    fock,
    analytic,
};

inline const char *to_string(Solver s)
{
    switch (s) {
    case Solver::gaussian_3mode: return "gaussian-3mode";
    case Solver::gaussian_2mode: return "gaussian-2mode";
    case Solver::fock: return "fock";
    case Solver::analytic: return "analytic";
    }
    return "?";
}

/// Column-friendly spelling: gaussian_3mode etc.
inline std::string column_name(Solver s)
{
    std::string name = to_string(s);
    std::replace(name.begin(), name.end(), '-', '_');
    return name;
}

/// Parses one solver name; "all" expands to every solver.
inline std::vector<Solver> parse_solver(const std::string &name)
{
    if (name == "all")
        return {Solver::gaussian_3mode, Solver::gaussian_2mode, Solver::fock, Solver::analytic};
    for (Solver s : {Solver::gaussian_3mode, Solver::gaussian_2mode, Solver::fock, Solver::analytic})
        if (name == to_string(s))
            return {s};
    throw InvalidParameter("unknown solver '" + name +
                           "' (gaussian-3mode, gaussian-2mode, fock, analytic, all)");
}

/// Parses a list of names, dropping repeats and keeping first-seen order.
inline std::vector<Solver> parse_solvers(const std::vector<std::string> &names)
{
    std::vector<Solver> out;
    for (const auto &n : names)
        for (Solver s : parse_solver(n))
            if (std::find(out.begin(), out.end(), s) == out.end())
                out.push_back(s);
    return out;
}

struct Grid
{
    double min = 0.0;
    double max = 0.0;
    int count = 1;

    std::vector<double> values() const
    {
        if (count < 1)
            throw InvalidParameter("grid count must be >= 1");
        if (!std::isfinite(min) || !std::isfinite(max))
            throw InvalidParameter("grid bounds must be finite");
        if (count == 1)
            return {min};
        std::vector<double> v(static_cast<std::size_t>(count));
        const double step = (max - min) / (count - 1);
        for (int k = 0; k < count; ++k)
            v[static_cast<std::size_t>(k)] = k == count - 1 ? max : min + step * k;
        return v;
    }
};

/// Parses "min:max:count".
inline Grid parse_grid(const std::string &text)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':'))
        parts.push_back(item);
    if (parts.size() != 3)
        throw InvalidParameter("grid must be min:max:count, got '" + text + "'");
    Grid g;
    try {
        std::size_t used = 0;
        g.min = std::stod(parts[0], &used);
        if (used != parts[0].size())
            throw std::invalid_argument(parts[0]);
        g.max = std::stod(parts[1], &used);
        if (used != parts[1].size())
            throw std::invalid_argument(parts[1]);
        g.count = std::stoi(parts[2], &used);
        if (used != parts[2].size())
            throw std::invalid_argument(parts[2]);
    } catch (const std::logic_error &) {
        throw InvalidParameter("cannot parse grid '" + text + "'");
    }
    if (g.count < 1)
        throw InvalidParameter("grid count must be >= 1");
    return g;
}

enum class SweepVariable
{
    power,
    delta_eff,
};

/// Fock results are trusted only up to this thermal occupation.
inline constexpr double fock_n_th_limit = 10.0;

struct SweepSpec
{
    SweepVariable variable = SweepVariable::delta_eff;
    std::vector<double> grid;  // W for power, omega_m for delta_eff
    std::vector<Solver> solvers;
    std::vector<double> n_th;  // empty: the parameter set's own value
    bool resolve_amplitudes = true;
    std::string output_path;
    Cutoffs fock_cutoffs{12, 12};
    bool adaptive_cutoffs = false;
    int threads = 0;  // 0: hardware concurrency
    double regime_threshold = 5.0;
};

inline void validate(const SweepSpec &s)
{
    if (s.grid.empty())
        throw InvalidParameter("sweep grid is empty");
    if (s.variable == SweepVariable::delta_eff && s.solvers.empty())
        throw InvalidParameter("detuning sweep needs at least one solver");
    for (double v : s.grid)
        if (!std::isfinite(v))
            throw InvalidParameter("sweep grid values must be finite");
    if (s.variable == SweepVariable::power) {
        if (!std::is_sorted(s.grid.begin(), s.grid.end()))
            throw InvalidParameter("power grid must be sorted ascending");
        if (s.grid.front() < 0.0)
            throw InvalidParameter("power grid values must be >= 0");
    }
    for (double n : s.n_th)
        if (!(n >= 0.0) || !std::isfinite(n))
            throw InvalidParameter("n_th values must be finite and >= 0");
}

struct SolverCell
{
    Solver solver = Solver::gaussian_2mode;
    std::optional<double> variance;
    std::string skipped;  // reason when no value
    bool unstable = false;  // skipped because the drift has no steady state
};

/// Variance of one solver at one parameter point plus its side products.
struct PointSolution
{
    std::vector<SolverCell> cells;
    /// Analytic bound with n'_eff read off the transformed Gaussian model.
    std::optional<double> analytic_with_neff;
    std::optional<double> n_eff_prime;
    bool stable = false;  // effective two-mode drift
    std::optional<double> tail_population;
    std::optional<Cutoffs> fock_cutoffs;
    std::vector<std::string> notes;
    std::optional<GaussianModel> gaussian_2mode;
    std::optional<GaussianModel> gaussian_3mode;
    std::optional<FockModel> fock;
    bool physical = true;  // every covariance / Fock state passed its checks
};

struct PointOptions
{
    Cutoffs fock_cutoffs{12, 12};
    bool adaptive_cutoffs = false;
    FockSolveOptions fock{};
    /// Keep solved models (covariances, density matrix) in the result.
    bool keep_models = false;
};

inline std::string describe_eigenvalue(double re)
{
    std::ostringstream os;
    os << std::setprecision(6) << "unstable drift (max Re lambda = " << re << ")";
    return os.str();
}

/**
 * Runs the requested solvers at one fully resolved parameter point. Solver
 * failures become skipped cells; nothing here throws for a physics reason.
 */
inline PointSolution solve_point(const Pipeline &pl, const std::vector<Solver> &solvers,
                                 const PointOptions &opt = {})
{
    const PhysicalParams &p = pl.params;
    PointSolution out;
    std::optional<TransformedParams> t;
    std::string transform_error;
    try {
        t = transform_frame(pl.effective, p);
    } catch (const Error &e) {
        transform_error = e.what();
    }

    const GaussianModel two = build_effective_two_mode(pl.effective, p);
    const double two_margin = max_real_eigenvalue(two);
    out.stable = two_margin < -stability_margin;

    if (t) {
        try {
            const GaussianModel tm = solve_lyapunov(build_transformed_two_mode(pl.effective, *t));
            out.n_eff_prime = mode_occupation(tm, mode_label::mechanical);
            out.analytic_with_neff = analytic_variance(*t, std::max(0.0, *out.n_eff_prime));
        } catch (const Error &e) {
            out.notes.push_back(std::string("transformed model: ") + e.what());
        }
    }

    for (Solver s : solvers) {
        SolverCell cell;
        cell.solver = s;
        try {
            switch (s) {
            case Solver::analytic:
                if (!t)
                    cell.skipped = transform_error;
                else
                    cell.variance = t->squeezing_floor();
                break;
            case Solver::gaussian_2mode:
                if (!out.stable) {
                    cell.skipped = describe_eigenvalue(two_margin);
                    cell.unstable = true;
                } else {
                    GaussianModel solved = solve_lyapunov(two);
                    cell.variance = mechanical_variance(solved);
                    if (!check_physicality(solved).ok())
                        out.physical = false;
                    if (opt.keep_models)
                        out.gaussian_2mode = std::move(solved);
                }
                break;
            case Solver::gaussian_3mode: {
                const GaussianModel three = build_three_mode(p, pl.linearized);
                const double margin = max_real_eigenvalue(three);
                if (margin >= -stability_margin) {
                    cell.skipped = describe_eigenvalue(margin);
                    cell.unstable = true;
                    if (opt.keep_models)
                        out.gaussian_3mode = three;
                } else {
                    GaussianModel solved = solve_lyapunov(three);
                    cell.variance = mechanical_variance(solved);
                    if (!check_physicality(solved).ok())
                        out.physical = false;
                    if (opt.keep_models)
                        out.gaussian_3mode = std::move(solved);
                }
                break;
            }
            case Solver::fock: {
                if (p.n_th > fock_n_th_limit) {
                    cell.skipped = "n_th above the Fock oracle limit of 10";
                    break;
                }
                if (!out.stable) {
                    cell.skipped = describe_eigenvalue(two_margin);
                    cell.unstable = true;
                    break;
                }
                auto build = [&](Cutoffs c) { return build_liouvillian(pl.effective, p, c); };
                FockModel m;
                if (opt.adaptive_cutoffs) {
                    AdaptiveCutoffOptions ao;
                    ao.start = opt.fock_cutoffs;
                    ao.solve = opt.fock;
                    m = solve_adaptive(build, ao);
                } else {
                    m = solve_steady(build(opt.fock_cutoffs), opt.fock);
                }
                cell.variance = observables(m).x_variance;
                out.tail_population = m.tail_population;
                out.fock_cutoffs = m.cutoffs;
                if (!check_invariants(m).ok())
                    out.physical = false;
                for (const auto &w : m.warnings)
                    out.notes.push_back("fock: " + w);
                if (opt.keep_models)
                    out.fock = std::move(m);
                break;
            }
            }
        } catch (const InstabilityError &e) {
            cell.variance.reset();
            cell.skipped = e.what();
            cell.unstable = true;
        } catch (const Error &e) {
            cell.variance.reset();
            cell.skipped = e.what();
        }
        out.cells.push_back(std::move(cell));
    }
    return out;
}

struct SweepRow
{
    double value = 0.0;  // sweep variable
    double n_th = 0.0;
    std::optional<double> delta_c;
    std::optional<SteadyAmplitudes> amplitudes;
    std::optional<LinearizedParams> linearized;
    std::optional<EffectiveParams> effective;
    std::optional<TransformedParams> transformed;
    PointSolution solution;
    int regime_violations = 0;
    bool minimum = false;
    std::string status = "ok";
};

/// Runs fn(0..n-1) on a pool of worker threads.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &fn)
{
    unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1) {
        for (std::size_t k = 0; k < n; ++k)
            fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < n; k = next++)
                fn(k);
        });
    for (auto &th : pool)
        th.join();
}

inline void fill_tiers(SweepRow &row, const Pipeline &pl)
{
    row.delta_c = pl.params.delta_c;
    row.amplitudes = pl.amplitudes;
    row.linearized = pl.linearized;
    row.effective = pl.effective;
    try {
        row.transformed = transform_frame(pl.effective, pl.params);
    } catch (const Error &) {
    }
}

inline std::vector<double> n_th_values(const SweepSpec &spec, const PhysicalParams &p)
{
    return spec.n_th.empty() ? std::vector<double>{p.n_th} : spec.n_th;
}

inline PointOptions point_options(const SweepSpec &spec)
{
    PointOptions o;
    o.fock_cutoffs = spec.fock_cutoffs;
    o.adaptive_cutoffs = spec.adaptive_cutoffs;
    return o;
}

/// Flags the smallest value of the first requested solver within each n_th.
inline void flag_minima(std::vector<SweepRow> &rows)
{
    std::vector<double> seen;
    for (const auto &r : rows)
        if (std::find(seen.begin(), seen.end(), r.n_th) == seen.end())
            seen.push_back(r.n_th);
    for (double n : seen) {
        SweepRow *best = nullptr;
        for (auto &r : rows) {
            if (r.n_th != n || r.solution.cells.empty() || !r.solution.cells.front().variance)
                continue;
            if (!best || *r.solution.cells.front().variance < *best->solution.cells.front().variance)
                best = &r;
        }
        if (best)
            best->minimum = true;
    }
}

/**
 * Power sweep: amplitudes warm-start from the previous power, so points are
 * evaluated in ascending order. A failed point is recorded in its row and
 * the next point restarts from the last good solution. Solver columns are
 * filled at the parameter set's own Delta_c.
 */
inline std::vector<SweepRow> run_power_sweep(const SweepSpec &spec, const PhysicalParams &p)
{
    validate(spec);
    validate(p);
    struct Solved
    {
        double power = 0.0;
        std::optional<Pipeline> pipeline;
        std::string error;
    };
    std::vector<Solved> points;
    std::optional<PowerPoint> last;
    for (double power : spec.grid) {
        PhysicalParams q = p;
        q.drive_power = power;
        Solved pt;
        pt.power = power;
        try {
            Pipeline pl;
            pl.params = q;
            pl.amplitudes = last ? solve_steady_amplitudes(q, last->power, last->amplitudes)
                                 : solve_steady_amplitudes(q);
            last = PowerPoint{power, pl.amplitudes};
            pl.linearized = linearize(q, pl.amplitudes);
            pl.effective = eliminate_cavity(q, pl.linearized);
            pt.pipeline = pl;
        } catch (const Error &e) {
            pt.error = e.what();
        }
        points.push_back(std::move(pt));
    }
    std::vector<SweepRow> rows;
    for (double n : n_th_values(spec, p))
        for (const auto &pt : points) {
            SweepRow row;
            row.value = pt.power;
            row.n_th = n;
            rows.push_back(row);
        }
    const PointOptions popt = point_options(spec);
    parallel_for(rows.size(), spec.threads, [&](std::size_t k) {
        SweepRow &row = rows[k];
        const Solved &entry = points[k % points.size()];
        if (!entry.pipeline) {
            row.status = entry.error;
            return;
        }
        Pipeline pl = *entry.pipeline;
        pl.params.n_th = row.n_th;
        fill_tiers(row, pl);
        row.regime_violations =
            validate_regime(pl.params, pl.amplitudes, pl.linearized, spec.regime_threshold)
                .violations();
        row.solution = solve_point(pl, spec.solvers, popt);
    });
    return rows;
}

/**
 * Detuning sweep over target Delta_eff values. Every point solves for its
 * own Delta_c from a cold start, so points run in parallel; rows come back
 * ordered by n_th, then by grid value.
 */
inline std::vector<SweepRow> run_detuning_sweep(const SweepSpec &spec, const PhysicalParams &p)
{
    validate(spec);
    validate(p);
    std::vector<SweepRow> rows;
    for (double n : n_th_values(spec, p))
        for (double target : spec.grid) {
            SweepRow row;
            row.value = target;
            row.n_th = n;
            rows.push_back(row);
        }
    DeltaCOptions dopt;
    dopt.resolve_amplitudes = spec.resolve_amplitudes;
    const PointOptions popt = point_options(spec);
    parallel_for(rows.size(), spec.threads, [&](std::size_t k) {
        SweepRow &row = rows[k];
        PhysicalParams q = p;
        q.n_th = row.n_th;
        try {
            const DeltaCSolution sol = solve_for_delta_c(q, row.value, dopt);
            Pipeline pl = sol.pipeline;
            pl.params.n_th = row.n_th;
            fill_tiers(row, pl);
            row.regime_violations =
                validate_regime(pl.params, pl.amplitudes, pl.linearized, spec.regime_threshold)
                    .violations();
            row.solution = solve_point(pl, spec.solvers, popt);
        } catch (const Error &e) {
            row.status = e.what();
        }
    });
    flag_minima(rows);
    return rows;
}

/// Amplitude table with the fixed header P_watts,alpha_abs,beta,residual.
inline Table amplitude_table(const std::vector<PowerPoint> &points)
{
    Table t({"P_watts", "alpha_abs", "beta", "residual"});
    for (const auto &pt : points)
        t.add_row({pt.power, std::abs(pt.amplitudes.alpha), pt.amplitudes.beta,
                   pt.amplitudes.residual_norm});
    return t;
}

/**
 * Sweep rows as a table. Power sweeps lead with the amplitude columns
 * (P_watts,alpha_abs,beta,residual), which is the whole table when no solver
 * is requested; a failed point then reads nan and only its SweepRow::status
 * carries the reason. Requested solvers append the derived
 * parameter columns and one variance column each. A solver without a value
 * reads "skipped" and its reason goes to the notes column.
 */
inline Table sweep_table(const SweepSpec &spec, const std::vector<SweepRow> &rows)
{
    const bool power = spec.variable == SweepVariable::power;
    const bool detailed = !power || !spec.solvers.empty();
    std::vector<std::string> header;
    if (power)
        header = {"P_watts", "alpha_abs", "beta", "residual"};
    else
        header = {"n_th", "Delta_eff", "Delta_c", "alpha_abs", "beta", "residual"};
    if (detailed) {
        if (power)
            header.insert(header.begin() + 1, "n_th");
        for (const char *h : {"Delta_a", "Lambda_prime", "zeta", "omega_m_prime",
                              "optimal_Delta_eff", "stable", "regime_violations"})
            header.emplace_back(h);
        if (power)
            header.emplace_back("Delta_eff");
        for (Solver s : spec.solvers) {
            header.push_back("var_" + column_name(s));
            if (s == Solver::analytic)
                header.emplace_back("var_analytic_neff");
        }
        if (std::find(spec.solvers.begin(), spec.solvers.end(), Solver::fock) != spec.solvers.end())
            header.emplace_back("tail_population");
        if (!power)
            header.emplace_back("minimum");
        header.emplace_back("status");
        header.emplace_back("notes");
    }

    Table t(header);
    const Cell missing = std::string("nan");
    for (const auto &r : rows) {
        std::vector<Cell> row;
        auto opt_num = [&](const std::optional<double> &v) {
            row.push_back(v ? Cell(*v) : missing);
        };
        const auto &a = r.amplitudes;
        if (power) {
            row.push_back(r.value);
            if (detailed)
                row.push_back(r.n_th);
        } else {
            row.push_back(r.n_th);
            row.push_back(r.value);
            opt_num(r.delta_c);
        }
        opt_num(a ? std::optional<double>(std::abs(a->alpha)) : std::nullopt);
        opt_num(a ? std::optional<double>(a->beta) : std::nullopt);
        opt_num(a ? std::optional<double>(a->residual_norm) : std::nullopt);
        if (!detailed) {
            t.add_row(std::move(row));
            continue;
        }
        const auto &tr = r.transformed;
        opt_num(r.linearized ? std::optional<double>(r.linearized->Delta_a) : std::nullopt);
        opt_num(r.effective ? std::optional<double>(r.effective->Lambda_prime) : std::nullopt);
        opt_num(tr ? std::optional<double>(tr->zeta) : std::nullopt);
        opt_num(tr ? std::optional<double>(tr->omega_m_prime) : std::nullopt);
        opt_num(tr ? std::optional<double>(optimal_detuning(*tr)) : std::nullopt);
        row.push_back(r.effective ? Cell(r.solution.stable) : missing);
        row.push_back(static_cast<long>(r.regime_violations));
        if (power)
            opt_num(r.effective ? std::optional<double>(r.effective->Delta_eff) : std::nullopt);
        std::vector<std::string> notes;
        for (std::size_t k = 0; k < spec.solvers.size(); ++k) {
            const Solver s = spec.solvers[k];
            const SolverCell *cell =
                k < r.solution.cells.size() ? &r.solution.cells[k] : nullptr;
            if (cell && cell->variance) {
                row.push_back(*cell->variance);
            } else {
                row.push_back(std::string("skipped"));
                notes.push_back(std::string(to_string(s)) + ": " +
                                (cell ? cell->skipped : std::string("point failed")));
            }
            if (s == Solver::analytic)
                opt_num(r.solution.analytic_with_neff);
        }
        if (std::find(spec.solvers.begin(), spec.solvers.end(), Solver::fock) != spec.solvers.end())
            opt_num(r.solution.tail_population);
        if (!power)
            row.push_back(r.minimum);
        row.push_back(r.status);
        for (const auto &n : r.solution.notes)
            notes.push_back(n);
        std::string joined;
        for (const auto &n : notes)
            joined += (joined.empty() ? "" : "; ") + n;
        row.push_back(joined);
        t.add_row(std::move(row));
    }
    return t;
}

} // namespace hybridsq

#endif
