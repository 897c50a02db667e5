// Command-line front end: report, sweep-power, sweep-detuning, validate.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hybridsq/config.hpp"
#include "hybridsq/report.hpp"
#include "hybridsq/sweep.hpp"

namespace {

using namespace hybridsq;

enum Exit
{
    exit_ok = 0,
    exit_internal = 1,
    exit_parameter = 2,
    exit_convergence = 3,
    exit_instability = 4,
};

struct Common
{
    std::string preset;
    std::string params_file;
    std::vector<double> n_th;
    std::vector<std::string> solvers;
    std::string grid;
    std::string resolve = "on";
    std::string out;
    std::string format;
    std::string cutoffs = "12x12";
    bool adaptive = false;
    int threads = 0;
    double threshold = 5.0;
    std::string covariance_out;
    std::string eigenvalues_out;
    std::string populations_out;
};

void add_source_options(CLI::App *cmd, Common &c)
{
    auto *preset = cmd->add_option("--preset", c.preset, "built-in parameter set")
                       ->check(CLI::IsMember({"fig2_high_kappa", "fig4_low_kappa"}));
    auto *file = cmd->add_option("--params", c.params_file, "key = value parameter file");
    preset->excludes(file);
    cmd->add_option("--nth", c.n_th, "thermal phonon numbers, comma separated")->delimiter(',');
    cmd->add_option("--threshold", c.threshold, "ratio that counts as much greater than")
        ->check(CLI::PositiveNumber);
}

void add_output_options(CLI::App *cmd, Common &c, const std::vector<std::string> &formats)
{
    cmd->add_option("--out", c.out, "output path (default stdout)");
    cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember(formats));
}

void add_solver_options(CLI::App *cmd, Common &c)
{
    cmd->add_option("--solver", c.solvers,
                    "gaussian-3mode, gaussian-2mode, fock, analytic or all; comma separated")
        ->delimiter(',');
    cmd->add_option("--resolve-amplitudes", c.resolve,
                    "re-solve the classical amplitudes for every Delta_c")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--cutoffs", c.cutoffs, "Fock cutoffs NbxNc");
    cmd->add_flag("--adaptive-cutoffs", c.adaptive, "grow Fock cutoffs until the tail is small");
}

PhysicalParams load(const Common &c)
{
    if (!c.params_file.empty())
        return load_params_file(c.params_file);
    if (c.preset.empty())
        throw InvalidParameter("give --preset or --params");
    return presets::by_name(c.preset);
}

Cutoffs parse_cutoffs(const std::string &text)
{
    const auto x = text.find('x');
    try {
        if (x == std::string::npos)
            throw std::invalid_argument(text);
        std::size_t used = 0;
        Cutoffs c;
        c.mechanical = std::stoi(text.substr(0, x), &used);
        if (used != x)
            throw std::invalid_argument(text);
        const std::string rest = text.substr(x + 1);
        c.atomic = std::stoi(rest, &used);
        if (used != rest.size())
            throw std::invalid_argument(text);
        if (c.mechanical < 2 || c.atomic < 2)
            throw DimensionError("Fock cutoffs must be >= 2 per mode");
        return c;
    } catch (const std::logic_error &) {
        throw InvalidParameter("cutoffs must look like 12x12, got '" + text + "'");
    }
}

/// stdout unless a path is given.
class Output
{
public:
    explicit Output(const std::string &path)
    {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_)
                throw InvalidParameter("cannot write '" + path + "'");
        }
    }
    std::ostream &stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

void write_table(const Common &c, const Table &t)
{
    Output out(c.out);
    if (c.format == "json")
        write_json(out.stream(), t);
    else
        write_csv(out.stream(), t);
}

void flatten(const nlohmann::ordered_json &j, const std::string &prefix, Table &t)
{
    if (j.is_object()) {
        for (const auto &[k, v] : j.items())
            flatten(v, prefix.empty() ? k : prefix + "." + k, t);
    } else if (j.is_array()) {
        for (std::size_t k = 0; k < j.size(); ++k)
            flatten(j[k], prefix + "." + std::to_string(k), t);
    } else if (j.is_string()) {
        t.add_row({prefix, j.get<std::string>()});
    } else if (j.is_boolean()) {
        t.add_row({prefix, j.get<bool>()});
    } else if (j.is_number_integer()) {
        t.add_row({prefix, j.get<long>()});
    } else {
        t.add_row({prefix, j.get<double>()});
    }
}

int run_report(const Common &c)
{
    PhysicalParams p = load(c);
    if (c.n_th.size() > 1)
        throw InvalidParameter("report takes a single --nth value");
    if (!c.n_th.empty()) {
        p.n_th = c.n_th.front();
        validate(p);
    }
    ReportOptions opt;
    if (!c.solvers.empty())
        opt.solvers = parse_solvers(c.solvers);
    opt.resolve_amplitudes = c.resolve == "on";
    opt.regime_threshold = c.threshold;
    opt.fock_start = parse_cutoffs(c.cutoffs);
    std::string stage;
    Report r;
    try {
        r = make_report(p, opt, &stage);
    } catch (const Error &e) {
        std::cerr << "report: stage '" << stage << "' failed\n";
        throw;
    }
    {
        Output out(c.out);
        if (c.format == "json") {
            out.stream() << report_json(r).dump(2) << '\n';
        } else if (c.format == "csv") {
            Table t({"key", "value"});
            flatten(report_json(r), "", t);
            write_csv(out.stream(), t);
        } else {
            write_report_text(out.stream(), r);
        }
    }
    const auto &sol = r.at_optimum;
    if (!c.covariance_out.empty() || !c.eigenvalues_out.empty()) {
        const GaussianModel *g = sol.gaussian_2mode ? &*sol.gaussian_2mode
                                 : sol.gaussian_3mode ? &*sol.gaussian_3mode
                                                      : nullptr;
        if (!g)
            throw InvalidParameter("covariance/eigenvalue output needs a Gaussian solver");
        if (!c.covariance_out.empty()) {
            if (!g->covariance)
                throw InvalidParameter("no covariance: the requested Gaussian model is unstable");
            Output o(c.covariance_out);
            write_covariance_csv(o.stream(), *g);
        }
        if (!c.eigenvalues_out.empty()) {
            Output o(c.eigenvalues_out);
            write_eigenvalues_csv(o.stream(), *g);
        }
    }
    if (!c.populations_out.empty()) {
        if (!sol.fock)
            throw InvalidParameter("population output needs the fock solver");
        Output o(c.populations_out);
        write_populations_csv(o.stream(), *sol.fock);
    }
    if (r.any_unstable()) {
        for (const auto &cell : sol.cells)
            if (cell.unstable)
                std::cerr << "instability: " << to_string(cell.solver) << ": " << cell.skipped << '\n';
        return exit_instability;
    }
    return exit_ok;
}

SweepSpec make_spec(const Common &c, const PhysicalParams &p, SweepVariable v)
{
    SweepSpec s;
    s.variable = v;
    Grid g;
    if (!c.grid.empty())
        g = parse_grid(c.grid);
    else if (v == SweepVariable::power)
        g = Grid{0.0, p.drive_power, 41};
    else
        g = Grid{-3.5, -0.5, 151};
    s.grid = g.values();
    if (!c.solvers.empty())
        s.solvers = parse_solvers(c.solvers);
    else if (v == SweepVariable::delta_eff)
        s.solvers = {Solver::gaussian_2mode};
    s.n_th = c.n_th;
    s.resolve_amplitudes = c.resolve == "on";
    s.output_path = c.out;
    s.fock_cutoffs = parse_cutoffs(c.cutoffs);
    s.adaptive_cutoffs = c.adaptive;
    s.threads = c.threads;
    s.regime_threshold = c.threshold;
    return s;
}

int run_sweep(const Common &c, SweepVariable v)
{
    const PhysicalParams p = load(c);
    const SweepSpec spec = make_spec(c, p, v);
    const auto rows = v == SweepVariable::power ? run_power_sweep(spec, p)
                                                : run_detuning_sweep(spec, p);
    for (const auto &r : rows)
        if (r.status != "ok")
            std::cerr << "warning: point " << format_number(r.value) << " (n_th "
                      << format_number(r.n_th) << "): " << r.status << '\n';
    write_table(c, sweep_table(spec, rows));
    return exit_ok;
}

int run_validate(const Common &c)
{
    PhysicalParams p = load(c);
    if (c.n_th.size() > 1)
        throw InvalidParameter("validate takes a single --nth value");
    if (!c.n_th.empty())
        p.n_th = c.n_th.front();
    validate(p);
    const auto amps = solve_steady_amplitudes(p);
    const auto lin = linearize(p, amps);
    const auto regime = validate_regime(p, amps, lin, c.threshold);
    Table t({"condition", "lhs", "rhs", "ratio", "satisfied", "high_kappa_only"});
    for (const auto &cond : regime.conditions)
        t.add_row({cond.name, cond.lhs, cond.rhs, cond.margin, cond.satisfied, cond.high_kappa_only});
    Output out(c.out);
    if (c.format == "json") {
        nlohmann::ordered_json j;
        j["threshold"] = c.threshold;
        j["violations"] = regime.violations();
        j["conditions"] = to_json(t);
        out.stream() << j.dump(2) << '\n';
    } else {
        write_csv(out.stream(), t);
    }
    return exit_ok;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Steady-state mechanical squeezing in a hybrid atom-optomechanical system"};
    app.require_subcommand(1);
    Common c;

    auto *report = app.add_subcommand("report", "solve one parameter set and print every tier");
    add_source_options(report, c);
    add_solver_options(report, c);
    add_output_options(report, c, {"text", "csv", "json"});
    report->add_option("--covariance-out", c.covariance_out, "covariance matrix CSV at the optimum");
    report->add_option("--eigenvalues-out", c.eigenvalues_out, "drift eigenvalue CSV at the optimum");
    report->add_option("--populations-out", c.populations_out, "Fock populations CSV at the optimum");

    auto *power = app.add_subcommand("sweep-power", "classical amplitudes versus drive power");
    add_source_options(power, c);
    add_solver_options(power, c);
    add_output_options(power, c, {"csv", "json"});
    power->add_option("--grid", c.grid, "min:max:count in watts");
    power->add_option("--threads", c.threads, "worker threads (0: all cores)");

    auto *detuning = app.add_subcommand("sweep-detuning", "variance versus Delta_eff");
    add_source_options(detuning, c);
    add_solver_options(detuning, c);
    add_output_options(detuning, c, {"csv", "json"});
    detuning->add_option("--grid", c.grid, "min:max:count in units of omega_m");
    detuning->add_option("--threads", c.threads, "worker threads (0: all cores)");

    auto *check = app.add_subcommand("validate", "check a parameter set and the regime conditions");
    add_source_options(check, c);
    add_output_options(check, c, {"csv", "json"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return exit_parameter;
    }

    try {
        if (*report)
            return run_report(c);
        if (*power)
            return run_sweep(c, SweepVariable::power);
        if (*detuning)
            return run_sweep(c, SweepVariable::delta_eff);
        if (*check)
            return run_validate(c);
    } catch (const InvalidParameter &e) {
        std::cerr << "parameter error: " << e.what() << '\n';
        return exit_parameter;
    } catch (const InstabilityError &e) {
        std::cerr << "instability: " << e.what() << '\n';
        return exit_instability;
    } catch (const ConvergenceError &e) {
        std::cerr << "no convergence: " << e.what() << '\n';
        return exit_convergence;
    } catch (const BranchError &e) {
        std::cerr << "no convergence: " << e.what() << '\n';
        return exit_convergence;
    } catch (const DegeneracyError &e) {
        std::cerr << "no convergence: " << e.what() << '\n';
        return exit_convergence;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_internal;
    }
    return exit_internal;
}
