#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hybridsq/effective_model.hpp"
#include "hybridsq/fock.hpp"
#include "hybridsq/gaussian.hpp"

using namespace hybridsq;

namespace {

struct Optimum
{
    Pipeline pipeline;
    TransformedParams transformed;
};

Optimum optimum(PhysicalParams p)
{
    const Pipeline base = run_pipeline(p);
    const DeltaCSolution s = solve_for_delta_c(p, optimal_detuning(transform_frame(base.effective, p)));
    return {s.pipeline, transform_frame(s.pipeline.effective, s.pipeline.params)};
}

const Optimum &fig2_optimum()
{
    static const Optimum o = optimum(presets::fig2_high_kappa());
    return o;
}

PhysicalParams thermal_bath(double n_th, double gamma_m)
{
    PhysicalParams p = presets::fig2_high_kappa();
    p.n_th = n_th;
    p.gamma_m = gamma_m;
    return p;
}

EffectiveParams decoupled(double gamma_eff)
{
    EffectiveParams e;
    e.Delta_eff = -1.0;
    e.gamma_eff = gamma_eff;
    return e;
}

Eigen::MatrixXcd random_density(int d, std::mt19937_64 &rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXcd A(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            A(i, j) = {g(rng), g(rng)};
    Eigen::MatrixXcd rho = A * A.adjoint();
    return rho / rho.trace().real();
}

} // namespace

TEST(FockBuild, CutoffsTooSmall)
{
    EXPECT_THROW(build_liouvillian(decoupled(0.1), thermal_bath(0, 0.1), Cutoffs{1, 4}), DimensionError);
    EXPECT_THROW(assemble_fock_model(Cutoffs{3, 3}, {{1.0, {Ladder::b, Ladder::b, Ladder::b}}}, {}),
                 DimensionError);
    EXPECT_THROW(assemble_fock_model(Cutoffs{3, 3}, {}, {{-1.0, Ladder::c}}), InvalidParameter);
}

TEST(FockBuild, NonHermitianHamiltonianRejected)
{
    EXPECT_THROW(assemble_fock_model(Cutoffs{4, 4}, {{1.0, {Ladder::b, Ladder::c}}}, {}),
                 InvalidParameter);
}

TEST(FockBuild, TracePreservedOnRandomStates)
{
    const auto &o = fig2_optimum();
    const FockModel m = build_liouvillian(o.pipeline.effective, o.pipeline.params, Cutoffs{5, 4});
    std::mt19937_64 rng(9);
    for (int k = 0; k < 100; ++k) {
        const Eigen::MatrixXcd rho = random_density(m.dimension(), rng);
        const Eigen::MatrixXcd out = apply_liouvillian(m, rho);
        EXPECT_LT(std::abs(out.trace()), 1e-11 * std::max(1.0, out.norm()));
    }
}

TEST(FockBuild, HermiticityPreserved)
{
    const auto &o = fig2_optimum();
    const FockModel m = build_liouvillian(o.pipeline.effective, o.transformed, Cutoffs{5, 4});
    std::mt19937_64 rng(10);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const int d = m.dimension();
        Eigen::MatrixXcd A(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                A(i, j) = {g(rng), g(rng)};
        const Eigen::MatrixXcd herm = A + A.adjoint();
        const Eigen::MatrixXcd out = apply_liouvillian(m, herm);
        EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, out.norm()));
        const Eigen::MatrixXcd lhs = apply_liouvillian(m, A).adjoint();
        const Eigen::MatrixXcd rhs = apply_liouvillian(m, A.adjoint());
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, lhs.norm()));
    }
}

TEST(FockSolve, PureAtomicDecayIsDegenerate)
{
    // Mechanics without damping keeps any diagonal state.
    EffectiveParams e = decoupled(0.5);
    const FockModel m = assemble_fock_model(Cutoffs{4, 4}, effective_hamiltonian_terms(e),
                                            {{e.gamma_eff, Ladder::c}});
    EXPECT_THROW(solve_steady(m), DegeneracyError);
}

TEST(FockSolve, DecayToJointVacuum)
{
    const FockModel m =
        solve_steady(build_liouvillian(decoupled(0.5), thermal_bath(0.0, 0.1), Cutoffs{4, 4}));
    const auto &rho = *m.steady_rho;
    EXPECT_NEAR(rho(0, 0).real(), 1.0, 1e-10);
    EXPECT_TRUE(check_invariants(m).ok());
    const FockObservables o = observables(m);
    EXPECT_NEAR(o.phonons, 0.0, 1e-10);
    EXPECT_NEAR(o.atomic, 0.0, 1e-10);
    EXPECT_NEAR(o.x_variance, 1.0, 1e-10);
    EXPECT_NEAR(o.y_variance, 1.0, 1e-10);
}

TEST(FockSolve, ThermalMechanics)
{
    const FockModel m =
        solve_steady(build_liouvillian(decoupled(0.5), thermal_bath(3.0, 0.1), Cutoffs{70, 3}));
    const FockObservables o = observables(m);
    EXPECT_NEAR(o.phonons, 3.0, 1e-6);
    EXPECT_NEAR(o.x_variance, 7.0, 1e-5);
    EXPECT_NEAR(o.x_mean, 0.0, 1e-12);
    EXPECT_LT(*m.tail_population, 1e-6);
    EXPECT_TRUE(check_invariants(m).ok());
}

TEST(FockSolve, SqueezedBathOccupation)
{
    // G' = 0: mechanics relaxes under the four reshaped rates alone.
    PhysicalParams p = thermal_bath(0.5, 0.01);
    EffectiveParams e = decoupled(0.5);
    e.Lambda_prime = 0.372;
    const TransformedParams t = transform_frame(e, p);
    ASSERT_EQ(t.G_prime, 0.0);
    const FockModel m = solve_steady(build_liouvillian(e, t, Cutoffs{40, 3}));
    const FockObservables o = observables(m);
    const double up = t.raising_rate();
    const double down = t.lowering_rate();
    EXPECT_NEAR(o.phonons, up / (down - up), 1e-8);
    const double closed = t.n_th_prime * std::cosh(2.0 * t.zeta) + std::pow(std::sinh(t.zeta), 2);
    EXPECT_NEAR(o.phonons, closed, 1e-8);
    EXPECT_GT(o.phonons, t.n_th_prime);
}

TEST(FockSolve, KrylovMatchesDirectLU)
{
    const auto &o = fig2_optimum();
    const FockModel model = build_liouvillian(o.pipeline.effective, o.pipeline.params, Cutoffs{8, 6});
    FockSolveOptions lu;
    lu.method = FockMethod::sparse_lu;
    const FockModel a = solve_steady(model);
    const FockModel b = solve_steady(model, lu);
    EXPECT_LT((*a.steady_rho - *b.steady_rho).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_TRUE(check_invariants(a).ok());
    EXPECT_TRUE(check_invariants(b).ok());
}

TEST(FockSolve, MatchesGaussianAtHighKappaOptimum)
{
    const auto &o = fig2_optimum();
    const FockModel m = solve_steady(build_liouvillian(o.pipeline.effective, o.pipeline.params));
    const double fock = observables(m).x_variance;
    const double gauss = mechanical_variance(
        solve_lyapunov(build_effective_two_mode(o.pipeline.effective, o.pipeline.params)));
    EXPECT_LT(std::abs(fock - gauss) / gauss, 0.05);
    EXPECT_LT(std::abs(fock - gauss) / gauss, 0.01);
    EXPECT_LT(std::abs(observables(m).x_mean), 1e-6);
    EXPECT_TRUE(check_invariants(m).ok());
    EXPECT_TRUE(m.warnings.empty());
}

TEST(FockSolve, CutoffConvergence)
{
    PhysicalParams p = presets::fig2_high_kappa();
    p.n_th = 0.0;
    const Optimum o = optimum(p);
    const Cutoffs small{10, 6};
    const FockModel a = solve_steady(build_liouvillian(o.pipeline.effective, o.pipeline.params, small));
    ASSERT_LT(*a.tail_population, 1e-6);
    const FockModel b = solve_steady(build_liouvillian(o.pipeline.effective, o.pipeline.params,
                                                       Cutoffs{2 * small.mechanical, 2 * small.atomic}));
    const double va = observables(a).x_variance;
    const double vb = observables(b).x_variance;
    EXPECT_LT(std::abs(va - vb) / vb, 1e-3);
}

TEST(FockSolve, AdaptiveGrowsHeavyTail)
{
    AdaptiveCutoffOptions opt;
    opt.start = Cutoffs{8, 3};
    opt.cap = 64;
    const PhysicalParams p = thermal_bath(2.0, 0.1);
    const FockModel m = solve_adaptive(
        [&](Cutoffs c) { return build_liouvillian(decoupled(0.5), p, c); }, opt);
    EXPECT_GT(m.cutoffs.mechanical, 8);
    EXPECT_EQ(m.cutoffs.atomic, 3);
    EXPECT_LT(*m.tail_population, 1e-6);
    EXPECT_NEAR(observables(m).phonons, 2.0, 1e-5);
}

TEST(FockSolve, TailWarningAtCap)
{
    AdaptiveCutoffOptions opt;
    opt.start = Cutoffs{4, 3};
    opt.cap = 8;
    const PhysicalParams p = thermal_bath(5.0, 0.1);
    const FockModel m = solve_adaptive(
        [&](Cutoffs c) { return build_liouvillian(decoupled(0.5), p, c); }, opt);
    EXPECT_EQ(m.cutoffs.mechanical, 8);
    EXPECT_FALSE(m.warnings.empty());
}

TEST(FockSolve, TransformedFrameReproducesLabVariance)
{
    for (double n_th : {1.0, 10.0}) {
        PhysicalParams p = presets::fig2_high_kappa();
        p.n_th = n_th;
        const Optimum o = optimum(p);
        const FockModel lab = solve_steady(build_liouvillian(o.pipeline.effective, o.pipeline.params));
        const FockModel sq = solve_steady(build_liouvillian(o.pipeline.effective, o.transformed));
        const double n_eff = observables(sq).phonons;
        const double predicted = analytic_variance(o.transformed, n_eff);
        const double measured = observables(lab).x_variance;
        EXPECT_LT(std::abs(predicted - measured) / measured, 0.02)
            << "n_th " << n_th << ": " << predicted << " vs " << measured;
        EXPECT_GE(measured, o.transformed.squeezing_floor() * (1.0 - 1e-9));
    }
}

TEST(FockObservablesTest, RequiresSteadyState)
{
    const FockModel m = build_liouvillian(decoupled(0.5), thermal_bath(0.0, 0.1), Cutoffs{3, 3});
    EXPECT_THROW(observables(m), StateError);
    EXPECT_THROW(check_invariants(m), StateError);
    std::ostringstream os;
    EXPECT_THROW(write_populations_csv(os, m), StateError);
}

TEST(FockObservablesTest, PopulationsCsv)
{
    const FockModel m =
        solve_steady(build_liouvillian(decoupled(0.5), thermal_bath(0.0, 0.1), Cutoffs{3, 3}));
    std::ostringstream os;
    write_populations_csv(os, m);
    const std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "n_mechanical,n_atomic,population");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 10);
}
