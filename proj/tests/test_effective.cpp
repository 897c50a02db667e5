#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hybridsq/effective_model.hpp"

using namespace hybridsq;

namespace {

PhysicalParams with_coupling(double G0, double kappa, double gamma_c)
{
    PhysicalParams p = presets::fig2_high_kappa();
    p.g0_collective = G0;
    p.kappa = kappa;
    p.gamma_c = gamma_c;
    return p;
}

LinearizedParams lin_of(double Delta_a, double G, double Lambda)
{
    LinearizedParams lin;
    lin.Delta_a = Delta_a;
    lin.G = G;
    lin.Lambda = Lambda;
    lin.omega_m_tilde = 1.0 + 2.0 * Lambda;
    return lin;
}

EffectiveParams with_lambda(double Lambda_prime)
{
    EffectiveParams e;
    e.Lambda_prime = Lambda_prime;
    e.omega_m_tilde_prime = 1.0 + 2.0 * Lambda_prime;
    e.G_eff = 0.1;
    return e;
}

} // namespace

TEST(EliminateCavity, QuotedHighKappaValues)
{
    const PhysicalParams p = with_coupling(0.5, 10.0, 0.1);
    const EffectiveParams e = eliminate_cavity(p, lin_of(6.0, 1.6, 0.12));
    EXPECT_NEAR(e.G_eff, 0.8 / std::sqrt(61.0), 1e-14);
    EXPECT_NEAR(e.G_eff, 0.1024, 1e-4);
    EXPECT_NEAR(e.gamma_eff, 0.1 + 2.5 / 61.0, 1e-14);
    EXPECT_NEAR(e.Lambda_prime, 0.12 + 2.56 * 6.0 / 61.0, 1e-14);
    EXPECT_NEAR(e.Lambda_prime, 0.3718, 1e-4);
    EXPECT_NEAR(e.omega_m_tilde_prime, 1.24 + 2.0 * 2.56 * 6.0 / 61.0, 1e-14);
    EXPECT_NEAR(e.Delta_eff, 1.0 - 0.25 * 6.0 / 61.0, 1e-14);
}

TEST(EliminateCavity, DecoupledMechanics)
{
    const PhysicalParams p = with_coupling(0.5, 10.0, 0.1);
    const LinearizedParams lin = lin_of(6.0, 0.0, 0.12);
    const EffectiveParams e = eliminate_cavity(p, lin);
    EXPECT_EQ(e.G_eff, 0.0);
    EXPECT_EQ(e.Lambda_prime, lin.Lambda);
    EXPECT_EQ(e.omega_m_tilde_prime, lin.omega_m_tilde);
}

TEST(EliminateCavity, Invariants)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const PhysicalParams p = with_coupling(2.0 * u(rng), 0.01 + 20.0 * u(rng), 0.01 + u(rng));
        const EffectiveParams e =
            eliminate_cavity(p, lin_of(-10.0 + 20.0 * u(rng), 3.0 * u(rng), 0.5 * u(rng)));
        EXPECT_GE(e.gamma_eff, p.gamma_c);
        EXPECT_GE(e.G_eff, 0.0);
    }
}

TEST(EliminateCavity, ShiftPeaksAtHalfKappa)
{
    for (double kappa : {0.1, 1.0, 10.0}) {
        const PhysicalParams p = with_coupling(0.5, kappa, 0.1);
        auto shift = [&](double Delta_a) {
            const EffectiveParams e = eliminate_cavity(p, lin_of(Delta_a, 1.0, 0.12));
            return e.Lambda_prime - 0.12;
        };
        const double h = 1e-5 * kappa;
        const double slope = (shift(kappa / 2 + h) - shift(kappa / 2 - h)) / (2.0 * h);
        EXPECT_NEAR(slope, 0.0, 1e-6 / kappa);
        EXPECT_GT(shift(kappa / 2), shift(kappa / 2 + 0.01 * kappa));
        EXPECT_GT(shift(kappa / 2), shift(kappa / 2 - 0.01 * kappa));
    }
}

TEST(TransformFrame, IdentityAtZeroLambda)
{
    PhysicalParams p = presets::fig2_high_kappa();
    p.n_th = 3.0;
    const EffectiveParams e = with_lambda(0.0);
    const TransformedParams t = transform_frame(e, p);
    EXPECT_EQ(t.zeta, 0.0);
    EXPECT_EQ(t.omega_m_prime, 1.0);
    EXPECT_EQ(t.G_prime, e.G_eff);
    EXPECT_EQ(t.n_th_prime, 3.0);
    EXPECT_EQ(t.cooling_rates[1], 0.0);
    EXPECT_EQ(t.cooling_rates[3], 0.0);
}

TEST(TransformFrame, HighKappaFloor)
{
    const TransformedParams t = transform_frame(with_lambda(0.372), presets::fig2_high_kappa());
    EXPECT_NEAR(t.squeezing_floor(), std::pow(1.0 + 4.0 * 0.372, -0.5), 1e-14);
    EXPECT_NEAR(t.squeezing_floor(), 0.634, 1e-3);
}

TEST(TransformFrame, LowKappaFloor)
{
    // G = 0.5, Delta_a = 0.15, kappa = 0.1, Lambda = 0.12
    const PhysicalParams p = with_coupling(0.05, 0.1, 0.1);
    const EffectiveParams e = eliminate_cavity(p, lin_of(0.15, 0.5, 0.12));
    EXPECT_NEAR(e.Lambda_prime, 1.62, 1e-2);
    const TransformedParams t = transform_frame(e, p);
    EXPECT_NEAR(t.squeezing_floor(), 0.366, 1e-3);
}

TEST(TransformFrame, DomainError)
{
    EXPECT_THROW(transform_frame(with_lambda(-0.25), presets::fig2_high_kappa()),
                 TransformDomainError);
    EXPECT_THROW(transform_frame(with_lambda(-1.0), presets::fig2_high_kappa()), DomainError);
    EXPECT_NO_THROW(transform_frame(with_lambda(-0.2499), presets::fig2_high_kappa()));
}

TEST(TransformFrame, AlgebraicIdentitiesOnRandomDraws)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        PhysicalParams p = presets::fig2_high_kappa();
        p.n_th = 20.0 * u(rng);
        p.gamma_m = 1e-6 + u(rng) * 1e-3;
        const double L = -0.249 + 5.0 * u(rng);
        EffectiveParams e = with_lambda(L);
        e.G_eff = u(rng);
        const TransformedParams t = transform_frame(e, p);
        const double r = 1.0 + 4.0 * L;
        EXPECT_NEAR(t.squeezing_floor(), 1.0 / std::sqrt(r), 1e-12 / std::sqrt(r));
        EXPECT_NEAR(t.omega_m_prime, std::sqrt(r), 1e-12 * std::sqrt(r));
        EXPECT_GT(t.omega_m_prime, 0.0);
        EXPECT_NEAR(t.G_prime, e.G_eff * std::pow(r, -0.25), 1e-13);
        EXPECT_GE(t.n_th_prime, p.n_th - 1e-12);
        const double ch2 = std::pow(std::cosh(t.zeta), 2);
        const double sh2 = std::pow(std::sinh(t.zeta), 2);
        const double n = t.n_th_prime;
        EXPECT_NEAR(t.cooling_rates[0], p.gamma_m * (n + 1) * ch2, 1e-12 * t.cooling_rates[0]);
        EXPECT_NEAR(t.cooling_rates[1], p.gamma_m * (n + 1) * sh2, 1e-12 * (1 + t.cooling_rates[1]));
        EXPECT_NEAR(t.cooling_rates[2], p.gamma_m * n * ch2, 1e-12 * (1 + t.cooling_rates[2]));
        EXPECT_NEAR(t.cooling_rates[3], p.gamma_m * n * sh2, 1e-12 * (1 + t.cooling_rates[3]));
    }
}

TEST(AnalyticVariance, Values)
{
    const TransformedParams vac = transform_frame(with_lambda(0.0), presets::fig2_high_kappa());
    EXPECT_EQ(analytic_variance(vac, 0.0), 1.0);
    const TransformedParams t = transform_frame(with_lambda(0.372), presets::fig2_high_kappa());
    EXPECT_NEAR(analytic_variance(t, 0.0), t.squeezing_floor(), 1e-15);
    EXPECT_NEAR(analytic_variance(t, 0.5), 2.0 * t.squeezing_floor(), 1e-15);
    EXPECT_THROW(analytic_variance(t, -0.1), DomainError);
}

TEST(OptimalDetuning, Values)
{
    const PhysicalParams p = presets::fig2_high_kappa();
    EXPECT_EQ(optimal_detuning(transform_frame(with_lambda(0.0), p)), -1.0);
    EXPECT_NEAR(optimal_detuning(transform_frame(with_lambda(0.372), p)), -1.577, 1e-3);
    EXPECT_NEAR(optimal_detuning(transform_frame(with_lambda(1.62), p)), -2.735, 1e-3);
}

TEST(SolveForDeltaC, SelfResidual)
{
    for (const auto &name : presets::names()) {
        const PhysicalParams p = presets::by_name(name);
        const Pipeline base = run_pipeline(p);
        const double target = optimal_detuning(transform_frame(base.effective, p));
        const DeltaCSolution s = solve_for_delta_c(p, target);
        const auto &lin = s.pipeline.linearized;
        const double lorentz = lin.Delta_a * lin.Delta_a + p.kappa * p.kappa / 4.0;
        const double realized = s.delta_c - p.g0_collective * p.g0_collective * lin.Delta_a / lorentz;
        EXPECT_NEAR(realized, target, 1e-8) << name;
        // pipeline is self-consistent at the returned Delta_c
        PhysicalParams q = p;
        q.delta_c = s.delta_c;
        const Pipeline again = run_pipeline(q);
        EXPECT_NEAR(again.amplitudes.beta, s.pipeline.amplitudes.beta, 1e-9 * again.amplitudes.beta);
    }
}

TEST(SolveForDeltaC, FixedAmplitudesMode)
{
    const PhysicalParams p = presets::fig2_high_kappa();
    DeltaCOptions opt;
    opt.resolve_amplitudes = false;
    const DeltaCSolution s = solve_for_delta_c(p, -1.8, opt);
    EXPECT_NEAR(s.pipeline.effective.Delta_eff, -1.8, 1e-12);
    EXPECT_EQ(s.pipeline.amplitudes.beta, run_pipeline(p).amplitudes.beta);
}

TEST(SolveForDeltaC, NoAtomsMeansIdentity)
{
    PhysicalParams p = presets::fig2_high_kappa();
    p.g0_collective = 0.0;
    for (double target : {-2.5, -1.0, 0.3}) {
        const DeltaCSolution s = solve_for_delta_c(p, target);
        EXPECT_EQ(s.delta_c, target);
    }
}
