#ifndef HYBRIDSQ_FOCK_HPP
#define HYBRIDSQ_FOCK_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include "hybridsq/effective_model.hpp"
#include "hybridsq/errors.hpp"
#include "hybridsq/model.hpp"

namespace hybridsq {

using SparseMatrixC = Eigen::SparseMatrix<complex>;

enum class Ladder
{
    b,
    b_dag,
    c,
    c_dag,
};

inline const char *to_string(Ladder l)
{
    switch (l) {
    case Ladder::b: return "b";
    case Ladder::b_dag: return "b+";
    case Ladder::c: return "c";
    case Ladder::c_dag: return "c+";
    }
    return "?";
}

/// coefficient * factors[0] * factors[1] * ...
struct OperatorTerm
{
    complex coefficient;
    std::vector<Ladder> factors;
};

/// rate * L[jump]
struct DissipatorTerm
{
    double rate = 0.0;
    Ladder jump = Ladder::b;
};

/// Fock truncation per mode: states |0>..|N-1>.
struct Cutoffs
{
    int mechanical = 12;
    int atomic = 12;

    int dimension() const { return mechanical * atomic; }
    bool operator==(const Cutoffs &) const = default;
};

/**
 * Truncated two-mode (mechanics (x) atoms) master equation. The basis index
 * of |n_b, n_c> is n_b * N_c + n_c; the Liouvillian acts on row-major
 * vec(rho), i.e. vec(rho)[i * d + j] = rho(i, j).
 */
struct FockModel
{
    Cutoffs cutoffs;
    std::vector<OperatorTerm> hamiltonian_spec;
    std::vector<DissipatorTerm> dissipator_spec;
    SparseMatrixC hamiltonian;
    SparseMatrixC liouvillian;
    std::optional<Eigen::MatrixXcd> steady_rho;
    std::optional<double> tail_population;
    std::vector<std::string> warnings;

    int dimension() const { return cutoffs.dimension(); }

    double max_rate() const
    {
        double r = 0.0;
        for (const auto &d : dissipator_spec)
            r = std::max(r, d.rate);
        return r;
    }
};

namespace detail {

inline SparseMatrixC identity(int n)
{
    SparseMatrixC I(n, n);
    I.setIdentity();
    return I;
}

inline SparseMatrixC annihilation(int n)
{
    std::vector<Eigen::Triplet<complex>> t;
    for (int k = 1; k < n; ++k)
        t.emplace_back(k - 1, k, std::sqrt(static_cast<double>(k)));
    SparseMatrixC a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    return a;
}

inline SparseMatrixC kron(const SparseMatrixC &A, const SparseMatrixC &B)
{
    std::vector<Eigen::Triplet<complex>> t;
    t.reserve(static_cast<std::size_t>(A.nonZeros() * B.nonZeros()));
    for (int ka = 0; ka < A.outerSize(); ++ka)
        for (SparseMatrixC::InnerIterator ia(A, ka); ia; ++ia)
            for (int kb = 0; kb < B.outerSize(); ++kb)
                for (SparseMatrixC::InnerIterator ib(B, kb); ib; ++ib)
                    t.emplace_back(ia.row() * B.rows() + ib.row(),
                                   ia.col() * B.cols() + ib.col(),
                                   ia.value() * ib.value());
    SparseMatrixC K(A.rows() * B.rows(), A.cols() * B.cols());
    K.setFromTriplets(t.begin(), t.end());
    return K;
}

class LadderSet
{
public:
    explicit LadderSet(Cutoffs c)
    {
        const SparseMatrixC ab = annihilation(c.mechanical);
        const SparseMatrixC ac = annihilation(c.atomic);
        b_ = kron(ab, identity(c.atomic));
        c_ = kron(identity(c.mechanical), ac);
        b_dag_ = SparseMatrixC(b_.adjoint());
        c_dag_ = SparseMatrixC(c_.adjoint());
    }

    const SparseMatrixC &operator()(Ladder l) const
    {
        switch (l) {
        case Ladder::b: return b_;
        case Ladder::b_dag: return b_dag_;
        case Ladder::c: return c_;
        case Ladder::c_dag: return c_dag_;
        }
        return b_;
    }

    SparseMatrixC product(const std::vector<Ladder> &factors, int dim) const
    {
        SparseMatrixC out = identity(dim);
        for (const Ladder l : factors)
            out = (out * (*this)(l)).pruned();
        return out;
    }

private:
    SparseMatrixC b_, b_dag_, c_, c_dag_;
};

inline bool acts_on_mechanics(Ladder l) { return l == Ladder::b || l == Ladder::b_dag; }

/// Entries of M except row `skip`, plus `extra` triplets.
inline SparseMatrixC replace_row(const SparseMatrixC &M, Eigen::Index skip,
                                 const std::vector<Eigen::Triplet<complex>> &extra)
{
    std::vector<Eigen::Triplet<complex>> t;
    t.reserve(static_cast<std::size_t>(M.nonZeros()) + extra.size());
    for (int k = 0; k < M.outerSize(); ++k)
        for (SparseMatrixC::InnerIterator it(M, k); it; ++it)
            if (it.row() != skip)
                t.emplace_back(it.row(), it.col(), it.value());
    t.insert(t.end(), extra.begin(), extra.end());
    SparseMatrixC out(M.rows(), M.cols());
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

inline Eigen::VectorXcd vec_row_major(const Eigen::MatrixXcd &rho)
{
    const Eigen::Index d = rho.rows();
    Eigen::VectorXcd v(d * d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            v(i * d + j) = rho(i, j);
    return v;
}

inline Eigen::MatrixXcd unvec_row_major(const Eigen::VectorXcd &v, Eigen::Index d)
{
    Eigen::MatrixXcd rho(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            rho(i, j) = v(i * d + j);
    return rho;
}

} // namespace detail

/// Assembles H and the Liouvillian for an arbitrary quadratic-or-higher
/// spec. Throws DimensionError when a cutoff cannot host a monomial.
inline FockModel assemble_fock_model(Cutoffs cutoffs, std::vector<OperatorTerm> hamiltonian,
                                     std::vector<DissipatorTerm> dissipators)
{
    if (cutoffs.mechanical < 2 || cutoffs.atomic < 2)
        throw DimensionError("Fock cutoffs must be >= 2 per mode");
    for (const auto &term : hamiltonian) {
        const auto mech = std::count_if(term.factors.begin(), term.factors.end(),
                                        detail::acts_on_mechanics);
        const auto atom = static_cast<long>(term.factors.size()) - mech;
        if (mech >= cutoffs.mechanical || atom >= cutoffs.atomic) {
            std::ostringstream msg;
            msg << "cutoffs (" << cutoffs.mechanical << ", " << cutoffs.atomic
                << ") cannot represent a monomial of degree (" << mech << ", " << atom << ")";
            throw DimensionError(msg.str());
        }
    }
    for (const auto &d : dissipators)
        if (!(d.rate >= 0.0) || !std::isfinite(d.rate))
            throw InvalidParameter("dissipator rates must be finite and >= 0");

    FockModel m;
    m.cutoffs = cutoffs;
    m.hamiltonian_spec = std::move(hamiltonian);
    m.dissipator_spec = std::move(dissipators);

    const int d = cutoffs.dimension();
    const detail::LadderSet ops(cutoffs);
    SparseMatrixC H(d, d);
    for (const auto &term : m.hamiltonian_spec)
        H += term.coefficient * ops.product(term.factors, d);
    H.prune(complex{0.0, 0.0});
    const SparseMatrixC Hdag = H.adjoint();
    if (d > 0 && SparseMatrixC(H - Hdag).norm() > 1e-12 * std::max(1.0, H.norm()))
        throw InvalidParameter("Hamiltonian spec is not Hermitian");
    m.hamiltonian = H;

    const SparseMatrixC I = detail::identity(d);
    const complex minus_i{0.0, -1.0};
    // vec(A rho B) = (A (x) B^T) vec(rho) for row-major vec
    SparseMatrixC L = minus_i * (detail::kron(H, I) - detail::kron(I, SparseMatrixC(H.transpose())));
    for (const auto &diss : m.dissipator_spec) {
        if (diss.rate == 0.0)
            continue;
        const SparseMatrixC &J = ops(diss.jump);
        const SparseMatrixC JdJ = SparseMatrixC(J.adjoint()) * J;
        L += diss.rate * (detail::kron(J, SparseMatrixC(J.conjugate())) -
                          0.5 * detail::kron(JdJ, I) -
                          0.5 * detail::kron(I, SparseMatrixC(JdJ.transpose())));
    }
    L.prune(complex{0.0, 0.0});
    L.makeCompressed();
    m.liouvillian = std::move(L);
    return m;
}

/// Effective Hamiltonian in the lab (unsqueezed) frame.
inline std::vector<OperatorTerm> effective_hamiltonian_terms(const EffectiveParams &e)
{
    using L = Ladder;
    const double g = e.G_eff;
    return {
        {-e.Delta_eff, {L::c_dag, L::c}},
        {e.omega_m_tilde_prime, {L::b_dag, L::b}},
        {-g, {L::c, L::b}},
        {-g, {L::c, L::b_dag}},
        {-g, {L::c_dag, L::b}},
        {-g, {L::c_dag, L::b_dag}},
        {e.Lambda_prime, {L::b_dag, L::b_dag}},
        {e.Lambda_prime, {L::b, L::b}},
    };
}

inline std::vector<DissipatorTerm> effective_dissipators(const EffectiveParams &e,
                                                         const PhysicalParams &p)
{
    return {
        {e.gamma_eff, Ladder::c},
        {p.gamma_m * (p.n_th + 1.0), Ladder::b},
        {p.gamma_m * p.n_th, Ladder::b_dag},
    };
}

inline std::vector<OperatorTerm> transformed_hamiltonian_terms(const EffectiveParams &e,
                                                               const TransformedParams &t)
{
    using L = Ladder;
    const double g = t.G_prime;
    return {
        {-e.Delta_eff, {L::c_dag, L::c}},
        {t.omega_m_prime, {L::b_dag, L::b}},
        {-g, {L::c, L::b}},
        {-g, {L::c, L::b_dag}},
        {-g, {L::c_dag, L::b}},
        {-g, {L::c_dag, L::b_dag}},
    };
}

inline std::vector<DissipatorTerm> transformed_dissipators(const EffectiveParams &e,
                                                           const TransformedParams &t)
{
    return {
        {e.gamma_eff, Ladder::c},
        {t.cooling_rates[0], Ladder::b},
        {t.cooling_rates[1], Ladder::b_dag},
        {t.cooling_rates[2], Ladder::b_dag},
        {t.cooling_rates[3], Ladder::b},
    };
}

/// Lab-frame effective master equation.
inline FockModel build_liouvillian(const EffectiveParams &e, const PhysicalParams &p,
                                   Cutoffs cutoffs = {})
{
    return assemble_fock_model(cutoffs, effective_hamiltonian_terms(e),
                               effective_dissipators(e, p));
}

/// Squeezed-frame master equation.
inline FockModel build_liouvillian(const EffectiveParams &e, const TransformedParams &t,
                                   Cutoffs cutoffs = {})
{
    return assemble_fock_model(cutoffs, transformed_hamiltonian_terms(e, t),
                               transformed_dissipators(e, t));
}

inline Eigen::MatrixXcd apply_liouvillian(const FockModel &m, const Eigen::MatrixXcd &rho)
{
    const Eigen::VectorXcd out = m.liouvillian * detail::vec_row_major(rho);
    return detail::unvec_row_major(out, rho.rows());
}

enum class FockMethod
{
    /// GMRES on the jump map preconditioned by the exact Sylvester inverse
    krylov,
    /// direct sparse LU of the trace-replaced Liouvillian
    sparse_lu,
};

struct FockSolveOptions
{
    FockMethod method = FockMethod::krylov;
    double tail_threshold = 1e-6;
    /// Solve a second time with a different trace normalization and compare.
    bool uniqueness_probe = true;
    double uniqueness_tolerance = 1e-5;
    double residual_tolerance = 1e-8;  // relative to the largest rate
    double psd_tolerance = 1e-8;
    double krylov_tolerance = 1e-11;
    int krylov_restart = 100;
    int krylov_max_iterations = 3000;
    /// Starting point for the Krylov solve, e.g. the previous sweep point.
    std::optional<Eigen::MatrixXcd> initial_guess;
};

struct ReducedPopulations
{
    std::vector<double> mechanical;
    std::vector<double> atomic;
};

inline ReducedPopulations reduced_populations(const FockModel &m, const Eigen::MatrixXcd &rho)
{
    const int nb = m.cutoffs.mechanical;
    const int nc = m.cutoffs.atomic;
    ReducedPopulations out{std::vector<double>(nb, 0.0), std::vector<double>(nc, 0.0)};
    for (int i = 0; i < nb; ++i)
        for (int k = 0; k < nc; ++k) {
            const double p = rho(i * nc + k, i * nc + k).real();
            out.mechanical[i] += p;
            out.atomic[k] += p;
        }
    return out;
}

namespace detail {

inline Eigen::VectorXcd solve_trace_replaced(const FockModel &m, int diagonal)
{
    const int d = m.dimension();
    std::vector<Eigen::Triplet<complex>> trace_row;
    const Eigen::Index row = static_cast<Eigen::Index>(diagonal) * d + diagonal;
    for (int k = 0; k < d; ++k)
        trace_row.emplace_back(row, static_cast<Eigen::Index>(k) * d + k, complex{1.0, 0.0});
    SparseMatrixC A = replace_row(m.liouvillian, row, trace_row);
    A.makeCompressed();
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(d) * d);
    rhs(row) = 1.0;
    Eigen::SparseLU<SparseMatrixC, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw DegeneracyError("trace-constrained Liouvillian is singular: " + lu.lastErrorMessage());
    Eigen::VectorXcd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite())
        throw DegeneracyError("steady-state solve failed");
    return x;
}

} // namespace detail

namespace detail {
class JumpSylvesterOperator;
}
} // namespace hybridsq

namespace Eigen::internal {
template <>
struct traits<hybridsq::detail::JumpSylvesterOperator>
    : public traits<Eigen::SparseMatrix<std::complex<double>>>
{
};
} // namespace Eigen::internal

namespace hybridsq::detail {

/**
 * Writes L(rho) = K rho + rho K^dag + sum_j J_j rho J_j^dag with
 * K = -iH - 1/2 sum_j J_j^dag J_j. With S(rho) = K rho + rho K^dag, the
 * steady state is the fixed point of the trace-preserving map
 * T = -S^-1 (sum_j J_j . J_j^dag). This operator is
 * M(x) = x - T(x) + reference * Tr(x), which is nonsingular exactly when the
 * steady state is unique; M(rho) = reference then pins Tr rho = 1.
 *
 * When H conserves the parity of n_b + n_c, every jump flips it and the
 * unknown is restricted to the two parity-diagonal blocks. S is inverted by
 * Bartels-Stewart in the Schur basis of each block of K, where all Krylov
 * vectors live. When K has eigenvalues too close to the imaginary axis, a
 * multiple of the identity is added as an extra jump operator; it leaves L
 * unchanged and shifts the spectrum of K left.
 */
class JumpSylvesterOperator : public Eigen::EigenBase<JumpSylvesterOperator>
{
public:
    using Scalar = std::complex<double>;
    using RealScalar = double;
    using StorageIndex = int;
    enum {
        ColsAtCompileTime = Eigen::Dynamic,
        MaxColsAtCompileTime = Eigen::Dynamic,
        IsRowMajor = false
    };

    JumpSylvesterOperator(const FockModel &m, const Eigen::MatrixXcd &reference)
        : n_(m.dimension())
    {
        const LadderSet ops(m.cutoffs);
        std::map<Ladder, double> merged;
        for (const auto &diss : m.dissipator_spec)
            if (diss.rate > 0.0)
                merged[diss.jump] += diss.rate;
        if (merged.empty())
            throw DegeneracyError("no dissipation: every state is stationary");
        Eigen::MatrixXcd K = complex{0.0, -1.0} * Eigen::MatrixXcd(m.hamiltonian);
        double max_rate = 0.0;
        for (const auto &[ladder, rate] : merged) {
            jumps_.push_back(std::sqrt(rate) * ops(ladder));
            const SparseMatrixC JdJ = SparseMatrixC(jumps_.back().adjoint()) * jumps_.back();
            K -= 0.5 * Eigen::MatrixXcd(JdJ);
            max_rate = std::max(max_rate, rate);
        }

        const int nc = m.cutoffs.atomic;
        auto parity = [nc](Eigen::Index i) { return (i / nc + i % nc) % 2; };
        bool conserved = true;
        for (int k = 0; k < m.hamiltonian.outerSize() && conserved; ++k)
            for (SparseMatrixC::InnerIterator it(m.hamiltonian, k); it; ++it)
                if (parity(it.row()) != parity(it.col())) {
                    conserved = false;
                    break;
                }
        if (conserved) {
            sectors_.resize(2);
            for (int i = 0; i < n_; ++i)
                sectors_[parity(i)].index.push_back(i);
        } else {
            sectors_.resize(1);
            for (int i = 0; i < n_; ++i)
                sectors_[0].index.push_back(i);
        }

        auto decompose = [&] {
            double margin = -std::numeric_limits<double>::infinity();
            for (auto &sec : sectors_) {
                const auto &idx = sec.index;
                Eigen::ComplexSchur<Eigen::MatrixXcd> schur(K(idx, idx));
                if (schur.info() != Eigen::Success)
                    throw ConvergenceError("Schur decomposition of the no-jump generator failed",
                                           0.0, 0.0);
                sec.U = schur.matrixU();
                sec.R = schur.matrixT();
                margin = std::max(margin, sec.R.diagonal().real().maxCoeff());
            }
            return margin;
        };
        if (decompose() > -1e-9 * max_rate) {
            shift_ = max_rate;
            K.diagonal().array() -= 0.5 * shift_;
            decompose();
        }
        Eigen::Index offset = 0;
        for (auto &sec : sectors_) {
            sec.offset = offset;
            offset += static_cast<Eigen::Index>(sec.index.size() * sec.index.size());
        }
        size_ = offset;
        reference_ = to_schur(reference);
    }

    Eigen::Index rows() const { return size_; }
    Eigen::Index cols() const { return size_; }

    template <class Rhs>
    Eigen::Product<JumpSylvesterOperator, Rhs, Eigen::AliasFreeProduct>
    operator*(const Eigen::MatrixBase<Rhs> &x) const
    {
        return {*this, x.derived()};
    }

    /// Parity blocks of a Fock-basis operator, each rotated to its Schur basis.
    Eigen::VectorXcd to_schur(const Eigen::MatrixXcd &rho) const
    {
        Eigen::VectorXcd v(size_);
        for (const auto &sec : sectors_) {
            const auto n = static_cast<Eigen::Index>(sec.index.size());
            Eigen::Map<Eigen::MatrixXcd>(v.data() + sec.offset, n, n) =
                sec.U.adjoint() * rho(sec.index, sec.index) * sec.U;
        }
        return v;
    }

    /// Block-diagonal Fock-basis operator from a Krylov vector.
    Eigen::MatrixXcd to_fock(const Eigen::VectorXcd &v) const
    {
        Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n_, n_);
        for (const auto &sec : sectors_) {
            const auto n = static_cast<Eigen::Index>(sec.index.size());
            const Eigen::Map<const Eigen::MatrixXcd> x(v.data() + sec.offset, n, n);
            rho(sec.index, sec.index) = sec.U * x * sec.U.adjoint();
        }
        return rho;
    }

    const Eigen::VectorXcd &reference() const { return reference_; }

    Eigen::VectorXcd apply(const Eigen::VectorXcd &v) const
    {
        const Eigen::MatrixXcd xf = to_fock(v);
        Eigen::MatrixXcd jumped = Eigen::MatrixXcd::Zero(n_, n_);
        for (const auto &J : jumps_) {
            const Eigen::MatrixXcd half = J * xf;
            jumped.noalias() += (J * half.adjoint()).adjoint();
        }
        Eigen::VectorXcd out = to_schur(jumped);
        if (shift_ > 0.0)
            out += shift_ * v;
        complex trace{0.0, 0.0};
        for (const auto &sec : sectors_) {
            const auto n = static_cast<Eigen::Index>(sec.index.size());
            Eigen::Map<Eigen::MatrixXcd> block(out.data() + sec.offset, n, n);
            block = solve_sylvester(sec.R, block);
            trace += Eigen::Map<const Eigen::MatrixXcd>(v.data() + sec.offset, n, n).trace();
        }
        out += v;
        out += trace * reference_;
        return out;
    }

private:
    struct Sector
    {
        std::vector<int> index;
        Eigen::MatrixXcd U, R;
        Eigen::Index offset = 0;
    };

    /// X with R X + X R^dag = C, R upper triangular.
    static Eigen::MatrixXcd solve_sylvester(const Eigen::MatrixXcd &R, const Eigen::MatrixXcd &C)
    {
        const auto n = R.rows();
        Eigen::MatrixXcd X(n, n);
        Eigen::MatrixXcd shifted = R;
        for (Eigen::Index j = n - 1; j >= 0; --j) {
            Eigen::VectorXcd rhs = C.col(j);
            const Eigen::Index tail = n - 1 - j;
            if (tail > 0)
                rhs.noalias() -= X.rightCols(tail) * R.row(j).tail(tail).adjoint();
            shifted.diagonal() = R.diagonal().array() + std::conj(R(j, j));
            X.col(j) = shifted.triangularView<Eigen::Upper>().solve(rhs);
        }
        return X;
    }

    int n_;
    Eigen::Index size_ = 0;
    double shift_ = 0.0;
    std::vector<SparseMatrixC> jumps_;
    std::vector<Sector> sectors_;
    Eigen::VectorXcd reference_;
};

} // namespace hybridsq::detail

namespace Eigen::internal {
template <class Rhs>
struct generic_product_impl<hybridsq::detail::JumpSylvesterOperator, Rhs, SparseShape,
                            DenseShape, GemvProduct>
    : generic_product_impl_base<hybridsq::detail::JumpSylvesterOperator, Rhs,
                                generic_product_impl<hybridsq::detail::JumpSylvesterOperator, Rhs>>
{
    using Scalar = typename Product<hybridsq::detail::JumpSylvesterOperator, Rhs>::Scalar;

    template <class Dest>
    static void scaleAndAddTo(Dest &dst, const hybridsq::detail::JumpSylvesterOperator &lhs,
                              const Rhs &rhs, const Scalar &alpha)
    {
        dst.noalias() += alpha * lhs.apply(rhs);
    }
};
} // namespace Eigen::internal

namespace hybridsq {
namespace detail {

struct KrylovResult
{
    Eigen::MatrixXcd rho;
    int iterations = 0;
};

inline KrylovResult solve_krylov(const FockModel &m, const Eigen::MatrixXcd &reference,
                                 const std::optional<Eigen::MatrixXcd> &guess,
                                 const FockSolveOptions &opt)
{
    const int d = m.dimension();
    const JumpSylvesterOperator op(m, reference);
    Eigen::GMRES<JumpSylvesterOperator, Eigen::IdentityPreconditioner> gmres;
    gmres.set_restart(opt.krylov_restart);
    gmres.setTolerance(opt.krylov_tolerance);
    gmres.setMaxIterations(opt.krylov_max_iterations);
    gmres.compute(op);
    Eigen::VectorXcd x;
    if (guess && guess->rows() == d && guess->cols() == d)
        x = gmres.solveWithGuess(op.reference(), op.to_schur(*guess));
    else
        x = gmres.solve(op.reference());
    if (gmres.info() != Eigen::Success || !x.allFinite()) {
        std::ostringstream msg;
        msg << "steady-state GMRES stopped after " << gmres.iterations()
            << " iterations at relative residual " << gmres.error();
        throw ConvergenceError(msg.str(), static_cast<double>(gmres.iterations()),
                               gmres.error());
    }
    return {op.to_fock(x), static_cast<int>(gmres.iterations())};
}

} // namespace detail

/**
 * Solves L(rho) = 0 with Tr rho = 1. The default Krylov method and the
 * sparse-LU method (one diagonal-element row of L replaced by the trace
 * functional) give the same state. The result is Hermitized, negative
 * eigenvalues within tolerance are clipped, and the top-level occupation is
 * recorded as tail_population.
 */
inline FockModel solve_steady(FockModel m, const FockSolveOptions &opt = {})
{
    const int d = m.dimension();
    Eigen::MatrixXcd rho;
    std::optional<Eigen::MatrixXcd> probe;
    if (opt.method == FockMethod::sparse_lu) {
        rho = detail::unvec_row_major(detail::solve_trace_replaced(m, 0), d);
        if (opt.uniqueness_probe)
            probe = detail::unvec_row_major(detail::solve_trace_replaced(m, d - 1), d);
    } else {
        const Eigen::MatrixXcd uniform = Eigen::MatrixXcd::Identity(d, d) / static_cast<double>(d);
        rho = detail::solve_krylov(m, uniform, opt.initial_guess, opt).rho;
        if (opt.uniqueness_probe) {
            // Full rank, so some jump acts on it even when every jump lowers.
            Eigen::VectorXd ramp = Eigen::VectorXd::LinSpaced(d, 1.0, static_cast<double>(d));
            ramp /= ramp.sum();
            const Eigen::MatrixXcd reference = ramp.cast<complex>().asDiagonal();
            probe = detail::solve_krylov(m, reference, std::nullopt, opt).rho;
        }
    }
    if (probe) {
        const double gap = (rho - *probe).cwiseAbs().maxCoeff();
        if (!(gap <= opt.uniqueness_tolerance)) {
            std::ostringstream msg;
            msg << "steady state is not unique: two trace normalizations give states "
                   "differing by "
                << gap;
            throw DegeneracyError(msg.str());
        }
    }

    const double raw_asym = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (raw_asym > 1e-6)
        m.warnings.push_back("raw steady state far from Hermitian (" + std::to_string(raw_asym) + ")");
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < 0.0) {
        if (min_eig < -opt.psd_tolerance) {
            std::ostringstream msg;
            msg << "steady state has eigenvalue " << min_eig << " below -" << opt.psd_tolerance;
            m.warnings.push_back(msg.str());
        } else {
            const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
            rho = es.eigenvectors() * clipped.cast<complex>().asDiagonal() *
                  es.eigenvectors().adjoint();
            rho = 0.5 * (rho + rho.adjoint()).eval();
            rho /= rho.trace().real();
        }
    }

    const double rate = std::max(m.max_rate(), 1e-300);
    const double residual =
        (m.liouvillian * detail::vec_row_major(rho)).cwiseAbs().maxCoeff() / rate;
    if (residual > opt.residual_tolerance) {
        std::ostringstream msg;
        msg << "Liouvillian residual " << residual << " above tolerance";
        m.warnings.push_back(msg.str());
    }

    const auto pops = reduced_populations(m, rho);
    m.tail_population = std::max(pops.mechanical.back(), pops.atomic.back());
    if (*m.tail_population > opt.tail_threshold) {
        std::ostringstream msg;
        msg << "cutoff warning: top Fock level population " << *m.tail_population
            << " exceeds " << opt.tail_threshold;
        m.warnings.push_back(msg.str());
    }
    m.steady_rho = std::move(rho);
    return m;
}

struct FockObservables
{
    double phonons = 0.0;   // <b^dag b>
    double atomic = 0.0;    // <c^dag c>
    double x_mean = 0.0;    // <X>
    double x_variance = 0.0;
    double y_variance = 0.0;
};

inline FockObservables observables(const FockModel &m)
{
    if (!m.steady_rho)
        throw StateError("Fock model has no steady state; call solve_steady first");
    const auto &rho = *m.steady_rho;
    const int nb = m.cutoffs.mechanical;
    const int nc = m.cutoffs.atomic;

    Eigen::MatrixXcd rho_b = Eigen::MatrixXcd::Zero(nb, nb);
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j)
            for (int k = 0; k < nc; ++k)
                rho_b(i, j) += rho(i * nc + k, j * nc + k);

    const Eigen::MatrixXcd a = Eigen::MatrixXcd(detail::annihilation(nb));
    const Eigen::MatrixXcd ad = a.adjoint();
    const complex i{0.0, 1.0};
    const Eigen::MatrixXcd X = a + ad;
    const Eigen::MatrixXcd Y = i * (ad - a);
    auto expect = [&](const Eigen::MatrixXcd &op) { return (rho_b * op).trace().real(); };

    FockObservables o;
    o.phonons = expect(ad * a);
    o.x_mean = expect(X);
    o.x_variance = expect(X * X) - o.x_mean * o.x_mean;
    const double y_mean = expect(Y);
    o.y_variance = expect(Y * Y) - y_mean * y_mean;
    const auto pops = reduced_populations(m, rho);
    for (int k = 0; k < nc; ++k)
        o.atomic += k * pops.atomic[k];
    return o;
}

struct FockInvariantReport
{
    double hermiticity = 0.0;  // max |rho - rho^dag|
    double trace_error = 0.0;
    double min_eigenvalue = 0.0;
    double relative_residual = 0.0;

    bool ok() const
    {
        return hermiticity <= 1e-10 && trace_error <= 1e-10 && min_eigenvalue >= -1e-8 &&
               relative_residual <= 1e-8;
    }
};

inline FockInvariantReport check_invariants(const FockModel &m)
{
    if (!m.steady_rho)
        throw StateError("Fock model has no steady state");
    const auto &rho = *m.steady_rho;
    FockInvariantReport r;
    r.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    r.trace_error = std::abs(rho.trace() - complex{1.0, 0.0});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    r.relative_residual = (m.liouvillian * detail::vec_row_major(rho)).cwiseAbs().maxCoeff() /
                          std::max(m.max_rate(), 1e-300);
    return r;
}

struct AdaptiveCutoffOptions
{
    Cutoffs start{12, 12};
    int cap = 64;
    FockSolveOptions solve{};
};

/**
 * Solves with growing cutoffs: every mode whose top-level population
 * exceeds the tail threshold has its cutoff doubled, up to `cap`. Hitting
 * the cap with a heavy tail leaves a warning on the returned model.
 */
inline FockModel solve_adaptive(const std::function<FockModel(Cutoffs)> &build,
                                const AdaptiveCutoffOptions &opt = {})
{
    Cutoffs c = opt.start;
    for (;;) {
        FockModel m = solve_steady(build(c), opt.solve);
        const auto pops = reduced_populations(m, *m.steady_rho);
        const bool grow_b = pops.mechanical.back() > opt.solve.tail_threshold;
        const bool grow_c = pops.atomic.back() > opt.solve.tail_threshold;
        if (!grow_b && !grow_c)
            return m;
        Cutoffs next = c;
        if (grow_b)
            next.mechanical = std::min(2 * c.mechanical, opt.cap);
        if (grow_c)
            next.atomic = std::min(2 * c.atomic, opt.cap);
        if (next == c) {
            m.warnings.push_back("cutoff cap " + std::to_string(opt.cap) +
                                 " reached with tail above threshold");
            return m;
        }
        c = next;
    }
}

/// Diagonal populations of the steady state, one row per product state.
inline void write_populations_csv(std::ostream &os, const FockModel &m)
{
    if (!m.steady_rho)
        throw StateError("Fock model has no steady state");
    os << "n_mechanical,n_atomic,population\n" << std::setprecision(12);
    const int nc = m.cutoffs.atomic;
    for (int i = 0; i < m.cutoffs.mechanical; ++i)
        for (int k = 0; k < nc; ++k)
            os << i << ',' << k << ',' << (*m.steady_rho)(i * nc + k, i * nc + k).real() << '\n';
}

} // namespace hybridsq

#endif
