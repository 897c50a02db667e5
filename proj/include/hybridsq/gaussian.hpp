#ifndef HYBRIDSQ_GAUSSIAN_HPP
#define HYBRIDSQ_GAUSSIAN_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridsq/effective_model.hpp"
#include "hybridsq/errors.hpp"
#include "hybridsq/model.hpp"
#include "hybridsq/steady_state.hpp"

namespace hybridsq {

namespace mode_label {
inline const std::string cavity = "cavity";
inline const std::string mechanical = "mechanical";
inline const std::string atomic = "atomic";
} // namespace mode_label

/**
 * Linear Gaussian model over quadratures (X_1, Y_1, ..., X_n, Y_n) with
 * X = o + o^dag and Y = i(o^dag - o), so [X, Y] = 2i and vacuum has unit
 * variance. `covariance` holds the symmetrized second moments
 * V_ij = <{R_i, R_j}>/2 once solve_lyapunov has run.
 */
struct GaussianModel
{
    std::vector<std::string> mode_labels;
    Eigen::MatrixXd drift;
    Eigen::MatrixXd diffusion;
    std::optional<Eigen::MatrixXd> covariance;

    int modes() const { return static_cast<int>(mode_labels.size()); }

    int index_of(const std::string &label) const
    {
        const auto it = std::find(mode_labels.begin(), mode_labels.end(), label);
        if (it == mode_labels.end())
            throw StateError("model has no mode '" + label + "'");
        return static_cast<int>(it - mode_labels.begin());
    }
};

/**
 * Accumulates quantum Langevin equations
 *
 *   d/dt o_k = sum_j (P_kj o_j + Q_kj o_j^dag) + noise
 *
 * and converts them into the quadrature drift/diffusion pair.
 */
class LangevinSystem
{
public:
    explicit LangevinSystem(std::vector<std::string> labels)
        : labels_(std::move(labels)),
          P_(Eigen::MatrixXcd::Zero(size(), size())),
          Q_(Eigen::MatrixXcd::Zero(size(), size())),
          noise_(Eigen::VectorXd::Zero(size()))
    {
    }

    int size() const { return static_cast<int>(labels_.size()); }

    /// d/dt o_k += c o_j
    LangevinSystem &add(int k, int j, complex c)
    {
        P_(k, j) += c;
        return *this;
    }

    /// d/dt o_k += c o_j^dag
    LangevinSystem &add_conj(int k, int j, complex c)
    {
        Q_(k, j) += c;
        return *this;
    }

    /// Markovian bath acting as L[o_k] at rate `down` and L[o_k^dag] at rate
    /// `up`: damping (down - up)/2 and quadrature diffusion down + up.
    LangevinSystem &add_bath(int k, double down, double up)
    {
        P_(k, k) -= 0.5 * (down - up);
        noise_(k) += down + up;
        return *this;
    }

    LangevinSystem &add_damping(int k, double rate)
    {
        P_(k, k) -= 0.5 * rate;
        return *this;
    }

    LangevinSystem &add_diffusion(int k, double amount)
    {
        noise_(k) += amount;
        return *this;
    }

    GaussianModel to_model() const
    {
        const int n = size();
        GaussianModel m;
        m.mode_labels = labels_;
        m.drift = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        m.diffusion = Eigen::MatrixXd::Zero(2 * n, 2 * n);
        for (int k = 0; k < n; ++k) {
            for (int j = 0; j < n; ++j) {
                // o_j = (X_j + i Y_j)/2, o_j^dag = (X_j - i Y_j)/2;
                // dX_k/dt = 2 Re(do_k/dt), dY_k/dt = 2 Im(do_k/dt).
                const complex s = P_(k, j) + Q_(k, j);
                const complex d = P_(k, j) - Q_(k, j);
                m.drift(2 * k, 2 * j) = s.real();
                m.drift(2 * k, 2 * j + 1) = -d.imag();
                m.drift(2 * k + 1, 2 * j) = s.imag();
                m.drift(2 * k + 1, 2 * j + 1) = d.real();
            }
            m.diffusion(2 * k, 2 * k) = noise_(k);
            m.diffusion(2 * k + 1, 2 * k + 1) = noise_(k);
        }
        return m;
    }

private:
    std::vector<std::string> labels_;
    Eigen::MatrixXcd P_;
    Eigen::MatrixXcd Q_;
    Eigen::VectorXd noise_;
};

/// Cavity + mechanics + atoms, linearized around the classical amplitudes.
inline GaussianModel build_three_mode(const PhysicalParams &p, const LinearizedParams &lin)
{
    const complex i{0.0, 1.0};
    enum { a = 0, b = 1, c = 2 };
    LangevinSystem sys({mode_label::cavity, mode_label::mechanical, mode_label::atomic});
    sys.add(a, a, i * lin.Delta_a)
        .add(a, c, -i * p.g0_collective)
        .add(a, b, i * lin.G)
        .add_conj(a, b, i * lin.G)
        .add_bath(a, p.kappa, 0.0);
    sys.add(b, b, -i * lin.omega_m_tilde)
        .add(b, a, i * lin.G)
        .add_conj(b, a, i * lin.G)
        .add_conj(b, b, -2.0 * i * lin.Lambda)
        .add_bath(b, p.gamma_m * (p.n_th + 1.0), p.gamma_m * p.n_th);
    sys.add(c, c, i * p.delta_c)
        .add(c, a, -i * p.g0_collective)
        .add_bath(c, p.gamma_c, 0.0);
    return sys.to_model();
}

/// Which rate feeds the atomic-mode diffusion of the eliminated model.
enum class AtomicNoise
{
    effective,  // gamma_eff, matching the effective master equation
    bare,       // gamma_c, as the eliminated Langevin equation is written
};

inline GaussianModel build_effective_two_mode(const EffectiveParams &e, const PhysicalParams &p,
                                              AtomicNoise noise = AtomicNoise::effective)
{
    const complex i{0.0, 1.0};
    enum { b = 0, c = 1 };
    LangevinSystem sys({mode_label::mechanical, mode_label::atomic});
    sys.add(b, b, -i * e.omega_m_tilde_prime)
        .add(b, c, i * e.G_eff)
        .add_conj(b, c, i * e.G_eff)
        .add_conj(b, b, -2.0 * i * e.Lambda_prime)
        .add_bath(b, p.gamma_m * (p.n_th + 1.0), p.gamma_m * p.n_th);
    sys.add(c, c, i * e.Delta_eff)
        .add(c, b, i * e.G_eff)
        .add_conj(c, b, i * e.G_eff)
        .add_damping(c, e.gamma_eff)
        .add_diffusion(c, noise == AtomicNoise::effective ? e.gamma_eff : p.gamma_c);
    return sys.to_model();
}

/// Squeezed-frame model: plain beam-splitter/counter-rotating coupling at
/// G', mechanical frequency omega_m', and the four reshaped bath weights.
inline GaussianModel build_transformed_two_mode(const EffectiveParams &e,
                                                const TransformedParams &t)
{
    const complex i{0.0, 1.0};
    enum { b = 0, c = 1 };
    LangevinSystem sys({mode_label::mechanical, mode_label::atomic});
    sys.add(b, b, -i * t.omega_m_prime)
        .add(b, c, i * t.G_prime)
        .add_conj(b, c, i * t.G_prime)
        .add_bath(b, t.lowering_rate(), t.raising_rate());
    sys.add(c, c, i * e.Delta_eff)
        .add(c, b, i * t.G_prime)
        .add_conj(c, b, i * t.G_prime)
        .add_bath(c, e.gamma_eff, 0.0);
    return sys.to_model();
}

inline std::vector<complex> drift_eigenvalues(const GaussianModel &m)
{
    Eigen::EigenSolver<Eigen::MatrixXd> es(m.drift, false);
    std::vector<complex> out(es.eigenvalues().data(),
                             es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(out.begin(), out.end(), [](complex x, complex y) {
        return x.real() != y.real() ? x.real() > y.real() : x.imag() > y.imag();
    });
    return out;
}

inline double max_real_eigenvalue(const GaussianModel &m)
{
    const auto ev = drift_eigenvalues(m);
    return ev.empty() ? -std::numeric_limits<double>::infinity() : ev.front().real();
}

inline constexpr double stability_margin = 1e-12;

inline bool is_stable(const GaussianModel &m) { return max_real_eigenvalue(m) < -stability_margin; }

/**
 * Steady-state covariance from A V + V A^T + D = 0, solved as the
 * Kronecker-vectorized linear system (I (x) A + A (x) I) vec V = -vec D.
 */
inline GaussianModel solve_lyapunov(GaussianModel m)
{
    const auto ev = drift_eigenvalues(m);
    std::vector<complex> offending;
    for (const auto &z : ev)
        if (z.real() >= -stability_margin)
            offending.push_back(z);
    if (!offending.empty()) {
        std::ostringstream msg;
        msg << "drift matrix is not Hurwitz; " << offending.size()
            << " eigenvalue(s) with Re >= " << -stability_margin << ", largest Re = "
            << offending.front().real();
        throw InstabilityError(msg.str(), std::move(offending));
    }
    const Eigen::Index n = m.drift.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd K(n * n, n * n);
    K.setZero();
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            // column-major vec: (I (x) A) + (A (x) I)
            K.block(r * n, c * n, n, n) += I(r, c) * m.drift;
            K.block(r * n, c * n, n, n) += m.drift(r, c) * I;
        }
    }
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(m.diffusion.data(), n * n);
    const Eigen::VectorXd v = K.fullPivLu().solve(rhs);
    Eigen::MatrixXd V = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
    V = 0.5 * (V + V.transpose()).eval();

    const double residual = (m.drift * V + V * m.drift.transpose() + m.diffusion).norm();
    const double scale = std::max(m.diffusion.norm(), 1e-300);
    if (residual > 1e-9 * scale && residual > 1e-300)
        throw ConvergenceError("Lyapunov solve residual above 1e-9 |D|", 0.0, residual / scale);
    m.covariance = std::move(V);
    return m;
}

inline const Eigen::MatrixXd &require_covariance(const GaussianModel &m)
{
    if (!m.covariance)
        throw StateError("Gaussian model has no covariance; call solve_lyapunov first");
    return *m.covariance;
}

struct QuadratureVariances
{
    double x = 0.0;
    double y = 0.0;
};

inline QuadratureVariances quadrature_variances(const GaussianModel &m, const std::string &label)
{
    const auto &V = require_covariance(m);
    const int k = m.index_of(label);
    return {V(2 * k, 2 * k), V(2 * k + 1, 2 * k + 1)};
}

/// <dX^2> of the mechanical mode; the fluctuations are zero-mean.
inline double mechanical_variance(const GaussianModel &m)
{
    return quadrature_variances(m, mode_label::mechanical).x;
}

/// Phonon number <o^dag o> of a mode, (V_XX + V_YY - 2)/4.
inline double mode_occupation(const GaussianModel &m, const std::string &label)
{
    const auto q = quadrature_variances(m, label);
    return (q.x + q.y - 2.0) / 4.0;
}

inline Eigen::MatrixXd symplectic_form(int modes)
{
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * modes, 2 * modes);
    for (int k = 0; k < modes; ++k) {
        omega(2 * k, 2 * k + 1) = 1.0;
        omega(2 * k + 1, 2 * k) = -1.0;
    }
    return omega;
}

struct PhysicalityReport
{
    double min_uncertainty_eigenvalue = 0.0;  // of V + i Omega
    double min_diffusion_eigenvalue = 0.0;
    double asymmetry = 0.0;                    // |V - V^T|_max
    std::vector<double> uncertainty_products;  // <dX^2><dY^2> per mode
    double min_variance = 0.0;

    bool ok(double tol = 1e-9) const
    {
        if (min_uncertainty_eigenvalue < -tol || asymmetry > tol || !(min_variance > 0.0))
            return false;
        for (double prod : uncertainty_products)
            if (prod < 1.0 - tol)
                return false;
        return true;
    }
};

inline PhysicalityReport check_physicality(const GaussianModel &m)
{
    const auto &V = require_covariance(m);
    PhysicalityReport r;
    const Eigen::MatrixXcd H =
        V.cast<complex>() + complex{0.0, 1.0} * symplectic_form(m.modes()).cast<complex>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
    r.min_uncertainty_eigenvalue = es.eigenvalues().minCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ds(m.diffusion, Eigen::EigenvaluesOnly);
    r.min_diffusion_eigenvalue = ds.eigenvalues().minCoeff();
    r.asymmetry = (V - V.transpose()).cwiseAbs().maxCoeff();
    r.min_variance = V.diagonal().minCoeff();
    for (int k = 0; k < m.modes(); ++k)
        r.uncertainty_products.push_back(V(2 * k, 2 * k) * V(2 * k + 1, 2 * k + 1));
    return r;
}

inline std::vector<std::string> quadrature_labels(const GaussianModel &m)
{
    std::vector<std::string> out;
    for (const auto &l : m.mode_labels) {
        out.push_back("X_" + l);
        out.push_back("Y_" + l);
    }
    return out;
}

/// Row-major CSV with a header row of quadrature labels.
inline void write_covariance_csv(std::ostream &os, const GaussianModel &m)
{
    const auto &V = require_covariance(m);
    const auto labels = quadrature_labels(m);
    os << "quadrature";
    for (const auto &l : labels)
        os << ',' << l;
    os << '\n';
    os << std::setprecision(12);
    for (Eigen::Index r = 0; r < V.rows(); ++r) {
        os << labels[r];
        for (Eigen::Index c = 0; c < V.cols(); ++c)
            os << ',' << V(r, c);
        os << '\n';
    }
}

inline void write_eigenvalues_csv(std::ostream &os, const GaussianModel &m)
{
    os << "index,real,imag\n" << std::setprecision(12);
    const auto ev = drift_eigenvalues(m);
    for (std::size_t k = 0; k < ev.size(); ++k)
        os << k << ',' << ev[k].real() << ',' << ev[k].imag() << '\n';
}

} // namespace hybridsq

#endif
