#ifndef VPAIR_DYNAMICS_HPP
#define VPAIR_DYNAMICS_HPP

#include "vpair/hilbert.hpp"
#include "vpair/model.hpp"

#include <nlohmann/json_fwd.hpp>

namespace vpair {

enum class PropagationMethod { spectral, scaled_squaring };

// Non-Hermitian generator of the no-emission evolution, with its spectral
// decomposition cached eagerly. The anti-Hermitian part encodes the
// conditional decay rates; all eigenvalues have non-positive imaginary part
// so the norm of a propagated state never grows.
//
// The spectral path is the primary evaluation route (dark-period waiting
// times span thousands of lifetimes, far beyond what stepwise integration
// can cover cheaply). When the eigenvector matrix is ill-conditioned
// (condition number above 1e8, possible near degeneracies of the collective
// decay rates) evaluation falls back to a scaled-squaring matrix
// exponential with time slicing.
class ConditionalGenerator {
  public:
    static ConditionalGenerator from_matrix(Mat h);

    int dim() const { return static_cast<int>(h_.rows()); }
    const Mat& matrix() const { return h_; }
    const Vec& eigenvalues() const { return eigenvalues_; }
    const Mat& eigenvectors() const { return eigenvectors_; }
    const Mat& eigenvectors_inv() const { return eigenvectors_inv_; }
    double eigenvector_condition() const { return eigenvector_condition_; }
    PropagationMethod method() const { return method_; }

    // Dissipative operator i(H - H^dagger); positive semidefinite for
    // physical parameters. <psi|Gamma|psi> is the instantaneous emission
    // rate of a normalized state.
    const Mat& gamma() const { return gamma_; }
    bool gamma_is_diagonal() const { return gamma_diagonal_; }
    const Eigen::VectorXd& gamma_diag() const { return gamma_diag_; }

    // U(t) = exp(-i H t) evaluated by the given method.
    Mat propagator(double t, PropagationMethod method) const;

  private:
    ConditionalGenerator() = default;

    Mat h_;
    Vec eigenvalues_;
    Mat eigenvectors_;
    Mat eigenvectors_inv_;
    Mat gamma_;
    Eigen::VectorXd gamma_diag_;
    bool gamma_diagonal_ = false;
    double eigenvector_condition_ = 0.0;
    PropagationMethod method_ = PropagationMethod::spectral;
};

// Conditional Hamiltonian of the two interacting V atoms in the Dicke
// basis (hbar = 1, rates in units of a3). Lasers off it is diagonal with
// decay rates {0, 0, 2a3, 0, 0, a3+C3, a3-C3, a3, a3} on
// {g, e2, e3, s12, a12, s13, a13, s23, a23}; the lasers couple
//   g <-> s12 <-> e2 and g <-> s13 <-> e3   at sqrt(2)/2 * omega_j,
//   s13 <-> s23, a13 <-> a23               at omega2 / 2,
//   s12 <-> s23                            at omega3 / 2,
//   a12 <-> a23                            at -omega3 / 2.
// Rejects kr < 0.1 when the interaction is on: the level shift Im C3
// diverges as kr^-3 and the regime is outside what the trajectory engine
// supports.
ConditionalGenerator build_h_cond(const ModelParams& params);

// 3x3 conditional Hamiltonian of one V atom (basis |1>,|2>,|3>), used for
// the noninteracting reference and the single-atom oracle.
ConditionalGenerator build_single_atom_h_cond(const ModelParams& params);

// Conditional no-emission evolution of one fixed initial state, with the
// spectral coefficients precomputed. survival(t) is the probability of
// seeing no photon up to t; emission_rate(t) = -d survival/dt is evaluated
// analytically from the propagated amplitudes (no numerical differencing).
class ConditionalEvolution {
  public:
    ConditionalEvolution(const ConditionalGenerator& gen,
                         const hilbert::StateVector& psi);

    Vec state_at(double t) const;  // non-normalized amplitudes
    double survival(double t) const;
    double emission_rate(double t) const;
    const ConditionalGenerator& generator() const { return *gen_; }

  private:
    const ConditionalGenerator* gen_;
    Vec psi0_;
    Vec coeff_;  // eigenvector-basis coefficients of psi0 (spectral path)
};

double no_photon_probability(const ConditionalGenerator& gen,
                             const hilbert::StateVector& psi, double t);
double waiting_time_density(const ConditionalGenerator& gen,
                            const hilbert::StateVector& psi, double t);
hilbert::StateVector propagate(const ConditionalGenerator& gen,
                               const hilbert::StateVector& psi, double t);

/// Debug dump: matrix entries, spectrum and condition diagnostics, with the
// basis ordering fixed by the hilbert module.
nlohmann::json generator_json(const ConditionalGenerator& gen);

}  // namespace vpair

#endif
