#ifndef VPAIR_ORACLE_HPP
#define VPAIR_ORACLE_HPP

#include "vpair/trajectory.hpp"

#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace vpair::oracle {

// Density-matrix evolution generated by a non-Hermitian Hamiltonian plus
// weighted jump channels:
//   L(rho) = -i (h rho - rho h+) + sum_c w_c J_c rho J_c+.
// With w_c J_c+ J_c summing to i(h - h+) this is trace preserving, and
// tr R(rho) dt is the photon detection probability in dt.
struct MasterEquation {
    Mat h;
    std::vector<JumpChannel> channels;
    int dim() const { return static_cast<int>(h.rows()); }
};

MasterEquation two_atom_master(const ModelParams& params);
// Single V atom, basis |1>,|2>,|3>, one decay channel 3 -> 1 at a3.
MasterEquation single_atom_v_master(const ModelParams& params);
// Resonantly driven two-level atom, basis |g>,|e>.
MasterEquation driven_two_level_master(double omega, double gamma);

Mat liouvillian_apply(const MasterEquation& me, const Mat& rho);
Mat reset_apply(const MasterEquation& me, const Mat& rho);
// Photon detection rate tr R(rho).
double photon_rate(const MasterEquation& me, const Mat& rho);

// Explicit dim^2 x dim^2 matrix acting on column-major vec(rho).
Mat liouvillian_matrix(const MasterEquation& me);

// Restriction to the index subset `keep`. Throws std::invalid_argument if
// the Hamiltonian or any jump channel maps the subset outside itself
// beyond tol (the restriction would not be invariant).
MasterEquation restrict_to(const MasterEquation& me,
                           const std::vector<int>& keep, double tol = 1e-12);

struct EvolveOptions {
    double abs_tol = 1e-11;
    double rel_tol = 1e-9;
    double initial_dt = 1e-2;
    // Most negative admissible density eigenvalue before aborting; larger
    // violations indicate a generator assembly bug, not integration error.
    double positivity_floor = -1e-8;
};

// Adaptive dormand-prince integration of drho/dt = L(rho). Positivity and
// trace are monitored along the way; violations abort with diagnostics.
Mat evolve_density(const MasterEquation& me, const Mat& rho0, double t,
                   const EvolveOptions& opts = {});

// Null vector of the vectorized Liouvillian, normalized to unit trace.
// Throws std::runtime_error when the null space is degenerate (disconnected
// sectors, e.g. omega2 = 0 unrestricted): restrict to a sector first.
Mat steady_state(const MasterEquation& me);

// Ensemble-averaged pure-state projector and per-entry sample variances at
// the grid times, reconstructed by deterministic replay. Reduction order is
// fixed by record index, so results are identical for any thread count.
struct TrajectoryMoments {
    std::vector<double> times;
    std::vector<Mat> mean;
    std::vector<Eigen::MatrixXd> var_re;
    std::vector<Eigen::MatrixXd> var_im;
    int n = 0;
};

TrajectoryMoments mean_trajectory_state(const std::vector<EmissionRecord>& records,
                                        const std::vector<double>& times,
                                        int threads = 0);

struct EnsembleCheck {
    bool pass = false;
    bool insufficient_stats = false;
    double max_abs_dev = 0.0;
    double max_z = 0.0;
    nlohmann::json report() const;

    std::vector<double> times;
    std::vector<double> max_dev_per_time;
    std::vector<Eigen::MatrixXd> z_per_time;
    int n = 0;
};

// Compares the trajectory ensemble against evolve_density entrywise with
// CLT error bars; passes when every z-score is below 4. Fewer than 100
// records sets insufficient_stats instead of judging.
EnsembleCheck ensemble_check(const std::vector<EmissionRecord>& records,
                             const std::vector<double>& times,
                             int threads = 0);

}  // namespace vpair::oracle

#endif
