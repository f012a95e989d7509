#ifndef VPAIR_HILBERT_HPP
#define VPAIR_HILBERT_HPP

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <string>
#include <vector>

namespace vpair {

using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

namespace hilbert {

// Two-atom state space: 3 levels per atom, 9 product states |j>|k>.
// The collective (Dicke) basis diagonalizes the lasers-off conditional
// dynamics:
//   g   = |1>|1>,  e2 = |2>|2>,  e3 = |3>|3>
//   s_jk = (|j>|k> + |k>|j>) / sqrt(2)
//   a_jk = (|j>|k> - |k>|j>) / (i sqrt(2))   (i.e. i|a_jk> is antisymmetric)
// The fixed ordering below is baked into every dump and serialization.
inline constexpr int dim = 9;

enum BasisIndex : int {
    idx_g = 0,
    idx_e2 = 1,
    idx_e3 = 2,
    idx_s12 = 3,
    idx_a12 = 4,
    idx_s13 = 5,
    idx_a13 = 6,
    idx_s23 = 7,
    idx_a23 = 8,
};

const std::array<std::string, dim>& basis_labels();
int basis_index(const std::string& label);  // throws on unknown label

// State in the Dicke basis. The conditional evolution is non-unitary, so
// amplitudes are not normalized in general; the squared norm is cached
// alongside (it is the no-photon probability during conditional evolution).
struct StateVector {
    Vec amp;
    double norm2 = 0.0;

    static StateVector from(Vec amplitudes);
    static StateVector basis_state(int index);
    static StateVector basis_state(const std::string& label);
    StateVector normalized() const;  // throws std::domain_error on zero norm
};

// Unitary change of basis. Columns of dicke_transform() are the Dicke
// states written in product coordinates (|j>|k> ordered with atom 1 as the
// slow index), so dicke = W^dagger * product.
const Mat& dicke_transform();
Vec product_to_dicke(const Vec& product_amplitudes);
Vec dicke_to_product(const Vec& dicke_amplitudes);
Mat operator_to_dicke(const Mat& product_operator);

// Lowering operator S_ij^- = |1><j| acting on atom i, as a 9x9 matrix in
// the Dicke basis. atom is 1 or 2, level is 2 or 3.
Mat sigma_minus(int atom, int level);
Mat sigma_plus(int atom, int level);

// The weak-driving dynamics decomposes into three non-connected subspaces:
//   0: {e2}                  (both atoms shelved, no emission)
//   1: {s12, a12, s23, a23}  (one shelved excitation, single intensity)
//   2: {g, s13, a13, e3}     (no shelved excitation, double intensity)
const std::array<std::vector<int>, 3>& subspace_indices();
Mat subspace_projector(int subspace);
double subspace_projection(const StateVector& psi, int subspace);

}  // namespace hilbert
}  // namespace vpair

#endif
