#include "vpair/hilbert.hpp"

#include <cmath>
#include <stdexcept>

namespace vpair {
namespace hilbert {

namespace {

constexpr std::complex<double> I(0.0, 1.0);

// Product index of |j>|k> with levels j,k in {1,2,3}.
int prod(int j, int k) { return 3 * (j - 1) + (k - 1); }

Mat build_dicke_transform() {
    Mat w = Mat::Zero(dim, dim);
    const double s = 1.0 / std::sqrt(2.0);
    w(prod(1, 1), idx_g) = 1.0;
    w(prod(2, 2), idx_e2) = 1.0;
    w(prod(3, 3), idx_e3) = 1.0;
    const std::array<std::pair<int, int>, 3> pairs = {{{1, 2}, {1, 3}, {2, 3}}};
    const std::array<std::pair<int, int>, 3> targets = {
        {{idx_s12, idx_a12}, {idx_s13, idx_a13}, {idx_s23, idx_a23}}};
    for (int n = 0; n < 3; ++n) {
        const auto [j, k] = pairs[n];
        const auto [si, ai] = targets[n];
        w(prod(j, k), si) = s;
        w(prod(k, j), si) = s;
        // a_jk = (|jk> - |kj>) / (i sqrt(2))
        w(prod(j, k), ai) = -I * s;
        w(prod(k, j), ai) = I * s;
    }
    return w;
}

}  // namespace

const std::array<std::string, dim>& basis_labels() {
    static const std::array<std::string, dim> labels = {
        "g", "e2", "e3", "s12", "a12", "s13", "a13", "s23", "a23"};
    return labels;
}

int basis_index(const std::string& label) {
    const auto& labels = basis_labels();
    for (int i = 0; i < dim; ++i)
        if (labels[i] == label) return i;
    throw std::invalid_argument("unknown basis label: " + label);
}

StateVector StateVector::from(Vec amplitudes) {
    StateVector psi;
    psi.norm2 = amplitudes.squaredNorm();
    psi.amp = std::move(amplitudes);
    return psi;
}

StateVector StateVector::basis_state(int index) {
    Vec v = Vec::Zero(dim);
    v(index) = 1.0;
    return from(std::move(v));
}

StateVector StateVector::basis_state(const std::string& label) {
    return basis_state(basis_index(label));
}

StateVector StateVector::normalized() const {
    if (norm2 <= 0.0)
        throw std::domain_error("cannot normalize a zero-norm state");
    return from(amp / std::sqrt(norm2));
}

const Mat& dicke_transform() {
    static const Mat w = build_dicke_transform();
    return w;
}

Vec product_to_dicke(const Vec& product_amplitudes) {
    return dicke_transform().adjoint() * product_amplitudes;
}

Vec dicke_to_product(const Vec& dicke_amplitudes) {
    return dicke_transform() * dicke_amplitudes;
}

Mat operator_to_dicke(const Mat& product_operator) {
    const Mat& w = dicke_transform();
    return w.adjoint() * product_operator * w;
}

Mat sigma_minus(int atom, int level) {
    if ((atom != 1 && atom != 2) || (level != 2 && level != 3))
        throw std::invalid_argument("sigma_minus: atom must be 1|2, level 2|3");
    Mat single = Mat::Zero(3, 3);
    single(0, level - 1) = 1.0;  // |1><level|
    const Mat id = Mat::Identity(3, 3);
    Mat op = Mat::Zero(dim, dim);
    // Kronecker product with atom 1 as the slow index.
    const Mat& a = (atom == 1) ? single : id;
    const Mat& b = (atom == 1) ? id : single;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            op.block(3 * r, 3 * c, 3, 3) = a(r, c) * b;
    return operator_to_dicke(op);
}

Mat sigma_plus(int atom, int level) {
    return sigma_minus(atom, level).adjoint();
}

const std::array<std::vector<int>, 3>& subspace_indices() {
    static const std::array<std::vector<int>, 3> subspaces = {{
        {idx_e2},
        {idx_s12, idx_a12, idx_s23, idx_a23},
        {idx_g, idx_s13, idx_a13, idx_e3},
    }};
    return subspaces;
}

Mat subspace_projector(int subspace) {
    Mat p = Mat::Zero(dim, dim);
    for (int i : subspace_indices().at(subspace)) p(i, i) = 1.0;
    return p;
}

double subspace_projection(const StateVector& psi, int subspace) {
    if (psi.norm2 <= 0.0)
        throw std::domain_error("subspace_projection: zero-norm state");
    double sum = 0.0;
    for (int i : subspace_indices().at(subspace)) sum += std::norm(psi.amp(i));
    return sum / psi.norm2;
}

}  // namespace hilbert
}  // namespace vpair
