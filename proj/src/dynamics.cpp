#include "vpair/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace vpair {

namespace {

constexpr std::complex<double> I(0.0, 1.0);
constexpr double kConditionLimit = 1e8;

// Slice length for the scaled-squaring fallback; exp(-iH dt) stays well
// scaled when ||H|| dt is moderate, and the slices are contractive so
// repeated squaring does not amplify error.
constexpr double kSliceLength = 32.0;

Mat integer_power(Mat base, long exponent) {
    Mat result = Mat::Identity(base.rows(), base.cols());
    while (exponent > 0) {
        if (exponent & 1) result = result * base;
        base = base * base;
        exponent >>= 1;
    }
    return result;
}

}  // namespace

ConditionalGenerator ConditionalGenerator::from_matrix(Mat h) {
    ConditionalGenerator gen;
    gen.h_ = std::move(h);
    const int n = gen.dim();

    gen.gamma_ = I * (gen.h_ - gen.h_.adjoint());
    gen.gamma_diag_ = gen.gamma_.diagonal().real();
    double offdiag = 0.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            if (r != c) offdiag += std::norm(gen.gamma_(r, c));
    gen.gamma_diagonal_ = offdiag < 1e-24;

    Eigen::ComplexEigenSolver<Mat> solver(gen.h_, true);
    if (solver.info() == Eigen::Success) {
        gen.eigenvalues_ = solver.eigenvalues();
        gen.eigenvectors_ = solver.eigenvectors();
        Eigen::JacobiSVD<Mat> svd(gen.eigenvectors_);
        const double smin = svd.singularValues()(n - 1);
        gen.eigenvector_condition_ =
            smin > 0.0 ? svd.singularValues()(0) / smin
                       : std::numeric_limits<double>::infinity();
        if (gen.eigenvector_condition_ < kConditionLimit) {
            gen.eigenvectors_inv_ = gen.eigenvectors_.inverse();
            gen.method_ = PropagationMethod::spectral;
            return gen;
        }
    } else {
        gen.eigenvector_condition_ = std::numeric_limits<double>::infinity();
    }
    gen.method_ = PropagationMethod::scaled_squaring;
    return gen;
}

Mat ConditionalGenerator::propagator(double t, PropagationMethod method) const {
    if (t < 0.0) throw std::domain_error("propagator: t must be non-negative");
    if (method == PropagationMethod::spectral) {
        if (method_ != PropagationMethod::spectral)
            throw std::logic_error("spectral propagation unavailable for this generator");
        Vec phases(dim());
        for (int m = 0; m < dim(); ++m)
            phases(m) = std::exp(-I * eigenvalues_(m) * t);
        return eigenvectors_ * phases.asDiagonal() * eigenvectors_inv_;
    }
    const long n_slices = std::max(1L, static_cast<long>(std::ceil(t / kSliceLength)));
    const Mat slice = (-I * h_ * (t / static_cast<double>(n_slices))).exp();
    return integer_power(slice, n_slices);
}

ConditionalGenerator build_h_cond(const ModelParams& params) {
    params.validate();
    if (params.include_c3 && params.kr < 0.1)
        throw std::domain_error(
            "build_h_cond: kr < 0.1 rejected (diverging dipole-dipole level shift)");

    using namespace hilbert;
    const double a3 = params.a3;
    const std::complex<double> c3 =
        params.include_c3 ? coupling_constant(params.kr, params.theta3, a3)
                          : std::complex<double>(0.0, 0.0);
    if (std::abs(c3.real()) > a3 * (1.0 + 1e-12))
        throw std::runtime_error("build_h_cond: |Re C3| > a3, negative collective decay rate");

    Mat h = Mat::Zero(dim, dim);
    // Dissipative diagonal, (1/2i) * rate = -i/2 * rate. Im C3 lands in the
    // Hermitian part as opposite level shifts of s13 and a13.
    h(idx_e3, idx_e3) = -I * a3;
    h(idx_s13, idx_s13) = -0.5 * I * (a3 + c3);
    h(idx_a13, idx_a13) = -0.5 * I * (a3 - c3);
    h(idx_s23, idx_s23) = -0.5 * I * a3;
    h(idx_a23, idx_a23) = -0.5 * I * a3;

    const double o2 = params.omega2, o3 = params.omega3;
    const double rt2 = std::sqrt(2.0);
    auto couple = [&h](int a, int b, double value) {
        h(a, b) += value;
        h(b, a) += value;
    };
    couple(idx_g, idx_s12, rt2 * o2 / 2.0);
    couple(idx_s12, idx_e2, rt2 * o2 / 2.0);
    couple(idx_g, idx_s13, rt2 * o3 / 2.0);
    couple(idx_s13, idx_e3, rt2 * o3 / 2.0);
    couple(idx_s13, idx_s23, o2 / 2.0);
    couple(idx_a13, idx_a23, o2 / 2.0);
    couple(idx_s12, idx_s23, o3 / 2.0);
    couple(idx_a12, idx_a23, -o3 / 2.0);

    return ConditionalGenerator::from_matrix(std::move(h));
}

ConditionalGenerator build_single_atom_h_cond(const ModelParams& params) {
    params.validate();
    Mat h = Mat::Zero(3, 3);
    h(2, 2) = -0.5 * I * params.a3;
    h(0, 1) = h(1, 0) = params.omega2 / 2.0;
    h(0, 2) = h(2, 0) = params.omega3 / 2.0;
    return ConditionalGenerator::from_matrix(std::move(h));
}

ConditionalEvolution::ConditionalEvolution(const ConditionalGenerator& gen,
                                           const hilbert::StateVector& psi)
    : gen_(&gen), psi0_(psi.amp) {
    if (gen.method() == PropagationMethod::spectral)
        coeff_ = gen.eigenvectors_inv() * psi0_;
}

Vec ConditionalEvolution::state_at(double t) const {
    if (t < 0.0) throw std::domain_error("state_at: t must be non-negative");
    if (gen_->method() == PropagationMethod::spectral) {
        const Vec& lambda = gen_->eigenvalues();
        Vec weighted(coeff_.size());
        for (int m = 0; m < coeff_.size(); ++m)
            weighted(m) = coeff_(m) * std::exp(-I * lambda(m) * t);
        return gen_->eigenvectors() * weighted;
    }
    return gen_->propagator(t, PropagationMethod::scaled_squaring) * psi0_;
}

double ConditionalEvolution::survival(double t) const {
    return state_at(t).squaredNorm();
}

double ConditionalEvolution::emission_rate(double t) const {
    const Vec psi = state_at(t);
    if (gen_->gamma_is_diagonal()) {
        double rate = 0.0;
        for (int i = 0; i < psi.size(); ++i)
            rate += gen_->gamma_diag()(i) * std::norm(psi(i));
        return rate;
    }
    return (psi.adjoint() * gen_->gamma() * psi)(0).real();
}

double no_photon_probability(const ConditionalGenerator& gen,
                             const hilbert::StateVector& psi, double t) {
    if (t < 0.0) throw std::domain_error("no_photon_probability: t must be non-negative");
    return ConditionalEvolution(gen, psi).survival(t);
}

double waiting_time_density(const ConditionalGenerator& gen,
                            const hilbert::StateVector& psi, double t) {
    if (t < 0.0) throw std::domain_error("waiting_time_density: t must be non-negative");
    return ConditionalEvolution(gen, psi).emission_rate(t);
}

hilbert::StateVector propagate(const ConditionalGenerator& gen,
                               const hilbert::StateVector& psi, double t) {
    if (t < 0.0) throw std::domain_error("propagate: t must be non-negative");
    return hilbert::StateVector::from(ConditionalEvolution(gen, psi).state_at(t));
}

nlohmann::json generator_json(const ConditionalGenerator& gen) {
    nlohmann::json j;
    const int n = gen.dim();
    if (n == hilbert::dim) {
        j["basis"] = hilbert::basis_labels();
    }
    auto cplx = [](const std::complex<double>& z) {
        return nlohmann::json::array({z.real(), z.imag()});
    };
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < n; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < n; ++c) row.push_back(cplx(gen.matrix()(r, c)));
        rows.push_back(row);
    }
    j["h_cond"] = rows;
    nlohmann::json spectrum = nlohmann::json::array();
    for (int m = 0; m < gen.eigenvalues().size(); ++m)
        spectrum.push_back(cplx(gen.eigenvalues()(m)));
    j["eigenvalues"] = spectrum;
    j["eigenvector_condition"] = gen.eigenvector_condition();
    j["method"] = gen.method() == PropagationMethod::spectral
                      ? "spectral"
                      : "scaled_squaring";
    return j;
}

}  // namespace vpair
