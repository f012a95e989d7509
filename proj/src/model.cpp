#include "vpair/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vpair {

std::vector<std::string> ModelParams::validate() const {
    if (a3 <= 0.0) throw std::invalid_argument("a3 must be positive");
    if (a2 < 0.0) throw std::invalid_argument("a2 must be non-negative");
    if (omega2 < 0.0 || omega3 < 0.0)
        throw std::invalid_argument("Rabi frequencies must be non-negative");
    if (kr <= 0.0) throw std::invalid_argument("kr must be positive");
    if (theta3 < 0.0 || theta3 > M_PI / 2.0 + 1e-12)
        throw std::invalid_argument("theta3 must lie in [0, pi/2]");

    std::vector<std::string> warnings;
    if (a2 > 0.0)
        warnings.push_back("a2 > 0 is not modeled by the conditional dynamics; "
                           "the weak transition is treated as non-decaying");
    if (omega3 > 0.0 && omega2 > 0.1 * omega3) {
        std::ostringstream os;
        os << "omega2 = " << omega2 << " is not small against omega3 = "
           << omega3 << "; dark periods may not be well separated";
        warnings.push_back(os.str());
    }
    if (omega3 > 0.0 && omega2 > 0.1 * omega3 * omega3 / a3) {
        std::ostringstream os;
        os << "omega2 = " << omega2 << " is not small against omega3^2/a3 = "
           << omega3 * omega3 / a3;
        warnings.push_back(os.str());
    }
    return warnings;
}

std::complex<double> coupling_constant(double kr, double theta, double a) {
    if (kr <= 0.0)
        throw std::domain_error("coupling_constant: kr must be positive");
    const std::complex<double> i(0.0, 1.0);
    const double c2 = std::cos(theta) * std::cos(theta);
    const std::complex<double> phase = std::exp(i * kr);
    const std::complex<double> bracket =
        (1.0 / (i * kr)) * (1.0 - c2) +
        (1.0 / (kr * kr) - 1.0 / (i * kr * kr * kr)) * (1.0 - 3.0 * c2);
    return 1.5 * a * phase * bracket;
}

std::vector<CouplingPoint> coupling_curve(const std::vector<double>& kr_grid,
                                          double theta) {
    if (kr_grid.empty())
        throw std::domain_error("coupling_curve: empty grid");
    std::vector<CouplingPoint> curve;
    curve.reserve(kr_grid.size());
    double prev = 0.0;
    for (double kr : kr_grid) {
        if (kr <= prev)
            throw std::domain_error("coupling_curve: grid must be strictly increasing and positive");
        const auto c = coupling_constant(kr, theta, 1.0);
        curve.push_back({kr, c.real(), c.imag()});
        prev = kr;
    }
    return curve;
}

}  // namespace vpair
