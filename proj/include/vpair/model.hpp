#ifndef VPAIR_MODEL_HPP
#define VPAIR_MODEL_HPP

#include <complex>
#include <string>
#include <vector>

namespace vpair {

// Physical configuration of the two-atom system. Each atom is a V system:
// ground level 1, metastable level 2 (weakly driven at omega2) and a fast
// level 3 (driven at omega3, Einstein coefficient a3). Rates are expressed
// in units of a3 and times in units of 1/a3; a3 = 1 is the default and the
// convention used throughout.
struct ModelParams {
    double a3 = 1.0;        // decay rate of level 3, the rate unit
    double a2 = 0.0;        // decay rate of level 2 (metastable: ~0)
    double omega2 = 0.01;   // Rabi frequency of the weak 1-2 laser
    double omega3 = 0.5;    // Rabi frequency of the strong 1-3 laser
    double kr = 10.0;       // dimensionless distance k31 * r
    double theta3 = 1.5707963267948966;  // angle between D13 and the axis
    bool include_c3 = true; // false: noninteracting reference model

    // Throws std::invalid_argument on unphysical values; returns warnings
    // for configurations outside the weak-driving regime (omega2 << omega3,
    // omega2 << omega3^2/a3, a2 ~ 0) that the dynamics assumes.
    std::vector<std::string> validate() const;
};

// Dipole-dipole coupling constant C(kr, theta) for a transition with decay
// rate a. Re C modifies the collective decay rates (a +- Re C), Im C shifts
// the symmetric/antisymmetric levels. Singular at kr = 0; decays as 1/kr.
std::complex<double> coupling_constant(double kr, double theta, double a);

struct CouplingPoint {
    double kr;
    double re_c_over_a;
    double im_c_over_a;
};

// Tabulates C/a on a strictly increasing grid (a = 1). Used for the
// distance-dependence comparison with the light-period durations and for
// CSV export.
std::vector<CouplingPoint> coupling_curve(const std::vector<double>& kr_grid,
                                          double theta);

}  // namespace vpair

#endif
