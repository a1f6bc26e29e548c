/// @file scales.hpp
/// @brief Non-dimensionalisation of the coupled poroelastic problem.
///
/// All solvers in this library operate on dimensionless quantities. Four
/// characteristic scales fix the conversion: a macroscale length L, the
/// microcell edge length d, a viscosity mu_c and a force f_c. Every other
/// scale is derived from those four.

#pragma once

#include <string>

namespace mlporo::scales {

/// User-chosen characteristic magnitudes (SI units).
struct CharacteristicScales {
    double L;     ///< macroscale length [m]
    double d;     ///< microcell edge length [m]
    double mu_c;  ///< dynamic viscosity [Pa s]
    double f_c;   ///< force [N]
};

/// Conversion factors: physical value = dimensionless value * scale.
struct DerivedScales {
    double length;        ///< L [m]
    double displacement;  ///< L [m]
    double stress;        ///< f_c / L^2 [Pa], also moduli and pressures
    double time;          ///< L^4 mu_c / (f_c d^2) [s]
    double velocity;      ///< f_c d^2 / (L^3 mu_c) [m/s]
    double conductivity;  ///< d^2 / mu_c [m^2/(Pa s)]
    double viscosity;     ///< mu_c [Pa s]
    double force;         ///< f_c [N]
    double epsilon;       ///< scale separation d/L
    bool scale_separation_ok;  ///< epsilon < 0.1
};

/// Physical dimension tags used by the conversion helpers.
enum class Quantity {
    length,
    displacement,
    stress,
    modulus,
    pressure,
    time,
    velocity,
    conductivity,
    viscosity,
    force,
};

/// Derive all conversion factors. Throws std::invalid_argument on any
/// non-positive input; warns on stderr when d/L >= 0.1 (the two-scale
/// expansion assumes well-separated scales).
DerivedScales derive(const CharacteristicScales& c);

/// physical -> dimensionless
double to_dimensionless(double physical, Quantity q, const DerivedScales& s);

/// dimensionless -> physical
double to_physical(double dimensionless, Quantity q, const DerivedScales& s);

/// Scale factor for a quantity kind.
double scale_of(Quantity q, const DerivedScales& s);

const char* quantity_name(Quantity q);

}  // namespace mlporo::scales
