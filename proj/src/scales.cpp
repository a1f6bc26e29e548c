#include "mlporo/scales.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace mlporo::scales {

DerivedScales derive(const CharacteristicScales& c) {
    auto require_positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument(std::string("characteristic scale ") +
                                        name + " must be positive and finite");
        }
    };
    require_positive(c.L, "L");
    require_positive(c.d, "d");
    require_positive(c.mu_c, "mu_c");
    require_positive(c.f_c, "f_c");

    DerivedScales s{};
    s.length = c.L;
    s.displacement = c.L;
    s.stress = c.f_c / (c.L * c.L);
    // time scale follows from velocity = length / time
    s.velocity = c.f_c * c.d * c.d / (c.L * c.L * c.L * c.mu_c);
    s.time = c.L * c.L * c.L * c.L * c.mu_c / (c.f_c * c.d * c.d);
    s.conductivity = c.d * c.d / c.mu_c;
    s.viscosity = c.mu_c;
    s.force = c.f_c;
    s.epsilon = c.d / c.L;
    s.scale_separation_ok = s.epsilon < 0.1;
    if (!s.scale_separation_ok) {
        std::cerr << "[scales] warning: d/L = " << s.epsilon
                  << " >= 0.1, scale separation is poor\n";
    }
    return s;
}

double scale_of(Quantity q, const DerivedScales& s) {
    switch (q) {
        case Quantity::length: return s.length;
        case Quantity::displacement: return s.displacement;
        case Quantity::stress:
        case Quantity::modulus:
        case Quantity::pressure: return s.stress;
        case Quantity::time: return s.time;
        case Quantity::velocity: return s.velocity;
        case Quantity::conductivity: return s.conductivity;
        case Quantity::viscosity: return s.viscosity;
        case Quantity::force: return s.force;
    }
    throw std::logic_error("unknown quantity kind");
}

double to_dimensionless(double physical, Quantity q, const DerivedScales& s) {
    return physical / scale_of(q, s);
}

double to_physical(double dimensionless, Quantity q, const DerivedScales& s) {
    return dimensionless * scale_of(q, s);
}

const char* quantity_name(Quantity q) {
    switch (q) {
        case Quantity::length: return "length";
        case Quantity::displacement: return "displacement";
        case Quantity::stress: return "stress";
        case Quantity::modulus: return "modulus";
        case Quantity::pressure: return "pressure";
        case Quantity::time: return "time";
        case Quantity::velocity: return "velocity";
        case Quantity::conductivity: return "conductivity";
        case Quantity::viscosity: return "viscosity";
        case Quantity::force: return "force";
    }
    return "unknown";
}

}  // namespace mlporo::scales
