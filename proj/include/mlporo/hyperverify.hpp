#pragma once

// Incremental hyperelastic verification driver.
//
// A uniaxial-stress stretch test on the plane-strain solid energy, advanced
// as N linear increments: each increment applies the current material
// tangent to an exact Green-strain step of the axial stretch, eliminates
// the lateral strain through the zero-transverse-stress condition, adds the
// resulting stress increment, and re-evaluates the tangent at the new
// configuration. As N grows the polyline converges (first order in 1/N) to
// the closed-form total-Lagrangian response; at N = 1 it degenerates to the
// initial-tangent linear-elastic line.

#include <iosfwd>
#include <vector>

#include "mlporo/remodel.hpp"

namespace mlporo::hyper {

/// One point of the incremental polyline. The stress is the axial second
/// Piola-Kirchhoff component accumulated over the increments; the moduli
/// are the square-symmetric (E, nu) of the tangent the increment ending
/// here was solved with (records[0] carries the undeformed tangent).
struct IncrementRecord {
    double stretch = 1.0;
    double nominal_stress = 0.0;
    double tangent_E = 0.0;
    double tangent_nu = 0.0;
};

/// Complete uniaxial run: records[0] is the undeformed starting point,
/// followed by one record per increment (N + 1 rows total).
struct UniaxialRun {
    int n_increments = 0;
    double target_stretch = 1.0;
    std::vector<IncrementRecord> records;
};

/// Runs the N-increment uniaxial-stress test from stretch 1 to the target
/// (monotone, uniform stretch steps; compression allowed). Throws
/// std::invalid_argument unless target_stretch lies in [0.5, 2] and
/// n_increments >= 1, and std::domain_error if the tangent loses positive
/// definiteness along the path.
UniaxialRun incremental_uniaxial(const remodel::NeoHookeanParams& params,
                                 double target_stretch, int n_increments);

/// Lateral stretch that balances the transverse stress to zero at the given
/// axial stretch (scalar bisection; throws std::domain_error if no root is
/// bracketed).
double lateral_stretch(const remodel::NeoHookeanParams& params, double stretch);

/// Closed-form axial stress of the total-Lagrangian response at the given
/// stretch, with the lateral stretch from lateral_stretch().
double reference_stress(const remodel::NeoHookeanParams& params, double stretch);

/// Appends `N,stretch,nominal_stress` rows, one per record.
void append_curve_csv(std::ostream& out, const UniaxialRun& run);

}  // namespace mlporo::hyper
