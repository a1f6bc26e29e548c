#pragma once

// Feed-forward surrogates for the cell-averaged tensors. Five small ReLU
// networks map (nu, phi) to one scalar each (M11, M12, M44, Q11, K11), so
// the remodelling loop can refresh effective coefficients without solving
// cell problems. Training is full-batch Adam on normalized targets with a
// deterministic train/validation split and early stopping; trained bundles
// serialize to a stable JSON weight file.
//
// Hidden widths per output follow the reference configuration: 50 for M11,
// M12 and Q11, 20 for M44, 10 for K11, three hidden layers each, linear
// output (M12 and Q11 are negative, so a terminal rectifier is ruled out).
//
// The dense inner loops (matvec, rectifier, Adam updates) run through the
// runtime-dispatched kernels in kernels.hpp; force_isa() pins a variant
// when reproducibility across machines matters.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mlporo/microcell.hpp"

namespace mlporo::ann {

// Affine normalization records stored with each network.
struct InputRange {
    double lo = 0.0;
    double hi = 1.0;
};
struct TargetNorm {
    double mean = 0.0;
    double stdev = 1.0;
};

struct Layer {
    int rows = 0;
    int cols = 0;
    std::vector<double> w;  // row-major rows x cols
    std::vector<double> b;  // size rows
};

// One trained network: input (nu, phi), scalar output.
struct Mlp {
    std::vector<Layer> layers;      // hidden layers then the linear output
    std::array<InputRange, 2> in;   // nu range, phi range
    TargetNorm target;

    // Deterministic evaluation. Inputs may sit mildly outside the training
    // bounds; beyond 5% of the range the query throws std::domain_error
    // naming the offending coordinate.
    double eval(double nu, double phi) const;
};

struct OutputRecord {
    std::string name;  // M11, M12, M44, Q11, K11
    Mlp net;
    double train_rel_l2 = 0.0;  // relative L2 error, original target scale
    double valid_rel_l2 = 0.0;
    int epochs = 0;            // epochs actually run
    bool gate_passed = false;  // valid_rel_l2 <= gate at the early-stop best
};

struct BundleMetadata {
    std::uint64_t seed = 0;
    int rows = 0;  // dataset rows used
    double nu_min = 0.0, nu_max = 0.0;
    double phi_min = 0.0, phi_max = 0.0;
    std::string isa;  // kernel variant active during training
};

struct SurrogateBundle {
    std::vector<OutputRecord> outputs;  // fixed order M11,M12,M44,Q11,K11
    BundleMetadata meta;

    const OutputRecord& output(const std::string& name) const;
    // Evaluate all five networks at one query point.
    cell::CellTensors evaluate(double nu, double phi) const;
    bool all_gates_passed() const;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int max_epochs = 50000;
    int patience = 2000;          // early stop: epochs without valid improvement
    double valid_fraction = 0.1;  // deterministic shuffle split
    double gate = 0.02;           // relative L2 acceptance per output
    std::uint64_t seed = 42;
    bool enforce_gate = true;  // throw when an output misses the gate
    int hidden_layers = 3;
    int hidden_width = 0;  // 0: per-output reference widths; >0: override
    int jobs = 1;          // networks trained concurrently
};

// Names and reference hidden widths, in bundle order.
inline constexpr std::array<const char*, 5> kOutputNames = {
    "M11", "M12", "M44", "Q11", "K11"};
int reference_width(const std::string& name);

// Trains the five networks on microcell dataset rows. Requires >= 100 rows.
// Progress lines go to `progress` when non-null.
SurrogateBundle train(const std::vector<cell::DatasetRow>& rows,
                      const TrainConfig& cfg, std::ostream* progress = nullptr);

// Stable JSON serialization; save->load->eval reproduces outputs bit-exactly.
void save_bundle(const SurrogateBundle& bundle, const std::string& path);
SurrogateBundle load_bundle(const std::string& path);

}  // namespace mlporo::ann
