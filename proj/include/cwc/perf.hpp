#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cwc/model.hpp"

namespace cwc {

enum class OpKind : std::uint8_t { Matmul, Softmax, Norm, Gelu, Add, Other };

const char* to_string(OpKind k);

struct LayerCost {
    std::string name;
    OpKind kind = OpKind::Other;
    std::uint64_t flops = 0;
    std::uint64_t bytes = 0;  // parameter + produced-activation traffic of this op
};

// Static per-inference workload counts. Documented conventions: matmul costs
// 2*m*k*n FLOPs, softmax 5, layer norm 8, GELU 10 and elementwise adds 1
// FLOP per element; every produced activation element moves 4 bytes; all
// parameters are re-read from DRAM on every inference (no cache-residency
// credit), so counts scale linearly with the batch.
struct WorkloadProfile {
    std::uint64_t flops = 0;
    std::uint64_t param_bytes = 0;       // dense weights 4 B, clustered 1 B + codebook tables
    std::uint64_t activation_bytes = 0;  // 4 B per produced element
    std::uint64_t lut_accesses = 0;      // clustered weight elements touched
    std::vector<LayerCost> per_layer;

    std::uint64_t total_bytes() const { return param_bytes + activation_bytes; }
    std::uint64_t matmul_flops() const;
};

WorkloadProfile profile_model(const Model& m, std::uint64_t batch = 1);

// Modeled platform. The shipped conf-1/2/3 files are fitted to reproduce the
// published end-to-end numbers, not measured coefficients.
struct PlatformConfig {
    std::string name;
    double mem_bandwidth = 0;  // bytes/s
    double compute_rate = 0;   // FLOP/s
    double e_dram = 0;         // J/byte
    double e_flop = 0;         // J/FLOP
    double e_lut = 0;          // J/centroid-table lookup
    double p_static = 0;       // W

    void validate() const;
};

PlatformConfig parse_platform_config(const std::string& text, const std::string& origin);
PlatformConfig load_platform_file(const std::string& path);

enum class Bound : std::uint8_t { Compute, Memory };

struct TimeEstimate {
    double t_compute = 0;  // flops / compute_rate
    double t_memory = 0;   // bytes / bandwidth
    double t_total = 0;    // max of the two (perfect overlap roofline)
    Bound bound = Bound::Memory;
};

TimeEstimate estimate_time(const WorkloadProfile& p, const PlatformConfig& hw);

struct AmdahlParams {
    double mem_fraction = 0;  // f: share of baseline time spent on parameter transfer
    double reduction = 1;     // s: bandwidth-demand reduction factor
};

// 1 / ((1-f) + f/s)
double amdahl_speedup(const AmdahlParams& a);

struct EnergyEstimate {
    double e_dynamic = 0;
    double e_static = 0;
    double e_total = 0;
};

EnergyEstimate estimate_energy(const WorkloadProfile& p, const PlatformConfig& hw,
                               double seconds);

struct ComparisonRow {
    std::string platform;
    TimeEstimate dense_time, clustered_time;
    EnergyEstimate dense_energy, clustered_energy;
    double speedup = 1.0;        // dense t_total / clustered t_total
    double energy_ratio = 1.0;   // clustered e_total / dense e_total
    double traffic_ratio = 1.0;  // dense param bytes / clustered param bytes
    double mem_fraction = 0.0;   // f derived from the dense roofline split
    double ideal_amdahl = 1.0;   // amdahl_speedup(f, traffic_ratio)
};

ComparisonRow compare_dense_vs_clustered(const Model& dense, const Model& clustered,
                                         const PlatformConfig& hw, std::uint64_t batch = 1);

}  // namespace cwc
