#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tcs/device.hpp"

// Flux-crosstalk calibration: synthetic two-coil sweeps, ridge-slope
// extraction, assembly of the normalized mutual-inductance matrix from the
// 28 coil pairs, and the 7-variable compensation solve.

namespace tcs {

/// |s21| at a fixed probe frequency over a rectangular two-current grid.
/// response(i, j) belongs to (ix_a[i], iy_a[j]).
struct TwoCoilScan {
    int coil_x = 0;
    int coil_y = 0;
    double probe_freq_ghz = 0.0;
    std::vector<double> ix_a;
    std::vector<double> iy_a;
    Eigen::MatrixXd response;
};

struct RidgeFit {
    double slope = 0.0;      // dI_y/dI_x along the ridge (dI_x/dI_y when transposed)
    double intercept_a = 0.0;
    double residual_a = 0.0;
    bool transposed = false;
};

/// Both ridge orientations of one unordered coil pair: the column fit tracks
/// the qubit of coil_y (gentle slope −M_y,x/M_y,y), the transposed fit tracks
/// the qubit of coil_x (−M_x,y/M_x,x).
struct PairScanFit {
    int coil_x = 0;
    int coil_y = 0;
    RidgeFit column_fit;
    RidgeFit transposed_fit;
};

struct CompensationPlan {
    int target_qubit = 0;
    std::array<double, kNumFluxLines> delta_i{};  // per unit target-coil current
    double condition_number = 0.0;
};

enum class ScanMode {
    DispersiveRidge,  // analytic lower-branch locus, default for the campaign
    FullSimulation,   // steady-state transmission at every grid point
};

struct ScanOptions {
    ScanMode mode = ScanMode::DispersiveRidge;
    int grid_points_x = 41;
    int grid_points_y = 41;
    double freq_window_ghz = 0.040;  // qubit-frequency swing covered by each axis
    double ridge_halfwidth_ghz = 0.002;
    double noise_rms = 0.0;          // additive, relative to unit ridge contrast
    std::uint64_t seed = 0;
};

/// Probe auto-selection: 20 MHz below the lower anticrossing branch of the
/// given qubit at the scan's center bias.
double auto_probe_frequency(const DeviceConfig& config, int qubit,
                            const BiasVector& center);

/// Synthesizes the two-coil response map. The high-transmission ridges trace
/// the loci of constant qubit frequency for the two qubits of the pair.
TwoCoilScan synthesize_two_coil_scan(const DeviceConfig& config, int coil_x,
                                     int coil_y, double probe_freq_ghz,
                                     const BiasVector& center,
                                     const ScanOptions& options = {});

/// Per-column argmax (sub-step refined) followed by a robust least-squares
/// line through the maxima. transposed = true fits rows instead, for the
/// near-vertical ridge. Errors when the ridge contrast is below 3× the noise
/// floor.
RidgeFit extract_slope(const TwoCoilScan& scan, bool transposed = false);

/// Scan + both ridge fits for one pair, centered where both qubits cross the
/// probe inside the window.
PairScanFit fit_coil_pair(const DeviceConfig& config, int coil_x, int coil_y,
                          const ScanOptions& options = {});

/// Eq.-A1-normalized ratio matrix from the 28 unordered pair fits and the
/// diagonal reference mutuals. Errors listing any missing combination.
MutualMatrix build_mutual_matrix(const std::vector<PairScanFit>& fits,
                                 const std::array<double, kNumFluxLines>& diagonal_mutuals);

/// Counter-current plan: ΔI with unit target-coil component such that
/// ΔΦ_j = 0 for all j ≠ target. Errors when the 7×7 subsystem is
/// ill-conditioned (condition number above 1e8).
CompensationPlan solve_compensation(const MutualMatrix& matrix, int target_qubit);

/// Re-synthesized scan in compensated coordinates: the x axis applies the
/// plan, the y axis the raw coil. A slope magnitude below 1e-3 certifies the
/// calibration of this pair.
RidgeFit verify_isolation(const DeviceConfig& config, const CompensationPlan& plan,
                          int coil_y, const ScanOptions& options = {});

}  // namespace tcs
