#pragma once

#include <optional>
#include <vector>

#include <Eigen/SparseLU>

#include "tcs/device.hpp"
#include "tcs/fano.hpp"
#include "tcs/hamiltonian.hpp"
#include "tcs/operators.hpp"

// Lindblad steady-state transmission of the driven, damped cavity-qubit
// system. Hamiltonians are angular (rad/s) in here; collapse rates are 1/s.

namespace tcs {

inline constexpr double kRadPerSecPerGhz = 2.0 * 3.14159265358979323846 * 1e9;

struct LindbladModel {
    OperatorMatrix hamiltonian;             // lab frame, rad/s
    std::vector<CollapseChannel> channels;  // rates in 1/s
    double n_thermal = 0.0;

    void validate() const;
};

struct DriveSpec {
    double probe_freq_ghz = 0.0;
    double amplitude_rad_s = 0.0;  // η in H_drive/ħ = η(a+a†)
};

struct SteadyStateResult {
    DenseMatrix rho;
    Complex a_expectation{0.0, 0.0};
    double photon_number = 0.0;
    double residual_rel = 0.0;
};

/// ρ with L vec(ρ) = 0 and unit trace, solved in the frame rotating at the
/// probe frequency. Errors when the null space is degenerate, reporting its
/// dimension where feasible.
SteadyStateResult steady_state(const LindbladModel& model, const DriveSpec& drive);

/// Pure dephasing rate 1/T_φ = 1/T₂ − 1/(2T₁), in 1/s.
double pure_dephasing_rate(double t1_s, double t2_s);

/// Collapse channels for the active qubits of a config on the given layout:
/// qubit decay (lowering at 1/T₁), pure dephasing (number operator at 2/T_φ),
/// cavity thermal pair (a at κ(1+n̄), a† at κ·n̄). Optional thermal qubit
/// excitation channels are off by default.
std::vector<CollapseChannel> collapse_channels_for(
    const DeviceConfig& config, const HilbertLayout& layout,
    const std::vector<int>& active_qubits, bool qubit_thermal_channels = false);

struct SpectrumOptions {
    // Qubits within this detuning window are simulated in the Hilbert space;
    // the rest enter as a dispersive shift of the cavity frequency.
    double active_window_ghz = 1.2;
    // One qubit simulated with three levels (Fig.-3b style); -1 disables.
    int three_level_qubit = -1;
    // Bare-resonance coherent photon number |2η/κ|² fixing the drive strength.
    double drive_photons = 0.2;
    std::optional<double> amplitude_rad_s;  // overrides drive_photons when set
    bool qubit_thermal_channels = false;
    // Restrict the master equation to total excitation ≤ max_excitation
    // (-1 = full product space). In the single-photon regime manifolds above
    // 3 carry O(n̄³) weight; the cutoff keeps many-qubit sweeps tractable.
    int max_excitation = -1;
    int threads = 1;
};

/// Per-frequency steady-state response, scaled so a bare cavity peaks at 1.
TransmissionTrace transmission_spectrum(const DeviceConfig& config,
                                        const BiasVector& bias,
                                        const std::vector<double>& probe_grid_ghz,
                                        const SpectrumOptions& options = {});

/// Basis states of the total-excitation ≤ max_exc subspace (full-space
/// indices, ascending).
std::vector<int> excitation_subspace(const HilbertLayout& layout, int max_exc);

/// Reusable probe-sweep solver: the Liouvillian pattern is fixed across the
/// sweep (the rotating-frame shift is diagonal), so the symbolic analysis is
/// done once. With max_excitation >= 0 the equation is solved on the
/// excitation-truncated subspace; ρ is embedded back into the full space.
class SteadyStateSolver {
public:
    SteadyStateSolver(const LindbladModel& model, double drive_amplitude_rad_s,
                      int max_excitation = -1);

    SteadyStateResult solve(double probe_freq_ghz);

private:
    LindbladModel model_;
    OperatorMatrix a_full_;
    std::vector<int> basis_;            // retained full-space indices
    SparseCMatrix a_sub_;
    SparseCMatrix lv_base_;             // lab-frame L including the drive
    Eigen::VectorXd excitation_diff_;   // n_row − n_col per vec index
    double lv_scale_ = 0.0;             // Frobenius norm for residual checks
    Eigen::SparseLU<SparseCMatrix> lu_;
    bool pattern_ready_ = false;
};

/// Model assembly shared by transmission_spectrum and the scenario runners.
struct ActiveModel {
    LindbladModel lindblad;
    double omega_r_eff_ghz = 0.0;   // dispersively shifted cavity frequency
    double kappa_total_per_s = 0.0;
    std::vector<int> active_qubits;
};

ActiveModel build_active_model(const DeviceConfig& config, const BiasVector& bias,
                               const SpectrumOptions& options);

}  // namespace tcs
