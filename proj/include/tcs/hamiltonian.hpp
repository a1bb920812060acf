#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcs/operators.hpp"

// Tavis-Cummings and multi-level transmon Hamiltonians, excitation-manifold
// blocks, and closed-form eigenvalues for the resonant cases.
//
// Frequencies are cyclic (GHz) here; couplings are g/2π in MHz. Conversion to
// angular units happens only inside the dynamics module.

namespace tcs {

struct TCModel {
    double omega_r_ghz = 0.0;
    std::vector<double> omega_q_ghz;  // qubit ge frequencies
    std::vector<double> g_mhz;        // couplings/2π
    HilbertLayout layout;

    void validate() const;
};

struct QutritParams {
    double omega_e_ghz = 0.0;
    double omega_f_ghz = 0.0;  // must stay below 2·ω_e for a transmon
    double g_ge_mhz = 0.0;
    double g_ef_mhz = 0.0;
};

struct ThreeLevelModel {
    double omega_r_ghz = 0.0;
    std::vector<QutritParams> qubits;
    int n_truncation = 3;

    void validate() const;
};

/// Restriction of an excitation-conserving Hamiltonian to one manifold.
/// Basis states are ordered by descending cavity photon number, then by
/// ascending qubit levels, which reproduces the conventional
/// {|g,n⟩, |e,n−1⟩, |f,n−2⟩} ordering for a single qudit.
struct ManifoldBlock {
    int n_excitations = 0;
    std::vector<std::string> basis_labels;
    std::vector<int> full_indices;  // indices into the parent layout
    DenseMatrix block;
};

struct TransitionLine {
    int lower_manifold = 0;   // transition lower_manifold -> lower_manifold+1
    int lower_index = 0;      // eigenstate index within the lower manifold
    int upper_index = 0;
    double freq_ghz = 0.0;
    double drive_weight = 1.0;  // |<upper|(a+a†)|lower>| when a drive op is given
    std::string label;
};

/// H/ħ = ω_r a†a + Σ (ω_i/2)σz_i + Σ g_i (a†σ⁻_i + aσ⁺_i), in GHz.
OperatorMatrix build_tc_hamiltonian(const TCModel& model);

/// Multi-level RWA Hamiltonian: ω_r a†a + Σ_j ω_j|j⟩⟨j| plus the
/// excitation-conserving part of (a†+a)Σ g_ij|i⟩⟨j| with adjacent-level
/// couplings only (g_gf = 0).
OperatorMatrix build_three_level_hamiltonian(const ThreeLevelModel& model);

/// Restriction of h to the n_exc eigenspace of the total excitation operator.
/// Errors if h does not conserve excitation number to 1e-10 relative.
ManifoldBlock manifold_block(const OperatorMatrix& h, int n_exc);

/// All pairwise eigenvalue differences between consecutive manifolds.
/// When drive_op is provided each line also carries the transition matrix
/// element magnitude, used to rank line visibility under a cavity drive.
std::vector<TransitionLine> transition_frequencies(
    std::span<const ManifoldBlock> blocks, const OperatorMatrix* drive_op = nullptr);

/// Jaynes-Cummings one-excitation doublet, E± relative to the ground state:
/// E±= (ω_r+ω_e)/2 ± sqrt(4g² + (ω_r−ω_e)²)/2. Inputs GHz/MHz, output GHz.
std::pair<double, double> jc_eigenvalues(double omega_r_ghz, double omega_e_ghz,
                                         double g_mhz);

/// 2·sqrt(Σ g_i²) in MHz; equals 2g√N for identical couplings.
double collective_splitting(std::span<const double> g_mhz);

/// Σ g_i²/Δ_i in MHz with Δ_i = ω_i − ω_r (GHz). The cavity peak sits at
/// ω_r − Σ g_i²/Δ_i. Errors on any Δ_i = 0.
double dispersive_drift(std::span<const double> g_mhz, std::span<const double> delta_ghz);

/// Standard layout for a TC device slice: cavity truncation first, then one
/// slot per active qubit.
HilbertLayout tc_layout(int n_truncation, int n_qubits, int levels_per_qubit = 2);

}  // namespace tcs
