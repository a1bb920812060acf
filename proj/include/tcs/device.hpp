#pragma once

#include <array>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

// Physical chip description: transmon levels versus flux, couplings, flux
// lines and mutual inductances. Bias currents map to qubit frequencies via
// ΔΦ = M·ΔI with M reconstructed from the normalized ratio matrix.

namespace tcs {

inline constexpr int kNumFluxLines = 8;

struct TransmonSpec {
    double ej_max_ghz = 0.0;  // E_Jmax/h
    double ec_ghz = 0.0;      // E_C/h
    double g_ge_mhz = 0.0;    // coupling/2π
    int n_levels = 2;         // 2 or 3
    double t1_s = 0.0;
    double t2_s = 0.0;
    // g_ef defaults to sqrt(2)·g_ge unless overridden.
    std::optional<double> g_ef_mhz;

    double effective_g_ef_mhz() const;
    void validate() const;
};

struct ResonatorSpec {
    double omega_r_ghz = 0.0;  // frequency/2π
    double gamma0_mhz = 0.0;   // external coupling/2π
    int n_truncation = 3;

    void validate() const;
};

/// Normalized mutual-inductance ratios (unit diagonal) plus the reference
/// diagonal mutuals in Φ₀/A, so M_jk = ratios(j,k) * diagonal_mutuals[j].
struct MutualMatrix {
    Eigen::Matrix<double, kNumFluxLines, kNumFluxLines> ratios =
        Eigen::Matrix<double, kNumFluxLines, kNumFluxLines>::Identity();
    std::array<double, kNumFluxLines> diagonal_mutuals{1, 1, 1, 1, 1, 1, 1, 1};

    void validate() const;
};

struct BiasVector {
    std::array<double, kNumFluxLines> currents_a{};  // amperes

    void validate() const;
};

struct DeviceConfig {
    ResonatorSpec resonator;
    std::vector<TransmonSpec> qubits;  // chip order 1..N, N <= 8
    MutualMatrix mutuals;
    std::complex<double> epsilon{0.0, 0.0};  // background coupling
    double temperature_mk = 0.0;
    // Mean thermal photons at the resonator; derived from temperature when unset.
    std::optional<double> n_thermal_override;

    void validate() const;
    double thermal_photons() const;
};

/// ΔΦ = M·ΔI, fluxes in Φ₀.
std::array<double, kNumFluxLines> flux_from_currents(const MutualMatrix& mutuals,
                                                     const BiasVector& delta_i);

/// Symmetric-SQUID Josephson energy, E_J(Φ) = E_Jmax·|cos(πΦ/Φ₀)|.
double ej_of_flux(double ej_max_ghz, double phi_in_phi0);

/// Eigenlevels of the charge-basis transmon Hamiltonian 4E_C(n̂−n_g)² − E_J cosφ̂
/// at n_g = 0.5, ground-referenced, in GHz. Errors out if the truncation is
/// insufficient (any retained level moves more than 1e-6 GHz when n_charge
/// is doubled).
std::vector<double> transmon_levels(double ej_ghz, double ec_ghz, int n_charge,
                                    int n_levels);

inline constexpr int kDefaultChargeTruncation = 30;

/// ω_ge at the sweet spot truncation defaults.
double transmon_freq_ge(double ej_ghz, double ec_ghz);

/// k-photon drive frequencies (E_k − E_0)/k for k = 1..k_max, in GHz.
std::vector<double> multiphoton_lines(const TransmonSpec& spec, double phi_in_phi0,
                                      int k_max);

/// ω_ge of one qubit at the flux implied by the bias vector.
double qubit_freq_of_current(const DeviceConfig& config, int qubit_index,
                             const BiasVector& bias);

/// ω_ge of one qubit at a given flux.
double qubit_freq_of_flux(const DeviceConfig& config, int qubit_index,
                          double phi_in_phi0);

/// Inverts ω_ge(Φ) on Φ ∈ [0, phi_max] for a target frequency below the sweet
/// spot value (bisection; ω_ge is monotone decreasing there).
double flux_for_target_freq(const DeviceConfig& config, int qubit_index,
                            double target_ghz, double phi_max = 0.45);

/// E_Jmax that reproduces a target sweet-spot ω_ge at the given E_C
/// (secant inversion of the charge-basis solve).
double ejmax_for_max_freq(double target_omega_max_ghz, double ec_ghz);

/// Bose-Einstein occupation at frequency f (GHz) and temperature T (mK).
double bose_einstein_occupation(double freq_ghz, double temperature_mk);

}  // namespace tcs
