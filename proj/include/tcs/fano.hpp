#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "tcs/fitting.hpp"

// Input-output layer: background (Fano) interference on cavity responses,
// background subtraction, and the lumped signal model used to extract
// (p, γ_eff) from a resonance trace.

namespace tcs {

using Complex = std::complex<double>;

struct TraceMeta {
    std::array<double, 8> bias_currents_a{};
    double drive_amplitude_rad_s = 0.0;
    double kappa_c_mhz = 0.0;  // dressed coupling at the active bias point
    unsigned long long seed = 0;
    std::string source;
};

/// Complex S21 versus probe frequency, strictly increasing frequencies.
struct TransmissionTrace {
    std::vector<double> probe_freq_ghz;
    std::vector<Complex> s21;
    TraceMeta meta;

    void validate() const;
};

struct BackgroundModel {
    Complex epsilon{0.0, 0.0};

    void validate() const;
};

/// The flat background term −2iε/(1+2iε), identically 2ε/(i−2ε).
Complex background_term(const BackgroundModel& bg);

/// s21(ω) = cavity(ω) − 2iε/(1+2iε), with cavity(ω) the normalized
/// transmitted cavity field √κ_c⟨a⟩/⟨a_in⟩ and ⟨a_in⟩ = 1.
TransmissionTrace apply_background(const TransmissionTrace& cavity,
                                   const BackgroundModel& bg);

/// Exact algebraic inverse of apply_background: recovers the pure-cavity
/// trace once ε is known. kappa_c_mhz is recorded into the trace metadata.
TransmissionTrace subtract_background(const TransmissionTrace& trace,
                                      const BackgroundModel& bg,
                                      double kappa_c_mhz = 0.0);

struct SignalParams {
    double p = 1.0;             // ground-manifold probability, in [0, 1]
    double gamma_eff_mhz = 0.0;  // internal broadening/2π
    double kappa_c_mhz = 0.0;    // dressed line coupling/2π
    double omega0_ghz = 0.0;     // resonance

    void validate() const;
};

/// s12(ω) = 2ε/(i−2ε) + p·κ_c/(κ_c + γ_eff + i(ω₀−ω)).
Complex signal_model(double omega_ghz, const SignalParams& params,
                     const BackgroundModel& bg);

struct SignalFitOutcome {
    SignalParams params;
    double p_stderr = 0.0;
    double gamma_stderr_mhz = 0.0;
    double omega0_stderr_ghz = 0.0;
    double kappa_stderr_mhz = 0.0;
    FitResult core;
};

/// Which parameter is pinned during the fit. The cavity term depends only on
/// the products (p·κ_c, κ_c+γ_eff, ω₀), so one of p and κ_c must be known:
/// FixKappa fits (p, γ_eff, ω₀) with κ_c given (the dressed coupling of the
/// bias point); FixP pins p = 1 and fits (κ_c, γ_eff, ω₀), which calibrates
/// κ_c itself on a bare-cavity trace.
enum class SignalFitMode { FixKappa, FixP };

/// Complex least-squares fit of signal_model to the trace (both quadratures).
/// ε must be pre-measured; the trace should span several linewidths.
SignalFitOutcome extract_signal_params(const TransmissionTrace& trace,
                                       const BackgroundModel& bg,
                                       double kappa_c_mhz,
                                       SignalFitMode mode = SignalFitMode::FixKappa);

/// On-resonance effective signal strength p·κ_c/(κ_c+γ_eff).
double signal_strength(const SignalParams& params);

}  // namespace tcs
