#include "tcs/device.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tcs {

namespace {

constexpr double kPi = std::numbers::pi;
// h/k_B in GHz·mK: hf/(k_B T) = kPlanckOverBoltzmann * f_GHz / T_mK.
constexpr double kPlanckOverBoltzmann = 47.9924307337;

}  // namespace

double TransmonSpec::effective_g_ef_mhz() const {
    return g_ef_mhz.value_or(std::numbers::sqrt2 * g_ge_mhz);
}

void TransmonSpec::validate() const {
    if (ec_ghz <= 0.0 || ej_max_ghz <= 0.0) {
        throw std::invalid_argument("TransmonSpec: energies must be positive");
    }
    if (ej_max_ghz / ec_ghz <= 20.0) {
        throw std::invalid_argument("TransmonSpec: ej_max/ec must exceed 20 (transmon regime)");
    }
    if (g_ge_mhz <= 0.0) {
        throw std::invalid_argument("TransmonSpec: g_ge must be positive");
    }
    if (n_levels != 2 && n_levels != 3) {
        throw std::invalid_argument("TransmonSpec: n_levels must be 2 or 3");
    }
    if (t1_s <= 0.0 || t2_s <= 0.0) {
        throw std::invalid_argument("TransmonSpec: T1 and T2 must be positive");
    }
    if (t2_s > 2.0 * t1_s + 1e-15) {
        throw std::invalid_argument("TransmonSpec: T2 must not exceed 2·T1");
    }
}

void ResonatorSpec::validate() const {
    if (omega_r_ghz <= 0.0) {
        throw std::invalid_argument("ResonatorSpec: frequency must be positive");
    }
    if (gamma0_mhz <= 0.0) {
        throw std::invalid_argument("ResonatorSpec: gamma0 must be positive");
    }
    if (n_truncation < 2) {
        throw std::invalid_argument("ResonatorSpec: truncation must be at least 2");
    }
}

void MutualMatrix::validate() const {
    for (int i = 0; i < kNumFluxLines; ++i) {
        if (ratios(i, i) != 1.0) {
            throw std::invalid_argument("MutualMatrix: diagonal of ratios must be exactly 1");
        }
        if (diagonal_mutuals[i] == 0.0) {
            throw std::invalid_argument("MutualMatrix: diagonal mutual must be nonzero");
        }
        for (int j = 0; j < kNumFluxLines; ++j) {
            if (i != j && std::abs(ratios(i, j)) >= 1.0) {
                throw std::invalid_argument(
                    "MutualMatrix: off-diagonal ratio magnitude must be below 1");
            }
        }
    }
}

void BiasVector::validate() const {
    for (double i : currents_a) {
        if (!std::isfinite(i)) {
            throw std::invalid_argument("BiasVector: currents must be finite");
        }
    }
}

void DeviceConfig::validate() const {
    resonator.validate();
    if (qubits.size() > static_cast<size_t>(kNumFluxLines)) {
        throw std::invalid_argument("DeviceConfig: at most 8 qubits");
    }
    for (const auto& q : qubits) q.validate();
    mutuals.validate();
    if (std::abs(epsilon) >= 0.3) {
        throw std::invalid_argument("DeviceConfig: |epsilon| must stay below 0.3");
    }
    if (temperature_mk < 0.0) {
        throw std::invalid_argument("DeviceConfig: temperature must be nonnegative");
    }
    if (n_thermal_override && *n_thermal_override < 0.0) {
        throw std::invalid_argument("DeviceConfig: thermal photon number must be nonnegative");
    }
}

double DeviceConfig::thermal_photons() const {
    if (n_thermal_override) return *n_thermal_override;
    return bose_einstein_occupation(resonator.omega_r_ghz, temperature_mk);
}

double bose_einstein_occupation(double freq_ghz, double temperature_mk) {
    if (temperature_mk <= 0.0) return 0.0;
    const double x = kPlanckOverBoltzmann * freq_ghz / temperature_mk;
    return 1.0 / std::expm1(x);
}

std::array<double, kNumFluxLines> flux_from_currents(const MutualMatrix& mutuals,
                                                     const BiasVector& delta_i) {
    std::array<double, kNumFluxLines> flux{};
    for (int j = 0; j < kNumFluxLines; ++j) {
        double acc = 0.0;
        for (int k = 0; k < kNumFluxLines; ++k) {
            acc += mutuals.ratios(j, k) * mutuals.diagonal_mutuals[j] *
                   delta_i.currents_a[k];
        }
        flux[j] = acc;
    }
    return flux;
}

double ej_of_flux(double ej_max_ghz, double phi_in_phi0) {
    return ej_max_ghz * std::abs(std::cos(kPi * phi_in_phi0));
}

std::vector<double> transmon_levels(double ej_ghz, double ec_ghz, int n_charge,
                                    int n_levels) {
    if (n_charge < 15) {
        throw std::invalid_argument("transmon_levels: n_charge must be at least 15");
    }
    if (n_levels > 5 || n_levels < 2) {
        throw std::invalid_argument("transmon_levels: n_levels must be in [2, 5]");
    }
    if (ej_ghz / ec_ghz <= 5.0) {
        throw std::invalid_argument("transmon_levels: ej/ec must exceed 5");
    }

    const double n_g = 0.5;
    auto solve = [&](int nc) {
        const int dim = 2 * nc + 1;
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
        for (int k = 0; k < dim; ++k) {
            const double n = static_cast<double>(k - nc);
            h(k, k) = 4.0 * ec_ghz * (n - n_g) * (n - n_g);
            if (k + 1 < dim) {
                h(k, k + 1) = -0.5 * ej_ghz;
                h(k + 1, k) = -0.5 * ej_ghz;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
        return solver.eigenvalues();
    };

    const auto ev = solve(n_charge);
    const auto ev_check = solve(2 * n_charge);
    std::vector<double> levels(n_levels);
    for (int k = 0; k < n_levels; ++k) {
        levels[k] = ev[k] - ev[0];
        const double check = ev_check[k] - ev_check[0];
        if (std::abs(levels[k] - check) > 1e-6) {
            throw std::runtime_error(
                "transmon_levels: charge truncation insufficient, level " +
                std::to_string(k) + " shifts by " +
                std::to_string(std::abs(levels[k] - check)) + " GHz when doubled");
        }
    }
    return levels;
}

double transmon_freq_ge(double ej_ghz, double ec_ghz) {
    return transmon_levels(ej_ghz, ec_ghz, kDefaultChargeTruncation, 2)[1];
}

std::vector<double> multiphoton_lines(const TransmonSpec& spec, double phi_in_phi0,
                                      int k_max) {
    if (k_max < 1) {
        throw std::invalid_argument("multiphoton_lines: k_max must be at least 1");
    }
    const double ej = ej_of_flux(spec.ej_max_ghz, phi_in_phi0);
    const auto levels = transmon_levels(ej, spec.ec_ghz, kDefaultChargeTruncation,
                                        k_max + 1);
    std::vector<double> lines(k_max);
    for (int k = 1; k <= k_max; ++k) {
        lines[k - 1] = levels[k] / static_cast<double>(k);
    }
    return lines;
}

double qubit_freq_of_flux(const DeviceConfig& config, int qubit_index,
                          double phi_in_phi0) {
    if (qubit_index < 0 || qubit_index >= static_cast<int>(config.qubits.size())) {
        throw std::out_of_range("qubit_freq_of_flux: qubit index out of range");
    }
    const auto& q = config.qubits[qubit_index];
    const double ej = ej_of_flux(q.ej_max_ghz, phi_in_phi0);
    return transmon_levels(ej, q.ec_ghz, kDefaultChargeTruncation, 2)[1];
}

double qubit_freq_of_current(const DeviceConfig& config, int qubit_index,
                             const BiasVector& bias) {
    if (qubit_index < 0 || qubit_index >= static_cast<int>(config.qubits.size())) {
        throw std::out_of_range("qubit_freq_of_current: qubit index out of range");
    }
    const auto flux = flux_from_currents(config.mutuals, bias);
    return qubit_freq_of_flux(config, qubit_index, flux[qubit_index]);
}

double flux_for_target_freq(const DeviceConfig& config, int qubit_index,
                            double target_ghz, double phi_max) {
    const double f0 = qubit_freq_of_flux(config, qubit_index, 0.0);
    const double f1 = qubit_freq_of_flux(config, qubit_index, phi_max);
    if (target_ghz > f0 || target_ghz < f1) {
        throw std::invalid_argument("flux_for_target_freq: target outside tunable band [" +
                                    std::to_string(f1) + ", " + std::to_string(f0) + "] GHz");
    }
    double lo = 0.0, hi = phi_max;
    for (int iter = 0; iter < 80; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (qubit_freq_of_flux(config, qubit_index, mid) > target_ghz) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double ejmax_for_max_freq(double target_omega_max_ghz, double ec_ghz) {
    // Asymptotic seed, then secant on the charge-basis ω_ge.
    double ej = (target_omega_max_ghz + ec_ghz) * (target_omega_max_ghz + ec_ghz) /
                (8.0 * ec_ghz);
    double f = transmon_freq_ge(ej, ec_ghz) - target_omega_max_ghz;
    double ej_prev = ej * 1.02;
    double f_prev = transmon_freq_ge(ej_prev, ec_ghz) - target_omega_max_ghz;
    for (int iter = 0; iter < 50 && std::abs(f) > 1e-10; ++iter) {
        const double step = f * (ej - ej_prev) / (f - f_prev);
        ej_prev = ej;
        f_prev = f;
        ej -= step;
        f = transmon_freq_ge(ej, ec_ghz) - target_omega_max_ghz;
    }
    return ej;
}

}  // namespace tcs
