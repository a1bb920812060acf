#include "tcs/fano.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcs {

namespace {

constexpr double kMhzPerGhz = 1e3;

}  // namespace

void TransmissionTrace::validate() const {
    if (probe_freq_ghz.size() != s21.size()) {
        throw std::invalid_argument("TransmissionTrace: axis and data lengths differ");
    }
    for (size_t i = 1; i < probe_freq_ghz.size(); ++i) {
        if (probe_freq_ghz[i] <= probe_freq_ghz[i - 1]) {
            throw std::invalid_argument(
                "TransmissionTrace: frequencies must be strictly increasing");
        }
    }
}

void BackgroundModel::validate() const {
    if (std::abs(epsilon) >= 0.3) {
        throw std::invalid_argument("BackgroundModel: |epsilon| must stay below 0.3");
    }
}

void SignalParams::validate() const {
    if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument("SignalParams: p must lie in [0, 1]");
    }
    if (gamma_eff_mhz < 0.0) {
        throw std::invalid_argument("SignalParams: gamma_eff must be nonnegative");
    }
    if (kappa_c_mhz <= 0.0) {
        throw std::invalid_argument("SignalParams: kappa_c must be positive");
    }
}

Complex background_term(const BackgroundModel& bg) {
    const Complex two_i_eps = Complex(0.0, 2.0) * bg.epsilon;
    return -two_i_eps / (Complex(1.0, 0.0) + two_i_eps);
}

TransmissionTrace apply_background(const TransmissionTrace& cavity,
                                   const BackgroundModel& bg) {
    cavity.validate();
    bg.validate();
    const Complex term = background_term(bg);
    TransmissionTrace out = cavity;
    for (auto& v : out.s21) v += term;
    out.meta.source = cavity.meta.source.empty() ? "background-applied"
                                                 : cavity.meta.source + "+background";
    return out;
}

TransmissionTrace subtract_background(const TransmissionTrace& trace,
                                      const BackgroundModel& bg, double kappa_c_mhz) {
    trace.validate();
    bg.validate();
    const Complex term = background_term(bg);
    TransmissionTrace out = trace;
    for (auto& v : out.s21) v -= term;
    if (kappa_c_mhz > 0.0) out.meta.kappa_c_mhz = kappa_c_mhz;
    out.meta.source = trace.meta.source.empty() ? "background-subtracted"
                                                : trace.meta.source + "-background";
    return out;
}

Complex signal_model(double omega_ghz, const SignalParams& params,
                     const BackgroundModel& bg) {
    const Complex bg_term =
        2.0 * bg.epsilon / (Complex(0.0, 1.0) - 2.0 * bg.epsilon);
    const double detuning_mhz = (params.omega0_ghz - omega_ghz) * kMhzPerGhz;
    const Complex denom(params.kappa_c_mhz + params.gamma_eff_mhz, detuning_mhz);
    return bg_term + params.p * params.kappa_c_mhz / denom;
}

SignalFitOutcome extract_signal_params(const TransmissionTrace& trace,
                                       const BackgroundModel& bg, double kappa_c_mhz,
                                       SignalFitMode mode) {
    trace.validate();
    bg.validate();
    const size_t n = trace.s21.size();
    if (n < 8) {
        throw std::invalid_argument("extract_signal_params: trace too short");
    }
    if (mode == SignalFitMode::FixKappa && kappa_c_mhz <= 0.0) {
        throw std::invalid_argument("extract_signal_params: kappa_c must be given");
    }

    // Warm start from the background-free magnitude.
    const Complex bg_term = background_term(bg);
    size_t peak_idx = 0;
    double peak_mag = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double m = std::abs(trace.s21[i] - bg_term);
        if (m > peak_mag) {
            peak_mag = m;
            peak_idx = i;
        }
    }
    const double omega0_init = trace.probe_freq_ghz[peak_idx];
    const double half = peak_mag / std::sqrt(2.0);
    double width_mhz = 0.0;
    {
        size_t jl = peak_idx, jr = peak_idx;
        while (jl > 0 && std::abs(trace.s21[jl] - bg_term) > half) --jl;
        while (jr + 1 < n && std::abs(trace.s21[jr] - bg_term) > half) ++jr;
        width_mhz =
            0.5 * (trace.probe_freq_ghz[jr] - trace.probe_freq_ghz[jl]) * kMhzPerGhz;
        if (width_mhz <= 0.0) width_mhz = 1.0;
    }

    // Parameter vector: (p, gamma_eff, omega0, kappa_c).
    Eigen::VectorXd x0(4);
    std::vector<bool> frozen(4, false);
    if (mode == SignalFitMode::FixKappa) {
        const double p_init =
            std::clamp(peak_mag * width_mhz / kappa_c_mhz, 0.05, 1.0);
        const double gamma_init = std::max(width_mhz - kappa_c_mhz, 0.0);
        x0 << p_init, gamma_init, omega0_init, kappa_c_mhz;
        frozen[3] = true;
    } else {
        const double kappa_init = std::max(peak_mag * width_mhz, 1e-3);
        const double gamma_init = std::max(width_mhz - kappa_init, 0.0);
        x0 << 1.0, gamma_init, omega0_init, kappa_init;
        frozen[0] = true;
    }

    ResidualFn residual = [&](const Eigen::VectorXd& x) {
        SignalParams p{x[0], x[1], x[3], x[2]};
        Eigen::VectorXd r(2 * n);
        for (size_t i = 0; i < n; ++i) {
            const Complex diff =
                signal_model(trace.probe_freq_ghz[i], p, bg) - trace.s21[i];
            r[2 * i] = diff.real();
            r[2 * i + 1] = diff.imag();
        }
        return r;
    };
    JacobianFn jacobian = [&](const Eigen::VectorXd& x) {
        Eigen::MatrixXd jm(2 * n, 4);
        for (size_t i = 0; i < n; ++i) {
            const double det_mhz =
                (x[2] - trace.probe_freq_ghz[i]) * kMhzPerGhz;
            const Complex denom(x[3] + x[1], det_mhz);
            const Complex inv = 1.0 / denom;
            const Complex d_p = x[3] * inv;
            const Complex d_gamma = -x[0] * x[3] * inv * inv;
            const Complex d_omega0 = -Complex(0.0, 1.0) * x[0] * x[3] * inv * inv * kMhzPerGhz;
            const Complex d_kappa = x[0] * inv - x[0] * x[3] * inv * inv;
            jm(2 * i, 0) = d_p.real();
            jm(2 * i + 1, 0) = d_p.imag();
            jm(2 * i, 1) = d_gamma.real();
            jm(2 * i + 1, 1) = d_gamma.imag();
            jm(2 * i, 2) = d_omega0.real();
            jm(2 * i + 1, 2) = d_omega0.imag();
            jm(2 * i, 3) = d_kappa.real();
            jm(2 * i + 1, 3) = d_kappa.imag();
        }
        return jm;
    };

    FitResult core = least_squares(residual, x0, {}, &jacobian, &frozen);
    if (!core.converged) {
        throw std::runtime_error(
            "extract_signal_params: fit did not converge, last residual rms " +
            std::to_string(core.residual_rms));
    }

    SignalFitOutcome out;
    out.params = SignalParams{core.params[0], core.params[1], core.params[3],
                              core.params[2]};
    out.p_stderr = std::sqrt(std::max(core.covariance(0, 0), 0.0));
    out.gamma_stderr_mhz = std::sqrt(std::max(core.covariance(1, 1), 0.0));
    out.omega0_stderr_ghz = std::sqrt(std::max(core.covariance(2, 2), 0.0));
    out.kappa_stderr_mhz = std::sqrt(std::max(core.covariance(3, 3), 0.0));
    out.core = std::move(core);
    return out;
}

double signal_strength(const SignalParams& params) {
    return params.p * params.kappa_c_mhz / (params.kappa_c_mhz + params.gamma_eff_mhz);
}

}  // namespace tcs
