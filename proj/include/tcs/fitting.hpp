#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

// Nonlinear least squares (damped Gauss-Newton), spectral peak tracking, and
// the anticrossing fits used to extract couplings.

namespace tcs {

struct LeastSquaresConfig {
    int max_iterations = 200;
    double step_tol = 1e-10;       // relative step
    double residual_tol = 1e-12;   // relative residual decrease
    double lambda_init = 1e-3;
};

struct FitResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  // σ²(JᵀJ)⁻¹ at the optimum
    double residual_rms = 0.0;
    int iterations = 0;
    bool converged = false;
    double jtj_condition = 0.0;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Damped Gauss-Newton minimization of ||r(x)||². Converges when the relative
/// step drops below step_tol or the relative residual decrease below
/// residual_tol; a non-converged result is returned flagged after the
/// iteration cap. Frozen parameters are held at their initial values.
FitResult least_squares(const ResidualFn& residual, const Eigen::VectorXd& init,
                        const LeastSquaresConfig& config = {},
                        const JacobianFn* jacobian = nullptr,
                        const std::vector<bool>* frozen = nullptr);

/// Central finite-difference Jacobian.
Eigen::MatrixXd numerical_jacobian(const ResidualFn& residual,
                                   const Eigen::VectorXd& x,
                                   double rel_step = 1e-6);

/// |s21| sampled on a (bias, probe frequency) grid; magnitude(i, j) belongs to
/// bias_a[i], probe_ghz[j].
struct SpectrumMap {
    std::vector<double> bias_a;
    std::vector<double> probe_ghz;
    Eigen::MatrixXd magnitude;
};

/// Peak-tracked branch positions; NaN marks a missing point.
struct AnticrossingData {
    std::vector<double> bias_a;
    std::vector<double> upper_ghz;
    std::vector<double> lower_ghz;
};

/// Tracks the two dominant peaks per bias column (sub-bin refined by parabolic
/// interpolation, separated by at least 3 bins, branch-assigned by frequency
/// continuity). Errors if fewer than 2 maxima are found in more than 40% of
/// the columns.
AnticrossingData track_peaks(const SpectrumMap& map);

struct SingleFitParams {
    double a_ghz_per_a = 0.0;  // ω_e(I)/2π = a·I + b
    double b_ghz = 0.0;
    double f_r_ghz = 0.0;
    double g_mhz = 0.0;
};

struct EnsembleFitParams {
    double a_ghz_per_a = 0.0;
    double b_ghz = 0.0;
    double f_r_ghz = 0.0;
    double g_mhz = 0.0;
    double i_shift_a = 0.0;
    double f_shift_ghz = 0.0;
};

/// f±(I) = (f_r + aI + b)/2 ± sqrt(4(g/2π)² + (f_r − aI − b)²)/2.
double single_branch_freq(bool upper, const SingleFitParams& p, double current_a);

/// Ensemble branches: upper as the single-qubit form, lower with the two extra
/// shift parameters (I_shift, f_shift).
double ensemble_branch_freq(bool upper, const EnsembleFitParams& p, double current_a);

struct SingleFitOutcome {
    SingleFitParams params;
    FitResult core;
};

struct EnsembleFitOutcome {
    EnsembleFitParams params;
    FitResult core;
    bool span_warning = false;  // data spans less than 2× the minimum gap
};

/// Deterministic warm start: linear trend of the qubit-like points, plateau of
/// the cavity-like points, and half the minimum observed gap.
SingleFitParams initial_guess(const AnticrossingData& data);

/// Joint fit of both branches. Only data within ±window_gaps minimum-gaps of
/// the crossing (in bias current) enters the fit.
SingleFitOutcome fit_single(const AnticrossingData& data,
                            std::optional<SingleFitParams> init = std::nullopt,
                            double window_gaps = 3.0);

EnsembleFitOutcome fit_ensemble(const AnticrossingData& data,
                                std::optional<EnsembleFitParams> init = std::nullopt,
                                double window_gaps = 3.0,
                                bool freeze_shifts = false);

/// Half the branch distance at the fitted crossing current
/// I* = (f_r − b)/a − I_shift/2, in MHz.
double effective_coupling_mhz(const EnsembleFitParams& p);

}  // namespace tcs
